#include "setswav/synth/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>

#include "json.hpp"
#include "setswav/core/errors.hpp"

namespace setswav::synth {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kWavelength = 12.0;   // texture wavelength in scene pixels at patch_size 64
constexpr double kBlobRadius = 0.4;    // main blob radius as a fraction of patch_size
constexpr double kBaseRot = 1.8;       // radians swept over a clip
constexpr double kBaseScale = 0.40;    // log-scale swept over a clip
constexpr double kAmpJitterLo = 0.85, kAmpJitterHi = 1.15;
constexpr double kCubicWiggle = 1.25;  // worst-case path overshoot from the cubic terms
constexpr double kBackground = 0.18;

double max_main_radius(const SynthSpec& spec) {
    return spec.patch_size * 0.5 * std::exp(kBaseScale * kAmpJitterHi * kCubicWiggle);
}

// Palette pairs (A, 1-A) share the same mean color, so spatially averaged
// color carries no cluster information; only spatial structure does.
void palette_colors(int palette, float a[3], float b[3]) {
    static const double hues[4] = {0.00, 0.15, 0.35, 0.60};
    float r, g, bl;
    hsv_to_rgb(static_cast<float>(hues[palette & 3]), 0.85f, 0.95f, r, g, bl);
    a[0] = r;
    a[1] = g;
    a[2] = bl;
    b[0] = 1.0f - r;
    b[1] = 1.0f - g;
    b[2] = 1.0f - bl;
}

double smoothstep(double edge0, double edge1, double x) {
    double t = (x - edge0) / (edge1 - edge0);
    t = std::clamp(t, 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

// Texture color at offset (u, v) from the blob center, already rotated into
// the blob frame. Wavelength is measured in scene pixels, so the crop resize
// makes the blob's scale visible in the crop.
void pattern_color(int cluster, double wavelength, double u, double v, float out[3]) {
    const int palette = cluster & 3;
    const int family = (cluster >> 2) & 1;
    float ca[3], cb[3];
    palette_colors(palette, ca, cb);
    const double phase = 0.37 * cluster;
    double f;
    if (family == 0) {
        f = u / wavelength + phase;  // parallel stripes
    } else {
        const double r = std::hypot(u, v);
        f = r / wavelength + std::atan2(v, u) / (2.0 * kPi) + phase;  // spiral
    }
    const double w = 0.5 + 0.5 * std::tanh(3.0 * std::sin(2.0 * kPi * f));
    for (int c = 0; c < 3; ++c)
        out[c] = static_cast<float>(ca[c] * w + cb[c] * (1.0 - w));
}

struct Blob {
    int cluster = 0;
    double cx = 0.0, cy = 0.0;
    double radius = 0.0;  // disc radius in scene pixels
    double angle = 0.0;
};

void draw_blob(Image& img, const Blob& blob, double wavelength) {
    const int x_lo = std::max(0, static_cast<int>(std::floor(blob.cx - blob.radius - 2)));
    const int x_hi = std::min(img.w - 1, static_cast<int>(std::ceil(blob.cx + blob.radius + 2)));
    const int y_lo = std::max(0, static_cast<int>(std::floor(blob.cy - blob.radius - 2)));
    const int y_hi = std::min(img.h - 1, static_cast<int>(std::ceil(blob.cy + blob.radius + 2)));
    const double cs = std::cos(-blob.angle), sn = std::sin(-blob.angle);
    float col[3];
    for (int y = y_lo; y <= y_hi; ++y) {
        for (int x = x_lo; x <= x_hi; ++x) {
            const double dx = x + 0.5 - blob.cx;
            const double dy = y + 0.5 - blob.cy;
            const double dist = std::hypot(dx, dy);
            if (dist > blob.radius) continue;
            const double m = smoothstep(blob.radius, blob.radius - 2.5, dist);
            if (m <= 0.0) continue;
            const double u = dx * cs - dy * sn;
            const double v = dx * sn + dy * cs;
            pattern_color(blob.cluster, wavelength, u, v, col);
            for (int c = 0; c < 3; ++c) {
                float& px = img.at(c, y, x);
                px = static_cast<float>(px * (1.0 - m) + col[c] * m);
            }
        }
    }
}

// Path value at t in [0, 1]: linear main term plus bounded cubic wiggle,
// zero at t = 0, sign-preserving on (0, 1].
double cubic_path(double amplitude, double w2, double w3, double t) {
    return amplitude * t * (1.0 + w2 * t + w3 * t * t);
}

struct FamilySigns {
    int rot = 0;    // -1, 0, +1
    int scale = 0;  // -1, 0, +1
};

// Verb identity is the (rotation, scale) direction pair; each direction is
// readable from a single crop because the texture is fixed in scene pixels.
FamilySigns family_signs(int verb) {
    static const FamilySigns table[8] = {
        {0, 0},   // still
        {1, 0},   // rotate one way
        {-1, 0},  // rotate the other way
        {0, 1},   // grow
        {0, -1},  // shrink
        {1, 1},   // twist + grow
        {1, -1},  // twist + shrink
        {-1, 1},  // counter-twist + grow
    };
    return table[verb & 7];
}

struct PathState {
    double angle = 0.0;
    double log_scale = 0.0;
    double dx = 0.0, dy = 0.0;
};

struct Distractor {
    int cluster = 0;
    double cx = 0.0, cy = 0.0;
    double radius = 0.0;
    double conf_base = 0.0;
};

struct VideoDetail {
    std::vector<Distractor> distractors;
    double w2 = 0.0, w3 = 0.0;  // shared cubic wiggle for rotation and scale
};

PathState transform_at(const SynthSpec& spec, const VideoPlan& plan, const VideoDetail& det,
                       int frame_index) {
    const int f = spec.frames_per_video;
    const double t = (f <= 1) ? 0.0 : static_cast<double>(frame_index) / (f - 1);
    PathState st;
    st.angle = cubic_path(plan.amp_rot, det.w2, det.w3, t);
    st.log_scale = cubic_path(plan.amp_scale, det.w2, det.w3, t);
    st.dx = plan.drift_x * t;
    st.dy = plan.drift_y * t;
    return st;
}

// Re-derives the deterministic per-video detail (distractors, path wiggle)
// from the seed, so rendering needs only the plan.
VideoDetail video_detail(const SynthSpec& spec, const VideoPlan& plan, int video_index) {
    Rng rng(derive_seed(spec.seed, "detail", static_cast<uint64_t>(video_index), 0, 0));
    VideoDetail det;
    det.w2 = rng.uniform(-0.15, 0.15);
    det.w3 = rng.uniform(-0.10, 0.10);
    const double frame = spec.frame_size();
    const double main_reach = max_main_radius(spec) + 8.0;
    for (int slot = 0; slot + 1 < spec.regions_per_frame; ++slot) {
        const bool present = rng.uniform() < spec.distractor_prob;
        // Draws happen regardless of presence so layouts stay stable when
        // distractor_prob changes.
        Distractor d;
        d.cluster = (spec.n_clusters <= 1)
                        ? 0
                        : (plan.cluster + 1 + rng.uniform_int(0, spec.n_clusters - 2)) % spec.n_clusters;
        d.radius = spec.patch_size * 0.3 * rng.uniform(0.8, 1.2);
        d.conf_base = 0.30 + 0.20 * rng.uniform();
        bool placed = false;
        for (int attempt = 0; attempt < 30 && !placed; ++attempt) {
            d.cx = rng.uniform(d.radius + 2.0, frame - d.radius - 2.0);
            d.cy = rng.uniform(d.radius + 2.0, frame - d.radius - 2.0);
            const double dist = std::hypot(d.cx - plan.cx, d.cy - plan.cy);
            placed = dist >= main_reach + d.radius;
        }
        if (present && placed) det.distractors.push_back(d);
    }
    return det;
}

std::string video_name(int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "vid_%04d", index);
    return buf;
}

// Main blob bounding box at a frame: the box tracks center and scale exactly
// (the "detector" is perfect on the tracked object).
Box main_box(const SynthSpec& spec, const VideoPlan& plan, const VideoDetail& det, int frame_index) {
    const PathState st = transform_at(spec, plan, det, frame_index);
    const double half = spec.patch_size * 0.5 * std::exp(st.log_scale);
    const double cx = plan.cx + st.dx, cy = plan.cy + st.dy;
    const double fs = spec.frame_size();
    Box b;
    b.x1 = std::clamp(cx - half, 0.0, fs - 2.0);
    b.y1 = std::clamp(cy - half, 0.0, fs - 2.0);
    b.x2 = std::clamp(cx + half, b.x1 + 1.0, fs);
    b.y2 = std::clamp(cy + half, b.y1 + 1.0, fs);
    return b;
}

// Tail classes: the smallest classes whose cumulative training count stays
// within 20% of training instances.
std::vector<int> tail_from_counts(const std::vector<int>& counts) {
    int total = std::accumulate(counts.begin(), counts.end(), 0);
    std::vector<std::pair<int, int>> order;
    for (int i = 0; i < static_cast<int>(counts.size()); ++i)
        if (counts[i] > 0) order.emplace_back(counts[i], i);
    std::stable_sort(order.begin(), order.end());
    std::vector<int> tail;
    double cum = 0.0;
    for (const auto& [cnt, cls] : order) {
        if (cum + cnt > 0.2 * total) break;
        cum += cnt;
        tail.push_back(cls);
    }
    std::sort(tail.begin(), tail.end());
    return tail;
}

}  // namespace

void SynthSpec::validate() const {
    if (n_videos < 1) throw SpecInvalid("n_videos must be >= 1");
    if (n_clusters < 1 || n_clusters > 8) throw SpecInvalid("n_clusters must be in [1, 8]");
    if (n_verbs < 1 || n_verbs > 8) throw SpecInvalid("n_verbs must be in [1, 8]");
    if (n_nouns < 1 || n_nouns > n_clusters)
        throw SpecInvalid("n_nouns must be in [1, n_clusters] so every noun maps to a cluster");
    if (imbalance_ratio < 1.0) throw SpecInvalid("imbalance_ratio must be >= 1");
    if (n_videos < std::max(n_verbs, n_nouns)) throw SpecInvalid("need at least one video per class");
    if (frames_per_video < 1) throw SpecInvalid("frames_per_video must be >= 1");
    if (regions_per_frame < 1) throw SpecInvalid("regions_per_frame must be >= 1");
    if (patch_size < 8 || patch_size % 2 != 0) throw SpecInvalid("patch_size must be even and >= 8");
    if (noise_sigma < 0.0) throw SpecInvalid("noise_sigma must be >= 0");
    if (n_participants < 1) throw SpecInvalid("n_participants must be >= 1");
    if (n_unseen_participants < 0 || n_unseen_participants >= n_participants)
        throw SpecInvalid("n_unseen_participants must be in [0, n_participants)");
    if (val_fraction < 0.0 || val_fraction >= 1.0) throw SpecInvalid("val_fraction must be in [0, 1)");
    if (distractor_prob < 0.0 || distractor_prob > 1.0) throw SpecInvalid("distractor_prob must be in [0, 1]");
    const int margin = static_cast<int>(std::ceil(max_main_radius(*this))) + 2;
    if (frame_size() - margin < margin)
        throw SpecInvalid("frame_scale too small: grown blobs would leave the frame");
}

std::string spec_to_json(const SynthSpec& spec) {
    nlohmann::json j;
    j["n_videos"] = spec.n_videos;
    j["n_clusters"] = spec.n_clusters;
    j["n_verbs"] = spec.n_verbs;
    j["n_nouns"] = spec.n_nouns;
    j["imbalance_ratio"] = spec.imbalance_ratio;
    j["frames_per_video"] = spec.frames_per_video;
    j["regions_per_frame"] = spec.regions_per_frame;
    j["patch_size"] = spec.patch_size;
    j["noise_sigma"] = spec.noise_sigma;
    j["seed"] = spec.seed;
    j["n_participants"] = spec.n_participants;
    j["n_unseen_participants"] = spec.n_unseen_participants;
    j["val_fraction"] = spec.val_fraction;
    j["distractor_prob"] = spec.distractor_prob;
    j["frame_scale"] = spec.frame_scale;
    return j.dump();
}

SynthSpec spec_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw SpecInvalid(std::string("bad spec json: ") + e.what());
    }
    SynthSpec s;
    try {
        s.n_videos = j.value("n_videos", s.n_videos);
        s.n_clusters = j.value("n_clusters", s.n_clusters);
        s.n_verbs = j.value("n_verbs", s.n_verbs);
        s.n_nouns = j.value("n_nouns", s.n_nouns);
        s.imbalance_ratio = j.value("imbalance_ratio", s.imbalance_ratio);
        s.frames_per_video = j.value("frames_per_video", s.frames_per_video);
        s.regions_per_frame = j.value("regions_per_frame", s.regions_per_frame);
        s.patch_size = j.value("patch_size", s.patch_size);
        s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
        s.seed = j.value("seed", s.seed);
        s.n_participants = j.value("n_participants", s.n_participants);
        s.n_unseen_participants = j.value("n_unseen_participants", s.n_unseen_participants);
        s.val_fraction = j.value("val_fraction", s.val_fraction);
        s.distractor_prob = j.value("distractor_prob", s.distractor_prob);
        s.frame_scale = j.value("frame_scale", s.frame_scale);
    } catch (const nlohmann::json::exception& e) {
        throw SpecInvalid(std::string("bad spec field: ") + e.what());
    }
    s.validate();
    return s;
}

std::vector<int> class_count_profile(int total, int n_classes, double rho) {
    if (n_classes < 1 || total < n_classes) throw SpecInvalid("class profile needs total >= n_classes >= 1");
    if (rho < 1.0) throw SpecInvalid("class profile needs rho >= 1");
    std::vector<double> p(n_classes);
    double sum = 0.0;
    for (int i = 0; i < n_classes; ++i) {
        p[i] = (n_classes == 1) ? 1.0 : std::pow(rho, -static_cast<double>(i) / (n_classes - 1));
        sum += p[i];
    }
    std::vector<int> counts(n_classes);
    std::vector<std::pair<double, int>> frac(n_classes);
    int assigned = 0;
    for (int i = 0; i < n_classes; ++i) {
        const double quota = total * p[i] / sum;
        counts[i] = static_cast<int>(std::floor(quota));
        assigned += counts[i];
        frac[i] = {quota - counts[i], i};
    }
    std::stable_sort(frac.begin(), frac.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (int r = 0; r < total - assigned; ++r) counts[frac[r % n_classes].second] += 1;
    // Every class must appear at least once; take from the largest.
    for (int i = 0; i < n_classes; ++i) {
        while (counts[i] == 0) {
            int big = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
            counts[big] -= 1;
            counts[i] += 1;
        }
    }
    return counts;
}

Image render_template(const SynthSpec& spec, int cluster) {
    spec.validate();
    if (cluster < 0 || cluster >= spec.n_clusters) throw SpecInvalid("cluster id out of range");
    const int p = spec.patch_size;
    const double wavelength = kWavelength * p / 64.0;
    Image img(p, p);
    std::fill(img.data.begin(), img.data.end(), static_cast<float>(kBackground));
    Blob blob;
    blob.cluster = cluster;
    blob.cx = p * 0.5;
    blob.cy = p * 0.5;
    blob.radius = p * kBlobRadius;
    blob.angle = 0.0;
    draw_blob(img, blob, wavelength);
    return img;
}

Image render_frame(const SynthSpec& spec, const VideoPlan& plan, int frame_index) {
    if (frame_index < 0 || frame_index >= spec.frames_per_video)
        throw DataError("frame index out of range for synthetic video " + plan.video_id);
    const int fs = spec.frame_size();
    const double wavelength = kWavelength * spec.patch_size / 64.0;
    Image img(fs, fs);
    std::fill(img.data.begin(), img.data.end(), static_cast<float>(kBackground));

    // The index is recoverable from the id; plans are named vid_%04d in order.
    const int video_index = std::stoi(plan.video_id.substr(4));
    const VideoDetail det = video_detail(spec, plan, video_index);
    for (const Distractor& d : det.distractors) {
        Blob blob;
        blob.cluster = d.cluster;
        blob.cx = d.cx;
        blob.cy = d.cy;
        blob.radius = d.radius;
        draw_blob(img, blob, wavelength);
    }
    const PathState st = transform_at(spec, plan, det, frame_index);
    Blob main;
    main.cluster = plan.cluster;
    main.cx = plan.cx + st.dx;
    main.cy = plan.cy + st.dy;
    main.radius = spec.patch_size * kBlobRadius * std::exp(st.log_scale);
    main.angle = st.angle;
    draw_blob(img, main, wavelength);

    if (spec.noise_sigma > 0.0) {
        Rng noise(derive_seed(spec.seed, "noise", static_cast<uint64_t>(video_index),
                              static_cast<uint64_t>(frame_index), 0));
        for (float& px : img.data)
            px = std::clamp(px + static_cast<float>(noise.normal() * spec.noise_sigma), 0.0f, 1.0f);
    }
    return img;
}

GeneratedDataset generate(const SynthSpec& spec) {
    spec.validate();
    GeneratedDataset ds;
    ds.spec = spec;

    // Label allocation: independent long-tail profiles for nouns and verbs,
    // shuffled onto videos.
    Rng rng_labels(derive_seed(spec.seed, "labels"));
    std::vector<int> noun_counts = class_count_profile(spec.n_videos, spec.n_nouns, spec.imbalance_ratio);
    std::vector<int> verb_counts = class_count_profile(spec.n_videos, spec.n_verbs, spec.imbalance_ratio);
    std::vector<int> nouns, verbs;
    for (int c = 0; c < spec.n_nouns; ++c) nouns.insert(nouns.end(), noun_counts[c], c);
    for (int c = 0; c < spec.n_verbs; ++c) verbs.insert(verbs.end(), verb_counts[c], c);
    rng_labels.shuffle(nouns);
    rng_labels.shuffle(verbs);

    ds.plans.resize(spec.n_videos);
    for (int v = 0; v < spec.n_videos; ++v) {
        VideoPlan& plan = ds.plans[v];
        plan.video_id = video_name(v);
        plan.noun = nouns[v];
        plan.verb = verbs[v];
        // Cluster is the latent identity behind the noun label.
        std::vector<int> candidates;
        for (int c = plan.noun; c < spec.n_clusters; c += spec.n_nouns) candidates.push_back(c);
        plan.cluster =
            candidates[candidates.size() == 1
                           ? 0
                           : static_cast<size_t>(
                                 rng_labels.uniform_int(0, static_cast<int>(candidates.size()) - 1))];
    }

    // Geometry and motion, one derived stream per video.
    const int margin = static_cast<int>(std::ceil(max_main_radius(spec))) + 2;
    for (int v = 0; v < spec.n_videos; ++v) {
        VideoPlan& plan = ds.plans[v];
        Rng rng(derive_seed(spec.seed, "plan", static_cast<uint64_t>(v), 0, 0));
        plan.cx = rng.uniform_int(margin, spec.frame_size() - margin);
        plan.cy = rng.uniform_int(margin, spec.frame_size() - margin);
        const FamilySigns signs = family_signs(plan.verb);
        plan.amp_rot = signs.rot * kBaseRot * rng.uniform(kAmpJitterLo, kAmpJitterHi);
        plan.amp_scale = signs.scale * kBaseScale * rng.uniform(kAmpJitterLo, kAmpJitterHi);
        if (plan.verb == 0) {
            plan.drift_x = plan.drift_y = 0.0;  // the still class is exactly static
        } else {
            plan.drift_x = rng.uniform(-6.0, 6.0) * spec.patch_size / 64.0;
            plan.drift_y = rng.uniform(-6.0, 6.0) * spec.patch_size / 64.0;
        }
    }

    // Splits: stratified by noun with members spread across verbs, then
    // participants with a val-only (unseen) pool.
    for (int c = 0; c < spec.n_nouns; ++c) {
        std::vector<int> members;
        for (int v = 0; v < spec.n_videos; ++v)
            if (ds.plans[v].noun == c) members.push_back(v);
        std::stable_sort(members.begin(), members.end(),
                         [&](int a, int b) { return ds.plans[a].verb < ds.plans[b].verb; });
        const int n_c = static_cast<int>(members.size());
        int n_val = static_cast<int>(std::lround(spec.val_fraction * n_c));
        if (spec.val_fraction > 0.0 && n_c >= 2 && n_val == 0) n_val = 1;
        std::vector<bool> is_val(n_c, false);
        for (int j = 0; j < n_val; ++j)
            is_val[static_cast<int>((j + 0.5) * n_c / n_val)] = true;
        for (int i = 0; i < n_c; ++i) ds.plans[members[i]].split = is_val[i] ? "val" : "train";
    }
    Rng rng_part(derive_seed(spec.seed, "participants"));
    const int n_seen = spec.n_participants - spec.n_unseen_participants;
    bool forced_unseen = spec.n_unseen_participants == 0;
    for (int v = 0; v < spec.n_videos; ++v) {
        VideoPlan& plan = ds.plans[v];
        if (plan.split == "train") {
            plan.participant = rng_part.uniform_int(0, n_seen - 1);
        } else {
            const bool unseen = !forced_unseen || rng_part.uniform() < 0.5;
            if (unseen && spec.n_unseen_participants > 0) {
                plan.participant = n_seen + rng_part.uniform_int(0, spec.n_unseen_participants - 1);
                forced_unseen = true;
            } else {
                plan.participant = rng_part.uniform_int(0, n_seen - 1);
            }
        }
    }

    // Manifest rows: per frame the tracked blob and its distractors, plus
    // sub-threshold and hand rows that downstream filtering must drop.
    for (int v = 0; v < spec.n_videos; ++v) {
        const VideoPlan& plan = ds.plans[v];
        const VideoDetail det = video_detail(spec, plan, v);
        Rng rng(derive_seed(spec.seed, "rows", static_cast<uint64_t>(v), 0, 0));
        const int junk_frame_a = rng.uniform_int(0, spec.frames_per_video - 1);
        const int junk_frame_b = rng.uniform_int(0, spec.frames_per_video - 1);
        const int hand_frame = rng.uniform_int(0, spec.frames_per_video - 1);
        for (int f = 0; f < spec.frames_per_video; ++f) {
            DetectionRecord rec;
            rec.video_id = plan.video_id;
            rec.frame_index = f;
            const Box mb = main_box(spec, plan, det, f);
            rec.x1 = mb.x1;
            rec.y1 = mb.y1;
            rec.x2 = mb.x2;
            rec.y2 = mb.y2;
            rec.confidence = 0.80 + 0.15 * rng.uniform();
            rec.kind = DetKind::object;
            ds.manifest.push_back(rec);
            for (const Distractor& d : det.distractors) {
                DetectionRecord dr;
                dr.video_id = plan.video_id;
                dr.frame_index = f;
                dr.x1 = d.cx - d.radius;
                dr.y1 = d.cy - d.radius;
                dr.x2 = d.cx + d.radius;
                dr.y2 = d.cy + d.radius;
                dr.confidence = std::clamp(d.conf_base + 0.02 * rng.uniform(), 0.0, 0.55);
                dr.kind = DetKind::object;
                ds.manifest.push_back(dr);
            }
            auto junk_row = [&](DetKind kind, double conf) {
                DetectionRecord jr;
                jr.video_id = plan.video_id;
                jr.frame_index = f;
                const double fsz = spec.frame_size();
                jr.x1 = rng.uniform(0.0, fsz - 12.0);
                jr.y1 = rng.uniform(0.0, fsz - 12.0);
                jr.x2 = jr.x1 + rng.uniform(8.0, 11.0);
                jr.y2 = jr.y1 + rng.uniform(8.0, 11.0);
                jr.confidence = conf;
                jr.kind = kind;
                ds.manifest.push_back(jr);
            };
            if (f == junk_frame_a) junk_row(DetKind::object, 0.001 + 0.008 * rng.uniform());
            if (f == junk_frame_b) junk_row(DetKind::object, 0.001 + 0.008 * rng.uniform());
            if (f == hand_frame) junk_row(DetKind::hand, 0.85 + 0.10 * rng.uniform());
        }
    }

    for (const VideoPlan& plan : ds.plans)
        ds.labels.push_back({plan.video_id, plan.verb, plan.noun, plan.participant, plan.split});

    // Header: label spaces plus tail / unseen declarations from the training
    // split.
    std::vector<int> train_verbs(spec.n_verbs, 0), train_nouns(spec.n_nouns, 0);
    std::map<std::pair<int, int>, int> train_actions;
    for (const VideoPlan& plan : ds.plans) {
        if (plan.split != "train") continue;
        train_verbs[plan.verb] += 1;
        train_nouns[plan.noun] += 1;
        train_actions[{plan.verb, plan.noun}] += 1;
    }
    ds.header.n_verbs = spec.n_verbs;
    ds.header.n_nouns = spec.n_nouns;
    ds.header.tail_verbs = tail_from_counts(train_verbs);
    ds.header.tail_nouns = tail_from_counts(train_nouns);
    {
        std::vector<std::pair<int, std::pair<int, int>>> order;
        int total = 0;
        for (const auto& [pair, cnt] : train_actions) {
            order.push_back({cnt, pair});
            total += cnt;
        }
        std::stable_sort(order.begin(), order.end());
        double cum = 0.0;
        for (const auto& [cnt, pair] : order) {
            if (cum + cnt > 0.2 * total) break;
            cum += cnt;
            ds.header.tail_actions.push_back(pair);
        }
        std::sort(ds.header.tail_actions.begin(), ds.header.tail_actions.end());
    }
    for (int u = n_seen; u < spec.n_participants; ++u) ds.header.unseen_participants.push_back(u);

    nlohmann::json echo;
    echo["generator"] = "synthetic-blob-videos";
    echo["frame_size"] = spec.frame_size();
    // The full spec rides along so frames can be re-rendered in memory when
    // a dataset directory was written without a frames/ tree.
    echo["spec"] = nlohmann::json::parse(spec_to_json(spec));
    ds.header.extra_json = echo.dump();
    return ds;
}

void write_dataset(const GeneratedDataset& ds, const std::string& out_dir, bool write_frames) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    write_manifest(out_dir + "/manifest.txt", ds.manifest);
    data::write_labels(out_dir + "/labels.txt", ds.labels);
    data::write_header(out_dir + "/header.json", ds.header);
    if (!write_frames) return;
    for (const VideoPlan& plan : ds.plans) {
        const fs::path dir = fs::path(out_dir) / "frames" / plan.video_id;
        fs::create_directories(dir);
        for (int f = 0; f < ds.spec.frames_per_video; ++f) {
            char name[16];
            std::snprintf(name, sizeof(name), "%04d.ppm", f);
            write_ppm((dir / name).string(), render_frame(ds.spec, plan, f));
        }
    }
}

SynthFrameProvider::SynthFrameProvider(GeneratedDataset ds) : ds_(std::move(ds)) {
    for (const VideoPlan& plan : ds_.plans) by_id_[plan.video_id] = &plan;
}

Image SynthFrameProvider::frame(const std::string& video_id, int frame_index) const {
    auto it = by_id_.find(video_id);
    if (it == by_id_.end()) throw UnknownVideo("no synthetic video named " + video_id);
    // Quantized to 8 bits so in-memory frames equal the PPM files exactly.
    Image img = render_frame(ds_.spec, *it->second, frame_index);
    quantize_u8(img);
    return img;
}

int SynthFrameProvider::frame_count(const std::string&) const { return ds_.spec.frames_per_video; }

std::vector<SynthLogit> synthesize_logits(const std::vector<data::VideoLabel>& labels,
                                          const data::DatasetHeader& header,
                                          const LogitQuality& quality, uint64_t seed) {
    std::vector<SynthLogit> out;
    out.reserve(labels.size());
    for (size_t i = 0; i < labels.size(); ++i) {
        Rng rng(derive_seed(seed, "logits", static_cast<uint64_t>(i), 0, 0));
        SynthLogit rec;
        rec.video_id = labels[i].video_id;
        rec.verb.resize(header.n_verbs);
        rec.noun.resize(header.n_nouns);
        for (int k = 0; k < header.n_verbs; ++k)
            rec.verb[k] = rng.normal() + (k == labels[i].verb ? quality.verb_margin : 0.0);
        for (int k = 0; k < header.n_nouns; ++k)
            rec.noun[k] = rng.normal() + (k == labels[i].noun ? quality.noun_margin : 0.0);
        out.push_back(std::move(rec));
    }
    return out;
}

}  // namespace setswav::synth
