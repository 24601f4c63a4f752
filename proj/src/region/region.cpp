#include "setswav/region/region.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numeric>
#include <set>

#include "setswav/core/errors.hpp"

namespace setswav {

Image DirectoryFrameProvider::frame(const std::string& video_id, int frame_index) const {
    char name[32];
    std::snprintf(name, sizeof(name), "%04d.ppm", frame_index);
    return read_ppm(root_ + "/frames/" + video_id + "/" + name);
}

int DirectoryFrameProvider::frame_count(const std::string& video_id) const {
    namespace fs = std::filesystem;
    fs::path dir = fs::path(root_) / "frames" / video_id;
    if (!fs::exists(dir)) throw UnknownVideo(video_id);
    int n = 0;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".ppm") ++n;
    return n;
}

namespace {

float sample_frame_bilinear(const Image& f, int c, double y, double x) {
    int x0 = static_cast<int>(std::floor(x));
    int y0 = static_cast<int>(std::floor(y));
    double wx = x - x0;
    double wy = y - y0;
    int x0c = std::clamp(x0, 0, f.w - 1);
    int x1c = std::clamp(x0 + 1, 0, f.w - 1);
    int y0c = std::clamp(y0, 0, f.h - 1);
    int y1c = std::clamp(y0 + 1, 0, f.h - 1);
    double v00 = f.at(c, y0c, x0c);
    double v01 = f.at(c, y0c, x1c);
    double v10 = f.at(c, y1c, x0c);
    double v11 = f.at(c, y1c, x1c);
    double top = v00 + (v01 - v00) * wx;
    double bot = v10 + (v11 - v10) * wx;
    return static_cast<float>(top + (bot - top) * wy);
}

}  // namespace

RegionCrop crop_with_jitter(const Image& frame, const Box& box, double jitter_factor,
                            int crop_size, Rng& rng) {
    if (jitter_factor < 1.0 || jitter_factor >= 1.25)
        throw ConfigError("crop_with_jitter: jitter_factor must lie in [1, 1.25)");
    if (crop_size < 1) throw ConfigError("crop_with_jitter: crop_size must be >= 1");

    double bw = box.width();
    double bh = box.height();
    double cx = 0.5 * (box.x1 + box.x2);
    double cy = 0.5 * (box.y1 + box.y2);

    double amp = jitter_factor - 1.0;
    double dx = rng.uniform(-amp * bw * 0.5, amp * bw * 0.5);
    double dy = rng.uniform(-amp * bh * 0.5, amp * bh * 0.5);
    cx += dx;
    cy += dy;
    double hw = 0.5 * bw * jitter_factor;
    double hh = 0.5 * bh * jitter_factor;

    double x1 = std::max(0.0, cx - hw);
    double y1 = std::max(0.0, cy - hh);
    double x2 = std::min(static_cast<double>(frame.w), cx + hw);
    double y2 = std::min(static_cast<double>(frame.h), cy + hh);
    if (!(x2 > x1) || !(y2 > y1))
        throw DegenerateBox("box collapsed after clamping to frame bounds");

    RegionCrop out;
    out.frame_index = 0;
    out.source_box = box;
    out.jitter_factor = jitter_factor;
    out.crop = Image(crop_size, crop_size);
    double sx = (x2 - x1) / crop_size;
    double sy = (y2 - y1) / crop_size;
    for (int c = 0; c < 3; ++c)
        for (int j = 0; j < crop_size; ++j) {
            double fy = y1 + (j + 0.5) * sy - 0.5;
            for (int i = 0; i < crop_size; ++i) {
                double fx = x1 + (i + 0.5) * sx - 0.5;
                out.crop.at(c, j, i) = sample_frame_bilinear(frame, c, fy, fx);
            }
        }
    return out;
}

std::vector<RegionRef> sample_regions(const VideoPool& pool, int n, SampleMode mode,
                                      Rng& rng) {
    int p = static_cast<int>(pool.regions.size());
    if (p == 0) throw EmptyPool(pool.video_id);
    if (n < 1) throw ConfigError("sample_regions: n must be >= 1");

    std::vector<RegionRef> out;
    out.reserve(static_cast<size_t>(n));
    if (mode == SampleMode::train_uniform) {
        if (p >= n) {
            for (int idx : rng.sample_without_replacement(p, n))
                out.push_back(pool.regions[static_cast<size_t>(idx)]);
        } else {
            // pool smaller than the request: fall back to replacement
            for (int i = 0; i < n; ++i)
                out.push_back(pool.regions[static_cast<size_t>(rng.uniform_int(0, p - 1))]);
        }
    } else {
        std::vector<int> order(static_cast<size_t>(p));
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            const RegionRef& ra = pool.regions[static_cast<size_t>(a)];
            const RegionRef& rb = pool.regions[static_cast<size_t>(b)];
            if (ra.confidence != rb.confidence) return ra.confidence > rb.confidence;
            return std::tie(ra.box.x1, ra.box.y1, ra.box.x2, ra.box.y2) <
                   std::tie(rb.box.x1, rb.box.y1, rb.box.x2, rb.box.y2);
        });
        for (int i = 0; i < n; ++i)
            out.push_back(pool.regions[static_cast<size_t>(order[static_cast<size_t>(i % p)])]);
    }
    return out;
}

std::vector<int> sample_frames(int n_frames, int n_segments, bool train, Rng& rng) {
    if (n_frames < 1) throw DataError("sample_frames: empty video");
    if (n_segments < 1) throw ConfigError("sample_frames: n_segments must be >= 1");
    std::vector<int> out;
    out.reserve(static_cast<size_t>(n_segments));
    for (int s = 0; s < n_segments; ++s) {
        long long lo = static_cast<long long>(s) * n_frames / n_segments;
        long long hi = static_cast<long long>(s + 1) * n_frames / n_segments;
        int idx;
        if (hi <= lo) {
            idx = std::clamp(static_cast<int>(lo), 0, n_frames - 1);
        } else if (train) {
            idx = rng.uniform_int(static_cast<int>(lo), static_cast<int>(hi) - 1);
        } else {
            idx = static_cast<int>(lo + (hi - lo - 1) / 2);
        }
        out.push_back(idx);
    }
    return out;
}

VideoPool build_pool(const std::string& video_id,
                     const std::vector<DetectionRecord>& video_records,
                     int n_frames, int frames_per_video, bool train,
                     double conf_threshold, int max_per_frame, Rng& rng) {
    std::vector<int> frames = sample_frames(n_frames, frames_per_video, train, rng);
    std::set<int> chosen(frames.begin(), frames.end());

    std::vector<DetectionRecord> on_frames;
    for (const auto& r : video_records)
        if (chosen.count(r.frame_index)) on_frames.push_back(r);

    VideoPool pool;
    pool.video_id = video_id;
    for (const auto& r : select_regions(on_frames, conf_threshold, max_per_frame)) {
        RegionRef ref;
        ref.frame_index = r.frame_index;
        ref.box = Box{r.x1, r.y1, r.x2, r.y2};
        ref.confidence = r.confidence;
        pool.regions.push_back(ref);
    }
    return pool;
}

std::vector<RegionCrop> materialize(const std::string& video_id,
                                    const std::vector<RegionRef>& refs,
                                    const FrameProvider& frames, double jitter_lo,
                                    double jitter_hi, int crop_size, Rng& rng) {
    std::map<int, Image> cache;
    std::vector<RegionCrop> out;
    out.reserve(refs.size());
    for (const auto& ref : refs) {
        auto it = cache.find(ref.frame_index);
        if (it == cache.end())
            it = cache.emplace(ref.frame_index, frames.frame(video_id, ref.frame_index)).first;
        double jf = jitter_hi > jitter_lo ? rng.uniform(jitter_lo, jitter_hi) : jitter_lo;
        RegionCrop crop = crop_with_jitter(it->second, ref.box, jf, crop_size, rng);
        crop.video_id = video_id;
        crop.frame_index = ref.frame_index;
        crop.confidence = ref.confidence;
        out.push_back(std::move(crop));
    }
    return out;
}

RegionDataset make_dataset(const std::vector<DetectionRecord>& records,
                           const FrameProvider& frames) {
    RegionDataset ds;
    ds.frames = &frames;
    for (const DetectionRecord& r : records) {
        auto [it, fresh] = ds.records_by_video.try_emplace(r.video_id);
        if (fresh) ds.video_ids.push_back(r.video_id);
        it->second.push_back(r);
    }
    return ds;
}

}  // namespace setswav
