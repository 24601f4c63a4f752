#include <algorithm>
#include <cmath>
#include <map>

#include "setswav/core/errors.hpp"
#include "setswav/core/rng.hpp"
#include "setswav/fusion/fusion.hpp"

namespace setswav::fusion {

void validate_pair(const WeightPair& w) {
    if (w.alpha_oic < 0.0 || w.alpha_base < 0.0)
        throw ConfigError("fusion weights must be non-negative");
    if (w.alpha_oic == 0.0 && w.alpha_base == 0.0)
        throw ConfigError("fusion weights must not both be zero");
}

namespace {

std::vector<double> weighted_sum(const std::vector<double>& a, const std::vector<double>& b,
                                 const WeightPair& w, const std::string& what) {
    if (a.size() != b.size()) throw DimensionMismatch("fuse: " + what + " widths differ");
    std::vector<double> out(a.size());
    for (size_t k = 0; k < a.size(); ++k) out[k] = w.alpha_oic * a[k] + w.alpha_base * b[k];
    return out;
}

}  // namespace

LogitRecord fuse(const LogitRecord& oic, const LogitRecord& base, const FusionWeights& w) {
    if (oic.video_id != base.video_id)
        throw VideoMismatch("fuse: " + oic.video_id + " vs " + base.video_id);
    validate_pair(w.verb);
    validate_pair(w.noun);
    LogitRecord out;
    out.video_id = oic.video_id;
    out.model_tag = oic.model_tag + "+" + base.model_tag;
    out.verb_logits = weighted_sum(oic.verb_logits, base.verb_logits, w.verb, "verb");
    out.noun_logits = weighted_sum(oic.noun_logits, base.noun_logits, w.noun, "noun");
    return out;
}

std::vector<LogitRecord> fuse_all(const std::vector<LogitRecord>& oic,
                                  const std::vector<LogitRecord>& base, const FusionWeights& w) {
    std::vector<LogitRecord> out;
    out.reserve(oic.size());
    for (const auto& [o, b] : align_records(oic, base)) out.push_back(fuse(*o, *b, w));
    return out;
}

std::vector<WeightPair> default_grid() {
    std::vector<WeightPair> grid;
    grid.reserve(121);
    for (int i = 0; i <= 10; ++i)
        for (int j = 0; j <= 10; ++j) grid.push_back({i / 10.0, j / 10.0});
    return grid;
}

std::vector<int> pilot_indices(const std::vector<data::VideoLabel>& labels, double pilot_fraction,
                               uint64_t seed) {
    if (!(pilot_fraction > 0.0 && pilot_fraction < 1.0))
        throw ConfigError("pilot_fraction must be in (0,1)");
    if (labels.empty()) throw EmptyPilot("no labels to split");
    const int n = static_cast<int>(labels.size());
    const int target = static_cast<int>(std::lround(pilot_fraction * n));
    if (target < 1) throw EmptyPilot("pilot fraction rounds to zero videos");

    // Stratify by (verb, noun); largest-remainder rounding hits the exact
    // target count. Map order makes the allocation deterministic.
    std::map<std::pair<int, int>, std::vector<int>> groups;
    for (int i = 0; i < n; ++i)
        groups[{labels[static_cast<size_t>(i)].verb, labels[static_cast<size_t>(i)].noun}]
            .push_back(i);

    struct Quota {
        std::pair<int, int> key;
        int base;
        double frac;
    };
    std::vector<Quota> quotas;
    int total_base = 0;
    for (const auto& [key, members] : groups) {
        const double q = pilot_fraction * static_cast<double>(members.size());
        const int base = static_cast<int>(std::floor(q));
        quotas.push_back({key, base, q - base});
        total_base += base;
    }
    int extras = target - total_base;
    std::vector<size_t> order(quotas.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (quotas[a].frac != quotas[b].frac) return quotas[a].frac > quotas[b].frac;
        return quotas[a].key < quotas[b].key;
    });
    std::map<std::pair<int, int>, int> take;
    for (const Quota& q : quotas) take[q.key] = q.base;
    for (size_t idx : order) {
        if (extras <= 0) break;
        const auto& key = quotas[idx].key;
        if (take[key] < static_cast<int>(groups[key].size())) {
            ++take[key];
            --extras;
        }
    }

    Rng rng(derive_seed(seed, "pilot"));
    std::vector<int> pilot;
    pilot.reserve(static_cast<size_t>(target));
    for (auto& [key, members] : groups) {
        rng.shuffle(members);
        for (int i = 0; i < take[key]; ++i) pilot.push_back(members[static_cast<size_t>(i)]);
    }
    std::sort(pilot.begin(), pilot.end());
    return pilot;
}

FusionWeights select_weights(const std::vector<LogitRecord>& oic,
                             const std::vector<LogitRecord>& base,
                             const std::vector<data::VideoLabel>& labels, double pilot_fraction,
                             const std::vector<WeightPair>& grid, uint64_t seed) {
    if (grid.empty()) throw ConfigError("weight grid must be non-empty");
    for (const WeightPair& w : grid)
        if (w.alpha_oic < 0.0 || w.alpha_base < 0.0)
            throw ConfigError("fusion weights must be non-negative");

    const std::vector<int> pilot = pilot_indices(labels, pilot_fraction, seed);

    std::map<std::string, const LogitRecord*> oic_by_id, base_by_id;
    for (const LogitRecord& r : oic) oic_by_id[r.video_id] = &r;
    for (const LogitRecord& r : base) base_by_id[r.video_id] = &r;

    struct PilotVideo {
        const LogitRecord* o;
        const LogitRecord* b;
        int verb, noun;
    };
    std::vector<PilotVideo> videos;
    videos.reserve(pilot.size());
    for (int idx : pilot) {
        const data::VideoLabel& lab = labels[static_cast<size_t>(idx)];
        auto io = oic_by_id.find(lab.video_id);
        auto ib = base_by_id.find(lab.video_id);
        if (io == oic_by_id.end() || ib == base_by_id.end())
            throw UnknownVideo("no logits for pilot video " + lab.video_id);
        videos.push_back({io->second, ib->second, lab.verb, lab.noun});
    }

    FusionWeights out;
    for (const std::string& space : {"verb", "noun"}) {
        const bool is_verb = space == "verb";
        int best_hits = -1;
        WeightPair best;
        for (const WeightPair& w : grid) {
            if (w.alpha_oic == 0.0 && w.alpha_base == 0.0) continue;  // invalid point, skip
            int hits = 0;
            for (const PilotVideo& v : videos) {
                const std::vector<double>& a = is_verb ? v.o->verb_logits : v.o->noun_logits;
                const std::vector<double>& b = is_verb ? v.b->verb_logits : v.b->noun_logits;
                std::vector<double> fused = weighted_sum(a, b, w, space);
                if (class_rank(fused, is_verb ? v.verb : v.noun) == 0) ++hits;
            }
            if (hits > best_hits || (hits == best_hits && w.alpha_oic < best.alpha_oic)) {
                best_hits = hits;
                best = w;
            }
        }
        if (best_hits < 0) throw ConfigError("weight grid has no valid pair");
        (is_verb ? out.verb : out.noun) = best;
    }
    return out;
}

}  // namespace setswav::fusion
