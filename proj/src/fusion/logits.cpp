#include <algorithm>
#include <cmath>
#include <map>

#include "setswav/core/errors.hpp"
#include "setswav/fusion/fusion.hpp"

namespace setswav::fusion {

std::vector<double> log_softmax_vec(const std::vector<double>& logits) {
    if (logits.empty()) throw DimensionMismatch("empty logit vector");
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double sum = 0.0;
    for (double v : logits) sum += std::exp(v - mx);
    const double lse = mx + std::log(sum);
    std::vector<double> out(logits.size());
    for (size_t k = 0; k < logits.size(); ++k) out[k] = logits[k] - lse;
    return out;
}

int class_rank(const std::vector<double>& logits, int label) {
    if (label < 0 || label >= static_cast<int>(logits.size()))
        throw LabelOutOfRange("label " + std::to_string(label) + " for " +
                              std::to_string(logits.size()) + " classes");
    const double ref = logits[static_cast<size_t>(label)];
    int rank = 0;
    for (size_t k = 0; k < logits.size(); ++k) {
        if (logits[k] > ref) ++rank;
        else if (logits[k] == ref && static_cast<int>(k) < label) ++rank;
    }
    return rank;
}

int action_rank(const LogitRecord& rec, int verb, int noun) {
    const std::vector<double> lv = log_softmax_vec(rec.verb_logits);
    const std::vector<double> ln = log_softmax_vec(rec.noun_logits);
    if (verb < 0 || verb >= static_cast<int>(lv.size()) || noun < 0 ||
        noun >= static_cast<int>(ln.size()))
        throw LabelOutOfRange("action (" + std::to_string(verb) + "," + std::to_string(noun) + ")");
    const int nn = static_cast<int>(ln.size());
    const double ref = lv[static_cast<size_t>(verb)] + ln[static_cast<size_t>(noun)];
    const long flat_ref = static_cast<long>(verb) * nn + noun;
    int rank = 0;
    for (size_t v = 0; v < lv.size(); ++v) {
        for (size_t n = 0; n < ln.size(); ++n) {
            const double s = lv[v] + ln[n];
            const long flat = static_cast<long>(v) * nn + static_cast<long>(n);
            if (s > ref || (s == ref && flat < flat_ref)) ++rank;
        }
    }
    return rank;
}

std::vector<std::pair<const LogitRecord*, const LogitRecord*>> align_records(
    const std::vector<LogitRecord>& oic, const std::vector<LogitRecord>& base) {
    std::map<std::string, const LogitRecord*> by_id;
    for (const LogitRecord& r : base)
        if (!by_id.emplace(r.video_id, &r).second)
            throw VideoMismatch("duplicate base record for " + r.video_id);
    std::vector<std::pair<const LogitRecord*, const LogitRecord*>> out;
    out.reserve(oic.size());
    std::map<std::string, int> seen;
    for (const LogitRecord& r : oic) {
        if (++seen[r.video_id] > 1) throw VideoMismatch("duplicate record for " + r.video_id);
        auto it = by_id.find(r.video_id);
        if (it == by_id.end()) throw UnknownVideo("no base record for " + r.video_id);
        out.emplace_back(&r, it->second);
    }
    return out;
}

}  // namespace setswav::fusion
