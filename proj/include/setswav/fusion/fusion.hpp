#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "setswav/data/dataset.hpp"
#include "setswav/finetune/finetune.hpp"

namespace setswav::fusion {

using finetune::LogitRecord;

// One space's fusion coefficients. Both non-negative, not both zero;
// argmax of the fused logits is invariant to positive rescaling of the pair.
struct WeightPair {
    double alpha_oic = 1.0;
    double alpha_base = 0.0;
};

// Verb and noun weights are selected independently.
struct FusionWeights {
    WeightPair verb;
    WeightPair noun;
};

void validate_pair(const WeightPair& w);

// Scoring primitives shared by weight selection and evaluation.
std::vector<double> log_softmax_vec(const std::vector<double>& logits);
// Position of `label` when classes are ordered by logit descending, ties by
// smaller class index. Correct at top-k iff rank < k.
int class_rank(const std::vector<double>& logits, int label);
// Rank of the (verb, noun) pair under summed log-softmax scores over all
// pairs; ties by flat pair index.
int action_rank(const LogitRecord& rec, int verb, int noun);

// Pairs up two record lists by video_id, in the order of `oic`. Every oic
// video must appear exactly once in `base`.
std::vector<std::pair<const LogitRecord*, const LogitRecord*>> align_records(
    const std::vector<LogitRecord>& oic, const std::vector<LogitRecord>& base);

// Per-space weighted sum of raw logits (no softmax before summing).
LogitRecord fuse(const LogitRecord& oic, const LogitRecord& base, const FusionWeights& w);
std::vector<LogitRecord> fuse_all(const std::vector<LogitRecord>& oic,
                                  const std::vector<LogitRecord>& base, const FusionWeights& w);

// alpha in {0, 0.1, ..., 1.0} squared; the all-zero pair is skipped during
// selection.
std::vector<WeightPair> default_grid();

// Seeded pilot subset of the given (training) labels: exactly
// round(fraction * n) indices, stratified by (verb, noun) class with
// largest-remainder rounding, members drawn per class by seeded shuffle.
// Returned indices are sorted ascending.
std::vector<int> pilot_indices(const std::vector<data::VideoLabel>& labels, double pilot_fraction,
                               uint64_t seed);

// Grid search per space: the pair whose fused top-1 pilot accuracy is
// highest; ties broken by smaller alpha_oic, then grid order.
FusionWeights select_weights(const std::vector<LogitRecord>& oic,
                             const std::vector<LogitRecord>& base,
                             const std::vector<data::VideoLabel>& labels, double pilot_fraction,
                             const std::vector<WeightPair>& grid, uint64_t seed);

}  // namespace setswav::fusion
