#pragma once

#include <string>
#include <utility>
#include <vector>

#include "setswav/core/rng.hpp"

namespace setswav::ssl {

// Small row-major double matrix; the set-loss math is done in 64-bit
// regardless of the network's float32 parameters.
struct MatD {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    MatD() = default;
    MatD(int r, int c, double fill = 0.0)
        : rows(r), cols(c), v(static_cast<size_t>(r) * c, fill) {}

    double& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }
    double* row(int r) { return v.data() + static_cast<size_t>(r) * cols; }
    const double* row(int r) const { return v.data() + static_cast<size_t>(r) * cols; }
};

// Returns v / ||v||2; throws ZeroVector on a zero input.
std::vector<double> normalize_embedding(const std::vector<double>& v);

// Learnable K x d prototype matrix with unit-norm rows.
struct PrototypeBank {
    MatD c;  // K x d

    int k() const { return c.rows; }
    int dim() const { return c.cols; }

    // Random unit-norm rows.
    static PrototypeBank random(int k, int d, Rng& rng);

    // Re-project every row onto the unit sphere (called after each
    // optimizer step).
    void renormalize_rows();

    // Max deviation of any row norm from 1.
    double max_row_norm_error() const;
};

// scores[b,k] = z_b . c_k for unit-norm inputs; entries lie in [-1, 1].
MatD compute_scores(const MatD& embeddings, const PrototypeBank& bank);

// Batch-level soft assignments plus the hyperparameters that produced them.
struct CodeMatrix {
    MatD q;  // B x K, rows sum to 1
    double epsilon = 0.05;
    int iters = 3;
};

// Sinkhorn-Knopp equal-partition codes: alternate column (prototype) and row
// (sample) rescaling toward uniform marginals, then renormalize each row to
// sum 1. The per-matrix max is subtracted before exponentiation. No gradient
// flows through this operation.
CodeMatrix sinkhorn_codes(const MatD& scores, double epsilon, int iters);

// Pairwise swapped-prediction loss: l(q1, z2) + l(q2, z1) with
// l(q, z) = -sum_k q_k log softmax_k(z . c_k / tau).
double swav_pair_loss(const std::vector<double>& z1, const std::vector<double>& z2,
                      const std::vector<double>& q1, const std::vector<double>& q2,
                      const PrototypeBank& bank, double tau);

// Batch of S region sets with N embeddings each (B = S*N rows in order
// set-major). Provenance maps each row to (video, region index).
struct SetBatch {
    MatD z;  // B x d embeddings, unit-norm rows
    int n_sets = 0;
    int set_size = 0;
    std::vector<std::pair<std::string, int>> provenance;

    int batch() const { return n_sets * set_size; }
};

// Set loss: per set, -1/(N^2-N) * sum over ordered pairs (i, j != i) of
// q_i . log p_j, averaged over the S sets of the batch.
double swav_s_loss(const SetBatch& batch, const PrototypeBank& bank, double tau,
                   const CodeMatrix& codes);

struct SetLossGrad {
    double loss = 0.0;
    MatD d_z;  // B x d
    MatD d_c;  // K x d
};

// Loss plus exact gradients with respect to embeddings and prototypes,
// treating the codes as constants.
SetLossGrad swav_s_grad(const SetBatch& batch, const PrototypeBank& bank, double tau,
                        const CodeMatrix& codes);

// Row-wise log-softmax of scores / tau (max-subtracted).
MatD log_softmax_rows(const MatD& scores, double tau);

}  // namespace setswav::ssl
