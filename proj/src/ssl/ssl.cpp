#include "setswav/ssl/ssl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "setswav/core/errors.hpp"

namespace setswav::ssl {

namespace {

double dot(const double* a, const double* b, int n) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

void check_finite(const MatD& m, const char* what) {
    for (double x : m.v) {
        if (!std::isfinite(x)) throw NumericalOverflow(std::string(what) + " produced a non-finite value");
    }
}

}  // namespace

std::vector<double> normalize_embedding(const std::vector<double>& v) {
    double ss = 0.0;
    for (double x : v) ss += x * x;
    double norm = std::sqrt(ss);
    if (!(norm > 0.0) || !std::isfinite(norm)) throw ZeroVector("cannot normalize a zero or non-finite vector");
    std::vector<double> out(v.size());
    for (size_t i = 0; i < v.size(); ++i) out[i] = v[i] / norm;
    return out;
}

PrototypeBank PrototypeBank::random(int k, int d, Rng& rng) {
    if (k < 1 || d < 1) throw SpecInvalid("prototype bank needs k >= 1 and d >= 1");
    PrototypeBank bank;
    bank.c = MatD(k, d);
    for (int r = 0; r < k; ++r) {
        for (int j = 0; j < d; ++j) bank.c.at(r, j) = rng.normal();
    }
    bank.renormalize_rows();
    return bank;
}

void PrototypeBank::renormalize_rows() {
    for (int r = 0; r < c.rows; ++r) {
        double* row = c.row(r);
        double ss = 0.0;
        for (int j = 0; j < c.cols; ++j) ss += row[j] * row[j];
        double norm = std::sqrt(ss);
        if (!(norm > 0.0) || !std::isfinite(norm)) throw ZeroVector("prototype row collapsed to zero");
        for (int j = 0; j < c.cols; ++j) row[j] /= norm;
    }
}

double PrototypeBank::max_row_norm_error() const {
    double worst = 0.0;
    for (int r = 0; r < c.rows; ++r) {
        const double* row = c.row(r);
        double ss = 0.0;
        for (int j = 0; j < c.cols; ++j) ss += row[j] * row[j];
        worst = std::max(worst, std::abs(std::sqrt(ss) - 1.0));
    }
    return worst;
}

MatD compute_scores(const MatD& embeddings, const PrototypeBank& bank) {
    if (embeddings.cols != bank.dim())
        throw DimensionMismatch("embedding dim " + std::to_string(embeddings.cols) +
                                " does not match prototype dim " + std::to_string(bank.dim()));
    MatD scores(embeddings.rows, bank.k());
    for (int b = 0; b < embeddings.rows; ++b) {
        const double* z = embeddings.row(b);
        for (int k = 0; k < bank.k(); ++k) {
            scores.at(b, k) = dot(z, bank.c.row(k), embeddings.cols);
        }
    }
    return scores;
}

CodeMatrix sinkhorn_codes(const MatD& scores, double epsilon, int iters) {
    if (!(epsilon > 0.0)) throw SpecInvalid("sinkhorn epsilon must be positive");
    if (iters < 1) throw SpecInvalid("sinkhorn iteration count must be >= 1");
    const int b = scores.rows;
    const int k = scores.cols;
    if (b < 1 || k < 1) throw DimensionMismatch("sinkhorn needs a non-empty score matrix");

    double mx = -std::numeric_limits<double>::infinity();
    for (double s : scores.v) mx = std::max(mx, s);
    if (!std::isfinite(mx)) throw NumericalOverflow("score matrix contains non-finite entries");

    CodeMatrix out;
    out.epsilon = epsilon;
    out.iters = iters;
    out.q = MatD(b, k);
    MatD& q = out.q;
    for (size_t i = 0; i < scores.v.size(); ++i) q.v[i] = std::exp((scores.v[i] - mx) / epsilon);
    check_finite(q, "sinkhorn exp");

    // Alternate prototype-side then sample-side rescaling toward uniform
    // marginals (1/K per column, 1/B per row).
    std::vector<double> col(k), row(b);
    for (int it = 0; it < iters; ++it) {
        std::fill(col.begin(), col.end(), 0.0);
        for (int r = 0; r < b; ++r) {
            const double* qr = q.row(r);
            for (int c = 0; c < k; ++c) col[c] += qr[c];
        }
        for (int c = 0; c < k; ++c) {
            if (!(col[c] > 0.0)) throw NumericalOverflow("sinkhorn column mass vanished");
            col[c] = 1.0 / (col[c] * k);
        }
        for (int r = 0; r < b; ++r) {
            double* qr = q.row(r);
            double sum = 0.0;
            for (int c = 0; c < k; ++c) {
                qr[c] *= col[c];
                sum += qr[c];
            }
            if (!(sum > 0.0)) throw NumericalOverflow("sinkhorn row mass vanished");
            double scale = 1.0 / (sum * b);
            for (int c = 0; c < k; ++c) qr[c] *= scale;
        }
    }
    // Final per-row renormalization: each sample's code is a distribution.
    for (int r = 0; r < b; ++r) {
        double* qr = q.row(r);
        double sum = 0.0;
        for (int c = 0; c < k; ++c) sum += qr[c];
        if (!(sum > 0.0)) throw NumericalOverflow("sinkhorn final row mass vanished");
        for (int c = 0; c < k; ++c) qr[c] /= sum;
    }
    check_finite(q, "sinkhorn normalization");
    return out;
}

MatD log_softmax_rows(const MatD& scores, double tau) {
    if (!(tau > 0.0)) throw SpecInvalid("softmax temperature must be positive");
    MatD out(scores.rows, scores.cols);
    for (int r = 0; r < scores.rows; ++r) {
        const double* s = scores.row(r);
        double* o = out.row(r);
        double mx = -std::numeric_limits<double>::infinity();
        for (int c = 0; c < scores.cols; ++c) mx = std::max(mx, s[c] / tau);
        double sum = 0.0;
        for (int c = 0; c < scores.cols; ++c) {
            o[c] = s[c] / tau - mx;
            sum += std::exp(o[c]);
        }
        double lse = std::log(sum);
        for (int c = 0; c < scores.cols; ++c) o[c] -= lse;
    }
    check_finite(out, "log-softmax");
    return out;
}

double swav_pair_loss(const std::vector<double>& z1, const std::vector<double>& z2,
                      const std::vector<double>& q1, const std::vector<double>& q2,
                      const PrototypeBank& bank, double tau) {
    if (static_cast<int>(z1.size()) != bank.dim() || static_cast<int>(z2.size()) != bank.dim())
        throw DimensionMismatch("pair loss embeddings do not match prototype dim");
    if (static_cast<int>(q1.size()) != bank.k() || static_cast<int>(q2.size()) != bank.k())
        throw DimensionMismatch("pair loss codes do not match prototype count");
    MatD z(2, bank.dim());
    std::copy(z1.begin(), z1.end(), z.row(0));
    std::copy(z2.begin(), z2.end(), z.row(1));
    MatD lp = log_softmax_rows(compute_scores(z, bank), tau);
    double l12 = 0.0, l21 = 0.0;
    for (int k = 0; k < bank.k(); ++k) {
        l12 -= q1[k] * lp.at(1, k);  // predict view 2 from view 1's code
        l21 -= q2[k] * lp.at(0, k);
    }
    return l12 + l21;
}

namespace {

void validate_batch(const SetBatch& batch, const PrototypeBank& bank, const CodeMatrix& codes) {
    if (batch.set_size < 2) throw SetTooSmall("set loss needs at least 2 regions per set");
    if (batch.n_sets < 1) throw SetTooSmall("set loss needs at least 1 set");
    if (batch.z.rows != batch.batch()) throw DimensionMismatch("batch rows do not equal n_sets * set_size");
    if (batch.z.cols != bank.dim()) throw DimensionMismatch("batch embedding dim does not match prototypes");
    if (codes.q.rows != batch.z.rows || codes.q.cols != bank.k())
        throw DimensionMismatch("code matrix shape does not match batch");
}

}  // namespace

double swav_s_loss(const SetBatch& batch, const PrototypeBank& bank, double tau,
                   const CodeMatrix& codes) {
    validate_batch(batch, bank, codes);
    const int n = batch.set_size;
    const int kk = bank.k();
    const double pair_norm = 1.0 / (static_cast<double>(n) * n - n);
    MatD lp = log_softmax_rows(compute_scores(batch.z, bank), tau);

    double total = 0.0;
    std::vector<double> qsum(kk);
    for (int s = 0; s < batch.n_sets; ++s) {
        const int base = s * n;
        std::fill(qsum.begin(), qsum.end(), 0.0);
        for (int i = 0; i < n; ++i) {
            const double* qi = codes.q.row(base + i);
            for (int k = 0; k < kk; ++k) qsum[k] += qi[k];
        }
        // Ordered pairs: sum_j (qsum - q_j) . log p_j.
        double acc = 0.0;
        for (int j = 0; j < n; ++j) {
            const double* qj = codes.q.row(base + j);
            const double* lpj = lp.row(base + j);
            for (int k = 0; k < kk; ++k) acc += (qsum[k] - qj[k]) * lpj[k];
        }
        total += -pair_norm * acc;
    }
    return total / batch.n_sets;
}

SetLossGrad swav_s_grad(const SetBatch& batch, const PrototypeBank& bank, double tau,
                        const CodeMatrix& codes) {
    validate_batch(batch, bank, codes);
    const int n = batch.set_size;
    const int d = bank.dim();
    const int kk = bank.k();
    const double pair_norm = 1.0 / (static_cast<double>(n) * n - n);
    MatD lp = log_softmax_rows(compute_scores(batch.z, bank), tau);

    SetLossGrad out;
    out.d_z = MatD(batch.z.rows, d);
    out.d_c = MatD(kk, d);

    // Scale folds in the set average and the temperature from the chain rule
    // through scores / tau.
    const double scale = 1.0 / (batch.n_sets * tau);
    std::vector<double> qsum(kk), g(kk);
    double total = 0.0;
    for (int s = 0; s < batch.n_sets; ++s) {
        const int base = s * n;
        std::fill(qsum.begin(), qsum.end(), 0.0);
        for (int i = 0; i < n; ++i) {
            const double* qi = codes.q.row(base + i);
            for (int k = 0; k < kk; ++k) qsum[k] += qi[k];
        }
        for (int j = 0; j < n; ++j) {
            const int row = base + j;
            const double* qj = codes.q.row(row);
            const double* lpj = lp.row(row);
            const double* zj = batch.z.row(row);
            double acc = 0.0;
            // Target mass for row j sums to n - 1, so the softmax term is
            // weighted by (n - 1) in the logit gradient.
            for (int k = 0; k < kk; ++k) {
                double tgt = qsum[k] - qj[k];
                acc += tgt * lpj[k];
                g[k] = pair_norm * ((n - 1) * std::exp(lpj[k]) - tgt);
            }
            total += -pair_norm * acc;
            double* dz = out.d_z.row(row);
            for (int k = 0; k < kk; ++k) {
                const double gk = g[k] * scale;
                if (gk == 0.0) continue;
                const double* ck = bank.c.row(k);
                double* dc = out.d_c.row(k);
                for (int e = 0; e < d; ++e) {
                    dz[e] += gk * ck[e];
                    dc[e] += gk * zj[e];
                }
            }
        }
    }
    out.loss = total / batch.n_sets;
    check_finite(out.d_z, "set loss embedding gradient");
    check_finite(out.d_c, "set loss prototype gradient");
    return out;
}

}  // namespace setswav::ssl
