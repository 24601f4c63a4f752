#include "setswav/synth/probe.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "setswav/core/errors.hpp"

namespace setswav::synth {

namespace {

constexpr double kRidge = 1e-4;
constexpr double kTol = 1e-6;
constexpr int kMaxIters = 20000;

// Largest eigenvalue of (1/n) X^T X by power iteration from a fixed start.
double top_eigenvalue(const std::vector<double>& x, int n, int d) {
    std::vector<double> v(d, 1.0 / std::sqrt(static_cast<double>(d)));
    std::vector<double> xv(n), next(d);
    double lambda = 1.0;
    for (int it = 0; it < 200; ++it) {
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            const double* xi = x.data() + static_cast<size_t>(i) * d;
            for (int j = 0; j < d; ++j) s += xi[j] * v[j];
            xv[i] = s;
        }
        std::fill(next.begin(), next.end(), 0.0);
        for (int i = 0; i < n; ++i) {
            const double* xi = x.data() + static_cast<size_t>(i) * d;
            for (int j = 0; j < d; ++j) next[j] += xi[j] * xv[i];
        }
        double norm = 0.0;
        for (int j = 0; j < d; ++j) {
            next[j] /= n;
            norm += next[j] * next[j];
        }
        norm = std::sqrt(norm);
        if (!(norm > 0.0)) return 1.0;
        lambda = norm;
        for (int j = 0; j < d; ++j) v[j] = next[j] / norm;
    }
    return lambda;
}

int argmax_row(const double* row, int c) {
    int best = 0;
    for (int k = 1; k < c; ++k)
        if (row[k] > row[best]) best = k;  // ties keep the smaller class index
    return best;
}

}  // namespace

ProbeResult oracle_linear_probe(const std::vector<std::vector<double>>& embeddings,
                                const std::vector<int>& labels, int n_classes,
                                double held_out_fraction) {
    const int n = static_cast<int>(embeddings.size());
    if (n < 2 || labels.size() != embeddings.size())
        throw DegenerateLabels("probe needs matching embeddings and labels, n >= 2");
    if (n_classes < 2) throw DegenerateLabels("probe needs at least 2 classes");
    if (held_out_fraction < 0.0 || held_out_fraction >= 1.0)
        throw SpecInvalid("held_out_fraction must be in [0, 1)");
    const int d = static_cast<int>(embeddings[0].size());
    for (const auto& e : embeddings)
        if (static_cast<int>(e.size()) != d) throw DimensionMismatch("probe embeddings have mixed dims");
    for (int y : labels)
        if (y < 0 || y >= n_classes) throw LabelOutOfRange("probe label outside class range");

    // Per-class in-order split: the last round(f * n_c) indices of each class
    // are held out.
    std::vector<std::vector<int>> by_class(n_classes);
    for (int i = 0; i < n; ++i) by_class[labels[i]].push_back(i);
    std::vector<int> train_idx, val_idx;
    for (int c = 0; c < n_classes; ++c) {
        const int n_c = static_cast<int>(by_class[c].size());
        int n_val = static_cast<int>(std::lround(held_out_fraction * n_c));
        if (n_val >= n_c && n_c > 0) n_val = n_c - 1;
        for (int i = 0; i < n_c; ++i)
            (i < n_c - n_val ? train_idx : val_idx).push_back(by_class[c][i]);
    }
    const int n_train = static_cast<int>(train_idx.size());
    std::set<int> train_classes;
    for (int i : train_idx) train_classes.insert(labels[i]);
    if (train_classes.size() < 2) throw DegenerateLabels("train portion holds fewer than 2 classes");

    // Standardize with train statistics; constant features get unit scale.
    std::vector<double> mean(d, 0.0), inv_std(d, 1.0);
    for (int i : train_idx)
        for (int j = 0; j < d; ++j) mean[j] += embeddings[i][j];
    for (int j = 0; j < d; ++j) mean[j] /= n_train;
    std::vector<double> var(d, 0.0);
    for (int i : train_idx)
        for (int j = 0; j < d; ++j) {
            const double delta = embeddings[i][j] - mean[j];
            var[j] += delta * delta;
        }
    for (int j = 0; j < d; ++j) {
        const double sd = std::sqrt(var[j] / n_train);
        inv_std[j] = sd > 1e-12 ? 1.0 / sd : 1.0;
    }
    const int dd = d + 1;  // trailing bias feature
    auto standardized = [&](int i, std::vector<double>& row) {
        for (int j = 0; j < d; ++j) row[j] = (embeddings[i][j] - mean[j]) * inv_std[j];
        row[d] = 1.0;
    };
    std::vector<double> xt(static_cast<size_t>(n_train) * dd);
    std::vector<double> row(dd);
    for (int r = 0; r < n_train; ++r) {
        standardized(train_idx[r], row);
        std::copy(row.begin(), row.end(), xt.begin() + static_cast<size_t>(r) * dd);
    }

    // Full-batch Nesterov descent with the safe step 1 / L.
    const double lips = 0.5 * top_eigenvalue(xt, n_train, dd) + kRidge;
    const double lr = 1.0 / lips;
    std::vector<double> w(static_cast<size_t>(n_classes) * dd, 0.0);
    std::vector<double> velocity(w.size(), 0.0);
    std::vector<double> grad(w.size());
    std::vector<double> logits(n_classes), prob(n_classes);
    ProbeResult result;

    for (int it = 0; it < kMaxIters; ++it) {
        // Gradient at the lookahead point w + 0.9 * velocity.
        std::vector<double> wl(w.size());
        for (size_t i = 0; i < w.size(); ++i) wl[i] = w[i] + 0.9 * velocity[i];
        std::fill(grad.begin(), grad.end(), 0.0);
        for (int r = 0; r < n_train; ++r) {
            const double* xr = xt.data() + static_cast<size_t>(r) * dd;
            double mx = -1e300;
            for (int c = 0; c < n_classes; ++c) {
                double s = 0.0;
                const double* wc = wl.data() + static_cast<size_t>(c) * dd;
                for (int j = 0; j < dd; ++j) s += wc[j] * xr[j];
                logits[c] = s;
                mx = std::max(mx, s);
            }
            double z = 0.0;
            for (int c = 0; c < n_classes; ++c) {
                prob[c] = std::exp(logits[c] - mx);
                z += prob[c];
            }
            const int y = labels[train_idx[r]];
            for (int c = 0; c < n_classes; ++c) {
                const double coeff = (prob[c] / z - (c == y ? 1.0 : 0.0)) / n_train;
                double* gc = grad.data() + static_cast<size_t>(c) * dd;
                for (int j = 0; j < dd; ++j) gc[j] += coeff * xr[j];
            }
        }
        double gmax = 0.0;
        for (int c = 0; c < n_classes; ++c) {
            double* gc = grad.data() + static_cast<size_t>(c) * dd;
            const double* wc = wl.data() + static_cast<size_t>(c) * dd;
            for (int j = 0; j < dd - 1; ++j) gc[j] += kRidge * wc[j];  // bias unregularized
            for (int j = 0; j < dd; ++j) gmax = std::max(gmax, std::abs(gc[j]));
        }
        result.iterations = it + 1;
        if (gmax < kTol) break;
        for (size_t i = 0; i < w.size(); ++i) {
            velocity[i] = 0.9 * velocity[i] - lr * grad[i];
            w[i] += velocity[i];
        }
    }

    auto accuracy_on = [&](const std::vector<int>& idx) {
        if (idx.empty()) return 0.0;
        int correct = 0;
        std::vector<double> r2(dd), lg(n_classes);
        for (int i : idx) {
            standardized(i, r2);
            for (int c = 0; c < n_classes; ++c) {
                double s = 0.0;
                const double* wc = w.data() + static_cast<size_t>(c) * dd;
                for (int j = 0; j < dd; ++j) s += wc[j] * r2[j];
                lg[c] = s;
            }
            if (argmax_row(lg.data(), n_classes) == labels[i]) ++correct;
        }
        return static_cast<double>(correct) / idx.size();
    };
    result.train_accuracy = accuracy_on(train_idx);
    result.held_out_accuracy = val_idx.empty() ? result.train_accuracy : accuracy_on(val_idx);
    return result;
}

}  // namespace setswav::synth
