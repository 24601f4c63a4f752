#include "setswav/model/layers.hpp"

#include <cmath>
#include <cstring>
#include <numeric>

#include "setswav/core/errors.hpp"
#include "setswav/kernels/kernels.hpp"

namespace setswav::model {

void ParamTensor::init(std::string n, std::vector<int> s) {
    name = std::move(n);
    shape = std::move(s);
    size_t total = 1;
    for (int d : shape) total *= static_cast<size_t>(d);
    w.assign(total, 0.0f);
    g.assign(total, 0.0f);
    m.assign(total, 0.0f);
}

void ParamTensor::zero_grad() { std::fill(g.begin(), g.end(), 0.0f); }

namespace {

// He initialization: normal with std sqrt(2 / fan_in).
void he_fill(std::vector<float>& w, int fan_in, Rng& rng) {
    const double std_dev = std::sqrt(2.0 / fan_in);
    for (float& x : w) x = static_cast<float>(rng.normal() * std_dev);
}

}  // namespace

void Conv3x3::init(const std::string& name, int in_channels, int out_channels, int stride_, Rng& rng) {
    in_c = in_channels;
    out_c = out_channels;
    stride = stride_;
    weight.init(name + ".weight", {out_c, in_c * 9});
    bias.init(name + ".bias", {out_c});
    he_fill(weight.w, in_c * 9, rng);
}

std::vector<float> Conv3x3::forward(const std::vector<float>& x, int n, int h, int w, bool train) {
    const int oh = out_dim(h, stride);
    const int ow = out_dim(w, stride);
    const int ohw = oh * ow;
    const size_t in_stride = static_cast<size_t>(in_c) * h * w;
    const size_t out_stride = static_cast<size_t>(out_c) * ohw;
    if (x.size() != in_stride * n) throw DimensionMismatch("conv input size mismatch");

    std::vector<float> out(out_stride * n);
    std::vector<float> cols(static_cast<size_t>(in_c) * 9 * ohw);
    for (int s = 0; s < n; ++s) {
        kernels::im2col3x3(x.data() + s * in_stride, in_c, h, w, stride, 1, cols.data(), oh, ow);
        kernels::gemm_nn(out_c, ohw, in_c * 9, weight.w.data(), cols.data(), out.data() + s * out_stride);
        kernels::add_bias(out.data() + s * out_stride, bias.w.data(), out_c, ohw);
    }
    if (train) {
        cached_x = x;
        cached_n = n;
        cached_h = h;
        cached_w = w;
    }
    return out;
}

std::vector<float> Conv3x3::backward(const std::vector<float>& dout) {
    const int h = cached_h, w = cached_w, n = cached_n;
    const int oh = out_dim(h, stride);
    const int ow = out_dim(w, stride);
    const int ohw = oh * ow;
    const size_t in_stride = static_cast<size_t>(in_c) * h * w;
    const size_t out_stride = static_cast<size_t>(out_c) * ohw;
    if (dout.size() != out_stride * n) throw DimensionMismatch("conv grad size mismatch");

    std::vector<float> dx(in_stride * n, 0.0f);
    std::vector<float> cols(static_cast<size_t>(in_c) * 9 * ohw);
    std::vector<float> dcols(cols.size());
    for (int s = 0; s < n; ++s) {
        const float* dy = dout.data() + s * out_stride;
        kernels::im2col3x3(cached_x.data() + s * in_stride, in_c, h, w, stride, 1, cols.data(), oh, ow);
        kernels::gemm_nt(out_c, in_c * 9, ohw, dy, cols.data(), weight.g.data(), true);
        kernels::bias_grad(dy, bias.g.data(), out_c, ohw);
        kernels::gemm_tn(in_c * 9, ohw, out_c, weight.w.data(), dy, dcols.data());
        kernels::col2im3x3(dcols.data(), in_c, h, w, stride, 1, dx.data() + s * in_stride, oh, ow);
    }
    return dx;
}

void Linear::init(const std::string& name, int in_features, int out_features, Rng& rng) {
    in_f = in_features;
    out_f = out_features;
    weight.init(name + ".weight", {out_f, in_f});
    bias.init(name + ".bias", {out_f});
    he_fill(weight.w, in_f, rng);
}

std::vector<float> Linear::forward(const std::vector<float>& x, int n, bool train) {
    if (x.size() != static_cast<size_t>(n) * in_f) throw DimensionMismatch("linear input size mismatch");
    std::vector<float> out(static_cast<size_t>(n) * out_f);
    // out[n, out_f] = x[n, in_f] * W^T, W stored [out_f, in_f].
    kernels::gemm_nt(n, out_f, in_f, x.data(), weight.w.data(), out.data());
    for (int s = 0; s < n; ++s) {
        float* row = out.data() + static_cast<size_t>(s) * out_f;
        for (int o = 0; o < out_f; ++o) row[o] += bias.w[o];
    }
    if (train) {
        cached_x = x;
        cached_n = n;
    }
    return out;
}

std::vector<float> Linear::backward(const std::vector<float>& dout) {
    const int n = cached_n;
    if (dout.size() != static_cast<size_t>(n) * out_f) throw DimensionMismatch("linear grad size mismatch");
    // dW[out_f, in_f] += dout^T[out_f, n] * x[n, in_f]
    kernels::gemm_tn(out_f, in_f, n, dout.data(), cached_x.data(), weight.g.data(), true);
    for (int s = 0; s < n; ++s) {
        const float* row = dout.data() + static_cast<size_t>(s) * out_f;
        for (int o = 0; o < out_f; ++o) bias.g[o] += row[o];
    }
    std::vector<float> dx(static_cast<size_t>(n) * in_f);
    // dx[n, in_f] = dout[n, out_f] * W[out_f, in_f]
    kernels::gemm_nn(n, in_f, out_f, dout.data(), weight.w.data(), dx.data());
    return dx;
}

std::vector<float> ReLU::forward(const std::vector<float>& x, bool train) {
    std::vector<float> y(x.size());
    kernels::relu_fwd(x.data(), y.data(), x.size());
    if (train) mask = x;
    return y;
}

std::vector<float> ReLU::backward(const std::vector<float>& dout) const {
    if (dout.size() != mask.size()) throw DimensionMismatch("relu grad size mismatch");
    std::vector<float> dx(dout.size());
    kernels::relu_bwd(mask.data(), dout.data(), dx.data(), dout.size());
    return dx;
}

std::vector<float> GlobalAvgPool::forward(const std::vector<float>& x, int n, int c, int hw) {
    if (x.size() != static_cast<size_t>(n) * c * hw) throw DimensionMismatch("gap input size mismatch");
    std::vector<float> out(static_cast<size_t>(n) * c);
    kernels::gap_fwd(x.data(), n, c, hw, out.data());
    cached_n = n;
    cached_c = c;
    cached_hw = hw;
    return out;
}

std::vector<float> GlobalAvgPool::backward(const std::vector<float>& dout) const {
    if (dout.size() != static_cast<size_t>(cached_n) * cached_c) throw DimensionMismatch("gap grad size mismatch");
    std::vector<float> dx(static_cast<size_t>(cached_n) * cached_c * cached_hw);
    kernels::gap_bwd(dout.data(), cached_n, cached_c, cached_hw, dx.data());
    return dx;
}

std::vector<float> L2Normalize::forward(const std::vector<float>& x, int n, int d) {
    if (x.size() != static_cast<size_t>(n) * d) throw DimensionMismatch("l2norm input size mismatch");
    std::vector<float> y(x.size());
    cached_norm.assign(n, 0.0f);
    for (int s = 0; s < n; ++s) {
        const float* xr = x.data() + static_cast<size_t>(s) * d;
        double ss = 0.0;
        for (int j = 0; j < d; ++j) ss += static_cast<double>(xr[j]) * xr[j];
        double norm = std::sqrt(ss);
        if (!(norm > 0.0)) throw ZeroVector("cannot L2-normalize a zero row");
        cached_norm[s] = static_cast<float>(norm);
        float* yr = y.data() + static_cast<size_t>(s) * d;
        for (int j = 0; j < d; ++j) yr[j] = static_cast<float>(xr[j] / norm);
    }
    cached_y = y;
    cached_n = n;
    cached_d = d;
    return y;
}

std::vector<float> L2Normalize::backward(const std::vector<float>& dout) const {
    const int n = cached_n, d = cached_d;
    if (dout.size() != static_cast<size_t>(n) * d) throw DimensionMismatch("l2norm grad size mismatch");
    std::vector<float> dx(dout.size());
    // dx = (dout - y * (y . dout)) / norm.
    for (int s = 0; s < n; ++s) {
        const float* yr = cached_y.data() + static_cast<size_t>(s) * d;
        const float* dr = dout.data() + static_cast<size_t>(s) * d;
        float* xr = dx.data() + static_cast<size_t>(s) * d;
        double dotv = 0.0;
        for (int j = 0; j < d; ++j) dotv += static_cast<double>(yr[j]) * dr[j];
        const double inv = 1.0 / cached_norm[s];
        for (int j = 0; j < d; ++j)
            xr[j] = static_cast<float>((dr[j] - yr[j] * dotv) * inv);
    }
    return dx;
}

void sgd_step(std::vector<ParamTensor*>& params, double lr, const SgdConfig& cfg) {
    for (ParamTensor* p : params) {
        kernels::sgd_update(p->w.data(), p->m.data(), p->g.data(), p->w.size(),
                            static_cast<float>(lr), static_cast<float>(cfg.momentum),
                            static_cast<float>(cfg.weight_decay));
    }
}

double cosine_lr(double base_lr, long step, long total_steps) {
    if (total_steps <= 0) throw SpecInvalid("cosine schedule needs total_steps > 0");
    if (step >= total_steps) return 0.0;
    const double t = static_cast<double>(step) / static_cast<double>(total_steps);
    return base_lr * 0.5 * (1.0 + std::cos(t * 3.14159265358979323846));
}

double step_lr(double base_lr, int epoch, const std::vector<int>& boundaries, double factor) {
    double lr = base_lr;
    for (int b : boundaries) {
        if (epoch >= b) lr *= factor;
    }
    return lr;
}

}  // namespace setswav::model
