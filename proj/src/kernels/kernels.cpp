#include "setswav/kernels/kernels.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace setswav {

namespace {
int g_threads = 1;
}

void set_num_threads(int n) {
    g_threads = std::max(1, n);
#ifdef _OPENMP
    omp_set_num_threads(g_threads);
#endif
}

int num_threads() { return g_threads; }

namespace kernels {

void gemm_nn(int M, int N, int K, const float* A, const float* B, float* C,
             bool accumulate) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < M; ++i) {
        float* c_row = C + static_cast<size_t>(i) * N;
        if (!accumulate)
            for (int j = 0; j < N; ++j) c_row[j] = 0.0f;
        const float* a_row = A + static_cast<size_t>(i) * K;
        for (int k = 0; k < K; ++k) {
            float a = a_row[k];
            const float* b_row = B + static_cast<size_t>(k) * N;
            for (int j = 0; j < N; ++j) c_row[j] += a * b_row[j];
        }
    }
}

void gemm_nt(int M, int N, int K, const float* A, const float* B, float* C,
             bool accumulate) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < M; ++i) {
        const float* a_row = A + static_cast<size_t>(i) * K;
        float* c_row = C + static_cast<size_t>(i) * N;
        for (int j = 0; j < N; ++j) {
            const float* b_row = B + static_cast<size_t>(j) * K;
            float acc = accumulate ? c_row[j] : 0.0f;
            for (int k = 0; k < K; ++k) acc += a_row[k] * b_row[k];
            c_row[j] = acc;
        }
    }
}

void gemm_tn(int M, int N, int K, const float* A, const float* B, float* C,
             bool accumulate) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < M; ++i) {
        float* c_row = C + static_cast<size_t>(i) * N;
        if (!accumulate)
            for (int j = 0; j < N; ++j) c_row[j] = 0.0f;
        for (int k = 0; k < K; ++k) {
            float a = A[static_cast<size_t>(k) * M + i];
            const float* b_row = B + static_cast<size_t>(k) * N;
            for (int j = 0; j < N; ++j) c_row[j] += a * b_row[j];
        }
    }
}

void im2col3x3(const float* in, int c, int h, int w, int stride, int pad,
               float* cols, int out_h, int out_w) {
    int out_hw = out_h * out_w;
#pragma omp parallel for schedule(static)
    for (int ck = 0; ck < c * 9; ++ck) {
        int ch = ck / 9;
        int ky = (ck % 9) / 3;
        int kx = ck % 3;
        const float* plane = in + static_cast<size_t>(ch) * h * w;
        float* dst = cols + static_cast<size_t>(ck) * out_hw;
        for (int oy = 0; oy < out_h; ++oy) {
            int iy = oy * stride + ky - pad;
            for (int ox = 0; ox < out_w; ++ox) {
                int ix = ox * stride + kx - pad;
                float v = 0.0f;
                if (iy >= 0 && iy < h && ix >= 0 && ix < w)
                    v = plane[static_cast<size_t>(iy) * w + ix];
                dst[static_cast<size_t>(oy) * out_w + ox] = v;
            }
        }
    }
}

void col2im3x3(const float* cols, int c, int h, int w, int stride, int pad,
               float* in_grad, int out_h, int out_w) {
    int out_hw = out_h * out_w;
    // Parallel over input channels: every (ky,kx) tap of one channel is
    // accumulated by the same thread, so there are no write races.
#pragma omp parallel for schedule(static)
    for (int ch = 0; ch < c; ++ch) {
        float* plane = in_grad + static_cast<size_t>(ch) * h * w;
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                const float* src =
                    cols + static_cast<size_t>(ch * 9 + ky * 3 + kx) * out_hw;
                for (int oy = 0; oy < out_h; ++oy) {
                    int iy = oy * stride + ky - pad;
                    if (iy < 0 || iy >= h) continue;
                    for (int ox = 0; ox < out_w; ++ox) {
                        int ix = ox * stride + kx - pad;
                        if (ix < 0 || ix >= w) continue;
                        plane[static_cast<size_t>(iy) * w + ix] +=
                            src[static_cast<size_t>(oy) * out_w + ox];
                    }
                }
            }
        }
    }
}

void relu_fwd(const float* x, float* y, size_t n) {
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(n); ++i)
        y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_bwd(const float* x, const float* dy, float* dx, size_t n) {
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(n); ++i)
        dx[i] = x[i] > 0.0f ? dy[i] : 0.0f;
}

void gap_fwd(const float* in, int n, int c, int hw, float* out) {
    float inv = 1.0f / static_cast<float>(hw);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n * c; ++i) {
        const float* p = in + static_cast<size_t>(i) * hw;
        float acc = 0.0f;
        for (int k = 0; k < hw; ++k) acc += p[k];
        out[i] = acc * inv;
    }
}

void gap_bwd(const float* dout, int n, int c, int hw, float* din) {
    float inv = 1.0f / static_cast<float>(hw);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n * c; ++i) {
        float g = dout[i] * inv;
        float* p = din + static_cast<size_t>(i) * hw;
        for (int k = 0; k < hw; ++k) p[k] = g;
    }
}

void add_bias(float* y, const float* b, int rows_c, int cols_hw) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < rows_c; ++i) {
        float* row = y + static_cast<size_t>(i) * cols_hw;
        float bi = b[i];
        for (int j = 0; j < cols_hw; ++j) row[j] += bi;
    }
}

void bias_grad(const float* dy, float* db, int rows_c, int cols_hw) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < rows_c; ++i) {
        const float* row = dy + static_cast<size_t>(i) * cols_hw;
        float acc = 0.0f;
        for (int j = 0; j < cols_hw; ++j) acc += row[j];
        db[i] += acc;
    }
}

void resize_bilinear(const float* src, int channels, int sh, int sw,
                     float* dst, int dh, int dw) {
    double sy = static_cast<double>(sh) / dh;
    double sx = static_cast<double>(sw) / dw;
#pragma omp parallel for schedule(static)
    for (int c = 0; c < channels; ++c) {
        const float* sp = src + static_cast<size_t>(c) * sh * sw;
        float* dp = dst + static_cast<size_t>(c) * dh * dw;
        for (int y = 0; y < dh; ++y) {
            double fy = (y + 0.5) * sy - 0.5;
            int y0 = static_cast<int>(std::floor(fy));
            double wy = fy - y0;
            int y0c = std::clamp(y0, 0, sh - 1);
            int y1c = std::clamp(y0 + 1, 0, sh - 1);
            for (int x = 0; x < dw; ++x) {
                double fx = (x + 0.5) * sx - 0.5;
                int x0 = static_cast<int>(std::floor(fx));
                double wx = fx - x0;
                int x0c = std::clamp(x0, 0, sw - 1);
                int x1c = std::clamp(x0 + 1, 0, sw - 1);
                double v00 = sp[static_cast<size_t>(y0c) * sw + x0c];
                double v01 = sp[static_cast<size_t>(y0c) * sw + x1c];
                double v10 = sp[static_cast<size_t>(y1c) * sw + x0c];
                double v11 = sp[static_cast<size_t>(y1c) * sw + x1c];
                double top = v00 + (v01 - v00) * wx;
                double bot = v10 + (v11 - v10) * wx;
                dp[static_cast<size_t>(y) * dw + x] =
                    static_cast<float>(top + (bot - top) * wy);
            }
        }
    }
}

void sgd_update(float* w, float* m, const float* g, size_t n, float lr,
                float mu, float wd) {
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(n); ++i) {
        float grad = g[i] + wd * w[i];
        m[i] = mu * m[i] - lr * grad;
        w[i] += m[i];
    }
}

}  // namespace kernels
}  // namespace setswav
