#include "setswav/kernels/kernels.hpp"

#include <algorithm>
#include <cmath>

// Naive single-threaded references. Loop order matches the parallel kernels
// element-for-element so results are bitwise identical; the tests rely on
// that, and bench_kernels reports the speedup of the parallel versions.

namespace setswav {
namespace kernels {
namespace serial {

void gemm_nn(int M, int N, int K, const float* A, const float* B, float* C,
             bool accumulate) {
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

void resize_bilinear(const float* src, int channels, int sh, int sw,
                     float* dst, int dh, int dw) {
    double sy = static_cast<double>(sh) / dh;
    double sx = static_cast<double>(sw) / dw;
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

void gap_fwd(const float* in, int n, int c, int hw, float* out) {
    float inv = 1.0f / static_cast<float>(hw);
    for (int i = 0; i < n * c; ++i) {
        const float* p = in + static_cast<size_t>(i) * hw;
        float acc = 0.0f;
        for (int k = 0; k < hw; ++k) acc += p[k];
        out[i] = acc * inv;
    }
}

}  // namespace serial
}  // namespace kernels
}  // namespace setswav
