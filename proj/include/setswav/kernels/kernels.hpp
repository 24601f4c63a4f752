#pragma once

#include <cstddef>

// Data-parallel inner loops. Everything here is written so that the result is
// bit-identical for any thread count: parallelism is only over independent
// output elements, and each output is accumulated in a fixed serial order.
// kernels::serial holds naive reference implementations used by the tests and
// the benchmark tool.

namespace setswav {

// Thread-count control for every parallel region in the project.
void set_num_threads(int n);
int num_threads();

namespace kernels {

// C[M x N] = A[M x K] * B[K x N]   (accumulate: C += ...)
void gemm_nn(int M, int N, int K, const float* A, const float* B, float* C,
             bool accumulate = false);

// C[M x N] = A[M x K] * B[N x K]^T
void gemm_nt(int M, int N, int K, const float* A, const float* B, float* C,
             bool accumulate = false);

// C[M x N] = A[K x M]^T * B[K x N]
void gemm_tn(int M, int N, int K, const float* A, const float* B, float* C,
             bool accumulate = false);

// 3x3 convolution lowering. Input is CHW; cols is [C*9, out_h*out_w].
void im2col3x3(const float* in, int c, int h, int w, int stride, int pad,
               float* cols, int out_h, int out_w);
// Scatter-add the lowered gradient back to an input-shaped buffer.
void col2im3x3(const float* cols, int c, int h, int w, int stride, int pad,
               float* in_grad, int out_h, int out_w);

void relu_fwd(const float* x, float* y, size_t n);
void relu_bwd(const float* x, const float* dy, float* dx, size_t n);

// Global average pool over an N x C x H x W batch -> N x C.
void gap_fwd(const float* in, int n, int c, int hw, float* out);
void gap_bwd(const float* dout, int n, int c, int hw, float* din);

void add_bias(float* y, const float* b, int rows_c, int cols_hw);
void bias_grad(const float* dy, float* db, int rows_c, int cols_hw);

// Bilinear resize of a planar image (half-pixel centers, edge clamp).
void resize_bilinear(const float* src, int channels, int sh, int sw,
                     float* dst, int dh, int dw);

// SGD with momentum and weight decay: m = mu*m - lr*(g + wd*w); w += m.
void sgd_update(float* w, float* m, const float* g, size_t n, float lr,
                float mu, float wd);

namespace serial {

void gemm_nn(int M, int N, int K, const float* A, const float* B, float* C,
             bool accumulate = false);
void gemm_nt(int M, int N, int K, const float* A, const float* B, float* C,
             bool accumulate = false);
void gemm_tn(int M, int N, int K, const float* A, const float* B, float* C,
             bool accumulate = false);
void resize_bilinear(const float* src, int channels, int sh, int sw,
                     float* dst, int dh, int dw);
void gap_fwd(const float* in, int n, int c, int hw, float* out);

}  // namespace serial

}  // namespace kernels
}  // namespace setswav
