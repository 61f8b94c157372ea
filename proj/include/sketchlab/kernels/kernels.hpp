#pragma once

#include <cstdint>
#include <vector>

namespace sketchlab::kernels {

// OpenMP-parallel kernels used by every net and probe. Layout conventions:
// matrices are row-major, image tensors are NCHW. Parallel loops partition
// output elements, never shared accumulators, so results are bit-identical
// for any thread count.

// C[M x N] = A[M x K] * B[K x N]   (accumulate: C +=)
void gemm(const float* a, const float* b, float* c, int m, int k, int n,
          bool accumulate);

// C[M x K] (+)= A[M x N] * B[K x N]^T, i.e. c[m][k] = sum_n a[m][n]*b[k][n]
void gemm_bt(const float* a, const float* b, float* c, int m, int n, int k,
             bool accumulate);

void transpose(const float* a, float* at, int m, int n);

// im2col for one image: x is C x H x W, col is (C*kh*kw) x (OH*OW).
void im2col(const float* x, int c, int h, int w, int kh, int kw, int stride,
            int pad, float* col, int oh, int ow);

// Adjoint of im2col: dx[c,y,x] = sum of matching col entries (overwrites dx).
// Gather formulation: parallel over input pixels.
void col2im(const float* col, int c, int h, int w, int kh, int kw, int stride,
            int pad, float* dx, int oh, int ow);

int conv_out_size(int in, int kernel, int stride, int pad);

// Elementwise activations. n = element count. *_bwd writes dx from (x, dy).
void relu_fwd(const float* x, float* y, int64_t n);
void relu_bwd(const float* x, const float* dy, float* dx, int64_t n);
void leaky_relu_fwd(const float* x, float* y, int64_t n, float slope);
void leaky_relu_bwd(const float* x, const float* dy, float* dx, int64_t n,
                    float slope);
void sigmoid_fwd(const float* x, float* y, int64_t n);
// dx from forward output y: dx = dy * y * (1-y)
void sigmoid_bwd(const float* y, const float* dy, float* dx, int64_t n);

void add(const float* a, const float* b, float* y, int64_t n);
void scale(const float* x, float* y, int64_t n, float s);
void axpy(float alpha, const float* x, float* y, int64_t n);  // y += alpha*x

// Batch norm over NCHW: statistics per channel across N*H*W.
void bn_stats(const float* x, int n, int c, int hw, float* mean, float* var);
void bn_fwd(const float* x, float* y, int n, int c, int hw, const float* mean,
            const float* var, const float* gamma, const float* beta,
            float eps);
void bn_bwd(const float* x, const float* dy, float* dx, int n, int c, int hw,
            const float* mean, const float* var, const float* gamma, float eps,
            float* dgamma, float* dbeta);

// Max pooling, NCHW, records flat input index of each output's argmax.
void maxpool_fwd(const float* x, float* y, int32_t* argmax, int n, int c,
                 int h, int w, int kernel, int stride, int pad, int oh,
                 int ow);
void maxpool_bwd(const float* dy, const int32_t* argmax, float* dx, int n,
                 int c, int h, int w, int oh, int ow);

// Global average pooling: y is N x C.
void global_avgpool_fwd(const float* x, float* y, int n, int c, int hw);
void global_avgpool_bwd(const float* dy, float* dx, int n, int c, int hw);

// Bilinear interpolation with align_corners=true semantics, NCHW.
void bilinear_fwd(const float* x, float* y, int n, int c, int ih, int iw,
                  int oh, int ow);
void bilinear_bwd(const float* dy, float* dx, int n, int c, int ih, int iw,
                  int oh, int ow);

// Row-wise softmax: x and y are M x N.
void softmax_rows(const float* x, float* y, int m, int n);

// Depthwise 3x3-style conv (per-channel kernels), weight is C x kh x kw.
void depthwise_fwd(const float* x, const float* wgt, float* y, int n, int c,
                   int h, int w, int kh, int kw, int stride, int pad, int oh,
                   int ow);
void depthwise_bwd_data(const float* dy, const float* wgt, float* dx, int n,
                        int c, int h, int w, int kh, int kw, int stride,
                        int pad, int oh, int ow);
void depthwise_bwd_weight(const float* x, const float* dy, float* dw, int n,
                          int c, int h, int w, int kh, int kw, int stride,
                          int pad, int oh, int ow);

// Naive single-thread references. Kept for correctness tests and the
// kernel benchmark; the OpenMP kernels above are validated against these.
namespace ref {

void gemm(const float* a, const float* b, float* c, int m, int k, int n,
          bool accumulate);
void gemm_bt(const float* a, const float* b, float* c, int m, int n, int k,
             bool accumulate);
// Direct 7-loop convolution: x N,C,H,W; w Cout,Cin,kh,kw; y N,Cout,OH,OW.
void conv2d(const float* x, const float* wgt, const float* bias, float* y,
            int n, int cin, int h, int w, int cout, int kh, int kw, int stride,
            int pad);
void bilinear_fwd(const float* x, float* y, int n, int c, int ih, int iw,
                  int oh, int ow);
void softmax_rows(const float* x, float* y, int m, int n);

}  // namespace ref

}  // namespace sketchlab::kernels
