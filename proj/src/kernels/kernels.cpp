#include "sketchlab/kernels/kernels.hpp"

#include <cmath>
#include <cstring>
#include <algorithm>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "sketchlab/core/parallel.hpp"

namespace sketchlab::par {

bool& enabled_flag() {
  static bool on = true;
  return on;
}

int num_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

bool active() {
#ifdef _OPENMP
  return enabled_flag() && omp_in_parallel() == 0;
#else
  return false;
#endif
}

}  // namespace sketchlab::par

namespace sketchlab::kernels {

namespace {
constexpr int kRowTile = 4;   // output rows accumulated in registers
constexpr int kColTile = 16;  // output columns per register block
}  // namespace

// Register-blocked GEMM. Each (row-tile, col-tile) block is owned by one
// thread and accumulated in a fixed k-order, so the result does not depend
// on the schedule.
void gemm(const float* a, const float* b, float* c, int m, int k, int n,
          bool accumulate) {
  constexpr int kColBlock = 256;  // columns per parallel work item
  const int row_tiles = (m + kRowTile - 1) / kRowTile;
  const int col_blocks = (n + kColBlock - 1) / kColBlock;
  const bool par = par::active();
#pragma omp parallel for schedule(static) if (par)
  for (int tile = 0; tile < row_tiles * col_blocks; ++tile) {
    const int rt = tile / col_blocks;
    const int cb = tile % col_blocks;
    const int i0 = rt * kRowTile;
    const int i1 = std::min(i0 + kRowTile, m);
    const int rows = i1 - i0;
    const int jb0 = cb * kColBlock;
    const int jb1 = std::min(jb0 + kColBlock, n);
    int j0 = jb0;
    for (; j0 + kColTile <= jb1; j0 += kColTile) {
      float acc[kRowTile][kColTile];
      for (int ii = 0; ii < rows; ++ii) {
        if (accumulate) {
          for (int jj = 0; jj < kColTile; ++jj) acc[ii][jj] = c[(i0 + ii) * n + j0 + jj];
        } else {
          for (int jj = 0; jj < kColTile; ++jj) acc[ii][jj] = 0.0f;
        }
      }
      for (int kk = 0; kk < k; ++kk) {
        const float* brow = b + (int64_t)kk * n + j0;
        for (int ii = 0; ii < rows; ++ii) {
          const float av = a[(int64_t)(i0 + ii) * k + kk];
#pragma omp simd
          for (int jj = 0; jj < kColTile; ++jj) acc[ii][jj] += av * brow[jj];
        }
      }
      for (int ii = 0; ii < rows; ++ii)
        for (int jj = 0; jj < kColTile; ++jj) c[(int64_t)(i0 + ii) * n + j0 + jj] = acc[ii][jj];
    }
    // column tail
    if (j0 < jb1) {
      for (int ii = 0; ii < rows; ++ii) {
        const int i = i0 + ii;
        for (int j = j0; j < jb1; ++j) {
          float s = accumulate ? c[(int64_t)i * n + j] : 0.0f;
          for (int kk = 0; kk < k; ++kk) s += a[(int64_t)i * k + kk] * b[(int64_t)kk * n + j];
          c[(int64_t)i * n + j] = s;
        }
      }
    }
  }
}

void gemm_bt(const float* a, const float* b, float* c, int m, int n, int k,
             bool accumulate) {
  const bool par = par::active();
#pragma omp parallel for schedule(static) if (par)
  for (int i = 0; i < m; ++i) {
    const float* arow = a + (int64_t)i * n;
    for (int j = 0; j < k; ++j) {
      const float* brow = b + (int64_t)j * n;
      float s = 0.0f;
#pragma omp simd reduction(+ : s)
      for (int t = 0; t < n; ++t) s += arow[t] * brow[t];
      if (accumulate)
        c[(int64_t)i * k + j] += s;
      else
        c[(int64_t)i * k + j] = s;
    }
  }
}

void transpose(const float* a, float* at, int m, int n) {
  const bool par = par::active();
#pragma omp parallel for schedule(static) if (par)
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) at[(int64_t)j * m + i] = a[(int64_t)i * n + j];
}

int conv_out_size(int in, int kernel, int stride, int pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}

void im2col(const float* x, int c, int h, int w, int kh, int kw, int stride,
            int pad, float* col, int oh, int ow) {
  const int patch = oh * ow;
  const bool par = par::active();
#pragma omp parallel for schedule(static) if (par)
  for (int row = 0; row < c * kh * kw; ++row) {
    const int ci = row / (kh * kw);
    const int ky = (row / kw) % kh;
    const int kx = row % kw;
    float* dst = col + (int64_t)row * patch;
    const float* src = x + (int64_t)ci * h * w;
    for (int oy = 0; oy < oh; ++oy) {
      const int iy = oy * stride - pad + ky;
      if (iy < 0 || iy >= h) {
        for (int ox = 0; ox < ow; ++ox) dst[oy * ow + ox] = 0.0f;
        continue;
      }
      for (int ox = 0; ox < ow; ++ox) {
        const int ix = ox * stride - pad + kx;
        dst[oy * ow + ox] = (ix >= 0 && ix < w) ? src[iy * w + ix] : 0.0f;
      }
    }
  }
}

void col2im(const float* col, int c, int h, int w, int kh, int kw, int stride,
            int pad, float* dx, int oh, int ow) {
  const int patch = oh * ow;
  const bool par = par::active();
#pragma omp parallel for schedule(static) if (par)
  for (int ci = 0; ci < c; ++ci) {
    for (int iy = 0; iy < h; ++iy) {
      for (int ix = 0; ix < w; ++ix) {
        float s = 0.0f;
        for (int ky = 0; ky < kh; ++ky) {
          const int ty = iy + pad - ky;
          if (ty < 0 || ty % stride) continue;
          const int oy = ty / stride;
          if (oy >= oh) continue;
          for (int kx = 0; kx < kw; ++kx) {
            const int tx = ix + pad - kx;
            if (tx < 0 || tx % stride) continue;
            const int ox = tx / stride;
            if (ox >= ow) continue;
            const int row = (ci * kh + ky) * kw + kx;
            s += col[(int64_t)row * patch + oy * ow + ox];
          }
        }
        dx[((int64_t)ci * h + iy) * w + ix] = s;
      }
    }
  }
}

#define SK_ELEMWISE_LOOP(expr)                            \
  const bool par = par::active();                        \
  _Pragma("omp parallel for schedule(static) if (par)")   \
  for (int64_t i = 0; i < n; ++i) {                       \
    expr;                                                 \
  }

void relu_fwd(const float* x, float* y, int64_t n) {
  SK_ELEMWISE_LOOP(y[i] = x[i] > 0.0f ? x[i] : 0.0f)
}

void relu_bwd(const float* x, const float* dy, float* dx, int64_t n) {
  SK_ELEMWISE_LOOP(dx[i] = x[i] > 0.0f ? dy[i] : 0.0f)
}

void leaky_relu_fwd(const float* x, float* y, int64_t n, float slope) {
  SK_ELEMWISE_LOOP(y[i] = x[i] > 0.0f ? x[i] : slope * x[i])
}

void leaky_relu_bwd(const float* x, const float* dy, float* dx, int64_t n,
                    float slope) {
  SK_ELEMWISE_LOOP(dx[i] = x[i] > 0.0f ? dy[i] : slope * dy[i])
}

void sigmoid_fwd(const float* x, float* y, int64_t n) {
  SK_ELEMWISE_LOOP(y[i] = 1.0f / (1.0f + std::exp(-x[i])))
}

void sigmoid_bwd(const float* y, const float* dy, float* dx, int64_t n) {
  SK_ELEMWISE_LOOP(dx[i] = dy[i] * y[i] * (1.0f - y[i]))
}

void add(const float* a, const float* b, float* y, int64_t n) {
  SK_ELEMWISE_LOOP(y[i] = a[i] + b[i])
}

void scale(const float* x, float* y, int64_t n, float s) {
  SK_ELEMWISE_LOOP(y[i] = x[i] * s)
}

void axpy(float alpha, const float* x, float* y, int64_t n) {
  SK_ELEMWISE_LOOP(y[i] += alpha * x[i])
}

#undef SK_ELEMWISE_LOOP

void bn_stats(const float* x, int n, int c, int hw, float* mean, float* var) {
  const bool par = par::active();
  const int64_t count = (int64_t)n * hw;
#pragma omp parallel for schedule(static) if (par)
  for (int ci = 0; ci < c; ++ci) {
    double s = 0.0;
    for (int ni = 0; ni < n; ++ni) {
      const float* p = x + ((int64_t)ni * c + ci) * hw;
      for (int i = 0; i < hw; ++i) s += p[i];
    }
    const double mu = s / (double)count;
    double v = 0.0;
    for (int ni = 0; ni < n; ++ni) {
      const float* p = x + ((int64_t)ni * c + ci) * hw;
      for (int i = 0; i < hw; ++i) {
        const double d = p[i] - mu;
        v += d * d;
      }
    }
    mean[ci] = (float)mu;
    var[ci] = (float)(v / (double)count);
  }
}

void bn_fwd(const float* x, float* y, int n, int c, int hw, const float* mean,
            const float* var, const float* gamma, const float* beta,
            float eps) {
  const bool par = par::active();
#pragma omp parallel for schedule(static) collapse(2) if (par)
  for (int ni = 0; ni < n; ++ni) {
    for (int ci = 0; ci < c; ++ci) {
      const float inv = 1.0f / std::sqrt(var[ci] + eps);
      const float g = gamma[ci] * inv;
      const float b = beta[ci] - mean[ci] * g;
      const float* px = x + ((int64_t)ni * c + ci) * hw;
      float* py = y + ((int64_t)ni * c + ci) * hw;
#pragma omp simd
      for (int i = 0; i < hw; ++i) py[i] = g * px[i] + b;
    }
  }
}

void bn_bwd(const float* x, const float* dy, float* dx, int n, int c, int hw,
            const float* mean, const float* var, const float* gamma, float eps,
            float* dgamma, float* dbeta) {
  const bool par = par::active();
  const int64_t count = (int64_t)n * hw;
#pragma omp parallel for schedule(static) if (par)
  for (int ci = 0; ci < c; ++ci) {
    const float mu = mean[ci];
    const float inv = 1.0f / std::sqrt(var[ci] + eps);
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int ni = 0; ni < n; ++ni) {
      const float* px = x + ((int64_t)ni * c + ci) * hw;
      const float* pdy = dy + ((int64_t)ni * c + ci) * hw;
      for (int i = 0; i < hw; ++i) {
        sum_dy += pdy[i];
        sum_dy_xhat += pdy[i] * (px[i] - mu) * inv;
      }
    }
    dgamma[ci] = (float)sum_dy_xhat;
    dbeta[ci] = (float)sum_dy;
    const float k1 = (float)(sum_dy / (double)count);
    const float k2 = (float)(sum_dy_xhat / (double)count);
    const float g = gamma[ci] * inv;
    for (int ni = 0; ni < n; ++ni) {
      const float* px = x + ((int64_t)ni * c + ci) * hw;
      const float* pdy = dy + ((int64_t)ni * c + ci) * hw;
      float* pdx = dx + ((int64_t)ni * c + ci) * hw;
#pragma omp simd
      for (int i = 0; i < hw; ++i) {
        const float xhat = (px[i] - mu) * inv;
        pdx[i] = g * (pdy[i] - k1 - xhat * k2);
      }
    }
  }
}

void maxpool_fwd(const float* x, float* y, int32_t* argmax, int n, int c,
                 int h, int w, int kernel, int stride, int pad, int oh,
                 int ow) {
  const bool par = par::active();
#pragma omp parallel for schedule(static) collapse(2) if (par)
  for (int ni = 0; ni < n; ++ni) {
    for (int ci = 0; ci < c; ++ci) {
      const float* src = x + ((int64_t)ni * c + ci) * h * w;
      float* dst = y + ((int64_t)ni * c + ci) * oh * ow;
      int32_t* arg = argmax + ((int64_t)ni * c + ci) * oh * ow;
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          float best = -3.4e38f;
          int32_t best_idx = -1;
          for (int ky = 0; ky < kernel; ++ky) {
            const int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < kernel; ++kx) {
              const int ix = ox * stride - pad + kx;
              if (ix < 0 || ix >= w) continue;
              const float v = src[iy * w + ix];
              if (v > best) {
                best = v;
                best_idx = iy * w + ix;
              }
            }
          }
          dst[oy * ow + ox] = best;
          arg[oy * ow + ox] = best_idx;
        }
      }
    }
  }
}

void maxpool_bwd(const float* dy, const int32_t* argmax, float* dx, int n,
                 int c, int h, int w, int oh, int ow) {
  const bool par = par::active();
  // Gather per input pixel: overlapping windows may share an argmax, so a
  // scatter would race.
#pragma omp parallel for schedule(static) collapse(2) if (par)
  for (int ni = 0; ni < n; ++ni) {
    for (int ci = 0; ci < c; ++ci) {
      const float* pdy = dy + ((int64_t)ni * c + ci) * oh * ow;
      const int32_t* arg = argmax + ((int64_t)ni * c + ci) * oh * ow;
      float* pdx = dx + ((int64_t)ni * c + ci) * h * w;
      for (int i = 0; i < h * w; ++i) pdx[i] = 0.0f;
      for (int o = 0; o < oh * ow; ++o)
        if (arg[o] >= 0) pdx[arg[o]] += pdy[o];
    }
  }
}

void global_avgpool_fwd(const float* x, float* y, int n, int c, int hw) {
  const bool par = par::active();
#pragma omp parallel for schedule(static) collapse(2) if (par)
  for (int ni = 0; ni < n; ++ni) {
    for (int ci = 0; ci < c; ++ci) {
      const float* p = x + ((int64_t)ni * c + ci) * hw;
      double s = 0.0;
      for (int i = 0; i < hw; ++i) s += p[i];
      y[(int64_t)ni * c + ci] = (float)(s / hw);
    }
  }
}

void global_avgpool_bwd(const float* dy, float* dx, int n, int c, int hw) {
  const bool par = par::active();
#pragma omp parallel for schedule(static) collapse(2) if (par)
  for (int ni = 0; ni < n; ++ni) {
    for (int ci = 0; ci < c; ++ci) {
      const float g = dy[(int64_t)ni * c + ci] / (float)hw;
      float* p = dx + ((int64_t)ni * c + ci) * hw;
      for (int i = 0; i < hw; ++i) p[i] = g;
    }
  }
}

namespace {

struct LerpAxis {
  std::vector<int> lo, hi;
  std::vector<float> t;  // weight of hi
};

LerpAxis make_axis(int in, int out) {
  LerpAxis ax;
  ax.lo.resize(out);
  ax.hi.resize(out);
  ax.t.resize(out);
  const double scale = (out > 1 && in > 1) ? (double)(in - 1) / (out - 1) : 0.0;
  for (int o = 0; o < out; ++o) {
    const double pos = o * scale;
    int lo = (int)pos;
    if (lo > in - 1) lo = in - 1;
    int hi = std::min(lo + 1, in - 1);
    ax.lo[o] = lo;
    ax.hi[o] = hi;
    ax.t[o] = (float)(pos - lo);
  }
  return ax;
}

}  // namespace

void bilinear_fwd(const float* x, float* y, int n, int c, int ih, int iw,
                  int oh, int ow) {
  const LerpAxis ay = make_axis(ih, oh), ax = make_axis(iw, ow);
  const bool par = par::active();
#pragma omp parallel for schedule(static) collapse(2) if (par)
  for (int ni = 0; ni < n; ++ni) {
    for (int ci = 0; ci < c; ++ci) {
      const float* src = x + ((int64_t)ni * c + ci) * ih * iw;
      float* dst = y + ((int64_t)ni * c + ci) * oh * ow;
      for (int oy = 0; oy < oh; ++oy) {
        const int y0 = ay.lo[oy], y1 = ay.hi[oy];
        const float ty = ay.t[oy];
        for (int ox = 0; ox < ow; ++ox) {
          const int x0 = ax.lo[ox], x1 = ax.hi[ox];
          const float tx = ax.t[ox];
          const float v00 = src[y0 * iw + x0], v01 = src[y0 * iw + x1];
          const float v10 = src[y1 * iw + x0], v11 = src[y1 * iw + x1];
          dst[oy * ow + ox] = (1 - ty) * ((1 - tx) * v00 + tx * v01) +
                              ty * ((1 - tx) * v10 + tx * v11);
        }
      }
    }
  }
}

void bilinear_bwd(const float* dy, float* dx, int n, int c, int ih, int iw,
                  int oh, int ow) {
  const LerpAxis ay = make_axis(ih, oh), ax = make_axis(iw, ow);
  // Per input pixel, collect the output pixels that reference it.
  std::vector<std::vector<std::pair<int, float>>> ymap(ih), xmap(iw);
  for (int oy = 0; oy < oh; ++oy) {
    ymap[ay.lo[oy]].push_back({oy, 1.0f - ay.t[oy]});
    if (ay.hi[oy] != ay.lo[oy]) ymap[ay.hi[oy]].push_back({oy, ay.t[oy]});
  }
  for (int ox = 0; ox < ow; ++ox) {
    xmap[ax.lo[ox]].push_back({ox, 1.0f - ax.t[ox]});
    if (ax.hi[ox] != ax.lo[ox]) xmap[ax.hi[ox]].push_back({ox, ax.t[ox]});
  }
  const bool par = par::active();
#pragma omp parallel for schedule(static) collapse(2) if (par)
  for (int ni = 0; ni < n; ++ni) {
    for (int ci = 0; ci < c; ++ci) {
      const float* src = dy + ((int64_t)ni * c + ci) * oh * ow;
      float* dst = dx + ((int64_t)ni * c + ci) * ih * iw;
      for (int iy = 0; iy < ih; ++iy) {
        for (int ix = 0; ix < iw; ++ix) {
          float s = 0.0f;
          for (const auto& [oy, wy] : ymap[iy])
            for (const auto& [ox, wx] : xmap[ix]) s += wy * wx * src[oy * ow + ox];
          dst[iy * iw + ix] = s;
        }
      }
    }
  }
}

void softmax_rows(const float* x, float* y, int m, int n) {
  const bool par = par::active();
#pragma omp parallel for schedule(static) if (par)
  for (int i = 0; i < m; ++i) {
    const float* px = x + (int64_t)i * n;
    float* py = y + (int64_t)i * n;
    float mx = px[0];
    for (int j = 1; j < n; ++j) mx = std::max(mx, px[j]);
    double s = 0.0;
    for (int j = 0; j < n; ++j) {
      py[j] = std::exp(px[j] - mx);
      s += py[j];
    }
    const float inv = (float)(1.0 / s);
    for (int j = 0; j < n; ++j) py[j] *= inv;
  }
}

void depthwise_fwd(const float* x, const float* wgt, float* y, int n, int c,
                   int h, int w, int kh, int kw, int stride, int pad, int oh,
                   int ow) {
  const bool par = par::active();
#pragma omp parallel for schedule(static) collapse(2) if (par)
  for (int ni = 0; ni < n; ++ni) {
    for (int ci = 0; ci < c; ++ci) {
      const float* src = x + ((int64_t)ni * c + ci) * h * w;
      const float* kw_ = wgt + (int64_t)ci * kh * kw;
      float* dst = y + ((int64_t)ni * c + ci) * oh * ow;
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          float s = 0.0f;
          for (int ky = 0; ky < kh; ++ky) {
            const int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < kw; ++kx) {
              const int ix = ox * stride - pad + kx;
              if (ix < 0 || ix >= w) continue;
              s += src[iy * w + ix] * kw_[ky * kw + kx];
            }
          }
          dst[oy * ow + ox] = s;
        }
      }
    }
  }
}

void depthwise_bwd_data(const float* dy, const float* wgt, float* dx, int n,
                        int c, int h, int w, int kh, int kw, int stride,
                        int pad, int oh, int ow) {
  const bool par = par::active();
#pragma omp parallel for schedule(static) collapse(2) if (par)
  for (int ni = 0; ni < n; ++ni) {
    for (int ci = 0; ci < c; ++ci) {
      const float* src = dy + ((int64_t)ni * c + ci) * oh * ow;
      const float* kw_ = wgt + (int64_t)ci * kh * kw;
      float* dst = dx + ((int64_t)ni * c + ci) * h * w;
      for (int iy = 0; iy < h; ++iy) {
        for (int ix = 0; ix < w; ++ix) {
          float s = 0.0f;
          for (int ky = 0; ky < kh; ++ky) {
            const int ty = iy + pad - ky;
            if (ty < 0 || ty % stride) continue;
            const int oy = ty / stride;
            if (oy >= oh) continue;
            for (int kx = 0; kx < kw; ++kx) {
              const int tx = ix + pad - kx;
              if (tx < 0 || tx % stride) continue;
              const int ox = tx / stride;
              if (ox >= ow) continue;
              s += src[oy * ow + ox] * kw_[ky * kw + kx];
            }
          }
          dst[iy * w + ix] = s;
        }
      }
    }
  }
}

void depthwise_bwd_weight(const float* x, const float* dy, float* dw, int n,
                          int c, int h, int w, int kh, int kw, int stride,
                          int pad, int oh, int ow) {
  const bool par = par::active();
#pragma omp parallel for schedule(static) if (par)
  for (int ci = 0; ci < c; ++ci) {
    float* pdw = dw + (int64_t)ci * kh * kw;
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        double s = 0.0;
        for (int ni = 0; ni < n; ++ni) {
          const float* src = x + ((int64_t)ni * c + ci) * h * w;
          const float* g = dy + ((int64_t)ni * c + ci) * oh * ow;
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= h) continue;
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * stride - pad + kx;
              if (ix < 0 || ix >= w) continue;
              s += (double)src[iy * w + ix] * g[oy * ow + ox];
            }
          }
        }
        pdw[ky * kw + kx] = (float)s;
      }
    }
  }
}

namespace ref {

void gemm(const float* a, const float* b, float* c, int m, int k, int n,
          bool accumulate) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      float s = accumulate ? c[(int64_t)i * n + j] : 0.0f;
      for (int t = 0; t < k; ++t) s += a[(int64_t)i * k + t] * b[(int64_t)t * n + j];
      c[(int64_t)i * n + j] = s;
    }
  }
}

void gemm_bt(const float* a, const float* b, float* c, int m, int n, int k,
             bool accumulate) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < k; ++j) {
      float s = accumulate ? c[(int64_t)i * k + j] : 0.0f;
      for (int t = 0; t < n; ++t) s += a[(int64_t)i * n + t] * b[(int64_t)j * n + t];
      c[(int64_t)i * k + j] = s;
    }
  }
}

void conv2d(const float* x, const float* wgt, const float* bias, float* y,
            int n, int cin, int h, int w, int cout, int kh, int kw, int stride,
            int pad) {
  const int oh = conv_out_size(h, kh, stride, pad);
  const int ow = conv_out_size(w, kw, stride, pad);
  for (int ni = 0; ni < n; ++ni) {
    for (int co = 0; co < cout; ++co) {
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          float s = bias ? bias[co] : 0.0f;
          for (int ci = 0; ci < cin; ++ci) {
            for (int ky = 0; ky < kh; ++ky) {
              const int iy = oy * stride - pad + ky;
              if (iy < 0 || iy >= h) continue;
              for (int kx = 0; kx < kw; ++kx) {
                const int ix = ox * stride - pad + kx;
                if (ix < 0 || ix >= w) continue;
                s += x[(((int64_t)ni * cin + ci) * h + iy) * w + ix] *
                     wgt[(((int64_t)co * cin + ci) * kh + ky) * kw + kx];
              }
            }
          }
          y[(((int64_t)ni * cout + co) * oh + oy) * ow + ox] = s;
        }
      }
    }
  }
}

void bilinear_fwd(const float* x, float* y, int n, int c, int ih, int iw,
                  int oh, int ow) {
  for (int ni = 0; ni < n; ++ni) {
    for (int ci = 0; ci < c; ++ci) {
      const float* src = x + ((int64_t)ni * c + ci) * ih * iw;
      float* dst = y + ((int64_t)ni * c + ci) * oh * ow;
      const double sy = (oh > 1 && ih > 1) ? (double)(ih - 1) / (oh - 1) : 0.0;
      const double sx = (ow > 1 && iw > 1) ? (double)(iw - 1) / (ow - 1) : 0.0;
      for (int oy = 0; oy < oh; ++oy) {
        const double py = oy * sy;
        const int y0 = std::min((int)py, ih - 1), y1 = std::min(y0 + 1, ih - 1);
        const float ty = (float)(py - y0);
        for (int ox = 0; ox < ow; ++ox) {
          const double px = ox * sx;
          const int x0 = std::min((int)px, iw - 1), x1 = std::min(x0 + 1, iw - 1);
          const float tx = (float)(px - x0);
          dst[oy * ow + ox] =
              (1 - ty) * ((1 - tx) * src[y0 * iw + x0] + tx * src[y0 * iw + x1]) +
              ty * ((1 - tx) * src[y1 * iw + x0] + tx * src[y1 * iw + x1]);
        }
      }
    }
  }
}

void softmax_rows(const float* x, float* y, int m, int n) {
  for (int i = 0; i < m; ++i) {
    const float* px = x + (int64_t)i * n;
    float* py = y + (int64_t)i * n;
    float mx = px[0];
    for (int j = 1; j < n; ++j) mx = std::max(mx, px[j]);
    double s = 0.0;
    for (int j = 0; j < n; ++j) {
      py[j] = std::exp(px[j] - mx);
      s += py[j];
    }
    for (int j = 0; j < n; ++j) py[j] = (float)(py[j] / s);
  }
}

}  // namespace ref

}  // namespace sketchlab::kernels
