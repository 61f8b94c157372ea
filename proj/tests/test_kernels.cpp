#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sketchlab/core/parallel.hpp"
#include "sketchlab/kernels/kernels.hpp"
#include "test_util.hpp"

using namespace sketchlab;
using test_util::max_abs_diff;
using test_util::random_tensor;

TEST_CASE("gemm matches the naive reference") {
  for (auto [m, k, n] : {std::tuple{4, 7, 16}, {16, 144, 64}, {33, 65, 47}, {1, 1, 1}}) {
    const Tensor a = random_tensor({m, k}, 11);
    const Tensor b = random_tensor({k, n}, 12);
    Tensor c1({m, n}), c2({m, n});
    kernels::gemm(a.data(), b.data(), c1.data(), m, k, n, false);
    kernels::ref::gemm(a.data(), b.data(), c2.data(), m, k, n, false);
    CHECK(max_abs_diff(c1, c2) < 1e-4);

    // accumulate path
    Tensor acc1 = random_tensor({m, n}, 13), acc2 = acc1;
    kernels::gemm(a.data(), b.data(), acc1.data(), m, k, n, true);
    kernels::ref::gemm(a.data(), b.data(), acc2.data(), m, k, n, true);
    CHECK(max_abs_diff(acc1, acc2) < 1e-4);
  }
}

TEST_CASE("gemm_bt matches the naive reference") {
  const int m = 24, n = 100, k = 36;
  const Tensor a = random_tensor({m, n}, 21);
  const Tensor b = random_tensor({k, n}, 22);
  Tensor c1({m, k}), c2({m, k});
  kernels::gemm_bt(a.data(), b.data(), c1.data(), m, n, k, false);
  kernels::ref::gemm_bt(a.data(), b.data(), c2.data(), m, n, k, false);
  CHECK(max_abs_diff(c1, c2) < 1e-4);
}

TEST_CASE("parallel kernels are bit-identical to their single-thread run") {
  const int m = 37, k = 129, n = 251;
  const Tensor a = random_tensor({m, k}, 31);
  const Tensor b = random_tensor({k, n}, 32);
  Tensor c_par({m, n}), c_ser({m, n});
  par::set_enabled(true);
  kernels::gemm(a.data(), b.data(), c_par.data(), m, k, n, false);
  par::set_enabled(false);
  kernels::gemm(a.data(), b.data(), c_ser.data(), m, k, n, false);
  par::set_enabled(true);
  CHECK(test_util::bitwise_equal(c_par, c_ser));

  const Tensor x = random_tensor({3, 8, 13, 17}, 33);
  Tensor y_par({3, 8, 13, 17}), y_ser({3, 8, 13, 17});
  kernels::relu_fwd(x.data(), y_par.data(), x.numel());
  par::set_enabled(false);
  kernels::relu_fwd(x.data(), y_ser.data(), x.numel());
  par::set_enabled(true);
  CHECK(test_util::bitwise_equal(y_par, y_ser));
}

TEST_CASE("im2col/col2im convolution matches direct convolution") {
  const int b = 2, cin = 3, cout = 5, h = 9, w = 11, kk = 3, stride = 2, pad = 1;
  const Tensor x = random_tensor({b, cin, h, w}, 41);
  const Tensor wgt = random_tensor({cout, cin * kk * kk}, 42);
  const int oh = kernels::conv_out_size(h, kk, stride, pad);
  const int ow = kernels::conv_out_size(w, kk, stride, pad);

  Tensor y({b, cout, oh, ow});
  Tensor col({cin * kk * kk, oh * ow});
  for (int bi = 0; bi < b; ++bi) {
    kernels::im2col(x.data() + (int64_t)bi * cin * h * w, cin, h, w, kk, kk, stride,
                    pad, col.data(), oh, ow);
    kernels::gemm(wgt.data(), col.data(), y.data() + (int64_t)bi * cout * oh * ow,
                  cout, cin * kk * kk, oh * ow, false);
  }

  Tensor y_ref({b, cout, oh, ow});
  kernels::ref::conv2d(x.data(), wgt.data(), nullptr, y_ref.data(), b, cin, h, w,
                       cout, kk, kk, stride, pad);
  CHECK(max_abs_diff(y, y_ref) < 1e-4);
}

TEST_CASE("col2im is the adjoint of im2col") {
  // <im2col(x), c> == <x, col2im(c)> for random c: exact adjointness up to fp
  const int cin = 2, h = 6, w = 5, kk = 3, stride = 2, pad = 1;
  const int oh = kernels::conv_out_size(h, kk, stride, pad);
  const int ow = kernels::conv_out_size(w, kk, stride, pad);
  const Tensor x = random_tensor({cin, h, w}, 51);
  const Tensor c = random_tensor({cin * kk * kk, oh * ow}, 52);

  Tensor col({cin * kk * kk, oh * ow});
  kernels::im2col(x.data(), cin, h, w, kk, kk, stride, pad, col.data(), oh, ow);
  Tensor back({cin, h, w});
  kernels::col2im(c.data(), cin, h, w, kk, kk, stride, pad, back.data(), oh, ow);

  double lhs = 0.0, rhs = 0.0;
  for (int64_t i = 0; i < col.numel(); ++i) lhs += (double)col[i] * c[i];
  for (int64_t i = 0; i < x.numel(); ++i) rhs += (double)x[i] * back[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-4));
}

TEST_CASE("bn_stats computes per-channel mean and variance") {
  const int n = 4, c = 3, hw = 10;
  const Tensor x = random_tensor({n, c, 2, 5}, 61);
  Tensor mean({c}), var({c});
  kernels::bn_stats(x.data(), n, c, hw, mean.data(), var.data());
  for (int ci = 0; ci < c; ++ci) {
    double m = 0.0, v = 0.0;
    for (int ni = 0; ni < n; ++ni)
      for (int i = 0; i < hw; ++i) m += x[((int64_t)ni * c + ci) * hw + i];
    m /= n * hw;
    for (int ni = 0; ni < n; ++ni)
      for (int i = 0; i < hw; ++i) {
        const double d = x[((int64_t)ni * c + ci) * hw + i] - m;
        v += d * d;
      }
    v /= n * hw;
    CHECK(mean[ci] == doctest::Approx(m).epsilon(1e-5));
    CHECK(var[ci] == doctest::Approx(v).epsilon(1e-5));
  }
}

TEST_CASE("maxpool backward routes gradient to the argmax") {
  const int n = 1, c = 1, h = 4, w = 4;
  Tensor x({n, c, h, w});
  for (int i = 0; i < 16; ++i) x[i] = (float)i;
  const int oh = kernels::conv_out_size(h, 2, 2, 0);
  const int ow = kernels::conv_out_size(w, 2, 2, 0);
  Tensor y({n, c, oh, ow});
  std::vector<int32_t> argmax((size_t)oh * ow);
  kernels::maxpool_fwd(x.data(), y.data(), argmax.data(), n, c, h, w, 2, 2, 0, oh, ow);
  CHECK(y[0] == 5.0f);
  CHECK(y[3] == 15.0f);

  Tensor dy({n, c, oh, ow});
  dy.fill(1.0f);
  Tensor dx({n, c, h, w});
  kernels::maxpool_bwd(dy.data(), argmax.data(), dx.data(), n, c, h, w, oh, ow);
  double sum = 0.0;
  for (int i = 0; i < 16; ++i) sum += dx[i];
  CHECK(sum == doctest::Approx(4.0));
  CHECK(dx[5] == 1.0f);
  CHECK(dx[15] == 1.0f);
}

TEST_CASE("bilinear upsample matches reference and corners align") {
  const Tensor x = random_tensor({1, 2, 3, 4}, 71);
  Tensor y({1, 2, 9, 12}), y_ref({1, 2, 9, 12});
  kernels::bilinear_fwd(x.data(), y.data(), 1, 2, 3, 4, 9, 12);
  kernels::ref::bilinear_fwd(x.data(), y_ref.data(), 1, 2, 3, 4, 9, 12);
  CHECK(max_abs_diff(y, y_ref) < 1e-6);
  // align_corners: the corner samples are preserved
  CHECK(y[0] == doctest::Approx(x[0]));
  CHECK(y.at(0, 0, 8, 11) == doctest::Approx(x.at(0, 0, 2, 3)));
}

TEST_CASE("bilinear backward is the adjoint of forward") {
  const int ih = 3, iw = 5, oh = 8, ow = 11;
  const Tensor x = random_tensor({1, 1, ih, iw}, 81);
  const Tensor g = random_tensor({1, 1, oh, ow}, 82);
  Tensor y({1, 1, oh, ow});
  kernels::bilinear_fwd(x.data(), y.data(), 1, 1, ih, iw, oh, ow);
  Tensor dx({1, 1, ih, iw});
  kernels::bilinear_bwd(g.data(), dx.data(), 1, 1, ih, iw, oh, ow);
  double lhs = 0.0, rhs = 0.0;
  for (int64_t i = 0; i < y.numel(); ++i) lhs += (double)y[i] * g[i];
  for (int64_t i = 0; i < x.numel(); ++i) rhs += (double)x[i] * dx[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-4));
}

TEST_CASE("softmax rows sum to one and match reference") {
  const Tensor x = random_tensor({7, 10}, 91, -5.0, 5.0);
  Tensor y({7, 10}), y_ref({7, 10});
  kernels::softmax_rows(x.data(), y.data(), 7, 10);
  kernels::ref::softmax_rows(x.data(), y_ref.data(), 7, 10);
  CHECK(max_abs_diff(y, y_ref) < 1e-6);
  for (int i = 0; i < 7; ++i) {
    double s = 0.0;
    for (int j = 0; j < 10; ++j) s += y[(int64_t)i * 10 + j];
    CHECK(s == doctest::Approx(1.0).epsilon(1e-5));
  }
}

TEST_CASE("depthwise conv matches a per-channel direct computation") {
  const int n = 2, c = 3, h = 6, w = 6;
  const Tensor x = random_tensor({n, c, h, w}, 101);
  const Tensor wgt = random_tensor({c, 9}, 102);
  const int oh = kernels::conv_out_size(h, 3, 2, 1);
  const int ow = kernels::conv_out_size(w, 3, 2, 1);
  Tensor y({n, c, oh, ow});
  kernels::depthwise_fwd(x.data(), wgt.data(), y.data(), n, c, h, w, 3, 3, 2, 1, oh, ow);
  for (int ni = 0; ni < n; ++ni)
    for (int ci = 0; ci < c; ++ci)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          double s = 0.0;
          for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
              const int iy = oy * 2 - 1 + ky, ix = ox * 2 - 1 + kx;
              if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
              s += (double)x.at(ni, ci, iy, ix) * wgt[(int64_t)ci * 9 + ky * 3 + kx];
            }
          CHECK(y.at(ni, ci, oy, ox) == doctest::Approx(s).epsilon(1e-4));
        }
}
