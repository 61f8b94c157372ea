// Times the OpenMP kernels against their serial references.

#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include "sketchlab/core/parallel.hpp"
#include "sketchlab/core/rng.hpp"
#include "sketchlab/core/tensor.hpp"
#include "sketchlab/kernels/kernels.hpp"

using namespace sketchlab;

namespace {

double seconds_per_call(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(t1 - t0).count() / reps;
}

Tensor random_tensor(std::vector<int> shape, uint64_t seed) {
  Tensor t(std::move(shape));
  Rng rng(seed);
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = (float)rng.uniform(-1.0, 1.0);
  return t;
}

void bench_gemm(int m, int k, int n, int reps) {
  const Tensor a = random_tensor({m, k}, 1);
  const Tensor b = random_tensor({k, n}, 2);
  Tensor c({m, n});
  const double flops = 2.0 * m * k * n;

  const double t_ref = seconds_per_call(
      [&] { kernels::ref::gemm(a.data(), b.data(), c.data(), m, k, n, false); }, reps);
  par::set_enabled(false);
  const double t_serial = seconds_per_call(
      [&] { kernels::gemm(a.data(), b.data(), c.data(), m, k, n, false); }, reps);
  par::set_enabled(true);
  const double t_omp = seconds_per_call(
      [&] { kernels::gemm(a.data(), b.data(), c.data(), m, k, n, false); }, reps);

  std::printf("gemm %4dx%4dx%4d  ref %7.2f  blocked %7.2f  omp %7.2f GFLOP/s  (omp/ref %.1fx)\n",
              m, k, n, flops / t_ref / 1e9, flops / t_serial / 1e9,
              flops / t_omp / 1e9, t_ref / t_omp);
}

void bench_conv(int b, int cin, int cout, int hw, int reps) {
  const Tensor x = random_tensor({b, cin, hw, hw}, 3);
  const Tensor w = random_tensor({cout, cin * 9}, 4);
  const int oh = hw;
  Tensor y({b, cout, oh, oh});
  Tensor col({cin * 9, oh * oh});
  const double flops = 2.0 * b * cout * cin * 9 * oh * oh;

  auto run = [&] {
    for (int bi = 0; bi < b; ++bi) {
      kernels::im2col(x.data() + (int64_t)bi * cin * hw * hw, cin, hw, hw, 3, 3, 1,
                      1, col.data(), oh, oh);
      kernels::gemm(w.data(), col.data(), y.data() + (int64_t)bi * cout * oh * oh,
                    cout, cin * 9, oh * oh, false);
    }
  };
  auto run_ref = [&] {
    kernels::ref::conv2d(x.data(), w.data(), nullptr, y.data(), b, cin, hw, hw,
                         cout, 3, 3, 1, 1);
  };

  const double t_ref = seconds_per_call(run_ref, std::max(1, reps / 4));
  par::set_enabled(false);
  const double t_serial = seconds_per_call(run, reps);
  par::set_enabled(true);
  const double t_omp = seconds_per_call(run, reps);

  std::printf("conv3x3 b=%2d %3d->%3d @%2dx%2d  ref %7.2f  im2col %7.2f  omp %7.2f GFLOP/s  (omp/ref %.1fx)\n",
              b, cin, cout, hw, hw, flops / t_ref / 1e9, flops / t_serial / 1e9,
              flops / t_omp / 1e9, t_ref / t_omp);
}

}  // namespace

int main() {
  std::printf("threads: %d\n", par::num_threads());
  bench_gemm(128, 1152, 1024, 20);
  bench_gemm(64, 576, 256, 50);
  bench_gemm(16, 144, 1024, 50);
  bench_conv(8, 16, 16, 32, 10);
  bench_conv(8, 64, 64, 8, 20);
  bench_conv(32, 32, 32, 16, 5);
  return 0;
}
