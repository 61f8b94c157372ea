#pragma once

#include <cmath>
#include <cstring>
#include <filesystem>
#include <functional>
#include <string>

#include "sketchlab/core/rng.hpp"
#include "sketchlab/core/tensor.hpp"

namespace test_util {

inline sketchlab::Tensor random_tensor(std::vector<int> shape, uint64_t seed,
                                       double lo = -1.0, double hi = 1.0) {
  sketchlab::Tensor t(std::move(shape));
  sketchlab::Rng rng(seed);
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = (float)rng.uniform(lo, hi);
  return t;
}

inline double max_abs_diff(const sketchlab::Tensor& a, const sketchlab::Tensor& b) {
  double m = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i)
    m = std::max(m, std::abs((double)a[i] - b[i]));
  return m;
}

inline bool bitwise_equal(const sketchlab::Tensor& a, const sketchlab::Tensor& b) {
  if (a.numel() != b.numel()) return false;
  return std::memcmp(a.data(), b.data(), sizeof(float) * (size_t)a.numel()) == 0;
}

// Scratch directory per test binary, wiped on entry.
inline std::string scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("sketchlab_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

// Central finite difference of a scalar function at x.
inline double central_diff(const std::function<double(double)>& f, double x,
                           double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

}  // namespace test_util
