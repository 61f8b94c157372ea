#pragma once

#include <cassert>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "sketchlab/core/error.hpp"

namespace sketchlab {

// Dense row-major float32 tensor. NCHW for image-shaped data.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    v_.assign(static_cast<size_t>(numel_of(shape_)), 0.0f);
  }

  Tensor(std::initializer_list<int> shape) : Tensor(std::vector<int>(shape)) {}

  static Tensor full(std::vector<int> shape, float value) {
    Tensor t(std::move(shape));
    for (auto& x : t.v_) x = value;
    return t;
  }

  const std::vector<int>& shape() const { return shape_; }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int rank() const { return static_cast<int>(shape_.size()); }

  int64_t numel() const { return static_cast<int64_t>(v_.size()); }
  bool empty() const { return v_.empty(); }

  float* data() { return v_.data(); }
  const float* data() const { return v_.data(); }

  float& operator[](int64_t i) { return v_[static_cast<size_t>(i)]; }
  float operator[](int64_t i) const { return v_[static_cast<size_t>(i)]; }

  // 4-D accessors (n, c, h, w).
  float& at(int n, int c, int h, int w) {
    return v_[flat(n, c, h, w)];
  }
  float at(int n, int c, int h, int w) const {
    return v_[flat(n, c, h, w)];
  }

  void fill(float value) {
    for (auto& x : v_) x = value;
  }

  void reshape(std::vector<int> shape) {
    if (numel_of(shape) != numel())
      fail(ErrorCode::ShapeMismatch, "reshape changes element count");
    shape_ = std::move(shape);
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  std::string shape_str() const {
    std::string s = "(";
    for (size_t i = 0; i < shape_.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape_[i]);
    }
    return s + ")";
  }

  static int64_t numel_of(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return shape.empty() ? 0 : n;
  }

 private:
  size_t flat(int n, int c, int h, int w) const {
    assert(shape_.size() == 4);
    int C = shape_[1], H = shape_[2], W = shape_[3];
    return static_cast<size_t>(((int64_t(n) * C + c) * H + h) * W + w);
  }

  std::vector<int> shape_;
  std::vector<float> v_;
};

}  // namespace sketchlab
