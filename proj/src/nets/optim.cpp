#include "sketchlab/nets/optim.hpp"

#include <cmath>

namespace sketchlab::nets {

Optimizer::Optimizer(Layer& root) {
  root.visit_params("", [this](const std::string&, Param& p) {
    if (p.trainable) params_.push_back(&p);
  });
}

void Optimizer::zero_grad() {
  for (Param* p : params_) p->zero_grad();
}

Sgd::Sgd(Layer& root, double lr, double momentum, double weight_decay)
    : Optimizer(root), momentum_(momentum), weight_decay_(weight_decay) {
  lr_ = lr;
  velocity_.reserve(params_.size());
  for (Param* p : params_) velocity_.emplace_back(p->value.shape());
}

void Sgd::step() {
  const float lr = (float)lr_;
  const float mom = (float)momentum_;
  const float wd = (float)weight_decay_;
  for (size_t i = 0; i < params_.size(); ++i) {
    Param& p = *params_[i];
    float* v = velocity_[i].data();
    float* w = p.value.data();
    const float* g = p.grad.data();
    const int64_t n = p.value.numel();
    for (int64_t j = 0; j < n; ++j) {
      const float grad = g[j] + wd * w[j];
      v[j] = mom * v[j] + grad;
      w[j] -= lr * v[j];
    }
  }
}

Adam::Adam(Layer& root, double lr, double beta1, double beta2, double eps)
    : Optimizer(root), beta1_(beta1), beta2_(beta2), eps_(eps) {
  lr_ = lr;
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (Param* p : params_) {
    m_.emplace_back(p->value.shape());
    v_.emplace_back(p->value.shape());
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, (double)t_);
  const double bc2 = 1.0 - std::pow(beta2_, (double)t_);
  const float alpha = (float)(lr_ * std::sqrt(bc2) / bc1);
  const float b1 = (float)beta1_, b2 = (float)beta2_, eps = (float)eps_;
  for (size_t i = 0; i < params_.size(); ++i) {
    Param& p = *params_[i];
    float* m = m_[i].data();
    float* v = v_[i].data();
    float* w = p.value.data();
    const float* g = p.grad.data();
    const int64_t n = p.value.numel();
    for (int64_t j = 0; j < n; ++j) {
      m[j] = b1 * m[j] + (1 - b1) * g[j];
      v[j] = b2 * v[j] + (1 - b2) * g[j] * g[j];
      w[j] -= alpha * m[j] / (std::sqrt(v[j]) + eps);
    }
  }
}

}  // namespace sketchlab::nets
