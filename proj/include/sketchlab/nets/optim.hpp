#pragma once

#include <vector>

#include "sketchlab/nets/layers.hpp"

namespace sketchlab::nets {

class Optimizer {
 public:
  explicit Optimizer(Layer& root);
  virtual ~Optimizer() = default;
  virtual void step() = 0;
  void zero_grad();
  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }

 protected:
  std::vector<Param*> params_;
  double lr_ = 0.01;
};

class Sgd : public Optimizer {
 public:
  Sgd(Layer& root, double lr, double momentum = 0.9, double weight_decay = 0.0);
  void step() override;

 private:
  double momentum_, weight_decay_;
  std::vector<Tensor> velocity_;
};

class Adam : public Optimizer {
 public:
  Adam(Layer& root, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);
  void step() override;

 private:
  double beta1_, beta2_, eps_;
  int64_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

}  // namespace sketchlab::nets
