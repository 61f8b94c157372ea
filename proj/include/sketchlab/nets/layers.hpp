#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "sketchlab/core/rng.hpp"
#include "sketchlab/core/tensor.hpp"

namespace sketchlab::nets {

enum class InitKind { HeConv, HeLinear, Zero, One };

struct Param {
  Tensor value;
  Tensor grad;
  InitKind init = InitKind::Zero;
  bool trainable = true;  // running BN statistics are saved but not optimized

  explicit Param(std::vector<int> shape, InitKind k, bool train = true)
      : value(shape), grad(std::move(shape)), init(k), trainable(train) {}
  void zero_grad() { grad.fill(0.0f); }
};

using ParamVisitor = std::function<void(const std::string&, Param&)>;

// Layers cache whatever the backward pass needs during forward (in both
// train and eval mode, so saliency backprop works on frozen models).
// backward() accumulates parameter gradients and returns the input gradient.
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& x, bool train) = 0;
  virtual Tensor backward(const Tensor& dy) = 0;
  virtual void visit_params(const std::string& prefix, const ParamVisitor& fn) {}
};

class Conv2d : public Layer {
 public:
  Conv2d(int cin, int cout, int kernel, int stride, int pad, bool bias = false);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  void visit_params(const std::string& prefix, const ParamVisitor& fn) override;

  int cin() const { return cin_; }
  int cout() const { return cout_; }

 private:
  int cin_, cout_, kernel_, stride_, pad_;
  Param weight_;  // (cout, cin*k*k)
  std::unique_ptr<Param> bias_;
  Tensor x_;
};

// Transposed convolution; weight layout (cin, cout*k*k).
class ConvTranspose2d : public Layer {
 public:
  ConvTranspose2d(int cin, int cout, int kernel, int stride, int pad,
                  bool bias = false);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  void visit_params(const std::string& prefix, const ParamVisitor& fn) override;

 private:
  int cin_, cout_, kernel_, stride_, pad_;
  Param weight_;
  std::unique_ptr<Param> bias_;
  Tensor x_;
  int oh_ = 0, ow_ = 0;
};

class DepthwiseConv2d : public Layer {
 public:
  DepthwiseConv2d(int channels, int kernel, int stride, int pad);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  void visit_params(const std::string& prefix, const ParamVisitor& fn) override;

 private:
  int channels_, kernel_, stride_, pad_;
  Param weight_;  // (channels, k*k)
  Tensor x_;
};

class BatchNorm2d : public Layer {
 public:
  explicit BatchNorm2d(int channels, float momentum = 0.1f, float eps = 1e-5f);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  void visit_params(const std::string& prefix, const ParamVisitor& fn) override;

 private:
  int channels_;
  float momentum_, eps_;
  Param gamma_, beta_, running_mean_, running_var_;
  Tensor x_, batch_mean_, batch_var_;
  bool last_train_ = false;
};

class ReLU : public Layer {
 public:
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;

 private:
  Tensor x_;
};

class LeakyReLU : public Layer {
 public:
  explicit LeakyReLU(float slope = 0.2f) : slope_(slope) {}
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;

 private:
  float slope_;
  Tensor x_;
};

class Sigmoid : public Layer {
 public:
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;

 private:
  Tensor y_;
};

class MaxPool2d : public Layer {
 public:
  MaxPool2d(int kernel, int stride, int pad);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;

 private:
  int kernel_, stride_, pad_;
  std::vector<int32_t> argmax_;
  std::vector<int> in_shape_;
  int oh_ = 0, ow_ = 0;
};

// (B,C,H,W) -> (B,C)
class GlobalAvgPool : public Layer {
 public:
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;

 private:
  std::vector<int> in_shape_;
};

class Flatten : public Layer {
 public:
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;

 private:
  std::vector<int> in_shape_;
};

class Linear : public Layer {
 public:
  Linear(int in, int out, bool bias = true);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  void visit_params(const std::string& prefix, const ParamVisitor& fn) override;

  int in_features() const { return in_; }
  int out_features() const { return out_; }

 private:
  int in_, out_;
  Param weight_;  // (out, in)
  std::unique_ptr<Param> bias_;
  Tensor x_;
};

// Bilinear resize to a fixed output grid (align_corners=true).
class Upsample : public Layer {
 public:
  Upsample(int out_h, int out_w) : oh_(out_h), ow_(out_w) {}
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;

 private:
  int oh_, ow_;
  std::vector<int> in_shape_;
};

// ResNet basic block: conv-bn-relu-conv-bn + identity (or 1x1 projection).
class BasicBlock : public Layer {
 public:
  BasicBlock(int cin, int cout, int stride);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  void visit_params(const std::string& prefix, const ParamVisitor& fn) override;

 private:
  Conv2d conv1_;
  BatchNorm2d bn1_;
  Conv2d conv2_;
  BatchNorm2d bn2_;
  std::unique_ptr<Conv2d> down_conv_;
  std::unique_ptr<BatchNorm2d> down_bn_;
  Tensor pre1_, sum_;  // cached pre-activations for the two ReLUs
};

// Named chain of layers with optional per-child activation/gradient taps.
class Sequential : public Layer {
 public:
  Layer* add(const std::string& name, std::unique_ptr<Layer> layer);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  void visit_params(const std::string& prefix, const ParamVisitor& fn) override;

  void set_capture(bool on) { capture_ = on; }
  bool has_child(const std::string& name) const;
  // forward starting after the named child, from a supplied activation
  Tensor forward_from(const std::string& after_child, const Tensor& act, bool train);
  // backward entered at the named child with the gradient of its output;
  // children after it are skipped
  Tensor backward_from(const std::string& from_child, const Tensor& dy);
  const Tensor& activation(const std::string& name) const;
  const Tensor& gradient(const std::string& name) const;

 private:
  std::vector<std::pair<std::string, std::unique_ptr<Layer>>> children_;
  bool capture_ = false;
  std::map<std::string, Tensor> activations_, gradients_;
};

// Initializes every parameter from a single seeded stream in visit order.
void init_params(Layer& root, uint64_t seed);
void zero_grads(Layer& root);
int64_t param_count(Layer& root, bool trainable_only = true);

}  // namespace sketchlab::nets
