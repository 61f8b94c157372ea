#include "sketchlab/nets/layers.hpp"

#include <cmath>
#include <cstring>

#include "sketchlab/core/error.hpp"
#include "sketchlab/core/parallel.hpp"
#include "sketchlab/kernels/kernels.hpp"

namespace sketchlab::nets {

using namespace sketchlab::kernels;

// ---------------------------------------------------------------------------
// Conv2d
// ---------------------------------------------------------------------------

Conv2d::Conv2d(int cin, int cout, int kernel, int stride, int pad, bool bias)
    : cin_(cin),
      cout_(cout),
      kernel_(kernel),
      stride_(stride),
      pad_(pad),
      weight_({cout, cin * kernel * kernel}, InitKind::HeConv) {
  if (bias) bias_ = std::make_unique<Param>(std::vector<int>{cout}, InitKind::Zero);
}

Tensor Conv2d::forward(const Tensor& x, bool) {
  x_ = x;
  const int b = x.dim(0), h = x.dim(2), w = x.dim(3);
  const int oh = conv_out_size(h, kernel_, stride_, pad_);
  const int ow = conv_out_size(w, kernel_, stride_, pad_);
  const int kdim = cin_ * kernel_ * kernel_;
  const int npix = oh * ow;
  Tensor y({b, cout_, oh, ow});
  // batch items are independent; inner kernels detect the enclosing region
  const bool par = par::active() && b >= 2;
#pragma omp parallel for schedule(static) if (par)
  for (int bi = 0; bi < b; ++bi) {
    Tensor col({kdim, npix});
    im2col(x.data() + (int64_t)bi * cin_ * h * w, cin_, h, w, kernel_, kernel_,
           stride_, pad_, col.data(), oh, ow);
    gemm(weight_.value.data(), col.data(), y.data() + (int64_t)bi * cout_ * npix,
         cout_, kdim, npix, false);
    if (bias_) {
      for (int co = 0; co < cout_; ++co) {
        float* p = y.data() + ((int64_t)bi * cout_ + co) * npix;
        const float add = bias_->value[co];
        for (int i = 0; i < npix; ++i) p[i] += add;
      }
    }
  }
  return y;
}

Tensor Conv2d::backward(const Tensor& dy) {
  const int b = x_.dim(0), h = x_.dim(2), w = x_.dim(3);
  const int oh = dy.dim(2), ow = dy.dim(3);
  const int kdim = cin_ * kernel_ * kernel_;
  const int npix = oh * ow;

  Tensor wt({kdim, cout_});
  transpose(weight_.value.data(), wt.data(), cout_, kdim);

  // data gradients are per-image independent
  Tensor dx({b, cin_, h, w});
  const bool par = par::active() && b >= 2;
#pragma omp parallel for schedule(static) if (par)
  for (int bi = 0; bi < b; ++bi) {
    Tensor dcol({kdim, npix});
    const float* dyb = dy.data() + (int64_t)bi * cout_ * npix;
    gemm(wt.data(), dyb, dcol.data(), kdim, cout_, npix, false);
    col2im(dcol.data(), cin_, h, w, kernel_, kernel_, stride_, pad_,
           dx.data() + (int64_t)bi * cin_ * h * w, oh, ow);
  }

  // weight gradient accumulates across the batch in a fixed order
  Tensor col({kdim, npix});
  for (int bi = 0; bi < b; ++bi) {
    const float* dyb = dy.data() + (int64_t)bi * cout_ * npix;
    im2col(x_.data() + (int64_t)bi * cin_ * h * w, cin_, h, w, kernel_, kernel_,
           stride_, pad_, col.data(), oh, ow);
    gemm_bt(dyb, col.data(), weight_.grad.data(), cout_, npix, kdim, true);
  }
  if (bias_) {
    const bool cpar = par::active();
#pragma omp parallel for schedule(static) if (cpar)
    for (int co = 0; co < cout_; ++co) {
      double s = 0.0;
      for (int bi = 0; bi < b; ++bi) {
        const float* p = dy.data() + ((int64_t)bi * cout_ + co) * npix;
        for (int i = 0; i < npix; ++i) s += p[i];
      }
      bias_->grad[co] += (float)s;
    }
  }
  return dx;
}

void Conv2d::visit_params(const std::string& prefix, const ParamVisitor& fn) {
  fn(prefix + "weight", weight_);
  if (bias_) fn(prefix + "bias", *bias_);
}

// ---------------------------------------------------------------------------
// ConvTranspose2d
// ---------------------------------------------------------------------------

ConvTranspose2d::ConvTranspose2d(int cin, int cout, int kernel, int stride,
                                 int pad, bool bias)
    : cin_(cin),
      cout_(cout),
      kernel_(kernel),
      stride_(stride),
      pad_(pad),
      weight_({cin, cout * kernel * kernel}, InitKind::HeConv) {
  if (bias) bias_ = std::make_unique<Param>(std::vector<int>{cout}, InitKind::Zero);
}

Tensor ConvTranspose2d::forward(const Tensor& x, bool) {
  x_ = x;
  const int b = x.dim(0), ih = x.dim(2), iw = x.dim(3);
  oh_ = (ih - 1) * stride_ - 2 * pad_ + kernel_;
  ow_ = (iw - 1) * stride_ - 2 * pad_ + kernel_;
  const int kdim = cout_ * kernel_ * kernel_;
  const int nin = ih * iw;

  Tensor wt({kdim, cin_});
  transpose(weight_.value.data(), wt.data(), cin_, kdim);
  Tensor y({b, cout_, oh_, ow_});
  const bool par = par::active() && b >= 2;
#pragma omp parallel for schedule(static) if (par)
  for (int bi = 0; bi < b; ++bi) {
    Tensor col({kdim, nin});
    gemm(wt.data(), x.data() + (int64_t)bi * cin_ * nin, col.data(), kdim, cin_,
         nin, false);
    col2im(col.data(), cout_, oh_, ow_, kernel_, kernel_, stride_, pad_,
           y.data() + (int64_t)bi * cout_ * oh_ * ow_, ih, iw);
    if (bias_) {
      const int npix = oh_ * ow_;
      for (int co = 0; co < cout_; ++co) {
        float* p = y.data() + ((int64_t)bi * cout_ + co) * npix;
        const float add = bias_->value[co];
        for (int i = 0; i < npix; ++i) p[i] += add;
      }
    }
  }
  return y;
}

Tensor ConvTranspose2d::backward(const Tensor& dy) {
  const int b = x_.dim(0), ih = x_.dim(2), iw = x_.dim(3);
  const int kdim = cout_ * kernel_ * kernel_;
  const int nin = ih * iw;
  Tensor col({kdim, nin});
  Tensor dx({b, cin_, ih, iw});
  for (int bi = 0; bi < b; ++bi) {
    im2col(dy.data() + (int64_t)bi * cout_ * oh_ * ow_, cout_, oh_, ow_, kernel_,
           kernel_, stride_, pad_, col.data(), ih, iw);
    // dx = W * col
    gemm(weight_.value.data(), col.data(), dx.data() + (int64_t)bi * cin_ * nin,
         cin_, kdim, nin, false);
    // dW += x_b * col^T
    gemm_bt(x_.data() + (int64_t)bi * cin_ * nin, col.data(), weight_.grad.data(),
            cin_, nin, kdim, true);
  }
  if (bias_) {
    const int npix = oh_ * ow_;
    const bool par = par::active();
#pragma omp parallel for schedule(static) if (par)
    for (int co = 0; co < cout_; ++co) {
      double s = 0.0;
      for (int bi = 0; bi < b; ++bi) {
        const float* p = dy.data() + ((int64_t)bi * cout_ + co) * npix;
        for (int i = 0; i < npix; ++i) s += p[i];
      }
      bias_->grad[co] += (float)s;
    }
  }
  return dx;
}

void ConvTranspose2d::visit_params(const std::string& prefix, const ParamVisitor& fn) {
  fn(prefix + "weight", weight_);
  if (bias_) fn(prefix + "bias", *bias_);
}

// ---------------------------------------------------------------------------
// DepthwiseConv2d
// ---------------------------------------------------------------------------

DepthwiseConv2d::DepthwiseConv2d(int channels, int kernel, int stride, int pad)
    : channels_(channels),
      kernel_(kernel),
      stride_(stride),
      pad_(pad),
      weight_({channels, kernel * kernel}, InitKind::HeConv) {}

Tensor DepthwiseConv2d::forward(const Tensor& x, bool) {
  x_ = x;
  const int b = x.dim(0), h = x.dim(2), w = x.dim(3);
  const int oh = conv_out_size(h, kernel_, stride_, pad_);
  const int ow = conv_out_size(w, kernel_, stride_, pad_);
  Tensor y({b, channels_, oh, ow});
  depthwise_fwd(x.data(), weight_.value.data(), y.data(), b, channels_, h, w,
                kernel_, kernel_, stride_, pad_, oh, ow);
  return y;
}

Tensor DepthwiseConv2d::backward(const Tensor& dy) {
  const int b = x_.dim(0), h = x_.dim(2), w = x_.dim(3);
  const int oh = dy.dim(2), ow = dy.dim(3);
  Tensor dx({b, channels_, h, w});
  depthwise_bwd_data(dy.data(), weight_.value.data(), dx.data(), b, channels_, h,
                     w, kernel_, kernel_, stride_, pad_, oh, ow);
  Tensor dw({channels_, kernel_ * kernel_});
  depthwise_bwd_weight(x_.data(), dy.data(), dw.data(), b, channels_, h, w,
                       kernel_, kernel_, stride_, pad_, oh, ow);
  axpy(1.0f, dw.data(), weight_.grad.data(), dw.numel());
  return dx;
}

void DepthwiseConv2d::visit_params(const std::string& prefix, const ParamVisitor& fn) {
  fn(prefix + "weight", weight_);
}

// ---------------------------------------------------------------------------
// BatchNorm2d
// ---------------------------------------------------------------------------

BatchNorm2d::BatchNorm2d(int channels, float momentum, float eps)
    : channels_(channels),
      momentum_(momentum),
      eps_(eps),
      gamma_({channels}, InitKind::One),
      beta_({channels}, InitKind::Zero),
      running_mean_({channels}, InitKind::Zero, false),
      running_var_({channels}, InitKind::One, false) {}

Tensor BatchNorm2d::forward(const Tensor& x, bool train) {
  x_ = x;
  last_train_ = train;
  const int b = x.dim(0), hw = x.dim(2) * x.dim(3);
  Tensor y({x.dim(0), x.dim(1), x.dim(2), x.dim(3)});
  if (train) {
    batch_mean_ = Tensor({channels_});
    batch_var_ = Tensor({channels_});
    bn_stats(x.data(), b, channels_, hw, batch_mean_.data(), batch_var_.data());
    bn_fwd(x.data(), y.data(), b, channels_, hw, batch_mean_.data(),
           batch_var_.data(), gamma_.value.data(), beta_.value.data(), eps_);
    for (int c = 0; c < channels_; ++c) {
      running_mean_.value[c] =
          (1 - momentum_) * running_mean_.value[c] + momentum_ * batch_mean_[c];
      running_var_.value[c] =
          (1 - momentum_) * running_var_.value[c] + momentum_ * batch_var_[c];
    }
  } else {
    bn_fwd(x.data(), y.data(), b, channels_, hw, running_mean_.value.data(),
           running_var_.value.data(), gamma_.value.data(), beta_.value.data(),
           eps_);
  }
  return y;
}

Tensor BatchNorm2d::backward(const Tensor& dy) {
  const int b = x_.dim(0), hw = x_.dim(2) * x_.dim(3);
  Tensor dx({x_.dim(0), x_.dim(1), x_.dim(2), x_.dim(3)});
  if (last_train_) {
    Tensor dgamma({channels_}), dbeta({channels_});
    bn_bwd(x_.data(), dy.data(), dx.data(), b, channels_, hw, batch_mean_.data(),
           batch_var_.data(), gamma_.value.data(), eps_, dgamma.data(),
           dbeta.data());
    axpy(1.0f, dgamma.data(), gamma_.grad.data(), channels_);
    axpy(1.0f, dbeta.data(), beta_.grad.data(), channels_);
  } else {
    // frozen statistics: normalization is a fixed affine map per channel
    const bool par = par::enabled();
#pragma omp parallel for schedule(static) if (par)
    for (int c = 0; c < channels_; ++c) {
      const float inv = 1.0f / std::sqrt(running_var_.value[c] + eps_);
      const float g = gamma_.value[c] * inv;
      double dgam = 0.0, dbet = 0.0;
      for (int bi = 0; bi < b; ++bi) {
        const float* px = x_.data() + ((int64_t)bi * channels_ + c) * hw;
        const float* pdy = dy.data() + ((int64_t)bi * channels_ + c) * hw;
        float* pdx = dx.data() + ((int64_t)bi * channels_ + c) * hw;
        for (int i = 0; i < hw; ++i) {
          pdx[i] = pdy[i] * g;
          dgam += pdy[i] * (px[i] - running_mean_.value[c]) * inv;
          dbet += pdy[i];
        }
      }
      gamma_.grad[c] += (float)dgam;
      beta_.grad[c] += (float)dbet;
    }
  }
  return dx;
}

void BatchNorm2d::visit_params(const std::string& prefix, const ParamVisitor& fn) {
  fn(prefix + "gamma", gamma_);
  fn(prefix + "beta", beta_);
  fn(prefix + "running_mean", running_mean_);
  fn(prefix + "running_var", running_var_);
}

// ---------------------------------------------------------------------------
// Activations, pooling, linear
// ---------------------------------------------------------------------------

Tensor ReLU::forward(const Tensor& x, bool) {
  x_ = x;
  Tensor y(x.shape());
  relu_fwd(x.data(), y.data(), x.numel());
  return y;
}

Tensor ReLU::backward(const Tensor& dy) {
  Tensor dx(x_.shape());
  relu_bwd(x_.data(), dy.data(), dx.data(), dx.numel());
  return dx;
}

Tensor LeakyReLU::forward(const Tensor& x, bool) {
  x_ = x;
  Tensor y(x.shape());
  leaky_relu_fwd(x.data(), y.data(), x.numel(), slope_);
  return y;
}

Tensor LeakyReLU::backward(const Tensor& dy) {
  Tensor dx(x_.shape());
  leaky_relu_bwd(x_.data(), dy.data(), dx.data(), dx.numel(), slope_);
  return dx;
}

Tensor Sigmoid::forward(const Tensor& x, bool) {
  Tensor y(x.shape());
  sigmoid_fwd(x.data(), y.data(), x.numel());
  y_ = y;
  return y;
}

Tensor Sigmoid::backward(const Tensor& dy) {
  Tensor dx(y_.shape());
  sigmoid_bwd(y_.data(), dy.data(), dx.data(), dx.numel());
  return dx;
}

MaxPool2d::MaxPool2d(int kernel, int stride, int pad)
    : kernel_(kernel), stride_(stride), pad_(pad) {}

Tensor MaxPool2d::forward(const Tensor& x, bool) {
  in_shape_ = x.shape();
  const int b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  oh_ = conv_out_size(h, kernel_, stride_, pad_);
  ow_ = conv_out_size(w, kernel_, stride_, pad_);
  Tensor y({b, c, oh_, ow_});
  argmax_.resize((size_t)b * c * oh_ * ow_);
  maxpool_fwd(x.data(), y.data(), argmax_.data(), b, c, h, w, kernel_, stride_,
              pad_, oh_, ow_);
  return y;
}

Tensor MaxPool2d::backward(const Tensor& dy) {
  Tensor dx(in_shape_);
  maxpool_bwd(dy.data(), argmax_.data(), dx.data(), in_shape_[0], in_shape_[1],
              in_shape_[2], in_shape_[3], oh_, ow_);
  return dx;
}

Tensor GlobalAvgPool::forward(const Tensor& x, bool) {
  in_shape_ = x.shape();
  Tensor y({x.dim(0), x.dim(1)});
  global_avgpool_fwd(x.data(), y.data(), x.dim(0), x.dim(1), x.dim(2) * x.dim(3));
  return y;
}

Tensor GlobalAvgPool::backward(const Tensor& dy) {
  Tensor dx(in_shape_);
  global_avgpool_bwd(dy.data(), dx.data(), in_shape_[0], in_shape_[1],
                     in_shape_[2] * in_shape_[3]);
  return dx;
}

Tensor Flatten::forward(const Tensor& x, bool) {
  in_shape_ = x.shape();
  Tensor y = x;
  y.reshape({x.dim(0), (int)(x.numel() / x.dim(0))});
  return y;
}

Tensor Flatten::backward(const Tensor& dy) {
  Tensor dx = dy;
  dx.reshape(in_shape_);
  return dx;
}

Linear::Linear(int in, int out, bool bias)
    : in_(in), out_(out), weight_({out, in}, InitKind::HeLinear) {
  if (bias) bias_ = std::make_unique<Param>(std::vector<int>{out}, InitKind::Zero);
}

Tensor Linear::forward(const Tensor& x, bool) {
  x_ = x;
  const int b = x.dim(0);
  Tensor y({b, out_});
  gemm_bt(x.data(), weight_.value.data(), y.data(), b, in_, out_, false);
  if (bias_)
    for (int bi = 0; bi < b; ++bi)
      for (int o = 0; o < out_; ++o) y[(int64_t)bi * out_ + o] += bias_->value[o];
  return y;
}

Tensor Linear::backward(const Tensor& dy) {
  const int b = x_.dim(0);
  Tensor dx({b, in_});
  gemm(dy.data(), weight_.value.data(), dx.data(), b, out_, in_, false);
  Tensor dyt({out_, b});
  transpose(dy.data(), dyt.data(), b, out_);
  gemm(dyt.data(), x_.data(), weight_.grad.data(), out_, b, in_, true);
  if (bias_)
    for (int o = 0; o < out_; ++o) {
      double s = 0.0;
      for (int bi = 0; bi < b; ++bi) s += dy[(int64_t)bi * out_ + o];
      bias_->grad[o] += (float)s;
    }
  return dx;
}

void Linear::visit_params(const std::string& prefix, const ParamVisitor& fn) {
  fn(prefix + "weight", weight_);
  if (bias_) fn(prefix + "bias", *bias_);
}

Tensor Upsample::forward(const Tensor& x, bool) {
  in_shape_ = x.shape();
  Tensor y({x.dim(0), x.dim(1), oh_, ow_});
  bilinear_fwd(x.data(), y.data(), x.dim(0), x.dim(1), x.dim(2), x.dim(3), oh_, ow_);
  return y;
}

Tensor Upsample::backward(const Tensor& dy) {
  Tensor dx(in_shape_);
  bilinear_bwd(dy.data(), dx.data(), in_shape_[0], in_shape_[1], in_shape_[2],
               in_shape_[3], oh_, ow_);
  return dx;
}

// ---------------------------------------------------------------------------
// BasicBlock
// ---------------------------------------------------------------------------

BasicBlock::BasicBlock(int cin, int cout, int stride)
    : conv1_(cin, cout, 3, stride, 1),
      bn1_(cout),
      conv2_(cout, cout, 3, 1, 1),
      bn2_(cout) {
  if (stride != 1 || cin != cout) {
    down_conv_ = std::make_unique<Conv2d>(cin, cout, 1, stride, 0);
    down_bn_ = std::make_unique<BatchNorm2d>(cout);
  }
}

Tensor BasicBlock::forward(const Tensor& x, bool train) {
  Tensor h = bn1_.forward(conv1_.forward(x, train), train);
  pre1_ = h;
  Tensor r(h.shape());
  relu_fwd(h.data(), r.data(), h.numel());
  Tensor h2 = bn2_.forward(conv2_.forward(r, train), train);
  Tensor skip = down_conv_ ? down_bn_->forward(down_conv_->forward(x, train), train) : x;
  Tensor s(h2.shape());
  add(h2.data(), skip.data(), s.data(), s.numel());
  sum_ = s;
  Tensor y(s.shape());
  relu_fwd(s.data(), y.data(), s.numel());
  return y;
}

Tensor BasicBlock::backward(const Tensor& dy) {
  Tensor dsum(sum_.shape());
  relu_bwd(sum_.data(), dy.data(), dsum.data(), dsum.numel());
  // main branch
  Tensor d = bn2_.backward(dsum);
  d = conv2_.backward(d);
  Tensor dpre(pre1_.shape());
  relu_bwd(pre1_.data(), d.data(), dpre.data(), dpre.numel());
  Tensor dx = conv1_.backward(bn1_.backward(dpre));
  // skip branch
  if (down_conv_) {
    Tensor dskip = down_conv_->backward(down_bn_->backward(dsum));
    axpy(1.0f, dskip.data(), dx.data(), dx.numel());
  } else {
    axpy(1.0f, dsum.data(), dx.data(), dx.numel());
  }
  return dx;
}

void BasicBlock::visit_params(const std::string& prefix, const ParamVisitor& fn) {
  conv1_.visit_params(prefix + "conv1.", fn);
  bn1_.visit_params(prefix + "bn1.", fn);
  conv2_.visit_params(prefix + "conv2.", fn);
  bn2_.visit_params(prefix + "bn2.", fn);
  if (down_conv_) {
    down_conv_->visit_params(prefix + "down.conv.", fn);
    down_bn_->visit_params(prefix + "down.bn.", fn);
  }
}

// ---------------------------------------------------------------------------
// Sequential
// ---------------------------------------------------------------------------

Layer* Sequential::add(const std::string& name, std::unique_ptr<Layer> layer) {
  children_.emplace_back(name, std::move(layer));
  return children_.back().second.get();
}

Tensor Sequential::forward(const Tensor& x, bool train) {
  Tensor cur = x;
  for (auto& [name, child] : children_) {
    cur = child->forward(cur, train);
    if (capture_) activations_[name] = cur;
  }
  return cur;
}

Tensor Sequential::backward(const Tensor& dy) {
  Tensor cur = dy;
  for (auto it = children_.rbegin(); it != children_.rend(); ++it) {
    if (capture_) gradients_[it->first] = cur;
    cur = it->second->backward(cur);
  }
  return cur;
}

bool Sequential::has_child(const std::string& name) const {
  for (const auto& [n, _] : children_)
    if (n == name) return true;
  return false;
}

Tensor Sequential::forward_from(const std::string& after_child, const Tensor& act,
                                bool train) {
  bool seen = false;
  Tensor cur = act;
  for (auto& [name, child] : children_) {
    if (seen) cur = child->forward(cur, train);
    if (name == after_child) seen = true;
  }
  if (!seen) fail(ErrorCode::UnknownLayer, "no layer named " + after_child);
  return cur;
}

Tensor Sequential::backward_from(const std::string& from_child, const Tensor& dy) {
  bool seen = false;
  Tensor cur = dy;
  for (auto it = children_.rbegin(); it != children_.rend(); ++it) {
    if (it->first == from_child) seen = true;
    if (seen) cur = it->second->backward(cur);
  }
  if (!seen) fail(ErrorCode::UnknownLayer, "no layer named " + from_child);
  return cur;
}

const Tensor& Sequential::activation(const std::string& name) const {
  auto it = activations_.find(name);
  if (it == activations_.end()) fail(ErrorCode::UnknownLayer, "no activation for " + name);
  return it->second;
}

const Tensor& Sequential::gradient(const std::string& name) const {
  auto it = gradients_.find(name);
  if (it == gradients_.end()) fail(ErrorCode::UnknownLayer, "no gradient for " + name);
  return it->second;
}

void Sequential::visit_params(const std::string& prefix, const ParamVisitor& fn) {
  for (auto& [name, child] : children_) child->visit_params(prefix + name + ".", fn);
}

// ---------------------------------------------------------------------------

void init_params(Layer& root, uint64_t seed) {
  Rng rng(mix_seed(seed, 0x1417u));
  root.visit_params("", [&rng](const std::string&, Param& p) {
    float* v = p.value.data();
    const int64_t n = p.value.numel();
    switch (p.init) {
      case InitKind::Zero:
        for (int64_t i = 0; i < n; ++i) v[i] = 0.0f;
        break;
      case InitKind::One:
        for (int64_t i = 0; i < n; ++i) v[i] = 1.0f;
        break;
      case InitKind::HeConv:
      case InitKind::HeLinear: {
        // fan_in is the trailing dimension in both weight layouts
        const int fan_in = p.value.dim(p.value.rank() - 1);
        const double std = std::sqrt(2.0 / fan_in);
        for (int64_t i = 0; i < n; ++i) v[i] = (float)(std * rng.normal());
        break;
      }
    }
  });
}

void zero_grads(Layer& root) {
  root.visit_params("", [](const std::string&, Param& p) { p.zero_grad(); });
}

int64_t param_count(Layer& root, bool trainable_only) {
  int64_t n = 0;
  root.visit_params("", [&](const std::string&, Param& p) {
    if (!trainable_only || p.trainable) n += p.value.numel();
  });
  return n;
}

}  // namespace sketchlab::nets
