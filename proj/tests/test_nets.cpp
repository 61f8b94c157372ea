#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sketchlab/nets/archs.hpp"
#include "sketchlab/nets/checkpoint.hpp"
#include "sketchlab/nets/optim.hpp"
#include "test_util.hpp"

using namespace sketchlab;
using namespace sketchlab::nets;
using test_util::random_tensor;

namespace {

const std::string kScratch = test_util::scratch_dir("nets");

ArchSpec spec_of(const char* id, int classes = 10, int res = 32, uint64_t seed = 1) {
  ArchSpec s;
  s.id = id;
  s.num_classes = classes;
  s.input_resolution = res;
  s.seed = seed;
  return s;
}

double scalar_loss(const Tensor& y) {
  // deterministic weighted sum so the gradient is a known fixed vector
  double s = 0.0;
  for (int64_t i = 0; i < y.numel(); ++i)
    s += (0.3 + 0.01 * (double)(i % 7)) * (double)y[i];
  return s;
}

Tensor scalar_loss_grad(const Tensor& y) {
  Tensor g(y.shape());
  for (int64_t i = 0; i < y.numel(); ++i) g[i] = (float)(0.3 + 0.01 * (double)(i % 7));
  return g;
}

// Central finite differences on a handful of the largest-gradient parameter
// entries of each tensor.
void check_param_gradients(Layer& layer, const Tensor& input, double tol,
                           bool train = true) {
  zero_grads(layer);
  const Tensor out = layer.forward(input, train);
  layer.backward(scalar_loss_grad(out));

  std::vector<Param*> params;
  layer.visit_params("", [&](const std::string&, Param& p) {
    if (p.trainable) params.push_back(&p);
  });
  for (Param* p : params) {
    // probe the entry with the largest analytic gradient
    int64_t idx = 0;
    for (int64_t i = 0; i < p->grad.numel(); ++i)
      if (std::abs(p->grad[i]) > std::abs(p->grad[idx])) idx = i;
    const double analytic = p->grad[idx];
    if (std::abs(analytic) < 1e-6) continue;

    const float saved = p->value[idx];
    const double h = std::max(1e-3, 1e-2 * std::abs((double)saved));
    p->value[idx] = (float)(saved + h);
    const double up = scalar_loss(layer.forward(input, train));
    p->value[idx] = (float)(saved - h);
    const double down = scalar_loss(layer.forward(input, train));
    p->value[idx] = saved;
    const double numeric = (up - down) / (2.0 * h);
    CHECK(std::abs(numeric - analytic) <=
          tol * std::max({1.0, std::abs(numeric), std::abs(analytic)}));
  }
}

}  // namespace

TEST_CASE("build_classifier contracts: shapes and penultimate widths") {
  auto narrow = build_classifier(spec_of("resnet18-narrow"));
  const Tensor batch = random_tensor({2, 3, 32, 32}, 5, 0.0, 1.0);
  const Tensor logits = narrow->logits(batch, false);
  CHECK(logits.dim(0) == 2);
  CHECK(logits.dim(1) == 10);
  CHECK(narrow->penultimate_width == 128);

  auto full = build_classifier(spec_of("resnet18"));
  CHECK(full->penultimate_width == 512);
  const Tensor logits_full = full->logits(batch, false);
  CHECK(logits_full.dim(1) == 10);

  auto r8 = build_classifier(spec_of("resnet8"));
  CHECK(r8->logits(batch, false).dim(1) == 10);

  auto vgg = build_classifier(spec_of("vgg8"));
  CHECK(vgg->logits(batch, false).dim(1) == 10);
  CHECK(vgg->penultimate_width == 256);

  auto mobile = build_classifier(spec_of("mobilenet-small"));
  CHECK(mobile->logits(batch, false).dim(1) == 10);

  try {
    build_classifier(spec_of("alexnet"));
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownArchitecture);
  }
}

TEST_CASE("classifier logits are finite for any unit-range input") {
  auto model = build_classifier(spec_of("resnet18-narrow"));
  for (uint64_t seed : {9u, 10u, 11u}) {
    const Tensor batch = random_tensor({3, 3, 32, 32}, seed, 0.0, 1.0);
    const Tensor logits = model->logits(batch, false);
    for (int64_t i = 0; i < logits.numel(); ++i) CHECK(std::isfinite(logits[i]));
  }
}

TEST_CASE("seeded initialization is reproducible") {
  auto a = build_classifier(spec_of("resnet8", 10, 32, 42));
  auto b = build_classifier(spec_of("resnet8", 10, 32, 42));
  auto c = build_classifier(spec_of("resnet8", 10, 32, 43));
  const auto pa = export_params(a->net());
  const auto pb = export_params(b->net());
  const auto pc = export_params(c->net());
  REQUIRE(pa.size() == pb.size());
  bool all_equal = true, any_diff_from_c = false;
  for (const auto& [name, t] : pa) {
    all_equal &= test_util::bitwise_equal(t, pb.at(name));
    any_diff_from_c |= !test_util::bitwise_equal(t, pc.at(name));
  }
  CHECK(all_equal);
  CHECK(any_diff_from_c);
}

TEST_CASE("checkpoint save/load round-trips byte-identically") {
  auto model = build_classifier(spec_of("resnet8", 10, 16, 7));
  CheckpointArchive a;
  a.manifest = model->meta;
  a.manifest.stage_history = {"LINE", "COLOR"};
  a.manifest.metrics["val_acc"] = 83.25;
  a.parameters = export_params(model->net());

  const std::string dir1 = kScratch + "/ckpt1";
  const std::string dir2 = kScratch + "/ckpt2";
  save_checkpoint(a, dir1);
  const CheckpointArchive b = load_checkpoint(dir1);
  save_checkpoint(b, dir2);
  const CheckpointArchive c = load_checkpoint(dir2);

  CHECK(b.manifest.arch == a.manifest.arch);
  CHECK(b.manifest.stage_history == a.manifest.stage_history);
  CHECK(b.manifest.metrics.at("val_acc") == 83.25);
  REQUIRE(b.parameters.size() == a.parameters.size());
  for (const auto& [name, t] : a.parameters) {
    CHECK(test_util::bitwise_equal(t, b.parameters.at(name)));
    CHECK(test_util::bitwise_equal(t, c.parameters.at(name)));
  }
}

TEST_CASE("layer gradients match finite differences") {
  SUBCASE("conv") {
    Conv2d conv(3, 4, 3, 2, 1, true);
    init_params(conv, 11);
    check_param_gradients(conv, random_tensor({2, 3, 9, 9}, 12), 2e-2);
  }
  SUBCASE("transposed conv") {
    ConvTranspose2d tconv(3, 2, 4, 2, 1, true);
    init_params(tconv, 13);
    check_param_gradients(tconv, random_tensor({2, 3, 5, 5}, 14), 2e-2);
  }
  SUBCASE("depthwise conv") {
    DepthwiseConv2d dw(3, 3, 1, 1);
    init_params(dw, 15);
    check_param_gradients(dw, random_tensor({2, 3, 6, 6}, 16), 2e-2);
  }
  SUBCASE("batch norm") {
    BatchNorm2d bn(3);
    init_params(bn, 17);
    check_param_gradients(bn, random_tensor({4, 3, 5, 5}, 18), 2e-2);
  }
  SUBCASE("linear") {
    Linear fc(6, 4);
    init_params(fc, 19);
    check_param_gradients(fc, random_tensor({3, 6}, 20), 2e-2);
  }
  SUBCASE("basic block with projection") {
    BasicBlock block(3, 5, 2);
    init_params(block, 21);
    check_param_gradients(block, random_tensor({2, 3, 8, 8}, 22), 3e-2);
  }
}

TEST_CASE("whole-classifier gradient sanity on a tiny resnet") {
  auto model = build_classifier(spec_of("resnet8", 2, 8, 23));
  const Tensor batch = random_tensor({2, 3, 8, 8}, 24, 0.0, 1.0);
  check_param_gradients(model->net(), batch, 5e-2);
}

TEST_CASE("input gradients match finite differences through a conv stack") {
  Sequential net;
  net.add("conv", std::make_unique<Conv2d>(2, 3, 3, 1, 1));
  net.add("bn", std::make_unique<BatchNorm2d>(3));
  net.add("relu", std::make_unique<ReLU>());
  net.add("pool", std::make_unique<GlobalAvgPool>());
  init_params(net, 25);

  Tensor x = random_tensor({1, 2, 6, 6}, 26);
  zero_grads(net);
  (void)net.forward(x, true);
  Tensor dy({1, 3});
  dy[0] = 1.0f;
  dy[1] = -0.5f;
  dy[2] = 0.25f;
  const Tensor dx = net.backward(dy);

  for (int64_t idx : {0ll, 17ll, 35ll}) {
    const float saved = x[idx];
    const double h = 1e-2;
    auto eval = [&](double v) {
      x[idx] = (float)v;
      const Tensor y = net.forward(x, true);
      return 1.0 * y[0] - 0.5 * y[1] + 0.25 * y[2];
    };
    const double numeric = (eval(saved + h) - eval(saved - h)) / (2 * h);
    x[idx] = saved;
    CHECK(std::abs(numeric - dx[idx]) <=
          2e-2 * std::max({1.0, std::abs(numeric), std::abs((double)dx[idx])}));
  }
}

TEST_CASE("draw networks: shapes, ranges, and the decoder bottleneck") {
  DrawNets nets = build_draw_networks(16, 32, 3);
  const Tensor photos = random_tensor({2, 3, 32, 32}, 30, 0.0, 1.0);
  const Tensor fused = nets.encoder->forward(photos, false);
  CHECK(fused.dim(1) == nets.encoder->fused_channels());
  CHECK(fused.dim(2) == 8);
  CHECK(fused.dim(3) == 8);

  const Tensor drawing = nets.decoder->forward(fused, false);
  CHECK(drawing.dim(0) == 2);
  CHECK(drawing.dim(1) == 1);
  CHECK(drawing.dim(2) == 32);
  CHECK(drawing.dim(3) == 32);
  for (int64_t i = 0; i < drawing.numel(); ++i) {
    CHECK(drawing[i] > 0.0f);
    CHECK(drawing[i] < 1.0f);
  }

  // the decoder is a bottleneck relative to the encoder
  const int64_t enc = param_count(*nets.encoder);
  const int64_t dec = param_count(*nets.decoder);
  CHECK((double)dec / (double)enc < 0.1);

  // patch scores have spatial extent
  const Tensor scores = nets.discriminator->forward(drawing, false);
  CHECK(scores.dim(1) == 1);
  CHECK(scores.dim(2) > 1);
}

TEST_CASE("encoder gradient flows through the fusion head") {
  DrawNets nets = build_draw_networks(16, 16, 31);
  const Tensor photos = random_tensor({2, 3, 16, 16}, 32, 0.0, 1.0);
  zero_grads(*nets.encoder);
  const Tensor fused = nets.encoder->forward(photos, true);
  Tensor dy(fused.shape());
  dy.fill(1e-2f);
  const Tensor dx = nets.encoder->backward(dy);
  CHECK(dx.same_shape(photos));
  double grad_norm = 0.0;
  nets.encoder->visit_params("", [&](const std::string&, Param& p) {
    for (int64_t i = 0; i < p.grad.numel(); ++i) grad_norm += std::abs((double)p.grad[i]);
  });
  CHECK(grad_norm > 0.0);

  // finite differences at 32x32, where 1x1 deep grids don't inflate noise
  DrawNets nets32 = build_draw_networks(16, 32, 33);
  check_param_gradients(*nets32.encoder, random_tensor({2, 3, 32, 32}, 33, 0.0, 1.0),
                        5e-2, /*train=*/false);
}

TEST_CASE("encoder-to-classifier transfer copies the trunk bitwise") {
  DrawNets nets = build_draw_networks(16, 32, 34);
  CheckpointArchive enc;
  enc.manifest = nets.encoder->meta;
  enc.manifest.stage_history = {"DRAW"};
  enc.parameters = export_params(*nets.encoder);

  auto model = init_classifier_from_encoder(enc, 10, /*keep_encoder_pool=*/true, 77);
  CHECK(model->meta.arch == std::string("resnet18-narrow"));
  CHECK(model->meta.stem_pool);
  CHECK(model->meta.stage_history == std::vector<std::string>{"DRAW"});

  const auto live = export_params(model->net());
  int shared = 0;
  for (const auto& [name, t] : enc.parameters) {
    if (name.rfind("fuse.", 0) == 0) {
      CHECK(live.count(name) == 0);
      continue;
    }
    REQUIRE(live.count(name) == 1);
    CHECK(test_util::bitwise_equal(t, live.at(name)));
    ++shared;
  }
  CHECK(shared > 50);

  // dual forward: the copied trunk reproduces the encoder trunk exactly
  const Tensor x = random_tensor({2, 3, 32, 32}, 35, 0.0, 1.0);
  const Tensor trunk_out = nets.encoder->trunk_forward(x, false);
  model->net().set_capture(true);
  (void)model->logits(x, false);
  const Tensor cls_out = model->net().activation("layer4");
  model->net().set_capture(false);
  REQUIRE(trunk_out.same_shape(cls_out));
  CHECK(test_util::max_abs_diff(trunk_out, cls_out) <= 1e-6);

  // a classifier checkpoint is not an encoder
  CheckpointArchive not_encoder;
  not_encoder.manifest.arch = "resnet18-narrow";
  try {
    init_classifier_from_encoder(not_encoder, 10);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ArchIncompatible);
  }
}

TEST_CASE("penultimate features: shape and row determinism") {
  auto model = build_classifier(spec_of("resnet18-narrow", 10, 32, 36));
  const Tensor one = random_tensor({1, 3, 32, 32}, 37, 0.0, 1.0);
  Tensor batch({3, 3, 32, 32});
  for (int b = 0; b < 3; ++b)
    std::copy(one.data(), one.data() + one.numel(), batch.data() + b * one.numel());

  const Tensor feats = penultimate_features(*model, batch);
  CHECK(feats.dim(0) == 3);
  CHECK(feats.dim(1) == 128);
  for (int j = 0; j < 128; ++j) {
    CHECK(feats[j] == feats[128 + j]);
    CHECK(feats[j] == feats[256 + j]);
  }

  const Tensor single = penultimate_features(*model, one);
  CHECK(single.dim(0) == 1);
  CHECK(single.dim(1) == 128);
}

TEST_CASE("sgd and adam steps move parameters as expected") {
  Linear fc(2, 1, false);
  init_params(fc, 40);
  Sgd sgd(fc, 0.1, 0.0);
  std::vector<Param*> params;
  fc.visit_params("", [&](const std::string&, Param& p) { params.push_back(&p); });
  REQUIRE(params.size() == 1);
  params[0]->value[0] = 1.0f;
  params[0]->grad[0] = 2.0f;
  sgd.step();
  CHECK(params[0]->value[0] == doctest::Approx(0.8f));

  Adam adam(fc, 0.1);
  params[0]->zero_grad();
  params[0]->grad[0] = 2.0f;
  const float before = params[0]->value[0];
  adam.step();
  // first Adam step moves by ~lr regardless of gradient scale
  CHECK(params[0]->value[0] == doctest::Approx(before - 0.1f).epsilon(1e-3));
}
