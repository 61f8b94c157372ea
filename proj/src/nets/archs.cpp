#include "sketchlab/nets/archs.hpp"

#include <cstring>

#include "sketchlab/core/error.hpp"
#include "sketchlab/kernels/kernels.hpp"

namespace sketchlab::nets {

namespace {

std::unique_ptr<Sequential> make_stage(int cin, int cout, int blocks, int stride) {
  auto stage = std::make_unique<Sequential>();
  stage->add("0", std::make_unique<BasicBlock>(cin, cout, stride));
  for (int i = 1; i < blocks; ++i)
    stage->add(std::to_string(i), std::make_unique<BasicBlock>(cout, cout, 1));
  return stage;
}

void add_resnet_trunk(Sequential& net, int width, int input_resolution,
                      bool stem_pool, int blocks_per_stage, int stages) {
  const bool big_input = input_resolution > 48;
  net.add("stem.conv", std::make_unique<Conv2d>(3, width, big_input ? 7 : 3,
                                                big_input ? 2 : 1, big_input ? 3 : 1));
  net.add("stem.bn", std::make_unique<BatchNorm2d>(width));
  net.add("stem.relu", std::make_unique<ReLU>());
  if (stem_pool) net.add("stem.pool", std::make_unique<MaxPool2d>(3, 2, 1));
  int cin = width;
  for (int s = 0; s < stages; ++s) {
    const int cout = width << s;
    net.add("layer" + std::to_string(s + 1),
            make_stage(cin, cout, blocks_per_stage, s == 0 ? 1 : 2));
    cin = cout;
  }
}

std::unique_ptr<Classifier> make_resnet(const ArchSpec& spec, int width,
                                        int blocks_per_stage, int stages) {
  auto model = std::make_unique<Classifier>();
  const bool stem_pool =
      spec.stem_pool.value_or(spec.input_resolution > 48);
  add_resnet_trunk(model->net(), width, spec.input_resolution, stem_pool,
                   blocks_per_stage, stages);
  const int feat = width << (stages - 1);
  model->net().add("pool", std::make_unique<GlobalAvgPool>());
  model->net().add("fc", std::make_unique<Linear>(feat, spec.num_classes));
  model->penultimate_width = feat;
  model->penultimate_layer = "pool";
  model->final_conv_layer = "layer" + std::to_string(stages);
  model->meta.arch = spec.id;
  model->meta.num_classes = spec.num_classes;
  model->meta.input_resolution = spec.input_resolution;
  model->meta.width = width;
  model->meta.stem_pool = stem_pool;
  model->meta.seed = spec.seed;
  init_params(model->net(), spec.seed);
  return model;
}

std::unique_ptr<Classifier> make_vgg8(const ArchSpec& spec) {
  auto model = std::make_unique<Classifier>();
  Sequential& net = model->net();
  const int widths[3] = {32, 64, 128};
  int cin = 3;
  int idx = 1;
  for (int s = 0; s < 3; ++s) {
    for (int rep = 0; rep < 2; ++rep) {
      const std::string tag = std::to_string(idx++);
      net.add("conv" + tag, std::make_unique<Conv2d>(cin, widths[s], 3, 1, 1));
      net.add("bn" + tag, std::make_unique<BatchNorm2d>(widths[s]));
      net.add("relu" + tag, std::make_unique<ReLU>());
      cin = widths[s];
    }
    net.add("pool" + std::to_string(s + 1), std::make_unique<MaxPool2d>(2, 2, 0));
  }
  const int spatial = spec.input_resolution / 8;
  const int flat = 128 * spatial * spatial;
  net.add("flatten", std::make_unique<Flatten>());
  net.add("fc1", std::make_unique<Linear>(flat, 256));
  net.add("fc1_relu", std::make_unique<ReLU>());
  net.add("fc", std::make_unique<Linear>(256, spec.num_classes));
  model->penultimate_width = 256;
  model->penultimate_layer = "fc1_relu";
  model->final_conv_layer = "relu6";
  model->meta.arch = spec.id;
  model->meta.num_classes = spec.num_classes;
  model->meta.input_resolution = spec.input_resolution;
  model->meta.width = 32;
  model->meta.stem_pool = false;
  model->meta.seed = spec.seed;
  init_params(net, spec.seed);
  return model;
}

std::unique_ptr<Sequential> make_ds_block(int cin, int cout, int stride) {
  auto block = std::make_unique<Sequential>();
  block->add("dw", std::make_unique<DepthwiseConv2d>(cin, 3, stride, 1));
  block->add("dw_bn", std::make_unique<BatchNorm2d>(cin));
  block->add("dw_relu", std::make_unique<ReLU>());
  block->add("pw", std::make_unique<Conv2d>(cin, cout, 1, 1, 0));
  block->add("pw_bn", std::make_unique<BatchNorm2d>(cout));
  block->add("pw_relu", std::make_unique<ReLU>());
  return block;
}

std::unique_ptr<Classifier> make_mobilenet_small(const ArchSpec& spec) {
  auto model = std::make_unique<Classifier>();
  Sequential& net = model->net();
  net.add("stem.conv", std::make_unique<Conv2d>(3, 16, 3, 1, 1));
  net.add("stem.bn", std::make_unique<BatchNorm2d>(16));
  net.add("stem.relu", std::make_unique<ReLU>());
  net.add("block1", make_ds_block(16, 32, 2));
  net.add("block2", make_ds_block(32, 64, 2));
  net.add("block3", make_ds_block(64, 128, 2));
  net.add("block4", make_ds_block(128, 128, 1));
  net.add("pool", std::make_unique<GlobalAvgPool>());
  net.add("fc", std::make_unique<Linear>(128, spec.num_classes));
  model->penultimate_width = 128;
  model->penultimate_layer = "pool";
  model->final_conv_layer = "block4";
  model->meta.arch = spec.id;
  model->meta.num_classes = spec.num_classes;
  model->meta.input_resolution = spec.input_resolution;
  model->meta.width = 16;
  model->meta.stem_pool = false;
  model->meta.seed = spec.seed;
  init_params(net, spec.seed);
  return model;
}

}  // namespace

bool is_classifier_arch(const std::string& id) {
  return id == kArchResnet18 || id == kArchResnet18Narrow || id == kArchResnet8 ||
         id == kArchVgg8 || id == kArchMobilenetSmall;
}

std::unique_ptr<Classifier> build_classifier(const ArchSpec& spec) {
  if (spec.num_classes < 2)
    fail(ErrorCode::InvalidParams, "classifier needs num_classes >= 2");
  if (spec.id == kArchResnet18) return make_resnet(spec, 64, 2, 4);
  if (spec.id == kArchResnet18Narrow) return make_resnet(spec, 16, 2, 4);
  if (spec.id == kArchResnet8) {
    ArchSpec s = spec;
    s.stem_pool = spec.stem_pool.value_or(false);
    return make_resnet(s, 16, 1, 3);
  }
  if (spec.id == kArchVgg8) return make_vgg8(spec);
  if (spec.id == kArchMobilenetSmall) return make_mobilenet_small(spec);
  fail(ErrorCode::UnknownArchitecture, "not a classifier architecture: " + spec.id);
}

std::unique_ptr<Classifier> classifier_from_checkpoint(const CheckpointArchive& a) {
  if (!is_classifier_arch(a.manifest.arch))
    fail(ErrorCode::ArchIncompatible, a.manifest.arch + " is not a classifier");
  ArchSpec spec;
  spec.id = a.manifest.arch;
  spec.num_classes = a.manifest.num_classes;
  spec.input_resolution = a.manifest.input_resolution;
  spec.stem_pool = a.manifest.stem_pool;
  spec.seed = a.manifest.seed;
  auto model = build_classifier(spec);
  import_params(model->net(), a.parameters);
  model->meta = a.manifest;
  return model;
}

// ---------------------------------------------------------------------------
// DrawEncoder
// ---------------------------------------------------------------------------

DrawEncoder::DrawEncoder(int width, int input_resolution)
    : width_(width),
      grid_(input_resolution / 4),
      up3_(input_resolution / 4, input_resolution / 4),
      up4_(input_resolution / 4, input_resolution / 4),
      adapter_(2 * width + 4 * width + 8 * width, 4 * width, 1, 1, 0),
      adapter_bn_(4 * width) {
  if (input_resolution % 4 != 0)
    fail(ErrorCode::InvalidParams, "encoder input resolution must be divisible by 4");
  // stride-1 3x3 stem ahead of the usual pool keeps fine detail while the
  // fusion grid stays at input/4
  stem_.add("conv", std::make_unique<Conv2d>(3, width, 3, 1, 1));
  stem_.add("bn", std::make_unique<BatchNorm2d>(width));
  stem_.add("relu", std::make_unique<ReLU>());
  stem_.add("pool", std::make_unique<MaxPool2d>(3, 2, 1));
  layer1_.add("0", std::make_unique<BasicBlock>(width, width, 1));
  layer1_.add("1", std::make_unique<BasicBlock>(width, width, 1));
  layer2_.add("0", std::make_unique<BasicBlock>(width, 2 * width, 2));
  layer2_.add("1", std::make_unique<BasicBlock>(2 * width, 2 * width, 1));
  layer3_.add("0", std::make_unique<BasicBlock>(2 * width, 4 * width, 2));
  layer3_.add("1", std::make_unique<BasicBlock>(4 * width, 4 * width, 1));
  layer4_.add("0", std::make_unique<BasicBlock>(4 * width, 8 * width, 2));
  layer4_.add("1", std::make_unique<BasicBlock>(8 * width, 8 * width, 1));
  meta.arch = kArchDrawEncoder;
  meta.width = width;
  meta.input_resolution = input_resolution;
  meta.stem_pool = true;
}

Tensor DrawEncoder::trunk_forward(const Tensor& x, bool train) {
  Tensor h = stem_.forward(x, train);
  h = layer1_.forward(h, train);
  h = layer2_.forward(h, train);
  h = layer3_.forward(h, train);
  return layer4_.forward(h, train);
}

Tensor DrawEncoder::forward(const Tensor& x, bool train) {
  Tensor h = stem_.forward(x, train);
  h = layer1_.forward(h, train);
  l2_ = layer2_.forward(h, train);
  l3_ = layer3_.forward(l2_, train);
  Tensor l4 = layer4_.forward(l3_, train);
  Tensor u3 = up3_.forward(l3_, train);
  Tensor u4 = up4_.forward(l4, train);
  Tensor fused = concat_channels({&l2_, &u3, &u4});
  return adapter_relu_.forward(adapter_bn_.forward(adapter_.forward(fused, train), train), train);
}

Tensor DrawEncoder::backward(const Tensor& dy) {
  Tensor d = adapter_.backward(adapter_bn_.backward(adapter_relu_.backward(dy)));
  auto parts = split_channels(d, {2 * width_, 4 * width_, 8 * width_});
  Tensor dl4 = up4_.backward(parts[2]);
  Tensor dl3 = layer4_.backward(dl4);
  kernels::axpy(1.0f, up3_.backward(parts[1]).data(), dl3.data(), dl3.numel());
  Tensor dl2 = layer3_.backward(dl3);
  kernels::axpy(1.0f, parts[0].data(), dl2.data(), dl2.numel());
  Tensor dl1 = layer2_.backward(dl2);
  return stem_.backward(layer1_.backward(dl1));
}

void DrawEncoder::visit_params(const std::string& prefix, const ParamVisitor& fn) {
  stem_.visit_params(prefix + "stem.", fn);
  layer1_.visit_params(prefix + "layer1.", fn);
  layer2_.visit_params(prefix + "layer2.", fn);
  layer3_.visit_params(prefix + "layer3.", fn);
  layer4_.visit_params(prefix + "layer4.", fn);
  adapter_.visit_params(prefix + "fuse.adapter.", fn);
  adapter_bn_.visit_params(prefix + "fuse.bn.", fn);
}

DrawNets build_draw_networks(int width, int input_resolution, uint64_t seed) {
  DrawNets nets;
  nets.encoder = std::make_unique<DrawEncoder>(width, input_resolution);
  nets.encoder->meta.seed = seed;
  init_params(*nets.encoder, mix_seed(seed, 1));

  const int f = 4 * width;
  nets.decoder = std::make_unique<Sequential>();
  nets.decoder->add("up1", std::make_unique<ConvTranspose2d>(f, f / 2, 4, 2, 1));
  nets.decoder->add("bn1", std::make_unique<BatchNorm2d>(f / 2));
  nets.decoder->add("relu1", std::make_unique<ReLU>());
  nets.decoder->add("up2", std::make_unique<ConvTranspose2d>(f / 2, f / 4, 4, 2, 1));
  nets.decoder->add("bn2", std::make_unique<BatchNorm2d>(f / 4));
  nets.decoder->add("relu2", std::make_unique<ReLU>());
  nets.decoder->add("head", std::make_unique<Conv2d>(f / 4, 1, 7, 1, 3, true));
  nets.decoder->add("sigmoid", std::make_unique<Sigmoid>());
  init_params(*nets.decoder, mix_seed(seed, 2));
  nets.decoder_meta.arch = kArchDrawDecoder;
  nets.decoder_meta.width = width;
  nets.decoder_meta.input_resolution = input_resolution;
  nets.decoder_meta.seed = seed;

  nets.recovery = std::make_unique<Sequential>();
  nets.recovery->add("conv1", std::make_unique<Conv2d>(1, 16, 3, 1, 1));
  nets.recovery->add("bn1", std::make_unique<BatchNorm2d>(16));
  nets.recovery->add("relu1", std::make_unique<ReLU>());
  nets.recovery->add("conv2", std::make_unique<Conv2d>(16, 16, 3, 1, 1));
  nets.recovery->add("bn2", std::make_unique<BatchNorm2d>(16));
  nets.recovery->add("relu2", std::make_unique<ReLU>());
  nets.recovery->add("conv3", std::make_unique<Conv2d>(16, 1, 3, 1, 1, true));
  nets.recovery->add("sigmoid", std::make_unique<Sigmoid>());
  init_params(*nets.recovery, mix_seed(seed, 3));
  nets.recovery_meta.arch = kArchDrawRecovery;
  nets.recovery_meta.input_resolution = input_resolution;
  nets.recovery_meta.seed = seed;

  nets.discriminator = std::make_unique<Sequential>();
  nets.discriminator->add("conv1", std::make_unique<Conv2d>(1, 32, 4, 2, 1, true));
  nets.discriminator->add("lrelu1", std::make_unique<LeakyReLU>(0.2f));
  nets.discriminator->add("conv2", std::make_unique<Conv2d>(32, 64, 4, 2, 1));
  nets.discriminator->add("bn2", std::make_unique<BatchNorm2d>(64));
  nets.discriminator->add("lrelu2", std::make_unique<LeakyReLU>(0.2f));
  nets.discriminator->add("head", std::make_unique<Conv2d>(64, 1, 4, 1, 1, true));
  init_params(*nets.discriminator, mix_seed(seed, 4));
  nets.discriminator_meta.arch = kArchPatchDiscriminator;
  nets.discriminator_meta.input_resolution = input_resolution;
  nets.discriminator_meta.seed = seed;
  return nets;
}

std::unique_ptr<Classifier> init_classifier_from_encoder(
    const CheckpointArchive& encoder_ckpt, int num_classes,
    bool keep_encoder_pool, uint64_t head_seed) {
  if (encoder_ckpt.manifest.arch != kArchDrawEncoder)
    fail(ErrorCode::ArchIncompatible,
         "expected a draw-encoder checkpoint, got " + encoder_ckpt.manifest.arch);

  ArchSpec spec;
  spec.id = encoder_ckpt.manifest.width >= 64 ? kArchResnet18 : kArchResnet18Narrow;
  spec.num_classes = num_classes;
  spec.input_resolution = encoder_ckpt.manifest.input_resolution;
  spec.seed = head_seed;
  if (keep_encoder_pool) spec.stem_pool = true;
  auto model = build_classifier(spec);

  // trunk tensors transfer bitwise where names and shapes line up; the
  // fusion adapter stays behind
  std::map<std::string, Tensor> trunk;
  for (const auto& [name, t] : encoder_ckpt.parameters)
    if (name.rfind("fuse.", 0) != 0) trunk[name] = t;
  import_params(model->net(), trunk, /*strict=*/false);
  model->meta.stage_history = encoder_ckpt.manifest.stage_history;
  return model;
}

Tensor penultimate_features(Classifier& model, const Tensor& images) {
  model.net().set_capture(true);
  (void)model.logits(images, /*train=*/false);
  Tensor feats = model.net().activation(model.penultimate_layer);
  model.net().set_capture(false);
  if (feats.rank() == 4) feats.reshape({feats.dim(0), (int)(feats.numel() / feats.dim(0))});
  return feats;
}

Tensor concat_channels(const std::vector<const Tensor*>& parts) {
  const int b = parts[0]->dim(0), h = parts[0]->dim(2), w = parts[0]->dim(3);
  int ctotal = 0;
  for (const Tensor* p : parts) ctotal += p->dim(1);
  Tensor out({b, ctotal, h, w});
  for (int bi = 0; bi < b; ++bi) {
    int coff = 0;
    for (const Tensor* p : parts) {
      const int c = p->dim(1);
      std::memcpy(out.data() + (((int64_t)bi * ctotal + coff) * h * w),
                  p->data() + ((int64_t)bi * c * h * w),
                  sizeof(float) * (size_t)c * h * w);
      coff += c;
    }
  }
  return out;
}

std::vector<Tensor> split_channels(const Tensor& x, const std::vector<int>& sizes) {
  const int b = x.dim(0), h = x.dim(2), w = x.dim(3);
  const int ctotal = x.dim(1);
  std::vector<Tensor> parts;
  int coff = 0;
  for (int c : sizes) {
    Tensor part({b, c, h, w});
    for (int bi = 0; bi < b; ++bi)
      std::memcpy(part.data() + ((int64_t)bi * c * h * w),
                  x.data() + (((int64_t)bi * ctotal + coff) * h * w),
                  sizeof(float) * (size_t)c * h * w);
    parts.push_back(std::move(part));
    coff += c;
  }
  return parts;
}

Tensor LayerRefGroup::forward(const Tensor&, bool) {
  fail(ErrorCode::InvalidParams, "LayerRefGroup is parameter-only");
}

Tensor LayerRefGroup::backward(const Tensor&) {
  fail(ErrorCode::InvalidParams, "LayerRefGroup is parameter-only");
}

void LayerRefGroup::visit_params(const std::string& prefix, const ParamVisitor& fn) {
  for (auto& [name, layer] : items_) layer->visit_params(prefix + name + ".", fn);
}

}  // namespace sketchlab::nets
