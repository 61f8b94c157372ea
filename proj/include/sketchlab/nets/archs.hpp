#pragma once

#include <memory>
#include <optional>
#include <string>

#include "sketchlab/nets/checkpoint.hpp"
#include "sketchlab/nets/layers.hpp"

namespace sketchlab::nets {

// Closed architecture set. Desk-scale widths are the defaults; resnet18 full
// width is reserved for fidelity runs.
inline const char* kArchResnet18 = "resnet18";
inline const char* kArchResnet18Narrow = "resnet18-narrow";
inline const char* kArchResnet8 = "resnet8";
inline const char* kArchVgg8 = "vgg8";
inline const char* kArchMobilenetSmall = "mobilenet-small";
inline const char* kArchDrawEncoder = "draw-encoder";
inline const char* kArchDrawDecoder = "draw-decoder";
inline const char* kArchDrawRecovery = "draw-recovery";
inline const char* kArchPatchDiscriminator = "patch-discriminator";

struct ArchSpec {
  std::string id;
  int num_classes = 10;
  int input_resolution = 32;
  uint64_t seed = 0;
  std::optional<bool> stem_pool;  // default: resolution-dependent
};

// A classifier is a named Sequential plus the taps the probes need.
class Classifier {
 public:
  Sequential& net() { return net_; }
  const Sequential& net() const { return net_; }

  Tensor logits(const Tensor& images, bool train) { return net_.forward(images, train); }
  Tensor backward(const Tensor& dlogits) { return net_.backward(dlogits); }

  CheckpointManifest meta;
  int penultimate_width = 0;
  std::string penultimate_layer;  // child whose output feeds the class head
  std::string final_conv_layer;   // default saliency target

 private:
  Sequential net_;
  friend std::unique_ptr<Classifier> build_classifier(const ArchSpec& spec);
};

std::unique_ptr<Classifier> build_classifier(const ArchSpec& spec);

// Rebuilds the architecture named by the manifest and imports all tensors.
std::unique_ptr<Classifier> classifier_from_checkpoint(const CheckpointArchive& a);

bool is_classifier_arch(const std::string& id);

// Encoder trunk shares parameter names with the resnet18 classifiers, so
// transfer is plain name matching; the fusion head lives under "fuse.".
class DrawEncoder : public Layer {
 public:
  DrawEncoder(int width, int input_resolution);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  void visit_params(const std::string& prefix, const ParamVisitor& fn) override;

  // Trunk-only forward (through layer4, before fusion); used to verify
  // weight transfer equivalence.
  Tensor trunk_forward(const Tensor& x, bool train);

  int fused_channels() const { return 4 * width_; }
  int fused_resolution() const { return grid_; }
  CheckpointManifest meta;

 private:
  int width_, grid_;
  Sequential stem_;
  Sequential layer1_, layer2_, layer3_, layer4_;
  Upsample up3_, up4_;
  Conv2d adapter_;
  BatchNorm2d adapter_bn_;
  ReLU adapter_relu_;
  Tensor l2_, l3_;  // cached for the branched backward
};

struct DrawNets {
  std::unique_ptr<DrawEncoder> encoder;
  std::unique_ptr<Sequential> decoder;
  std::unique_ptr<Sequential> recovery;
  std::unique_ptr<Sequential> discriminator;
  CheckpointManifest decoder_meta, recovery_meta, discriminator_meta;
};

// Encoder/decoder/recovery/patch-discriminator for the drawing pretext task.
// Decoder: two stride-2 transposed convolutions then a 7x7 sigmoid head; the
// fusion grid is input/4 so the drawing lands back at input resolution.
DrawNets build_draw_networks(int width = 16, int input_resolution = 32,
                             uint64_t seed = 0);

// Copies all shape-matching trunk tensors bitwise into a resnet18-family
// classifier (fusion tensors dropped, head freshly seeded). By default the
// imported classifier keeps the encoder's stem pooling so the shared trunk
// computes identical features; pass keep_encoder_pool=false to re-house the
// weights in the standard classifier geometry for fine-tuning.
std::unique_ptr<Classifier> init_classifier_from_encoder(
    const CheckpointArchive& encoder_ckpt, int num_classes,
    bool keep_encoder_pool = true, uint64_t head_seed = 0);

// N x D penultimate activations in eval mode.
Tensor penultimate_features(Classifier& model, const Tensor& images);

// Channel helpers used by the fusion head and the drawing losses.
Tensor concat_channels(const std::vector<const Tensor*>& parts);
std::vector<Tensor> split_channels(const Tensor& x, const std::vector<int>& sizes);

// Non-owning group so one optimizer can drive several networks.
class LayerRefGroup : public Layer {
 public:
  void add(const std::string& name, Layer* layer) { items_.emplace_back(name, layer); }
  Tensor forward(const Tensor&, bool) override;
  Tensor backward(const Tensor&) override;
  void visit_params(const std::string& prefix, const ParamVisitor& fn) override;

 private:
  std::vector<std::pair<std::string, Layer*>> items_;
};

}  // namespace sketchlab::nets
