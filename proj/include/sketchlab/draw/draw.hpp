#pragma once

#include <memory>
#include <string>
#include <vector>

#include "sketchlab/corpus/dataset.hpp"
#include "sketchlab/nets/archs.hpp"
#include "sketchlab/nets/optim.hpp"

namespace sketchlab::draw {

struct DrawConfig {
  int epochs = 200;
  int batch_size = 8;
  double adam_lr = 2e-4;
  double beta1 = 0.5;
  int decay_start_epoch = 100;  // linear decay to 0 at the final epoch
  double lambda_adv = 1.0;
  double lambda_geom = 10.0;
  double lambda_sem = 1.0;
  double lambda_cyc = 10.0;
  int width = 16;
  int resolution = 32;
  uint64_t seed = 0;

  void validate() const;
};

// Constant before decay_start, then linearly down to 0 at the final epoch
// boundary (epoch is 0-based).
double lr_at_epoch(const DrawConfig& config, int epoch);

// Geometry target: Sobel gradient magnitude of the photo (normalized per
// image), or a precomputed map keyed by source_id when a directory is set.
struct GeometryProvider {
  std::string precomputed_dir;

  // photos (B,3,H,W) -> (B,1,H,W), finite, in [0,1]
  Tensor target_maps(const Tensor& photos,
                     const std::vector<std::string>& source_ids) const;
};

// Semantic embeddings from a frozen classifier; photo-side embeddings may be
// ingested from precomputed files instead.
struct SemanticProvider {
  std::shared_ptr<nets::Classifier> model;  // frozen
  std::string precomputed_dir;

  bool live() const { return model != nullptr; }
  Tensor photo_embeddings(const Tensor& photos,
                          const std::vector<std::string>& source_ids) const;
};

struct ProviderSet {
  GeometryProvider geometry;
  SemanticProvider semantic;
};

struct DrawLossParts {
  double adv = 0.0, geom = 0.0, sem = 0.0, cyc = 0.0, total = 0.0;
};

// photos through encoder+decoder; output (B,1,H,W) in (0,1).
Tensor draw_forward(nets::DrawEncoder& encoder, nets::Sequential& decoder,
                    const Tensor& photos, bool train);

// Generator-side loss components. When ddrawings is non-null the lambda-
// weighted gradient w.r.t. the drawings is accumulated there (recovery and
// discriminator parameter grads accumulate as a side effect; callers zero
// what they train). sketches is only consulted for the adversarial
// precondition: it must be non-empty when lambda_adv > 0.
DrawLossParts draw_losses(const Tensor& drawings, const Tensor& photos,
                          const std::vector<std::string>& photo_ids,
                          const Tensor* sketches, nets::DrawNets& nets,
                          const ProviderSet& providers, const DrawConfig& config,
                          Tensor* ddrawings = nullptr);

// Least-squares discriminator update:
// loss = 0.5*mean((D(real)-1)^2) + 0.5*mean(D(fake)^2); fake is treated as a
// constant. Gradients accumulate on the discriminator; `opt` (if given) is
// zeroed first and stepped after.
double discriminator_step(nets::Sequential& discriminator, const Tensor& real,
                          const Tensor& fake, nets::Adam* opt = nullptr);

struct DrawOutcome {
  nets::CheckpointArchive encoder;
  std::vector<DrawLossParts> epoch_losses;
  std::vector<double> epoch_lr;
};

// Unpaired training: photo and sketch batches are shuffled by independent
// streams. Saves encoder/decoder/recovery/discriminator archives under
// out_dir when non-empty; the encoder archive (stage history [DRAW]) is the
// product.
DrawOutcome train_draw(const corpus::DatasetManifest& photo_corpus,
                       const corpus::DatasetManifest& sketch_corpus,
                       const DrawConfig& config, const ProviderSet& providers,
                       const std::string& out_dir = "",
                       const std::function<void(int, const DrawLossParts&)>& on_epoch = nullptr);

}  // namespace sketchlab::draw
