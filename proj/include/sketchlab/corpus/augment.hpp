#pragma once

#include "sketchlab/core/rng.hpp"
#include "sketchlab/corpus/image.hpp"

namespace sketchlab::corpus {

struct AugmentationPolicy {
  double crop_scale_min = 0.7;   // area fraction of the source image
  double crop_scale_max = 1.0;
  double flip_probability = 0.5;
  double rotation_degrees = 10.0;  // max absolute rotation
  int out_resolution = 32;         // training resolution (square)
  int eval_center_crop = 32;
  bool allow_upscale = false;      // eval_view only

  void validate() const;
};

// Random resized crop -> horizontal flip -> rotation. Pure function of
// (image, policy, rng state); label and domain are untouched by callers.
Tensor augment(const Tensor& pixels, const AugmentationPolicy& policy, Rng& rng);
LabeledImage augment(const LabeledImage& image, const AugmentationPolicy& policy,
                     Rng& rng);

// Deterministic shorter-side resize followed by a center crop to
// eval_center_crop. Throws ImageTooSmall when the input is smaller than the
// crop and allow_upscale is off.
Tensor eval_view(const Tensor& pixels, const AugmentationPolicy& policy);
LabeledImage eval_view(const LabeledImage& image, const AugmentationPolicy& policy);

}  // namespace sketchlab::corpus
