#include "sketchlab/corpus/augment.hpp"

#include <algorithm>
#include <cmath>

#include "sketchlab/core/error.hpp"

namespace sketchlab::corpus {

void AugmentationPolicy::validate() const {
  if (!(crop_scale_min > 0.0 && crop_scale_min <= crop_scale_max && crop_scale_max <= 1.0))
    fail(ErrorCode::InvalidParams, "crop_scale must satisfy 0 < min <= max <= 1");
  if (flip_probability < 0.0 || flip_probability > 1.0)
    fail(ErrorCode::InvalidParams, "flip_probability must be in [0,1]");
  if (rotation_degrees < 0.0)
    fail(ErrorCode::InvalidParams, "rotation_degrees must be >= 0");
  if (out_resolution <= 0 || eval_center_crop <= 0)
    fail(ErrorCode::InvalidParams, "resolutions must be positive");
}

Tensor augment(const Tensor& pixels, const AugmentationPolicy& policy, Rng& rng) {
  policy.validate();
  const int h = pixels.dim(1), w = pixels.dim(2);
  const int res = policy.out_resolution;

  // Square crop whose area is a uniform fraction of the source area.
  const double scale = rng.uniform(policy.crop_scale_min, policy.crop_scale_max);
  int side = (int)std::lround(std::sqrt(scale * (double)h * (double)w));
  side = std::clamp(side, 1, std::min(h, w));
  const int top = side < h ? (int)rng.uniform_int((uint64_t)(h - side + 1)) : 0;
  const int left = side < w ? (int)rng.uniform_int((uint64_t)(w - side + 1)) : 0;

  const bool do_flip =
      policy.flip_probability > 0.0 && rng.bernoulli(policy.flip_probability);
  const double angle = policy.rotation_degrees > 0.0
                           ? rng.uniform(-policy.rotation_degrees, policy.rotation_degrees)
                           : 0.0;

  // Identity fast path keeps the no-op policy bit-exact.
  if (side == h && side == w && h == res && w == res && !do_flip && angle == 0.0)
    return pixels;

  Tensor out = (side == h && side == w) ? pixels : crop(pixels, top, left, side, side);
  out = resize_image(out, res, res);
  if (do_flip) out = hflip(out);
  if (angle != 0.0) out = rotate(out, angle);
  clamp01(out);
  return out;
}

LabeledImage augment(const LabeledImage& image, const AugmentationPolicy& policy,
                     Rng& rng) {
  LabeledImage out = image;
  out.pixels = augment(image.pixels, policy, rng);
  return out;
}

Tensor eval_view(const Tensor& pixels, const AugmentationPolicy& policy) {
  policy.validate();
  const int crop_size = policy.eval_center_crop;
  int h = pixels.dim(1), w = pixels.dim(2);
  if (std::min(h, w) < crop_size && !policy.allow_upscale)
    fail(ErrorCode::ImageTooSmall,
         "input " + std::to_string(h) + "x" + std::to_string(w) +
             " smaller than center crop " + std::to_string(crop_size));

  Tensor img = pixels;
  if (std::min(h, w) != crop_size) {
    // shorter side to crop_size, aspect preserved
    if (h <= w) {
      const int nw = (int)std::lround((double)w * crop_size / h);
      img = resize_image(img, crop_size, std::max(nw, crop_size));
    } else {
      const int nh = (int)std::lround((double)h * crop_size / w);
      img = resize_image(img, std::max(nh, crop_size), crop_size);
    }
    h = img.dim(1);
    w = img.dim(2);
  }
  if (h == crop_size && w == crop_size) return img;
  const int top = (h - crop_size) / 2;
  const int left = (w - crop_size) / 2;
  return crop(img, top, left, crop_size, crop_size);
}

LabeledImage eval_view(const LabeledImage& image, const AugmentationPolicy& policy) {
  LabeledImage out = image;
  out.pixels = eval_view(image.pixels, policy);
  return out;
}

}  // namespace sketchlab::corpus
