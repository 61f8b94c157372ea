#pragma once

#include <string>

#include "sketchlab/core/rng.hpp"
#include "sketchlab/core/tensor.hpp"

namespace sketchlab::corpus {

// Domain tags carried by every image and dataset split.
inline const std::string kDomainColor = "COLOR";
inline const std::string kDomainLine = "LINE";
inline const std::string kDomainDraw = "DRAW";
inline std::string style_domain(const std::string& name) { return "STYLE:" + name; }

// Pixels are a (3,H,W) tensor with values in [0,1]. A LINE image derived from
// a COLOR image keeps the source_id and label of its parent.
struct LabeledImage {
  Tensor pixels;
  int label = 0;
  std::string domain = kDomainColor;
  std::string source_id;

  int height() const { return pixels.dim(1); }
  int width() const { return pixels.dim(2); }
};

// Rec.601 luma; returns (1,H,W).
Tensor rgb_to_luma(const Tensor& rgb);

Tensor replicate_channels(const Tensor& single, int channels);

// Image resize with pixel-center sampling (the usual image-resize convention;
// distinct from the align_corners=true interpolation used inside nets).
Tensor resize_image(const Tensor& img, int out_h, int out_w);

Tensor crop(const Tensor& img, int top, int left, int height, int width);
Tensor hflip(const Tensor& img);
// Rotate about the image center by `degrees`, bilinear, clamp-to-edge.
Tensor rotate(const Tensor& img, double degrees);

// Separable Gaussian blur, clamp-to-edge, kernel radius ceil(3*sigma).
Tensor gaussian_blur(const Tensor& img, double sigma);

// Sobel gradient magnitude of the luma, normalized to [0,1] by the per-image
// maximum (all-zero map stays zero). Returns (1,H,W).
Tensor sobel_magnitude(const Tensor& rgb);

void clamp01(Tensor& img);

}  // namespace sketchlab::corpus
