#pragma once

#include <string>

#include "sketchlab/corpus/dataset.hpp"
#include "sketchlab/corpus/image.hpp"

namespace sketchlab::corpus {

// Extended difference-of-Gaussians line extraction. Strokes appear on the
// dark lobe of S = G_sigma(L) - tau * G_{k*sigma}(L): output is 1 (white)
// where S >= -eps and 1 + tanh(phi * (S + eps)) clamped to [0,1] elsewhere.
// Regions of constant luminance therefore map to pure white regardless of
// their level, and strokes hug luminance edges.
struct EdgeParams {
  double sigma = 1.0;
  double k = 1.6;
  double tau = 0.99;
  double eps = 0.02;
  double phi = 10.0;

  std::string to_string() const;
  static EdgeParams parse(const std::string& s);
};

// Deterministic conversion; bit-identical outputs for identical inputs and
// params. The result is single-channel replicated to 3 channels, domain LINE,
// label and source_id preserved. Throws InvalidParams for sigma <= 0.
LabeledImage to_line_drawing(const LabeledImage& image, const EdgeParams& params);

// Converts every item of every split into `out_root` with the same layout and
// a sidecar manifest carrying the converter parameters.
DatasetManifest convert_corpus_to_line(const DatasetManifest& manifest,
                                       const std::string& out_root,
                                       const EdgeParams& params);

}  // namespace sketchlab::corpus
