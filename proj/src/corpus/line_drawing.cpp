#include "sketchlab/corpus/line_drawing.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "sketchlab/core/error.hpp"
#include "sketchlab/core/parallel.hpp"
#include "sketchlab/corpus/ppm.hpp"

namespace fs = std::filesystem;

namespace sketchlab::corpus {

std::string EdgeParams::to_string() const {
  std::ostringstream os;
  os << "sigma=" << sigma << ";k=" << k << ";tau=" << tau << ";eps=" << eps
     << ";phi=" << phi;
  return os.str();
}

EdgeParams EdgeParams::parse(const std::string& s) {
  EdgeParams p;
  std::istringstream is(s);
  std::string field;
  while (std::getline(is, field, ';')) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = field.substr(0, eq);
    const double value = std::stod(field.substr(eq + 1));
    if (key == "sigma") p.sigma = value;
    else if (key == "k") p.k = value;
    else if (key == "tau") p.tau = value;
    else if (key == "eps") p.eps = value;
    else if (key == "phi") p.phi = value;
  }
  return p;
}

LabeledImage to_line_drawing(const LabeledImage& image, const EdgeParams& params) {
  if (params.sigma <= 0.0 || params.k <= 0.0)
    fail(ErrorCode::InvalidParams, "blur scale must be positive");

  const Tensor luma = rgb_to_luma(image.pixels);
  const Tensor narrow = gaussian_blur(luma, params.sigma);
  const Tensor wide = gaussian_blur(luma, params.k * params.sigma);

  const int h = luma.dim(1), w = luma.dim(2);
  Tensor drawing({1, h, w});
  const float tau = (float)params.tau;
  const float eps = (float)params.eps;
  const float phi = (float)params.phi;
  for (int64_t i = 0; i < (int64_t)h * w; ++i) {
    const float s = narrow[i] - tau * wide[i];
    float v = 1.0f;
    if (s < -eps) v = 1.0f + std::tanh(phi * (s + eps));
    drawing[i] = std::clamp(v, 0.0f, 1.0f);
  }

  LabeledImage out;
  out.pixels = replicate_channels(drawing, 3);
  out.label = image.label;
  out.domain = kDomainLine;
  out.source_id = image.source_id;
  return out;
}

DatasetManifest convert_corpus_to_line(const DatasetManifest& manifest,
                                       const std::string& out_root,
                                       const EdgeParams& params) {
  DatasetManifest out = manifest;
  out.root = out_root;
  out.name = manifest.name + "-line";
  out.domain = kDomainLine;
  out.converter_params = params.to_string();

  for (auto& [split, items] : out.splits) {
    for (size_t label = 0; label < out.class_names.size(); ++label)
      fs::create_directories(fs::path(out_root) / split / out.class_names[label]);

    const bool par = par::enabled();
#pragma omp parallel for schedule(dynamic) if (par)
    for (int64_t i = 0; i < (int64_t)items.size(); ++i) {
      Item& item = items[(size_t)i];
      const LabeledImage src = load_item(manifest.split(split)[(size_t)i]);
      const LabeledImage line = to_line_drawing(src, params);
      const fs::path dst = fs::path(out_root) / split /
                           out.class_names[(size_t)item.label] /
                           fs::path(item.path).filename();
      write_ppm(dst.string(), line.pixels);
      item.path = dst.string();
      item.domain = kDomainLine;
    }
  }
  write_sidecar_manifest(out);
  return out;
}

}  // namespace sketchlab::corpus
