#include "sketchlab/probe/probe.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "sketchlab/core/error.hpp"
#include "sketchlab/corpus/ppm.hpp"
#include "sketchlab/kernels/kernels.hpp"
#include "sketchlab/nets/checkpoint.hpp"

namespace fs = std::filesystem;

namespace sketchlab::probe {

namespace {

Tensor single_batch(const Tensor& image) {
  Tensor batch({1, image.dim(0), image.dim(1), image.dim(2)});
  std::copy(image.data(), image.data() + image.numel(), batch.data());
  return batch;
}

struct CamCapture {
  Tensor activation;  // (C,h,w)
  Tensor gradient;    // (C,h,w)
};

CamCapture capture_cam(nets::Classifier& model, const Tensor& image, int class_idx,
                       const std::string& layer) {
  if (!model.net().has_child(layer))
    fail(ErrorCode::UnknownLayer, "model has no layer named " + layer);
  model.net().set_capture(true);
  const Tensor logits = model.logits(single_batch(image), /*train=*/false);
  if (class_idx < 0 || class_idx >= logits.dim(1))
    fail(ErrorCode::InvalidParams, "class index out of range");
  Tensor dlogits({1, logits.dim(1)});
  dlogits[class_idx] = 1.0f;
  model.backward(dlogits);
  CamCapture cap;
  cap.activation = model.net().activation(layer);
  cap.gradient = model.net().gradient(layer);
  model.net().set_capture(false);
  const int c = cap.activation.dim(1), h = cap.activation.dim(2), w = cap.activation.dim(3);
  cap.activation.reshape({c, h, w});
  cap.gradient.reshape({c, h, w});
  return cap;
}

}  // namespace

std::vector<double> grad_cam_weights(nets::Classifier& model, const Tensor& image,
                                     int class_idx, const std::string& target_layer) {
  const std::string layer =
      target_layer.empty() ? model.final_conv_layer : target_layer;
  const CamCapture cap = capture_cam(model, image, class_idx, layer);
  const int c = cap.gradient.dim(0);
  const int hw = cap.gradient.dim(1) * cap.gradient.dim(2);
  std::vector<double> alphas((size_t)c, 0.0);
  for (int k = 0; k < c; ++k) {
    double s = 0.0;
    for (int i = 0; i < hw; ++i) s += cap.gradient[(int64_t)k * hw + i];
    alphas[(size_t)k] = s / hw;
  }
  return alphas;
}

SaliencyMap grad_cam(nets::Classifier& model, const Tensor& image, int class_idx,
                     const std::string& target_layer) {
  const std::string layer =
      target_layer.empty() ? model.final_conv_layer : target_layer;
  const CamCapture cap = capture_cam(model, image, class_idx, layer);
  const int c = cap.activation.dim(0), h = cap.activation.dim(1), w = cap.activation.dim(2);
  const int hw = h * w;

  Tensor raw({1, 1, h, w});
  for (int k = 0; k < c; ++k) {
    double alpha = 0.0;
    for (int i = 0; i < hw; ++i) alpha += cap.gradient[(int64_t)k * hw + i];
    alpha /= hw;
    for (int i = 0; i < hw; ++i)
      raw[i] += (float)(alpha * cap.activation[(int64_t)k * hw + i]);
  }
  for (int i = 0; i < hw; ++i) raw[i] = std::max(raw[i], 0.0f);

  const int oh = image.dim(1), ow = image.dim(2);
  Tensor up({1, 1, oh, ow});
  kernels::bilinear_fwd(raw.data(), up.data(), 1, 1, h, w, oh, ow);

  float mx = 0.0f;
  for (int64_t i = 0; i < up.numel(); ++i) mx = std::max(mx, up[i]);
  if (mx > 0.0f)
    for (int64_t i = 0; i < up.numel(); ++i) up[i] /= mx;

  SaliencyMap map;
  map.values = up;
  map.values.reshape({oh, ow});
  map.class_idx = class_idx;
  return map;
}

int count_high_regions(const Tensor& values, double percentile, int connectivity) {
  if (!(percentile > 0.0 && percentile < 100.0))
    fail(ErrorCode::InvalidParams, "percentile must be in (0,100)");
  if (connectivity != 4 && connectivity != 8)
    fail(ErrorCode::InvalidParams, "connectivity must be 4 or 8");
  const int h = values.dim(0), w = values.dim(1);
  const int64_t n = (int64_t)h * w;

  // linear-interpolation percentile over all map values
  std::vector<float> sorted(values.data(), values.data() + n);
  std::sort(sorted.begin(), sorted.end());
  const double pos = percentile / 100.0 * (double)(n - 1);
  const int64_t lo = (int64_t)pos;
  const int64_t hi = std::min(lo + 1, n - 1);
  const double t = pos - (double)lo;
  const double threshold = (1.0 - t) * sorted[(size_t)lo] + t * sorted[(size_t)hi];

  std::vector<char> mask((size_t)n, 0);
  for (int64_t i = 0; i < n; ++i) mask[(size_t)i] = values[i] > threshold ? 1 : 0;

  std::vector<char> seen((size_t)n, 0);
  std::vector<int> stack;
  int regions = 0;
  for (int64_t start = 0; start < n; ++start) {
    if (!mask[(size_t)start] || seen[(size_t)start]) continue;
    ++regions;
    seen[(size_t)start] = 1;
    stack.push_back((int)start);
    while (!stack.empty()) {
      const int cur = stack.back();
      stack.pop_back();
      const int cy = cur / w, cx = cur % w;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dy == 0 && dx == 0) continue;
          if (connectivity == 4 && dy != 0 && dx != 0) continue;
          const int ny = cy + dy, nx = cx + dx;
          if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
          const int ni = ny * w + nx;
          if (mask[(size_t)ni] && !seen[(size_t)ni]) {
            seen[(size_t)ni] = 1;
            stack.push_back(ni);
          }
        }
      }
    }
  }
  return regions;
}

int count_high_regions(const SaliencyMap& map, double percentile, int connectivity) {
  return count_high_regions(map.values, percentile, connectivity);
}

RegionHistogram region_histogram(nets::Classifier& model,
                                 const std::vector<corpus::Item>& test_items,
                                 const corpus::AugmentationPolicy& policy,
                                 double percentile, const std::string& target_layer) {
  if (test_items.empty()) fail(ErrorCode::EmptyDataset, "empty test set");
  RegionHistogram hist;
  for (const auto& item : test_items) {
    const Tensor img = corpus::eval_view(corpus::load_item(item).pixels, policy);
    const Tensor logits = model.logits(single_batch(img), /*train=*/false);
    int pred = 0;
    for (int j = 1; j < logits.dim(1); ++j)
      if (logits[j] > logits[pred]) pred = j;
    const SaliencyMap map = grad_cam(model, img, pred, target_layer);
    const int regions = count_high_regions(map, percentile, 8);
    if (regions == 0)
      ++hist.zero;
    else if (regions == 1)
      ++hist.one;
    else if (regions == 2)
      ++hist.two;
    else
      ++hist.three_plus;
  }
  return hist;
}

TuningCurve tuning_curve(nets::Classifier& model,
                         const std::vector<corpus::Item>& test_items,
                         const corpus::AugmentationPolicy& policy, int n_images,
                         uint64_t seed) {
  if (n_images > (int)test_items.size())
    fail(ErrorCode::InvalidParams, "n_images exceeds the test set");
  std::vector<size_t> order(test_items.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(mix_seed(seed, 0x7c4eu));
  rng.shuffle(order.data(), order.size());

  std::vector<double> channel_means;
  for (int i = 0; i < n_images; ++i) {
    const auto& item = test_items[order[(size_t)i]];
    const Tensor img = corpus::eval_view(corpus::load_item(item).pixels, policy);
    model.net().set_capture(true);
    (void)model.logits(single_batch(img), /*train=*/false);
    const Tensor act = model.net().activation(model.final_conv_layer);
    model.net().set_capture(false);
    const int c = act.dim(1), hw = act.dim(2) * act.dim(3);
    if (channel_means.empty()) channel_means.assign((size_t)c, 0.0);
    for (int k = 0; k < c; ++k) {
      double s = 0.0;
      for (int p = 0; p < hw; ++p) s += act[(int64_t)k * hw + p];
      channel_means[(size_t)k] += s / hw / n_images;
    }
  }

  TuningCurve curve;
  curve.n_images = n_images;
  double mx = 0.0;
  for (double v : channel_means) mx = std::max(mx, v);
  for (double v : channel_means) curve.values.push_back(mx > 0.0 ? v / mx : v);
  std::sort(curve.values.begin(), curve.values.end(), std::greater<double>());
  return curve;
}

// ---------------------------------------------------------------------------
// PCA via cyclic Jacobi on the covariance (double precision throughout).
// ---------------------------------------------------------------------------

namespace {

std::vector<double> jacobi_eigenvalues(std::vector<double>& a, int n) {
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) off += a[(size_t)i * n + j] * a[(size_t)i * n + j];
    if (off < 1e-22) break;
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a[(size_t)p * n + q];
        if (std::abs(apq) < 1e-300) continue;
        const double app = a[(size_t)p * n + p];
        const double aqq = a[(size_t)q * n + q];
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a[(size_t)k * n + p];
          const double akq = a[(size_t)k * n + q];
          a[(size_t)k * n + p] = c * akp - s * akq;
          a[(size_t)k * n + q] = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a[(size_t)p * n + k];
          const double aqk = a[(size_t)q * n + k];
          a[(size_t)p * n + k] = c * apk - s * aqk;
          a[(size_t)q * n + k] = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> eig((size_t)n);
  for (int i = 0; i < n; ++i) eig[(size_t)i] = a[(size_t)i * n + i];
  return eig;
}

}  // namespace

PCAReport pca_report(const Tensor& features) {
  const int n = features.dim(0), d = features.dim(1);
  if (n < 2) fail(ErrorCode::DegenerateInput, "PCA needs at least 2 samples");

  std::vector<double> mean((size_t)d, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) mean[(size_t)j] += features[(int64_t)i * d + j];
  for (auto& m : mean) m /= n;

  std::vector<double> cov((size_t)d * d, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) {
      const double xj = features[(int64_t)i * d + j] - mean[(size_t)j];
      for (int k = j; k < d; ++k) {
        const double xk = features[(int64_t)i * d + k] - mean[(size_t)k];
        cov[(size_t)j * d + k] += xj * xk;
      }
    }
  }
  for (int j = 0; j < d; ++j)
    for (int k = j; k < d; ++k) {
      cov[(size_t)j * d + k] /= (n - 1);
      cov[(size_t)k * d + j] = cov[(size_t)j * d + k];
    }

  std::vector<double> eig = jacobi_eigenvalues(cov, d);
  for (auto& e : eig) e = std::max(e, 0.0);  // numerical negatives are noise
  std::sort(eig.begin(), eig.end(), std::greater<double>());

  PCAReport report;
  report.n_samples = n;
  report.dim = d;
  report.eigenvalues = eig;
  double total = 0.0;
  for (double e : eig) total += e;
  double cum = 0.0;
  for (double e : eig) {
    cum += e;
    report.cumulative_variance.push_back(total > 0.0 ? cum / total : 1.0);
  }
  if (!report.cumulative_variance.empty()) report.cumulative_variance.back() = 1.0;
  return report;
}

int pcs_to_variance(const PCAReport& report, double theta) {
  if (!(theta > 0.0 && theta <= 1.0))
    fail(ErrorCode::InvalidParams, "theta must be in (0,1]");
  for (size_t i = 0; i < report.cumulative_variance.size(); ++i)
    if (report.cumulative_variance[i] >= theta - 1e-12) return (int)i + 1;
  return report.dim;
}

// ---------------------------------------------------------------------------
// Shape bias
// ---------------------------------------------------------------------------

ShapeBiasReport shape_bias_from_predictions(
    const std::vector<CueConflictItem>& items, const std::vector<int>& predictions,
    const std::map<std::string, int>& class_map) {
  if (items.size() != predictions.size())
    fail(ErrorCode::ShapeMismatch, "item/prediction counts differ");
  ShapeBiasReport report;
  for (size_t i = 0; i < items.size(); ++i) {
    const auto& item = items[i];
    if (item.shape_class == item.texture_class)
      fail(ErrorCode::InvalidParams, "cue-conflict item without a conflict");
    auto shape_it = class_map.find(item.shape_class);
    auto tex_it = class_map.find(item.texture_class);
    ShapeBiasCounts& bucket = report.per_class[item.shape_class];
    const int pred = predictions[i];
    if (shape_it != class_map.end() && pred == shape_it->second) {
      bucket.shape++;
      report.overall.shape++;
    } else if (tex_it != class_map.end() && pred == tex_it->second) {
      bucket.texture++;
      report.overall.texture++;
    } else {
      bucket.other++;
      report.overall.other++;
    }
  }
  return report;
}

std::vector<CueConflictItem> load_cue_manifest(const std::string& cue_root) {
  std::ifstream in(fs::path(cue_root) / "cue_manifest.txt");
  if (!in) fail(ErrorCode::MissingData, "no cue_manifest.txt under " + cue_root);
  std::vector<CueConflictItem> items;
  std::string file, shape, texture;
  while (in >> file >> shape >> texture)
    items.push_back({(fs::path(cue_root) / file).string(), shape, texture});
  if (items.empty()) fail(ErrorCode::MissingData, "cue manifest is empty");
  return items;
}

ShapeBiasReport shape_bias(nets::Classifier& model, const std::string& cue_root,
                           const std::map<std::string, int>& class_map,
                           const corpus::AugmentationPolicy& policy) {
  const auto items = load_cue_manifest(cue_root);
  std::vector<int> predictions;
  for (const auto& item : items) {
    const Tensor img = corpus::eval_view(corpus::read_image_file(item.path), policy);
    const Tensor logits = model.logits(single_batch(img), /*train=*/false);
    int pred = 0;
    for (int j = 1; j < logits.dim(1); ++j)
      if (logits[j] > logits[pred]) pred = j;
    predictions.push_back(pred);
  }
  return shape_bias_from_predictions(items, predictions, class_map);
}

void save_activation_dump(const std::string& path, const Tensor& features) {
  nets::save_tensor_blob(path, "features", features);
}

Tensor load_activation_dump(const std::string& path) {
  return nets::load_tensor_blob(path).second;
}

}  // namespace sketchlab::probe
