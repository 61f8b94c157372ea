#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sketchlab/corpus/augment.hpp"
#include "sketchlab/corpus/dataset.hpp"
#include "sketchlab/nets/archs.hpp"

namespace sketchlab::probe {

struct SaliencyMap {
  Tensor values;  // (H,W), in [0,1]; max is 1 unless identically 0
  std::string source_id;
  int class_idx = 0;
};

// Channel weights alpha_k = spatial mean of d(logit_class)/dA_k at the target
// layer; exposed separately for gradient checking.
std::vector<double> grad_cam_weights(nets::Classifier& model, const Tensor& image,
                                     int class_idx, const std::string& target_layer);

// ReLU-weighted channel sum, bilinearly upsampled to the image grid and
// normalized by its maximum (an all-zero map is returned unchanged).
SaliencyMap grad_cam(nets::Classifier& model, const Tensor& image, int class_idx,
                     const std::string& target_layer = "");

// Connected components of {pixels strictly above the per-map percentile},
// 8-connectivity by default; linear-interpolation percentile.
int count_high_regions(const SaliencyMap& map, double percentile = 85.0,
                       int connectivity = 8);
int count_high_regions(const Tensor& values, double percentile = 85.0,
                       int connectivity = 8);

struct RegionHistogram {
  int one = 0;
  int two = 0;
  int three_plus = 0;
  int zero = 0;  // reported separately, excluded from the bucket total

  int total_counted() const { return one + two + three_plus; }
};

// Saliency at the model's predicted class per test image, then bucketed
// region counts.
RegionHistogram region_histogram(nets::Classifier& model,
                                 const std::vector<corpus::Item>& test_items,
                                 const corpus::AugmentationPolicy& policy,
                                 double percentile = 85.0,
                                 const std::string& target_layer = "");

struct TuningCurve {
  std::vector<double> values;  // normalized, non-increasing
  int n_images = 0;
};

// Mean post-nonlinearity activation per final-conv channel over the first
// n_images under a seeded order, normalized by the maximum channel.
TuningCurve tuning_curve(nets::Classifier& model,
                         const std::vector<corpus::Item>& test_items,
                         const corpus::AugmentationPolicy& policy,
                         int n_images = 500, uint64_t seed = 0);

struct PCAReport {
  std::vector<double> eigenvalues;          // descending, >= 0
  std::vector<double> cumulative_variance;  // non-decreasing, final = 1
  int n_samples = 0;
  int dim = 0;
};

// Eigen-decomposition of the mean-centered feature covariance (features are
// N x D). Throws DegenerateInput for N < 2.
PCAReport pca_report(const Tensor& features);
int pcs_to_variance(const PCAReport& report, double theta);

struct ShapeBiasCounts {
  int shape = 0;
  int texture = 0;
  int other = 0;
  std::optional<double> fraction() const {
    if (shape + texture == 0) return std::nullopt;
    return (double)shape / (shape + texture);
  }
};

struct ShapeBiasReport {
  std::map<std::string, ShapeBiasCounts> per_class;  // keyed by shape class
  ShapeBiasCounts overall;
};

struct CueConflictItem {
  std::string path;
  std::string shape_class;
  std::string texture_class;
};

// Pure counting logic over precomputed predictions (model class indices).
ShapeBiasReport shape_bias_from_predictions(
    const std::vector<CueConflictItem>& items, const std::vector<int>& predictions,
    const std::map<std::string, int>& class_map);

// Runs the model over a cue-conflict folder + manifest.
ShapeBiasReport shape_bias(nets::Classifier& model, const std::string& cue_root,
                           const std::map<std::string, int>& class_map,
                           const corpus::AugmentationPolicy& policy);

std::vector<CueConflictItem> load_cue_manifest(const std::string& cue_root);

// Binary activation dumps (header + raw f32), so externally trained models
// can be probed.
void save_activation_dump(const std::string& path, const Tensor& features);
Tensor load_activation_dump(const std::string& path);

}  // namespace sketchlab::probe
