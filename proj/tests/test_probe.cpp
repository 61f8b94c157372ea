#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#ifdef SKETCHLAB_HAVE_EIGEN
#include <Eigen/Dense>
#endif

#include "sketchlab/corpus/synthetic.hpp"
#include "sketchlab/probe/probe.hpp"
#include "test_util.hpp"

using namespace sketchlab;
using namespace sketchlab::probe;
using test_util::random_tensor;

namespace {

const std::string kScratch = test_util::scratch_dir("probe");

// Independent region-count oracle: union-find over the strict-threshold mask
// with the same linear-interpolation percentile.
int oracle_regions(const Tensor& values, double percentile, int connectivity) {
  const int h = values.dim(0), w = values.dim(1);
  const int64_t n = (int64_t)h * w;
  std::vector<float> sorted(values.data(), values.data() + n);
  std::sort(sorted.begin(), sorted.end());
  const double pos = percentile / 100.0 * (double)(n - 1);
  const int64_t lo = (int64_t)pos;
  const int64_t hi = std::min(lo + 1, n - 1);
  const double thr = (1.0 - (pos - lo)) * sorted[(size_t)lo] + (pos - lo) * sorted[(size_t)hi];

  std::vector<int> parent((size_t)n);
  for (int64_t i = 0; i < n; ++i) parent[(size_t)i] = (int)i;
  std::function<int(int)> find = [&](int a) {
    while (parent[(size_t)a] != a) a = parent[(size_t)a] = parent[(size_t)parent[(size_t)a]];
    return a;
  };
  auto unite = [&](int a, int b) { parent[(size_t)find(a)] = find(b); };

  auto on = [&](int y, int x) { return values[y * w + x] > thr; };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!on(y, x)) continue;
      const int dys[4] = {0, 1, 1, 1};
      const int dxs[4] = {1, -1, 0, 1};
      const int limit = connectivity == 8 ? 4 : 2;
      const int dys4[2] = {0, 1}, dxs4[2] = {1, 0};
      for (int k = 0; k < limit; ++k) {
        const int ny = y + (connectivity == 8 ? dys[k] : dys4[k]);
        const int nx = x + (connectivity == 8 ? dxs[k] : dxs4[k]);
        if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
        if (on(ny, nx)) unite(y * w + x, ny * w + nx);
      }
    }
  std::set<int> roots;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (on(y, x)) roots.insert(find(y * w + x));
  return (int)roots.size();
}

// Toy classifier assembled by hand; the taps follow the same naming scheme
// the real architectures use.
std::unique_ptr<nets::Classifier> toy_model(int conv_out, int classes,
                                            uint64_t seed) {
  auto model = std::make_unique<nets::Classifier>();
  model->net().add("feat", std::make_unique<nets::Conv2d>(3, conv_out, 3, 1, 1, true));
  model->net().add("act", std::make_unique<nets::ReLU>());
  model->net().add("pool", std::make_unique<nets::GlobalAvgPool>());
  model->net().add("fc", std::make_unique<nets::Linear>(conv_out, classes));
  nets::init_params(model->net(), seed);
  model->penultimate_width = conv_out;
  model->penultimate_layer = "pool";
  model->final_conv_layer = "act";
  model->meta.arch = "resnet8";
  model->meta.num_classes = classes;
  model->meta.input_resolution = 8;
  return model;
}

void set_params(nets::Layer& root, const std::map<std::string, Tensor>& overrides) {
  auto params = nets::export_params(root);
  for (const auto& [k, v] : overrides) params[k] = v;
  nets::import_params(root, params);
}

}  // namespace

TEST_CASE("grad_cam: zero map when the logit ignores the target layer") {
  auto model = toy_model(2, 2, 1);
  // class-0 row of the head is zero: the class-0 logit is constant in "feat"
  Tensor w({2, 2});
  w.fill(0.0f);
  w[2] = 0.7f;  // class 1 keeps a dependence
  w[3] = -0.4f;
  Tensor b({2});
  set_params(model->net(), {{"fc.weight", w}, {"fc.bias", b}});

  const Tensor image = random_tensor({3, 8, 8}, 2, 0.0, 1.0);
  const SaliencyMap map = grad_cam(*model, image, 0, "act");
  for (int64_t i = 0; i < map.values.numel(); ++i) CHECK(map.values[i] == 0.0f);
  CHECK(count_high_regions(map) == 0);
}

TEST_CASE("grad_cam: hand-computed hot corner on a 2x2 activation") {
  // one conv channel equal to 2*R, head weight 1: A = [[2,0],[0,0]] for an
  // image with a single lit corner pixel
  auto model = toy_model(1, 2, 3);
  Tensor conv_w({1, 27});
  conv_w.fill(0.0f);
  conv_w[4] = 2.0f;  // center tap of the R-channel 3x3 kernel
  Tensor conv_b({1});
  Tensor fc_w({2, 1});
  fc_w[0] = 1.0f;
  fc_w[1] = -1.0f;
  Tensor fc_b({2});
  set_params(model->net(), {{"feat.weight", conv_w},
                            {"feat.bias", conv_b},
                            {"fc.weight", fc_w},
                            {"fc.bias", fc_b}});

  Tensor image({3, 2, 2});
  image[0] = 1.0f;  // R channel corner
  const SaliencyMap map = grad_cam(*model, image, 0, "act");
  REQUIRE(map.values.dim(0) == 2);
  REQUIRE(map.values.dim(1) == 2);
  CHECK(map.values[0] == doctest::Approx(1.0f));
  CHECK(map.values[1] == doctest::Approx(0.0f));
  CHECK(map.values[2] == doctest::Approx(0.0f));
  CHECK(map.values[3] == doctest::Approx(0.0f));
  CHECK(count_high_regions(map) == 1);
}

TEST_CASE("grad_cam weights match finite differences on a two-layer network") {
  auto model = toy_model(3, 4, 5);
  const Tensor image = random_tensor({3, 6, 6}, 6, 0.0, 1.0);
  const int class_idx = 2;
  const std::vector<double> alphas = grad_cam_weights(*model, image, class_idx, "act");
  REQUIRE(alphas.size() == 3);

  // capture A, then differentiate the head numerically w.r.t. each A entry
  model->net().set_capture(true);
  (void)model->logits(Tensor(std::vector<int>{1, 3, 6, 6}), false);
  model->net().set_capture(false);
  model->net().set_capture(true);
  Tensor batch({1, 3, 6, 6});
  std::copy(image.data(), image.data() + image.numel(), batch.data());
  (void)model->logits(batch, false);
  Tensor act = model->net().activation("act");
  model->net().set_capture(false);

  const int hw = 36;
  for (int k = 0; k < 3; ++k) {
    double alpha_fd = 0.0;
    for (int i = 0; i < hw; ++i) {
      const int64_t idx = (int64_t)k * hw + i;
      const float saved = act[idx];
      const double h = 1e-2;
      act[idx] = (float)(saved + h);
      const double up = model->net().forward_from("act", act, false)[class_idx];
      act[idx] = (float)(saved - h);
      const double down = model->net().forward_from("act", act, false)[class_idx];
      act[idx] = saved;
      alpha_fd += (up - down) / (2 * h);
    }
    alpha_fd /= hw;
    CHECK(std::abs(alpha_fd - alphas[(size_t)k]) <=
          1e-3 * std::max({1.0, std::abs(alpha_fd), std::abs(alphas[(size_t)k])}));
  }
}

TEST_CASE("grad_cam: range, shape, and unknown layers") {
  auto model = toy_model(2, 3, 7);
  const Tensor image = random_tensor({3, 8, 8}, 8, 0.0, 1.0);
  const SaliencyMap map = grad_cam(*model, image, 1, "act");
  CHECK(map.values.dim(0) == 8);
  CHECK(map.values.dim(1) == 8);
  float mx = 0.0f;
  for (int64_t i = 0; i < map.values.numel(); ++i) {
    CHECK(map.values[i] >= 0.0f);
    CHECK(map.values[i] <= 1.0f);
    mx = std::max(mx, map.values[i]);
  }
  CHECK((mx == 1.0f || mx == 0.0f));

  try {
    grad_cam(*model, image, 1, "no_such_layer");
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownLayer);
  }
}

TEST_CASE("count_high_regions: spec cases") {
  // constant map: no pixel strictly exceeds its own percentile
  CHECK(count_high_regions(Tensor::full({6, 6}, 0.7f)) == 0);

  // two disjoint 2x2 blocks covering under 15% of the map
  Tensor blocks({8, 8});
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x) {
      blocks[y * 8 + x] = 1.0f;
      blocks[(y + 6) * 8 + (x + 6)] = 1.0f;
    }
  CHECK(count_high_regions(blocks, 85.0, 8) == 2);
  CHECK(oracle_regions(blocks, 85.0, 8) == 2);
  // blocks at >15% coverage sit at the percentile itself; the strict
  // threshold then excludes them
  Tensor dense({6, 6});
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x) {
      dense[y * 6 + x] = 1.0f;
      dense[(y + 4) * 6 + (x + 4)] = 1.0f;
    }
  CHECK(count_high_regions(dense, 85.0, 8) == 0);
  CHECK(oracle_regions(dense, 85.0, 8) == 0);

  // single hot pixel
  Tensor dot({5, 5});
  dot[12] = 1.0f;
  CHECK(count_high_regions(dot) == 1);

  // 4- vs 8-connectivity on a diagonal pair
  Tensor diag({4, 4});
  diag[0] = 1.0f;
  diag[5] = 1.0f;
  CHECK(count_high_regions(diag, 85.0, 8) == 1);
  CHECK(count_high_regions(diag, 85.0, 4) == 2);

  CHECK_THROWS_AS(count_high_regions(diag, 0.0, 8), Error);
  CHECK_THROWS_AS(count_high_regions(diag, 85.0, 6), Error);
}

TEST_CASE("count_high_regions agrees with the union-find oracle on random maps") {
  for (uint64_t seed = 0; seed < 100; ++seed) {
    const Tensor map = random_tensor({16, 16}, 1000 + seed, 0.0, 1.0);
    for (int conn : {4, 8}) {
      CHECK(count_high_regions(map, 85.0, conn) == oracle_regions(map, 85.0, conn));
      CHECK(count_high_regions(map, 50.0, conn) == oracle_regions(map, 50.0, conn));
    }
  }
}

TEST_CASE("region_histogram: totals and empty input") {
  corpus::SyntheticSpec spec;
  spec.per_class_train = 1;
  spec.per_class_test = 2;
  spec.resolution = 16;
  const corpus::DatasetManifest data =
      corpus::make_shape_corpus(kScratch + "/shapes", spec);
  corpus::AugmentationPolicy policy;
  policy.out_resolution = 16;
  policy.eval_center_crop = 16;

  nets::ArchSpec arch;
  arch.id = "resnet8";
  arch.num_classes = 10;
  arch.input_resolution = 16;
  arch.seed = 9;
  auto model = nets::build_classifier(arch);

  const RegionHistogram hist =
      region_histogram(*model, data.split("test"), policy, 85.0);
  CHECK(hist.total_counted() + hist.zero == (int)data.split("test").size());

  CHECK_THROWS_AS(region_histogram(*model, {}, policy, 85.0), Error);
}

TEST_CASE("tuning curve: arithmetic, flat, zero, and invariances") {
  corpus::SyntheticSpec spec;
  spec.per_class_train = 1;
  spec.per_class_test = 1;
  spec.resolution = 8;
  const corpus::DatasetManifest data =
      corpus::make_shape_corpus(kScratch + "/tuning", spec);
  corpus::AugmentationPolicy policy;
  policy.out_resolution = 8;
  policy.eval_center_crop = 8;
  const auto items = data.split("test");

  // channels proportional to (2, 1, 4) of the same base signal
  auto model = toy_model(3, 2, 10);
  Tensor w({3, 27});
  w.fill(0.0f);
  w[0 * 27 + 13] = 2.0f;
  w[1 * 27 + 13] = 1.0f;
  w[2 * 27 + 13] = 4.0f;
  Tensor b({3});
  set_params(model->net(), {{"feat.weight", w}, {"feat.bias", b}});

  const TuningCurve curve = tuning_curve(*model, items, policy, 4, 0);
  REQUIRE(curve.values.size() == 3);
  CHECK(curve.values[0] == doctest::Approx(1.0));
  CHECK(curve.values[1] == doctest::Approx(0.5).epsilon(1e-4));
  CHECK(curve.values[2] == doctest::Approx(0.25).epsilon(1e-4));

  // scale invariance
  Tensor w2 = w;
  for (int64_t i = 0; i < w2.numel(); ++i) w2[i] *= 3.0f;
  set_params(model->net(), {{"feat.weight", w2}});
  const TuningCurve scaled = tuning_curve(*model, items, policy, 4, 0);
  for (size_t i = 0; i < 3; ++i)
    CHECK(scaled.values[i] == doctest::Approx(curve.values[i]).epsilon(1e-4));

  // permutation invariance
  Tensor w3({3, 27});
  w3.fill(0.0f);
  w3[0 * 27 + 13] = 4.0f;
  w3[1 * 27 + 13] = 2.0f;
  w3[2 * 27 + 13] = 1.0f;
  set_params(model->net(), {{"feat.weight", w3}});
  const TuningCurve permuted = tuning_curve(*model, items, policy, 4, 0);
  for (size_t i = 0; i < 3; ++i)
    CHECK(permuted.values[i] == doctest::Approx(curve.values[i]).epsilon(1e-4));

  // all-equal channels: flat curve of ones
  Tensor w4({3, 27});
  w4.fill(0.0f);
  for (int k = 0; k < 3; ++k) w4[k * 27 + 13] = 1.0f;
  set_params(model->net(), {{"feat.weight", w4}});
  const TuningCurve flat = tuning_curve(*model, items, policy, 4, 0);
  for (double v : flat.values) CHECK(v == doctest::Approx(1.0));

  // all-zero activations: normalization skipped
  Tensor w5({3, 27});
  set_params(model->net(), {{"feat.weight", w5}});
  const TuningCurve zero = tuning_curve(*model, items, policy, 4, 0);
  for (double v : zero.values) CHECK(v == 0.0);

  CHECK_THROWS_AS(tuning_curve(*model, items, policy, 100, 0), Error);
}

TEST_CASE("pca: rank-1 data, hand-built spectrum, and degenerate input") {
  // points on one axis in 3-D
  Tensor line({6, 3});
  for (int i = 0; i < 6; ++i) line[(int64_t)i * 3 + 1] = (float)i - 2.5f;
  const PCAReport rank1 = pca_report(line);
  CHECK(pcs_to_variance(rank1, 0.90) == 1);
  CHECK(rank1.cumulative_variance[0] == doctest::Approx(1.0));

  // (+-3, 0), (0, +-1): covariance eigenvalues in ratio 9:1
  Tensor cross({4, 2});
  cross[0] = 3.0f;
  cross[2] = -3.0f;
  cross[5] = 1.0f;
  cross[7] = -1.0f;
  const PCAReport spectrum = pca_report(cross);
  CHECK(spectrum.cumulative_variance[0] == doctest::Approx(0.9));
  CHECK(spectrum.cumulative_variance[1] == doctest::Approx(1.0));
  CHECK(pcs_to_variance(spectrum, 0.90) == 1);
  CHECK(pcs_to_variance(spectrum, 0.95) == 2);

  Tensor single({1, 4});
  CHECK_THROWS_AS(pca_report(single), Error);
  CHECK_THROWS_AS(pcs_to_variance(spectrum, 0.0), Error);
}

TEST_CASE("pca properties on random matrices") {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    const Tensor features = random_tensor({50, 8}, 2000 + seed, -2.0, 2.0);
    const PCAReport report = pca_report(features);
    REQUIRE(report.eigenvalues.size() == 8);
    for (size_t i = 1; i < 8; ++i) {
      CHECK(report.eigenvalues[i - 1] >= report.eigenvalues[i]);
      CHECK(report.cumulative_variance[i] >= report.cumulative_variance[i - 1] - 1e-12);
    }
    CHECK(std::abs(report.cumulative_variance.back() - 1.0) <= 1e-6);
    CHECK(pcs_to_variance(report, 1.0) <= 8);
  }
}

#ifdef SKETCHLAB_HAVE_EIGEN
TEST_CASE("pca agrees with an Eigen decomposition oracle to index exactness") {
  for (uint64_t seed = 0; seed < 25; ++seed) {
    const Tensor features = random_tensor({50, 8}, 3000 + seed, -1.0, 1.0);
    const PCAReport report = pca_report(features);

    Eigen::MatrixXd x(50, 8);
    for (int i = 0; i < 50; ++i)
      for (int j = 0; j < 8; ++j) x(i, j) = features[(int64_t)i * 8 + j];
    const Eigen::RowVectorXd mean = x.colwise().mean();
    x.rowwise() -= mean;
    const Eigen::MatrixXd cov = x.transpose() * x / 49.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    std::vector<double> eig(solver.eigenvalues().data(), solver.eigenvalues().data() + 8);
    std::sort(eig.begin(), eig.end(), std::greater<double>());
    const double total = std::accumulate(eig.begin(), eig.end(), 0.0);

    double cum = 0.0;
    int oracle_pcs = 8;
    for (int i = 0; i < 8; ++i) {
      cum += eig[(size_t)i];
      if (cum / total >= 0.90 - 1e-12) {
        oracle_pcs = i + 1;
        break;
      }
    }
    CHECK(pcs_to_variance(report, 0.90) == oracle_pcs);
    for (int i = 0; i < 8; ++i)
      CHECK(report.eigenvalues[(size_t)i] == doctest::Approx(eig[(size_t)i]).epsilon(1e-8));
  }
}
#endif

TEST_CASE("shape bias counting") {
  std::vector<CueConflictItem> items = {
      {"a.ppm", "disk", "square"},
      {"b.ppm", "disk", "square"},
      {"c.ppm", "disk", "triangle"},
      {"d.ppm", "disk", "square"},
  };
  const std::map<std::string, int> class_map = {
      {"disk", 0}, {"square", 1}, {"triangle", 2}, {"star", 3}, {"plus", 4}};

  // all shape decisions
  ShapeBiasReport all_shape =
      shape_bias_from_predictions(items, {0, 0, 0, 0}, class_map);
  CHECK(*all_shape.overall.fraction() == doctest::Approx(1.0));

  // 2 shape, 1 texture, 1 other -> 2/3
  ShapeBiasReport mixed = shape_bias_from_predictions(items, {0, 0, 2, 4}, class_map);
  CHECK(*mixed.overall.fraction() == doctest::Approx(2.0 / 3.0));
  CHECK(mixed.overall.shape == 2);
  CHECK(mixed.overall.texture == 1);
  CHECK(mixed.overall.other == 1);

  // all other: undefined fraction
  ShapeBiasReport other = shape_bias_from_predictions(items, {3, 3, 4, 3}, class_map);
  CHECK_FALSE(other.overall.fraction().has_value());
  CHECK(other.overall.other == 4);

  // relabeling "other" predictions among non-cue classes leaves the fraction
  ShapeBiasReport relabeled = shape_bias_from_predictions(items, {0, 0, 2, 3}, class_map);
  CHECK(*relabeled.overall.fraction() == *mixed.overall.fraction());

  CHECK_THROWS_AS(shape_bias_from_predictions(items, {0}, class_map), Error);
}

TEST_CASE("shape bias end to end on a generated cue-conflict folder") {
  const std::string root = kScratch + "/cue";
  corpus::make_cue_conflict_set(root, 12, 16, 5);
  const auto items = load_cue_manifest(root);
  CHECK(items.size() == 12);
  for (const auto& it : items) CHECK(it.shape_class != it.texture_class);

  nets::ArchSpec arch;
  arch.id = "resnet8";
  arch.num_classes = 10;
  arch.input_resolution = 16;
  arch.seed = 6;
  auto model = nets::build_classifier(arch);
  corpus::AugmentationPolicy policy;
  policy.out_resolution = 16;
  policy.eval_center_crop = 16;

  std::map<std::string, int> class_map;
  const auto names = corpus::shape_class_names();
  for (size_t i = 0; i < names.size(); ++i) class_map[names[i]] = (int)i;

  const ShapeBiasReport report = shape_bias(*model, root, class_map, policy);
  int total = report.overall.shape + report.overall.texture + report.overall.other;
  CHECK(total == 12);
}

TEST_CASE("activation dumps round-trip") {
  const Tensor features = random_tensor({7, 5}, 11);
  const std::string path = kScratch + "/feats.bin";
  save_activation_dump(path, features);
  const Tensor back = load_activation_dump(path);
  CHECK(back.dim(0) == 7);
  CHECK(back.dim(1) == 5);
  CHECK(test_util::bitwise_equal(features, back));
}
