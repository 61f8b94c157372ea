#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "sketchlab/corpus/augment.hpp"
#include "sketchlab/corpus/dataset.hpp"
#include "sketchlab/corpus/line_drawing.hpp"
#include "sketchlab/corpus/ppm.hpp"
#include "sketchlab/corpus/synthetic.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace sketchlab;
using namespace sketchlab::corpus;
using test_util::random_tensor;

namespace {

const std::string kScratch = test_util::scratch_dir("corpus");

bool in_unit_range(const Tensor& t) {
  for (int64_t i = 0; i < t.numel(); ++i)
    if (t[i] < 0.0f || t[i] > 1.0f) return false;
  return true;
}

// Independent brute-force evaluation of the edge operator on a luma image:
// direct O(n^2) convolution with truncated Gaussian taps, clamp borders.
Tensor brute_force_dog(const Tensor& luma, double sigma, double k, double tau) {
  const int h = luma.dim(1), w = luma.dim(2);
  auto blur = [&](double s) {
    const int radius = (int)std::ceil(3.0 * s);
    std::vector<double> kern((size_t)(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i)
      sum += kern[(size_t)(i + radius)] = std::exp(-0.5 * i * i / (s * s));
    for (auto& v : kern) v /= sum;
    Tensor out({1, h, w});
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int dy = -radius; dy <= radius; ++dy)
          for (int dx = -radius; dx <= radius; ++dx) {
            const int sy = std::clamp(y + dy, 0, h - 1);
            const int sx = std::clamp(x + dx, 0, w - 1);
            acc += kern[(size_t)(dy + radius)] * kern[(size_t)(dx + radius)] *
                   luma[sy * w + sx];
          }
        out[y * w + x] = (float)acc;
      }
    return out;
  };
  const Tensor narrow = blur(sigma), wide = blur(k * sigma);
  Tensor dog({1, h, w});
  for (int64_t i = 0; i < dog.numel(); ++i) dog[i] = narrow[i] - (float)tau * wide[i];
  return dog;
}

LabeledImage step_edge_image(int size, int edge_col) {
  LabeledImage img;
  img.pixels = Tensor({3, size, size});
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x)
        img.pixels.data()[((int64_t)c * size + y) * size + x] = x >= edge_col ? 1.0f : 0.0f;
  img.label = 3;
  img.source_id = "test/step";
  return img;
}

}  // namespace

TEST_CASE("synthetic corpus loads with expected counts and ordering") {
  SyntheticSpec spec;
  spec.per_class_train = 4;
  spec.per_class_test = 2;
  spec.resolution = 16;
  const std::string root = kScratch + "/shapes";
  const DatasetManifest m = make_shape_corpus(root, spec);
  CHECK(m.num_classes() == 10);
  CHECK(m.split("train").size() == 40);
  CHECK(m.split("test").size() == 20);
  auto items = m.split("train");
  for (size_t i = 1; i < items.size(); ++i) CHECK(items[i - 1].path < items[i].path);
  const DatasetManifest m2 = load_dataset(root, 10);
  CHECK(m2.split("train").size() == 40);
  CHECK(m2.class_names == m.class_names);

  const LabeledImage img = load_item(items[0]);
  CHECK(in_unit_range(img.pixels));
  CHECK(img.pixels.dim(0) == 3);
}

TEST_CASE("load_dataset error paths") {
  try {
    load_dataset(kScratch + "/nonexistent", 10);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingData);
  }

  const std::string empty_root = kScratch + "/empty";
  fs::create_directories(empty_root + "/train");
  CHECK_THROWS_AS(load_dataset(empty_root, 10), Error);

  const std::string bad_root = kScratch + "/badclasses";
  for (int c = 0; c < 9; ++c) {
    fs::create_directories(bad_root + "/train/class" + std::to_string(c));
    fs::create_directories(bad_root + "/test/class" + std::to_string(c));
  }
  try {
    load_dataset(bad_root, 10);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ClassMismatch);
  }
}

TEST_CASE("line conversion: constant images map to pure white") {
  for (float level : {0.0f, 0.3f, 1.0f}) {
    LabeledImage img;
    img.pixels = Tensor::full({3, 16, 16}, level);
    img.label = 5;
    img.source_id = "test/const";
    const LabeledImage line = to_line_drawing(img, EdgeParams{});
    CHECK(line.domain == kDomainLine);
    CHECK(line.label == 5);
    CHECK(line.source_id == "test/const");
    for (int64_t i = 0; i < line.pixels.numel(); ++i) CHECK(line.pixels[i] == 1.0f);
  }
}

TEST_CASE("line conversion: step edge yields a localized dark stroke") {
  const int size = 32, edge = 16;
  const EdgeParams params;
  const LabeledImage img = step_edge_image(size, edge);
  const LabeledImage line = to_line_drawing(img, params);
  CHECK(in_unit_range(line.pixels));

  // brute-force DoG response decides where strokes may appear
  const Tensor dog = brute_force_dog(rgb_to_luma(img.pixels), params.sigma,
                                     params.k, params.tau);
  for (int y = 8; y < 24; ++y) {
    for (int x = 0; x < size; ++x) {
      const float value = line.pixels[y * size + x];
      const float response = dog[y * size + x];
      if (response >= -(float)params.eps) {
        CHECK(value == 1.0f);
      } else {
        const float expected = std::clamp(
            1.0f + std::tanh((float)params.phi * (response + (float)params.eps)),
            0.0f, 1.0f);
        CHECK(value == doctest::Approx(expected).epsilon(1e-3));
      }
    }
  }
  // dark stroke within 2*sigma of the edge; far columns stay exactly white
  float darkest = 1.0f;
  for (int y = 8; y < 24; ++y)
    for (int x = edge - 2; x <= edge + 2; ++x)
      darkest = std::min(darkest, line.pixels[y * size + x]);
  CHECK(darkest < 0.5f);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      if (std::abs(x - edge) > 8) CHECK(line.pixels[y * size + x] == 1.0f);
}

TEST_CASE("line conversion is deterministic and validates params") {
  const LabeledImage img = step_edge_image(24, 11);
  const LabeledImage a = to_line_drawing(img, EdgeParams{});
  const LabeledImage b = to_line_drawing(img, EdgeParams{});
  CHECK(test_util::bitwise_equal(a.pixels, b.pixels));
  // the drawing is one channel replicated
  const int hw = 24 * 24;
  for (int i = 0; i < hw; ++i) {
    CHECK(a.pixels[i] == a.pixels[hw + i]);
    CHECK(a.pixels[i] == a.pixels[2 * hw + i]);
  }

  EdgeParams bad;
  bad.sigma = 0.0;
  CHECK_THROWS_AS(to_line_drawing(img, bad), Error);
}

TEST_CASE("corpus conversion preserves labels and source ids") {
  SyntheticSpec spec;
  spec.per_class_train = 2;
  spec.per_class_test = 1;
  spec.resolution = 16;
  const std::string root = kScratch + "/conv";
  const DatasetManifest m = make_shape_corpus(root, spec);
  const DatasetManifest line = convert_corpus_to_line(m, root + "-line", EdgeParams{});
  CHECK(line.domain == kDomainLine);
  REQUIRE(line.split("train").size() == m.split("train").size());
  for (size_t i = 0; i < m.split("train").size(); ++i) {
    CHECK(line.split("train")[i].label == m.split("train")[i].label);
    CHECK(line.split("train")[i].source_id == m.split("train")[i].source_id);
  }
  const DatasetManifest reloaded = load_dataset(root + "-line", 10);
  CHECK(reloaded.domain == kDomainLine);
  CHECK(reloaded.converter_params == EdgeParams{}.to_string());
}

TEST_CASE("stratified subset arithmetic, identity, and rounding") {
  DatasetManifest m;
  m.class_names = {"a", "b"};
  for (int c = 0; c < 2; ++c) {
    const int n = c == 0 ? 13 : 7;
    for (int i = 0; i < n; ++i) {
      Item it;
      char buf[32];
      std::snprintf(buf, sizeof(buf), "cls%d/img%02d", c, i);
      it.path = buf;
      it.label = c;
      m.splits["train"].push_back(it);
    }
  }
  m.splits["test"] = {};

  const DatasetManifest half = stratified_subset(m, 0.5, 99);
  const auto counts = half.per_class_counts("train");
  CHECK(counts[0] == 7);
  CHECK(counts[1] == 4);

  const DatasetManifest full = stratified_subset(m, 1.0, 99);
  REQUIRE(full.split("train").size() == m.split("train").size());
  for (size_t i = 0; i < full.split("train").size(); ++i)
    CHECK(full.split("train")[i].path == m.split("train")[i].path);

  CHECK_THROWS_AS(stratified_subset(m, 0.0, 1), Error);
  CHECK_THROWS_AS(stratified_subset(m, 1.5, 1), Error);
}

TEST_CASE("stratified subset: balanced exactness and nesting") {
  DatasetManifest m;
  for (int c = 0; c < 10; ++c) m.class_names.push_back("c" + std::to_string(c));
  for (int c = 0; c < 10; ++c)
    for (int i = 0; i < 20; ++i) {
      Item it;
      char buf[32];
      std::snprintf(buf, sizeof(buf), "c%d/img%02d", c, i);
      it.path = buf;
      it.label = c;
      m.splits["train"].push_back(it);
    }
  m.splits["test"] = {};

  const DatasetManifest tenth = stratified_subset(m, 0.1, 7);
  CHECK(tenth.split("train").size() == 20);
  for (int count : tenth.per_class_counts("train")) CHECK(count == 2);

  std::vector<double> fractions = {0.05, 0.15, 0.3, 0.55, 0.8, 1.0};
  std::set<std::string> previous;
  for (double f : fractions) {
    const DatasetManifest sub = stratified_subset(m, f, 31);
    std::set<std::string> current;
    for (const auto& it : sub.split("train")) current.insert(it.path);
    for (const auto& p : previous) CHECK(current.count(p) == 1);
    previous = current;
  }

  const DatasetManifest s1 = stratified_subset(m, 0.37, 5);
  const DatasetManifest s2 = stratified_subset(m, 0.37, 5);
  REQUIRE(s1.split("train").size() == s2.split("train").size());
  for (size_t i = 0; i < s1.split("train").size(); ++i)
    CHECK(s1.split("train")[i].path == s2.split("train")[i].path);
}

TEST_CASE("augment: forced flip, identity, determinism, range closure") {
  AugmentationPolicy policy;
  policy.out_resolution = 12;
  policy.eval_center_crop = 12;

  const Tensor img = random_tensor({3, 12, 12}, 404, 0.0, 1.0);

  policy.crop_scale_min = policy.crop_scale_max = 1.0;
  policy.rotation_degrees = 0.0;
  policy.flip_probability = 1.0;
  {
    Rng rng(1);
    const Tensor out = augment(img, policy, rng);
    const Tensor expected = hflip(img);
    CHECK(test_util::bitwise_equal(out, expected));
  }

  policy.flip_probability = 0.0;
  {
    Rng rng(2);
    const Tensor out = augment(img, policy, rng);
    CHECK(test_util::bitwise_equal(out, img));
  }

  policy.crop_scale_min = 0.5;
  policy.flip_probability = 0.5;
  policy.rotation_degrees = 15.0;
  {
    Rng r1(77), r2(77);
    const Tensor a = augment(img, policy, r1);
    const Tensor b = augment(img, policy, r2);
    CHECK(test_util::bitwise_equal(a, b));
  }

  for (uint64_t seed = 0; seed < 8; ++seed) {
    Rng rng(seed);
    const Tensor src = random_tensor({3, 20, 20}, 1000 + seed, 0.0, 1.0);
    CHECK(in_unit_range(augment(src, policy, rng)));
    AugmentationPolicy eval_policy = policy;
    eval_policy.eval_center_crop = 12;
    CHECK(in_unit_range(eval_view(src, eval_policy)));
  }

  LabeledImage li;
  li.pixels = img;
  li.label = 4;
  li.domain = kDomainLine;
  Rng rng(3);
  const LabeledImage out = augment(li, policy, rng);
  CHECK(out.label == 4);
  CHECK(out.domain == kDomainLine);
}

TEST_CASE("eval_view: identity, shorter-side resize offsets, upscale rule") {
  AugmentationPolicy policy;
  policy.out_resolution = 96;
  policy.eval_center_crop = 96;

  const Tensor square = random_tensor({3, 96, 96}, 88, 0.0, 1.0);
  CHECK(test_util::bitwise_equal(eval_view(square, policy), square));

  // 100x120 -> shorter side to 96 -> 96x115 -> crop starts at column 9
  const Tensor rect = random_tensor({3, 100, 120}, 89, 0.0, 1.0);
  const Tensor view = eval_view(rect, policy);
  CHECK(view.dim(1) == 96);
  CHECK(view.dim(2) == 96);
  const Tensor expected = crop(resize_image(rect, 96, 115), 0, 9, 96, 96);
  CHECK(test_util::bitwise_equal(view, expected));

  const Tensor tiny = random_tensor({3, 8, 8}, 90, 0.0, 1.0);
  try {
    eval_view(tiny, policy);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ImageTooSmall);
  }
  policy.allow_upscale = true;
  const Tensor up = eval_view(tiny, policy);
  CHECK(up.dim(1) == 96);
  CHECK(up.dim(2) == 96);
}

TEST_CASE("ppm round trip is lossless at 8-bit resolution") {
  Tensor img = random_tensor({3, 9, 13}, 91, 0.0, 1.0);
  for (int64_t i = 0; i < img.numel(); ++i)
    img[i] = std::round(img[i] * 255.0f) / 255.0f;
  const std::string path = kScratch + "/roundtrip.ppm";
  write_ppm(path, img);
  const Tensor back = read_image_file(path);
  CHECK(test_util::max_abs_diff(img, back) < 1e-6);
}

TEST_CASE("sobel magnitude is zero on constants and normalized otherwise") {
  const Tensor flat = Tensor::full({3, 10, 10}, 0.42f);
  const Tensor zero_map = sobel_magnitude(flat);
  for (int64_t i = 0; i < zero_map.numel(); ++i) CHECK(zero_map[i] == 0.0f);

  const Tensor img = random_tensor({3, 10, 10}, 92, 0.0, 1.0);
  const Tensor mag = sobel_magnitude(img);
  float mx = 0.0f;
  for (int64_t i = 0; i < mag.numel(); ++i) {
    CHECK(mag[i] >= 0.0f);
    mx = std::max(mx, mag[i]);
  }
  CHECK(mx == doctest::Approx(1.0f));
}
