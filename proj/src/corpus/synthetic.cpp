#include "sketchlab/corpus/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "sketchlab/core/parallel.hpp"
#include "sketchlab/corpus/ppm.hpp"

namespace fs = std::filesystem;

namespace sketchlab::corpus {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Vec3 {
  double r, g, b;
};

double luma(const Vec3& c) { return 0.299 * c.r + 0.587 * c.g + 0.114 * c.b; }

Vec3 random_color(Rng& rng) {
  return {rng.uniform(), rng.uniform(), rng.uniform()};
}

// ---------------------------------------------------------------------------
// Paints: position -> color fields for backgrounds and fills. Secondary
// colors stay close in luminance so internal texture edges are weaker than
// the silhouette edge.
// ---------------------------------------------------------------------------

struct Paint {
  int kind = 0;  // 0 solid, 1 gradient, 2 stripes, 3 checker, 4 blobs
  Vec3 a{0.5, 0.5, 0.5}, b{0.5, 0.5, 0.5};
  double angle = 0.0, period = 8.0, phase = 0.0;
  double grid[5][5] = {};

  Vec3 sample(double y, double x) const {
    switch (kind) {
      case 1: {
        const double t = 0.5 + 0.5 * std::sin(angle) * (y / 16.0 - 1.0) +
                         0.5 * std::cos(angle) * (x / 16.0 - 1.0);
        const double u = std::clamp(t, 0.0, 1.0);
        return {a.r + (b.r - a.r) * u, a.g + (b.g - a.g) * u, a.b + (b.b - a.b) * u};
      }
      case 2: {
        const double t = std::sin(2.0 * kPi * (std::cos(angle) * x + std::sin(angle) * y) / period + phase);
        return t > 0 ? a : b;
      }
      case 3: {
        const int cx = (int)std::floor((x + phase) / period);
        const int cy = (int)std::floor((y + phase) / period);
        return ((cx + cy) & 1) ? a : b;
      }
      case 4: {
        const double gy = std::clamp(y / 8.0, 0.0, 3.999);
        const double gx = std::clamp(x / 8.0, 0.0, 3.999);
        const int y0 = (int)gy, x0 = (int)gx;
        const double ty = gy - y0, tx = gx - x0;
        const double w = (1 - ty) * (1 - tx) * grid[y0][x0] + (1 - ty) * tx * grid[y0][x0 + 1] +
                         ty * (1 - tx) * grid[y0 + 1][x0] + ty * tx * grid[y0 + 1][x0 + 1];
        return {a.r + (b.r - a.r) * w, a.g + (b.g - a.g) * w, a.b + (b.b - a.b) * w};
      }
      default:
        return a;
    }
  }
};

Paint random_paint(Rng& rng, double max_internal_contrast) {
  Paint p;
  p.kind = (int)rng.uniform_int(5);
  p.a = random_color(rng);
  // pull b toward a in luminance
  Vec3 cb = random_color(rng);
  const double la = luma(p.a);
  for (int tries = 0; tries < 16 && std::abs(luma(cb) - la) > max_internal_contrast; ++tries)
    cb = random_color(rng);
  p.b = cb;
  p.angle = rng.uniform(0.0, kPi);
  p.period = rng.uniform(4.0, 9.0);
  p.phase = rng.uniform(0.0, 8.0);
  for (auto& row : p.grid)
    for (auto& v : row) v = rng.uniform();
  return p;
}

// ---------------------------------------------------------------------------
// Shape membership tests in canonical coordinates (shape spans ~[-1,1]).
// ---------------------------------------------------------------------------

bool in_triangle(double y, double x) {
  // vertices (0,-1), (0.95,0.85), (-0.95,0.85) in (x, y-down)
  const double x1 = 0.0, y1 = -1.0, x2 = 0.95, y2 = 0.85, x3 = -0.95, y3 = 0.85;
  const double d = (y2 - y3) * (x1 - x3) + (x3 - x2) * (y1 - y3);
  const double l1 = ((y2 - y3) * (x - x3) + (x3 - x2) * (y - y3)) / d;
  const double l2 = ((y3 - y1) * (x - x3) + (x1 - x3) * (y - y3)) / d;
  const double l3 = 1.0 - l1 - l2;
  return l1 >= 0 && l2 >= 0 && l3 >= 0;
}

bool in_star(double y, double x) {
  const double r = std::sqrt(x * x + y * y);
  if (r > 1.0) return false;
  double theta = std::atan2(y, x);
  // distance to nearest spike direction, spikes every 72 degrees
  const double sector = 2.0 * kPi / 5.0;
  double t = std::fmod(theta + 2.0 * kPi, sector);
  if (t > sector / 2) t = sector - t;  // t in [0, 36deg]
  const double frac = t / (sector / 2);
  const double rmax = 1.0 + (0.42 - 1.0) * frac;
  return r <= rmax;
}

bool in_shape(int cls, double y, double x) {
  const double r2 = x * x + y * y;
  switch (cls) {
    case 0:  // disk
      return r2 <= 1.0;
    case 1:  // ring
      return r2 <= 1.0 && r2 >= 0.55 * 0.55;
    case 2:  // square
      return std::abs(x) <= 0.88 && std::abs(y) <= 0.88;
    case 3:  // triangle
      return in_triangle(y, x);
    case 4:  // star
      return in_star(y, x);
    case 5:  // plus
      return (std::abs(x) <= 0.32 && std::abs(y) <= 1.0) ||
             (std::abs(y) <= 0.32 && std::abs(x) <= 1.0);
    case 6: {  // diagonal cross
      const double u = (x + y) * 0.70710678, v = (x - y) * 0.70710678;
      return (std::abs(u) <= 0.3 && std::abs(v) <= 1.0) ||
             (std::abs(v) <= 0.3 && std::abs(u) <= 1.0);
    }
    case 7: {  // crescent
      const double dx = x - 0.42;
      return r2 <= 1.0 && (dx * dx + y * y) >= 0.72 * 0.72;
    }
    case 8:  // three bars
      return std::abs(x) <= 0.95 &&
             (std::abs(y + 0.78) <= 0.2 || std::abs(y) <= 0.2 || std::abs(y - 0.78) <= 0.2);
    case 9:  // L bracket
      return (x >= -1.0 && x <= -0.45 && std::abs(y) <= 1.0) ||
             (y >= 0.45 && y <= 1.0 && std::abs(x) <= 1.0);
    default:
      return false;
  }
}

struct Placement {
  double cy, cx;      // center in pixels
  double radius;      // canonical unit -> pixels
  double cos_t, sin_t;
};

bool placed_in_shape(int cls, const Placement& pl, double py, double px) {
  const double dy = (py - pl.cy) / pl.radius;
  const double dx = (px - pl.cx) / pl.radius;
  const double ry = pl.cos_t * dy - pl.sin_t * dx;
  const double rx = pl.sin_t * dy + pl.cos_t * dx;
  return in_shape(cls, ry, rx);
}

// Supersampled coverage of a placed shape over one pixel.
double coverage(int cls, const Placement& pl, int py, int px) {
  int hit = 0;
  for (int sy = 0; sy < 3; ++sy)
    for (int sx = 0; sx < 3; ++sx)
      if (placed_in_shape(cls, pl, py + (sy + 0.5) / 3.0, px + (sx + 0.5) / 3.0)) ++hit;
  return hit / 9.0;
}

struct SceneShape {
  int cls;
  Placement placement;
  Paint paint;
};

Tensor render(int res, const Paint& bg, const std::vector<SceneShape>& shapes,
              Rng& noise_rng, double noise_sigma) {
  Tensor img({3, res, res});
  for (int y = 0; y < res; ++y) {
    for (int x = 0; x < res; ++x) {
      Vec3 c = bg.sample(y + 0.5, x + 0.5);
      for (const auto& s : shapes) {
        const double a = coverage(s.cls, s.placement, y, x);
        if (a <= 0.0) continue;
        const Vec3 f = s.paint.sample(y + 0.5, x + 0.5);
        c = {c.r + (f.r - c.r) * a, c.g + (f.g - c.g) * a, c.b + (f.b - c.b) * a};
      }
      img.data()[(int64_t)y * res + x] = (float)c.r;
      img.data()[((int64_t)res + y) * res + x] = (float)c.g;
      img.data()[((int64_t)2 * res + y) * res + x] = (float)c.b;
    }
  }
  if (noise_sigma > 0.0) {
    for (int64_t i = 0; i < img.numel(); ++i)
      img[i] = (float)(img[i] + noise_sigma * noise_rng.normal());
  }
  clamp01(img);
  return img;
}

Paint fill_paint_with_contrast(Rng& rng, const Paint& bg, double min_contrast) {
  const double bg_luma = 0.5 * (luma(bg.a) + luma(bg.b));
  Paint fill = random_paint(rng, 0.12);
  for (int tries = 0; tries < 64; ++tries) {
    const double fill_luma = 0.5 * (luma(fill.a) + luma(fill.b));
    if (std::abs(fill_luma - bg_luma) >= min_contrast) break;
    fill.a = random_color(rng);
    fill.b = fill.a;
    fill.b.r = std::clamp(fill.b.r + rng.uniform(-0.1, 0.1), 0.0, 1.0);
  }
  return fill;
}

Placement random_placement(Rng& rng, int res, double scale_lo, double scale_hi,
                           double max_rot_deg) {
  Placement pl;
  pl.radius = rng.uniform(scale_lo, scale_hi) * res / 2.0;
  pl.cy = res / 2.0 + rng.uniform(-0.14, 0.14) * res;
  pl.cx = res / 2.0 + rng.uniform(-0.14, 0.14) * res;
  const double t = rng.uniform(-max_rot_deg, max_rot_deg) * kPi / 180.0;
  pl.cos_t = std::cos(t);
  pl.sin_t = std::sin(t);
  return pl;
}

Tensor render_class_image(int cls, int res, Rng& rng) {
  const Paint bg = random_paint(rng, 0.18);
  SceneShape main;
  main.cls = cls;
  main.placement = random_placement(rng, res, 0.52, 0.82, 12.0);
  main.paint = fill_paint_with_contrast(rng, bg, 0.35);

  std::vector<SceneShape> shapes;
  // faint clutter behind the subject
  const int n_clutter = (int)rng.uniform_int(3);
  for (int i = 0; i < n_clutter; ++i) {
    SceneShape d;
    d.cls = (int)rng.uniform_int(2);  // clutter is always disk or ring
    d.placement.radius = rng.uniform(0.06, 0.14) * res;
    d.placement.cy = rng.uniform(0.0, (double)res);
    d.placement.cx = rng.uniform(0.0, (double)res);
    d.placement.cos_t = 1.0;
    d.placement.sin_t = 0.0;
    d.paint = random_paint(rng, 0.1);
    // keep clutter low contrast against the background
    const double bgl = 0.5 * (luma(bg.a) + luma(bg.b));
    const double mix = 0.75;
    for (Vec3* c : {&d.paint.a, &d.paint.b}) {
      c->r = c->r * (1 - mix) + bg.a.r * mix;
      c->g = c->g * (1 - mix) + bg.a.g * mix;
      c->b = c->b * (1 - mix) + bg.a.b * mix;
      (void)bgl;
    }
    shapes.push_back(d);
  }
  shapes.push_back(main);
  return render(res, bg, shapes, rng, 0.015);
}

void write_split(const std::string& root, const std::string& split,
                 const std::vector<std::string>& classes, int per_class, int res,
                 uint64_t seed) {
  for (const auto& c : classes) fs::create_directories(fs::path(root) / split / c);
  const bool par = par::enabled();
#pragma omp parallel for schedule(dynamic) collapse(2) if (par)
  for (int cls = 0; cls < (int)classes.size(); ++cls) {
    for (int i = 0; i < per_class; ++i) {
      Rng rng(mix_seed(seed, (uint64_t)cls, (uint64_t)i,
                       split == "train" ? 0x7121u : 0x7e57u));
      const Tensor img = render_class_image(cls, res, rng);
      char name[32];
      std::snprintf(name, sizeof(name), "img_%04d.ppm", i);
      write_ppm((fs::path(root) / split / classes[(size_t)cls] / name).string(), img);
    }
  }
}

}  // namespace

std::vector<std::string> shape_class_names() {
  return {"disk",     "ring", "square", "triangle", "star",
          "plus",     "xbar", "crescent", "bars",   "bracket"};
}

Tensor render_shape_image(int class_idx, int resolution, uint64_t seed) {
  Rng rng(mix_seed(seed, (uint64_t)class_idx, 0x51a9eu));
  return render_class_image(class_idx, resolution, rng);
}

DatasetManifest make_shape_corpus(const std::string& root, const SyntheticSpec& spec) {
  const auto classes = shape_class_names();
  write_split(root, "train", classes, spec.per_class_train, spec.resolution, spec.seed);
  write_split(root, "test", classes, spec.per_class_test, spec.resolution, spec.seed);

  DatasetManifest m = load_dataset(root, (int)classes.size());
  m.name = "shapes10";
  write_sidecar_manifest(m);
  return load_dataset(root, (int)classes.size());
}

DatasetManifest make_scene_corpus(const std::string& root, int count,
                                  int resolution, uint64_t seed) {
  fs::create_directories(fs::path(root) / "train" / "scene");
  fs::create_directories(fs::path(root) / "test" / "scene");
  const bool par = par::enabled();
#pragma omp parallel for schedule(dynamic) if (par)
  for (int i = 0; i < count; ++i) {
    Rng rng(mix_seed(seed, (uint64_t)i, 0x5ce9eu));
    const Paint bg = random_paint(rng, 0.2);
    std::vector<SceneShape> shapes;
    const int n = 1 + (int)rng.uniform_int(3);
    for (int s = 0; s < n; ++s) {
      SceneShape sh;
      sh.cls = (int)rng.uniform_int(10);
      sh.placement = random_placement(rng, resolution, 0.25, 0.6, 30.0);
      sh.placement.cy = resolution / 2.0 + rng.uniform(-0.3, 0.3) * resolution;
      sh.placement.cx = resolution / 2.0 + rng.uniform(-0.3, 0.3) * resolution;
      sh.paint = fill_paint_with_contrast(rng, bg, 0.3);
      shapes.push_back(sh);
    }
    const Tensor img = render(resolution, bg, shapes, rng, 0.015);
    char name[32];
    std::snprintf(name, sizeof(name), "img_%05d.ppm", i);
    // a couple of held-out scenes keep the test split non-empty
    const std::string split = (i % 50 == 49 || i == count - 1) ? "test" : "train";
    write_ppm((fs::path(root) / split / "scene" / name).string(), img);
  }
  DatasetManifest m = load_dataset(root, 1);
  m.name = "scenes";
  write_sidecar_manifest(m);
  return load_dataset(root, 1);
}

void make_cue_conflict_set(const std::string& root, int count, int resolution,
                           uint64_t seed) {
  fs::create_directories(fs::path(root) / "images");
  const auto classes = shape_class_names();
  std::ofstream manifest(fs::path(root) / "cue_manifest.txt");
  for (int i = 0; i < count; ++i) {
    Rng rng(mix_seed(seed, (uint64_t)i, 0xc0e5u));
    const int shape_cls = (int)rng.uniform_int(classes.size());
    int texture_cls = (int)rng.uniform_int(classes.size());
    while (texture_cls == shape_cls)
      texture_cls = (int)rng.uniform_int(classes.size());

    const Paint bg = random_paint(rng, 0.1);
    SceneShape sh;
    sh.cls = shape_cls;
    sh.placement = random_placement(rng, resolution, 0.55, 0.8, 10.0);
    // texture signature of the conflicting class: stripes with a
    // class-specific orientation and period
    sh.paint.kind = 2;
    sh.paint.angle = texture_cls * kPi / 10.0;
    sh.paint.period = 3.0 + 0.45 * texture_cls;
    sh.paint.a = {0.15, 0.15, 0.15};
    sh.paint.b = {0.9, 0.9, 0.9};
    const Tensor img = render(resolution, bg, {sh}, rng, 0.01);
    char name[32];
    std::snprintf(name, sizeof(name), "cue_%04d.ppm", i);
    write_ppm((fs::path(root) / "images" / name).string(), img);
    manifest << "images/" << name << " " << classes[(size_t)shape_cls] << " "
             << classes[(size_t)texture_cls] << "\n";
  }
}

}  // namespace sketchlab::corpus
