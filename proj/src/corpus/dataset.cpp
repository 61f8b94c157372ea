#include "sketchlab/corpus/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "sketchlab/core/error.hpp"
#include "sketchlab/core/rng.hpp"
#include "sketchlab/corpus/ppm.hpp"

namespace fs = std::filesystem;

namespace sketchlab::corpus {

const std::vector<Item>& DatasetManifest::split(const std::string& s) const {
  auto it = splits.find(s);
  if (it == splits.end()) fail(ErrorCode::MissingData, "no split named " + s);
  return it->second;
}

std::vector<int> DatasetManifest::per_class_counts(
    const std::string& split_name) const {
  std::vector<int> counts(class_names.size(), 0);
  for (const auto& item : split(split_name)) counts[(size_t)item.label]++;
  return counts;
}

namespace {

bool is_image_file(const fs::path& p) {
  const auto ext = p.extension().string();
  return ext == ".ppm" || ext == ".pgm";
}

std::string source_id_for(const std::string& split, const std::string& cls,
                          const fs::path& file) {
  return split + "/" + cls + "/" + file.stem().string();
}

}  // namespace

DatasetManifest load_dataset(const std::string& root, int expected_classes) {
  if (!fs::exists(root))
    fail(ErrorCode::MissingData, "dataset root does not exist: " + root);

  DatasetManifest m;
  m.root = root;
  m.name = fs::path(root).filename().string();

  auto sidecar = read_sidecar(root);
  if (sidecar) {
    if (auto it = sidecar->find("name"); it != sidecar->end()) m.name = it->second;
    if (auto it = sidecar->find("domain"); it != sidecar->end()) m.domain = it->second;
    if (auto it = sidecar->find("fraction"); it != sidecar->end())
      m.fraction = std::stod(it->second);
    if (auto it = sidecar->find("subset_seed"); it != sidecar->end())
      m.subset_seed = std::stoull(it->second);
    if (auto it = sidecar->find("converter_params"); it != sidecar->end())
      m.converter_params = it->second;
  }

  const std::vector<std::string> wanted_splits = {"train", "test"};
  for (const auto& split : wanted_splits) {
    const fs::path split_dir = fs::path(root) / split;
    if (!fs::exists(split_dir))
      fail(ErrorCode::MissingData, "missing split directory: " + split_dir.string());

    std::vector<std::string> classes;
    for (const auto& e : fs::directory_iterator(split_dir))
      if (e.is_directory()) classes.push_back(e.path().filename().string());
    std::sort(classes.begin(), classes.end());

    if ((int)classes.size() != expected_classes)
      fail(ErrorCode::ClassMismatch,
           split + " has " + std::to_string(classes.size()) +
               " class directories, expected " + std::to_string(expected_classes));

    if (m.class_names.empty())
      m.class_names = classes;
    else if (m.class_names != classes)
      fail(ErrorCode::ClassMismatch, "class directories differ between splits");

    std::vector<Item>& items = m.splits[split];
    for (size_t label = 0; label < classes.size(); ++label) {
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(split_dir / classes[label]))
        if (e.is_regular_file() && is_image_file(e.path())) files.push_back(e.path());
      std::sort(files.begin(), files.end());
      for (const auto& f : files) {
        Item it;
        it.path = f.string();
        it.label = (int)label;
        it.domain = m.domain;
        it.source_id = source_id_for(split, classes[label], f);
        items.push_back(std::move(it));
      }
    }
    if (items.empty())
      fail(ErrorCode::MissingData, "split contains no images: " + split_dir.string());
    std::sort(items.begin(), items.end(),
              [](const Item& a, const Item& b) { return a.path < b.path; });
  }
  return m;
}

DatasetManifest stratified_subset(const DatasetManifest& manifest,
                                  double fraction, uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    fail(ErrorCode::InvalidParams, "fraction must be in (0,1]");

  DatasetManifest out = manifest;
  out.fraction = fraction;
  out.subset_seed = seed;
  if (fraction == 1.0) return out;

  const auto& items = manifest.split("train");
  std::vector<std::vector<size_t>> by_class(manifest.class_names.size());
  for (size_t i = 0; i < items.size(); ++i)
    by_class[(size_t)items[i].label].push_back(i);

  std::vector<char> keep(items.size(), 0);
  for (size_t c = 0; c < by_class.size(); ++c) {
    auto idx = by_class[c];
    if (idx.empty()) continue;
    // Single permutation per (seed, class); taking prefixes nests subsets
    // across fractions.
    Rng rng(mix_seed(seed, (uint64_t)c, 0xC1A55u));
    rng.shuffle(idx.data(), idx.size());
    const size_t n = idx.size();
    const size_t k =
        std::max<size_t>(1, (size_t)std::floor((double)n * fraction + 0.5));
    for (size_t i = 0; i < std::min(k, n); ++i) keep[idx[i]] = 1;
  }

  std::vector<Item> kept;
  for (size_t i = 0; i < items.size(); ++i)
    if (keep[i]) kept.push_back(items[i]);
  out.splits["train"] = std::move(kept);
  return out;
}

LabeledImage load_item(const Item& item) {
  LabeledImage img;
  img.pixels = read_image_file(item.path);
  img.label = item.label;
  img.domain = item.domain;
  img.source_id = item.source_id;
  return img;
}

DatasetView view(const DatasetManifest& m, const std::string& split_name) {
  DatasetView v;
  v.manifest = &m;
  v.split_name = split_name;
  v.items = m.split(split_name);
  return v;
}

void write_sidecar_manifest(const DatasetManifest& m) {
  std::ofstream out(fs::path(m.root) / "manifest.txt");
  out << "name=" << m.name << "\n";
  out << "domain=" << m.domain << "\n";
  out << "classes=";
  for (size_t i = 0; i < m.class_names.size(); ++i)
    out << (i ? "," : "") << m.class_names[i];
  out << "\n";
  out << "fraction=" << m.fraction << "\n";
  out << "subset_seed=" << m.subset_seed << "\n";
  if (!m.converter_params.empty())
    out << "converter_params=" << m.converter_params << "\n";
  for (const auto& [split, items] : m.splits)
    out << "split_" << split << "=" << items.size() << "\n";
}

std::optional<std::map<std::string, std::string>> read_sidecar(
    const std::string& root) {
  std::ifstream in(fs::path(root) / "manifest.txt");
  if (!in) return std::nullopt;
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

}  // namespace sketchlab::corpus
