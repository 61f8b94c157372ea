#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sketchlab/corpus/image.hpp"

namespace sketchlab::corpus {

struct Item {
  std::string path;
  int label = 0;
  std::string domain = kDomainColor;
  std::string source_id;  // stable across conversions
};

// Describes one dataset on disk: <root>/<split>/<class_name>/<image files>.
// A sidecar manifest.txt records name/classes/fraction/subset_seed and the
// converter parameters when the corpus was materialized by a conversion.
struct DatasetManifest {
  std::string name;
  std::string root;
  std::vector<std::string> class_names;
  std::map<std::string, std::vector<Item>> splits;  // "train", "test", ...
  double fraction = 1.0;
  uint64_t subset_seed = 0;
  std::string domain = kDomainColor;
  std::string converter_params;

  const std::vector<Item>& split(const std::string& s) const;
  int num_classes() const { return (int)class_names.size(); }
  std::vector<int> per_class_counts(const std::string& split_name) const;
};

// Scans the directory layout. Items are ordered lexicographically by path.
// Throws MissingData when a split is absent or empty, ClassMismatch when the
// class directory count differs from expected_classes.
DatasetManifest load_dataset(const std::string& root, int expected_classes);

// Per class keep max(1, round-half-up(n_c * fraction)) items of the train
// split, chosen by a seeded per-class permutation. Subsets nest: the items
// kept at f1 <= f2 under one seed are a prefix of the f2 selection.
DatasetManifest stratified_subset(const DatasetManifest& manifest,
                                  double fraction, uint64_t seed);

LabeledImage load_item(const Item& item);

// Query helpers for the in-memory pipeline.
struct DatasetView {
  const DatasetManifest* manifest = nullptr;
  std::string split_name;
  std::vector<Item> items;

  size_t size() const { return items.size(); }
};

DatasetView view(const DatasetManifest& m, const std::string& split_name);

void write_sidecar_manifest(const DatasetManifest& m);
std::optional<std::map<std::string, std::string>> read_sidecar(
    const std::string& root);

}  // namespace sketchlab::corpus
