#pragma once

#include <map>
#include <string>
#include <vector>

#include "sketchlab/core/tensor.hpp"
#include "sketchlab/nets/layers.hpp"

namespace sketchlab::nets {

// On-disk: a directory holding manifest.json plus one binary blob per tensor
// (one-line header "name dtype shape layout endianness", then raw f32 bytes,
// row-major little-endian). Round-trips byte-identically.
struct CheckpointManifest {
  std::string arch;
  int num_classes = 0;
  int input_resolution = 0;
  int width = 0;           // trunk base width (16 narrow, 64 full)
  bool stem_pool = false;  // trunk downsamples after the stem
  std::vector<std::string> stage_history;  // append-only across stages
  uint64_t seed = 0;
  int epoch = 0;
  std::map<std::string, double> metrics;
};

struct CheckpointArchive {
  CheckpointManifest manifest;
  std::map<std::string, Tensor> parameters;
};

void save_checkpoint(const CheckpointArchive& archive, const std::string& dir);
CheckpointArchive load_checkpoint(const std::string& dir);

// Copies between live layers and archives. import is strict: every archive
// tensor must land on a matching name+shape.
std::map<std::string, Tensor> export_params(Layer& root);
void import_params(Layer& root, const std::map<std::string, Tensor>& params,
                   bool strict = true);

// Single-tensor blobs in the same wire format as checkpoint tensors; used
// for precomputed provider files and activation dumps.
void save_tensor_blob(const std::string& path, const std::string& name,
                      const Tensor& t);
std::pair<std::string, Tensor> load_tensor_blob(const std::string& path);
std::string sanitize_blob_name(const std::string& name);

}  // namespace sketchlab::nets
