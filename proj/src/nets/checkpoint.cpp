#include "sketchlab/nets/checkpoint.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sketchlab/core/error.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace sketchlab::nets {

std::string sanitize_blob_name(const std::string& name) {
  std::string s = name;
  for (char& c : s)
    if (c == '/' || c == '\\') c = '_';
  return s;
}

namespace {

std::string sanitize(const std::string& name) { return sanitize_blob_name(name); }

void write_blob(const fs::path& path, const std::string& name, const Tensor& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  std::ostringstream header;
  header << "name=" << name << " dtype=f32 shape=";
  for (int i = 0; i < t.rank(); ++i) header << (i ? "," : "") << t.dim(i);
  header << " layout=row-major endian=little\n";
  out << header.str();
  out.write(reinterpret_cast<const char*>(t.data()),
            (std::streamsize)(t.numel() * sizeof(float)));
}

std::pair<std::string, Tensor> read_blob(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot read " + path.string());
  std::string header;
  std::getline(in, header);
  std::string name;
  std::vector<int> shape;
  std::istringstream hs(header);
  std::string field;
  while (hs >> field) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = field.substr(0, eq), value = field.substr(eq + 1);
    if (key == "name") name = value;
    if (key == "dtype" && value != "f32")
      fail(ErrorCode::IoError, "unsupported dtype in " + path.string());
    if (key == "shape") {
      std::istringstream ss(value);
      std::string d;
      while (std::getline(ss, d, ',')) shape.push_back(std::stoi(d));
    }
  }
  Tensor t(shape);
  in.read(reinterpret_cast<char*>(t.data()),
          (std::streamsize)(t.numel() * sizeof(float)));
  if (!in) fail(ErrorCode::IoError, "truncated blob " + path.string());
  return {name, std::move(t)};
}

}  // namespace

void save_checkpoint(const CheckpointArchive& archive, const std::string& dir) {
  fs::create_directories(fs::path(dir) / "tensors");
  json j;
  const auto& m = archive.manifest;
  j["arch"] = m.arch;
  j["num_classes"] = m.num_classes;
  j["input_resolution"] = m.input_resolution;
  j["width"] = m.width;
  j["stem_pool"] = m.stem_pool;
  j["stage_history"] = m.stage_history;
  j["seed"] = m.seed;
  j["epoch"] = m.epoch;
  j["metrics"] = m.metrics;
  json tensors = json::array();
  for (const auto& [name, t] : archive.parameters) tensors.push_back(name);
  j["tensors"] = tensors;
  std::ofstream out(fs::path(dir) / "manifest.json");
  out << j.dump(2) << "\n";

  for (const auto& [name, t] : archive.parameters)
    write_blob(fs::path(dir) / "tensors" / (sanitize(name) + ".bin"), name, t);
}

CheckpointArchive load_checkpoint(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "manifest.json");
  if (!in) fail(ErrorCode::IoError, "no manifest.json under " + dir);
  json j;
  in >> j;

  CheckpointArchive a;
  a.manifest.arch = j.value("arch", "");
  a.manifest.num_classes = j.value("num_classes", 0);
  a.manifest.input_resolution = j.value("input_resolution", 0);
  a.manifest.width = j.value("width", 0);
  a.manifest.stem_pool = j.value("stem_pool", false);
  a.manifest.stage_history = j.value("stage_history", std::vector<std::string>{});
  a.manifest.seed = j.value("seed", (uint64_t)0);
  a.manifest.epoch = j.value("epoch", 0);
  if (j.contains("metrics"))
    for (auto& [k, v] : j["metrics"].items()) a.manifest.metrics[k] = v.get<double>();

  for (const auto& name : j["tensors"]) {
    auto [blob_name, t] =
        read_blob(fs::path(dir) / "tensors" / (sanitize(name.get<std::string>()) + ".bin"));
    a.parameters[blob_name] = std::move(t);
  }
  return a;
}

void save_tensor_blob(const std::string& path, const std::string& name,
                      const Tensor& t) {
  write_blob(fs::path(path), name, t);
}

std::pair<std::string, Tensor> load_tensor_blob(const std::string& path) {
  return read_blob(fs::path(path));
}

std::map<std::string, Tensor> export_params(Layer& root) {
  std::map<std::string, Tensor> out;
  root.visit_params("", [&out](const std::string& name, Param& p) {
    out[name] = p.value;
  });
  return out;
}

void import_params(Layer& root, const std::map<std::string, Tensor>& params,
                   bool strict) {
  std::map<std::string, Param*> live;
  root.visit_params("", [&live](const std::string& name, Param& p) {
    live[name] = &p;
  });
  for (const auto& [name, t] : params) {
    auto it = live.find(name);
    if (it == live.end()) {
      if (strict) fail(ErrorCode::ArchIncompatible, "no parameter named " + name);
      continue;
    }
    if (it->second->value.shape() != t.shape()) {
      if (strict)
        fail(ErrorCode::ArchIncompatible,
             "shape mismatch for " + name + ": " + it->second->value.shape_str() +
                 " vs " + Tensor(t).shape_str());
      continue;
    }
    it->second->value = t;
  }
  if (strict) {
    for (const auto& [name, p] : live)
      if (!params.count(name))
        fail(ErrorCode::ArchIncompatible, "archive missing parameter " + name);
  }
}

}  // namespace sketchlab::nets
