#include "sketchlab/expkit/config.hpp"

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "sketchlab/core/error.hpp"

namespace sketchlab::expkit {

namespace {

std::string join_doubles(const std::vector<double>& v) {
  std::ostringstream os;
  for (size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

std::string join_u64(const std::vector<uint64_t>& v) {
  std::ostringstream os;
  for (size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

std::string join_strings(const std::vector<std::string>& v) {
  std::ostringstream os;
  for (size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string item;
  while (std::getline(is, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

}  // namespace

std::string serialize_config(const RunConfig& c) {
  std::ostringstream os;
  os << "[dataset]\n";
  os << "root=" << c.dataset_root << "\n";
  os << "line_root=" << c.line_root << "\n";
  os << "resolution=" << c.resolution << "\n";
  os << "classes=" << c.classes << "\n";
  os << "\n[train]\n";
  os << "arch=" << c.arch << "\n";
  os << "strategies=" << join_strings(c.strategies) << "\n";
  os << "fractions=" << join_doubles(c.fractions) << "\n";
  os << "seeds=" << join_u64(c.seeds) << "\n";
  os << "max_epochs=" << c.max_epochs << "\n";
  os << "patience=" << c.patience << "\n";
  os << "subset_seed=" << c.subset_seed << "\n";
  os << "\n[probe]\n";
  os << "pca=" << (c.probe_pca ? 1 : 0) << "\n";
  os << "regions=" << (c.probe_regions ? 1 : 0) << "\n";
  os << "tuning=" << (c.probe_tuning ? 1 : 0) << "\n";
  os << "shapebias=" << (c.probe_shapebias ? 1 : 0) << "\n";
  os << "percentile=" << c.percentile << "\n";
  os << "variance_threshold=" << c.variance_threshold << "\n";
  os << "tuning_images=" << c.tuning_images << "\n";
  os << "\n[draw]\n";
  os << "photos=" << c.photo_root << "\n";
  os << "sketches=" << c.sketch_root << "\n";
  os << "epochs=" << c.draw_epochs << "\n";
  os << "batch_size=" << c.draw_batch << "\n";
  os << "adam_lr=" << c.draw_lr << "\n";
  os << "decay_start=" << c.draw_decay_start << "\n";
  os << "lambda_adv=" << c.lambda_adv << "\n";
  os << "lambda_geom=" << c.lambda_geom << "\n";
  os << "lambda_sem=" << c.lambda_sem << "\n";
  os << "lambda_cyc=" << c.lambda_cyc << "\n";
  os << "\n[distill]\n";
  os << "students=" << join_strings(c.students) << "\n";
  os << "temperature=" << c.kd_temperature << "\n";
  os << "alpha=" << c.kd_alpha << "\n";
  os << "epochs=" << c.distill_epochs << "\n";
  os << "patience=" << c.distill_patience << "\n";
  os << "\n[output]\n";
  os << "dir=" << c.output_dir << "\n";
  return os.str();
}

RunConfig parse_config_text(const std::string& text) {
  RunConfig c;
  std::istringstream is(text);
  std::string line, section;
  std::map<std::string, std::string> kv;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[' && line.back() == ']') {
      section = line.substr(1, line.size() - 2);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[section + "." + line.substr(0, eq)] = line.substr(eq + 1);
  }

  auto str = [&kv](const char* key, std::string& out) {
    if (auto it = kv.find(key); it != kv.end()) out = it->second;
  };
  auto num = [&kv](const char* key, auto& out) {
    if (auto it = kv.find(key); it != kv.end())
      out = (std::decay_t<decltype(out)>)std::stod(it->second);
  };
  auto boolean = [&kv](const char* key, bool& out) {
    if (auto it = kv.find(key); it != kv.end())
      out = it->second == "1" || it->second == "true";
  };

  str("dataset.root", c.dataset_root);
  str("dataset.line_root", c.line_root);
  num("dataset.resolution", c.resolution);
  num("dataset.classes", c.classes);
  str("train.arch", c.arch);
  if (kv.count("train.strategies")) c.strategies = split_list(kv["train.strategies"]);
  if (kv.count("train.fractions")) {
    c.fractions.clear();
    for (const auto& s : split_list(kv["train.fractions"])) c.fractions.push_back(std::stod(s));
  }
  if (kv.count("train.seeds")) {
    c.seeds.clear();
    for (const auto& s : split_list(kv["train.seeds"])) c.seeds.push_back(std::stoull(s));
  }
  num("train.max_epochs", c.max_epochs);
  num("train.patience", c.patience);
  num("train.subset_seed", c.subset_seed);
  boolean("probe.pca", c.probe_pca);
  boolean("probe.regions", c.probe_regions);
  boolean("probe.tuning", c.probe_tuning);
  boolean("probe.shapebias", c.probe_shapebias);
  num("probe.percentile", c.percentile);
  num("probe.variance_threshold", c.variance_threshold);
  num("probe.tuning_images", c.tuning_images);
  str("draw.photos", c.photo_root);
  str("draw.sketches", c.sketch_root);
  num("draw.epochs", c.draw_epochs);
  num("draw.batch_size", c.draw_batch);
  num("draw.adam_lr", c.draw_lr);
  num("draw.decay_start", c.draw_decay_start);
  num("draw.lambda_adv", c.lambda_adv);
  num("draw.lambda_geom", c.lambda_geom);
  num("draw.lambda_sem", c.lambda_sem);
  num("draw.lambda_cyc", c.lambda_cyc);
  if (kv.count("distill.students")) c.students = split_list(kv["distill.students"]);
  num("distill.temperature", c.kd_temperature);
  num("distill.alpha", c.kd_alpha);
  num("distill.epochs", c.distill_epochs);
  num("distill.patience", c.distill_patience);
  str("output.dir", c.output_dir);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot read config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

void save_config(const RunConfig& config, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write config " + path);
  out << serialize_config(config);
}

std::string default_output_dir() {
  const char* env = std::getenv(kOutputEnvVar);
  return env && *env ? env : "out";
}

std::string line_root_of(const RunConfig& config) {
  return config.line_root.empty() ? config.dataset_root + "-line" : config.line_root;
}

}  // namespace sketchlab::expkit
