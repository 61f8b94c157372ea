#pragma once

#include <string>
#include <vector>

namespace sketchlab::expkit {

// Experiment configuration, persisted as sectioned key=value text.
// parse(serialize(c)) == c.
struct RunConfig {
  // [dataset]
  std::string dataset_root = "data/shapes";
  std::string line_root;  // empty: dataset_root + "-line"
  int resolution = 32;
  int classes = 10;

  // [train]
  std::string arch = "resnet18-narrow";
  std::vector<std::string> strategies = {"ColorOnly", "LineToColor"};
  std::vector<double> fractions = {0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0};
  std::vector<uint64_t> seeds = {0, 1, 2};
  int max_epochs = 200;
  int patience = 10;
  uint64_t subset_seed = 1234;

  // [probe]
  bool probe_pca = true;
  bool probe_regions = true;
  bool probe_tuning = true;
  bool probe_shapebias = false;
  double percentile = 85.0;
  double variance_threshold = 0.90;
  int tuning_images = 500;

  // [draw]
  std::string photo_root = "data/scenes";
  std::string sketch_root = "data/scenes-line";
  int draw_epochs = 200;
  int draw_batch = 8;
  double draw_lr = 2e-4;
  int draw_decay_start = 100;
  double lambda_adv = 1.0;
  double lambda_geom = 10.0;
  double lambda_sem = 1.0;
  double lambda_cyc = 10.0;

  // [distill]
  std::vector<std::string> students = {"mobilenet-small", "resnet8", "vgg8"};
  double kd_temperature = 4.0;
  double kd_alpha = 0.9;
  int distill_epochs = 200;
  int distill_patience = 10;

  // [output]
  std::string output_dir = "out";

  bool operator==(const RunConfig&) const = default;
};

std::string serialize_config(const RunConfig& config);
RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);
void save_config(const RunConfig& config, const std::string& path);

// Default output root can come from the environment.
inline const char* kOutputEnvVar = "SKETCHLAB_OUT";
std::string default_output_dir();

std::string line_root_of(const RunConfig& config);

}  // namespace sketchlab::expkit
