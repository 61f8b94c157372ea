#pragma once

#include <string>
#include <vector>

namespace sketchlab::expkit {

// One measurement row; the unit of persistence and reporting.
// CSV header: run_id,strategy,fraction,seed,stage,split,domain,metric,value,timestamp
// Per-epoch metrics carry the epoch in the metric name ("val_acc.e007").
struct ExperimentRecord {
  std::string run_id;
  std::string strategy;
  double fraction = 1.0;
  uint64_t seed = 0;
  int stage = 0;
  std::string split;   // train | val | test
  std::string domain;  // COLOR | LINE | DRAW | ""
  std::string metric;
  double value = 0.0;
  std::string timestamp;
};

inline const char* kRecordHeader =
    "run_id,strategy,fraction,seed,stage,split,domain,metric,value,timestamp";

std::string record_to_csv(const ExperimentRecord& r);
ExperimentRecord record_from_csv(const std::string& line);

std::string now_timestamp();

// Append-only registry: one CSV per run under <dir>/records/, merged on load.
// Concurrent runs write distinct files; nothing is ever rewritten.
class Registry {
 public:
  explicit Registry(std::string dir);
  void append(const ExperimentRecord& record);
  std::vector<ExperimentRecord> load_all() const;
  const std::string& dir() const { return dir_; }

 private:
  std::string dir_;
};

std::vector<ExperimentRecord> load_records_csv(const std::string& path);
void write_records_csv(const std::string& path,
                       const std::vector<ExperimentRecord>& records);

// FNV-1a over the experiment coordinates; stable across runs of one build.
std::string make_run_id(const std::string& strategy, double fraction, uint64_t seed,
                        const std::string& dataset_fingerprint,
                        const std::string& code_tag);

}  // namespace sketchlab::expkit
