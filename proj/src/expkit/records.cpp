#include "sketchlab/expkit/records.hpp"

#include <algorithm>
#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sketchlab/core/error.hpp"

namespace fs = std::filesystem;

namespace sketchlab::expkit {

std::string record_to_csv(const ExperimentRecord& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%s,%s,%.6g,%" PRIu64 ",%d,%s,%s,%s,%.10g,%s",
                r.run_id.c_str(), r.strategy.c_str(), r.fraction, r.seed, r.stage,
                r.split.c_str(), r.domain.c_str(), r.metric.c_str(), r.value,
                r.timestamp.c_str());
  return buf;
}

ExperimentRecord record_from_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(cur);
  if (fields.size() != 10)
    fail(ErrorCode::IoError, "malformed record line: " + line);
  ExperimentRecord r;
  r.run_id = fields[0];
  r.strategy = fields[1];
  r.fraction = std::stod(fields[2]);
  r.seed = std::stoull(fields[3]);
  r.stage = std::stoi(fields[4]);
  r.split = fields[5];
  r.domain = fields[6];
  r.metric = fields[7];
  r.value = std::stod(fields[8]);
  r.timestamp = fields[9];
  return r;
}

std::string now_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%S", std::gmtime(&t));
  return buf;
}

Registry::Registry(std::string dir) : dir_(std::move(dir)) {
  fs::create_directories(fs::path(dir_) / "records");
}

void Registry::append(const ExperimentRecord& record) {
  const fs::path path = fs::path(dir_) / "records" / (record.run_id + ".csv");
  const bool fresh = !fs::exists(path);
  std::ofstream out(path, std::ios::app);
  if (!out) fail(ErrorCode::IoError, "cannot append to " + path.string());
  if (fresh) out << kRecordHeader << "\n";
  out << record_to_csv(record) << "\n";
}

std::vector<ExperimentRecord> Registry::load_all() const {
  std::vector<ExperimentRecord> all;
  const fs::path root = fs::path(dir_) / "records";
  if (!fs::exists(root)) return all;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    const auto recs = load_records_csv(f.string());
    all.insert(all.end(), recs.begin(), recs.end());
  }
  return all;
}

std::vector<ExperimentRecord> load_records_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot read " + path);
  std::vector<ExperimentRecord> recs;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first && line.rfind("run_id,", 0) == 0) {
      first = false;
      continue;
    }
    first = false;
    recs.push_back(record_from_csv(line));
  }
  return recs;
}

void write_records_csv(const std::string& path,
                       const std::vector<ExperimentRecord>& records) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path);
  out << kRecordHeader << "\n";
  for (const auto& r : records) out << record_to_csv(r) << "\n";
}

std::string make_run_id(const std::string& strategy, double fraction, uint64_t seed,
                        const std::string& dataset_fingerprint,
                        const std::string& code_tag) {
  char key[256];
  std::snprintf(key, sizeof(key), "%s|%.6g|%" PRIu64 "|%s|%s", strategy.c_str(),
                fraction, seed, dataset_fingerprint.c_str(), code_tag.c_str());
  uint64_t h = 1469598103934665603ull;
  for (const char* p = key; *p; ++p) {
    h ^= (uint64_t)(unsigned char)*p;
    h *= 1099511628211ull;
  }
  char out[32];
  std::snprintf(out, sizeof(out), "%016" PRIx64, h);
  return out;
}

}  // namespace sketchlab::expkit
