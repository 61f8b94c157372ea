#include "sketchlab/expkit/report.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "sketchlab/core/error.hpp"
#include "sketchlab/expkit/svg.hpp"

namespace fs = std::filesystem;

namespace sketchlab::expkit {

namespace {

bool record_less(const ExperimentRecord& a, const ExperimentRecord& b) {
  auto key = [](const ExperimentRecord& r) {
    return std::tie(r.strategy, r.fraction, r.seed, r.run_id, r.stage, r.split,
                    r.domain, r.metric, r.timestamp);
  };
  return key(a) < key(b);
}

// metric suffixes like "cumvar.p012" -> 12
int trailing_index(const std::string& metric, const std::string& prefix) {
  if (metric.rfind(prefix, 0) != 0) return -1;
  return std::stoi(metric.substr(prefix.size()));
}

struct MeanAcc {
  double sum = 0.0;
  int n = 0;
  void add(double v) {
    sum += v;
    ++n;
  }
  double mean() const { return n ? sum / n : 0.0; }
};

}  // namespace

void emit_report(const std::vector<ExperimentRecord>& records,
                 const std::string& out_dir, double variance_threshold) {
  if (records.empty()) fail(ErrorCode::EmptyRecords, "no records found");
  fs::create_directories(fs::path(out_dir) / "plots");

  std::vector<ExperimentRecord> sorted = records;
  std::sort(sorted.begin(), sorted.end(), record_less);
  write_records_csv((fs::path(out_dir) / "records.csv").string(), sorted);

  // ------------------------------------------------------------------
  // strategy table: mean final test accuracy per (strategy, domain) at the
  // largest fraction each strategy was run at
  // ------------------------------------------------------------------
  std::map<std::string, double> max_fraction;
  for (const auto& r : sorted)
    if (r.metric == "test_acc")
      max_fraction[r.strategy] = std::max(max_fraction[r.strategy], r.fraction);

  std::map<std::string, std::map<std::string, MeanAcc>> table;  // strategy -> domain
  for (const auto& r : sorted)
    if (r.metric == "test_acc" && r.fraction == max_fraction[r.strategy])
      table[r.strategy][r.domain].add(r.value);

  {
    std::ofstream out(fs::path(out_dir) / "strategy_table.csv");
    out << "strategy,color_acc,line_acc\n";
    for (const auto& [strategy, by_domain] : table) {
      out << strategy;
      for (const char* domain : {"COLOR", "LINE"}) {
        auto it = by_domain.find(domain);
        if (it != by_domain.end()) {
          char buf[32];
          std::snprintf(buf, sizeof(buf), ",%.2f", it->second.mean());
          out << buf;
        } else {
          out << ",";
        }
      }
      out << "\n";
    }
  }

  // ------------------------------------------------------------------
  // accuracy vs fraction (color test accuracy, mean over seeds)
  // ------------------------------------------------------------------
  {
    std::map<std::string, std::map<double, MeanAcc>> curves;
    for (const auto& r : sorted)
      if (r.metric == "test_acc" && r.domain == "COLOR")
        curves[r.strategy][r.fraction].add(r.value);
    if (!curves.empty()) {
      std::vector<Series> series;
      for (const auto& [strategy, pts] : curves) {
        Series s;
        s.label = strategy;
        for (const auto& [f, acc] : pts) {
          s.x.push_back(f);
          s.y.push_back(acc.mean());
        }
        series.push_back(std::move(s));
      }
      write_line_plot((fs::path(out_dir) / "plots" / "accuracy_vs_fraction.svg").string(),
                      "Color test accuracy vs training fraction", "fraction",
                      "accuracy (%)", series);
    }
  }

  // ------------------------------------------------------------------
  // cumulative variance curves (mean over seeds per strategy)
  // ------------------------------------------------------------------
  {
    std::map<std::string, std::map<int, MeanAcc>> curves;
    for (const auto& r : sorted) {
      const int idx = trailing_index(r.metric, "cumvar.p");
      if (idx >= 0) curves[r.strategy][idx].add(r.value);
    }
    if (!curves.empty()) {
      std::vector<Series> series;
      for (const auto& [strategy, pts] : curves) {
        Series s;
        s.label = strategy;
        for (const auto& [idx, acc] : pts) {
          s.x.push_back(idx);
          s.y.push_back(acc.mean());
        }
        series.push_back(std::move(s));
      }
      write_line_plot((fs::path(out_dir) / "plots" / "cumulative_variance.svg").string(),
                      "Cumulative variance explained", "principal components",
                      "cumulative variance", series, variance_threshold);
    }
  }

  // ------------------------------------------------------------------
  // high-activation region histogram (mean share per bucket)
  // ------------------------------------------------------------------
  {
    const char* buckets[] = {"regions.share_one", "regions.share_two",
                             "regions.share_three_plus"};
    std::map<std::string, std::map<std::string, MeanAcc>> hist;
    for (const auto& r : sorted)
      for (const char* b : buckets)
        if (r.metric == b) hist[r.strategy][b].add(r.value);
    if (!hist.empty()) {
      std::vector<std::string> labels;
      for (const auto& [strategy, _] : hist) labels.push_back(strategy);
      std::vector<BarGroup> groups;
      const char* names[] = {"1", "2", ">=3"};
      for (int b = 0; b < 3; ++b) {
        BarGroup g;
        g.label = names[b];
        for (const auto& [strategy, by_bucket] : hist) {
          auto it = by_bucket.find(buckets[b]);
          g.values.push_back(it == by_bucket.end() ? 0.0 : it->second.mean());
        }
        groups.push_back(std::move(g));
      }
      write_bar_plot((fs::path(out_dir) / "plots" / "region_histogram.svg").string(),
                     "High-activation regions per image", labels, groups);
    }
  }

  // ------------------------------------------------------------------
  // tuning curves
  // ------------------------------------------------------------------
  {
    std::map<std::string, std::map<int, MeanAcc>> curves;
    for (const auto& r : sorted) {
      const int idx = trailing_index(r.metric, "tuning.c");
      if (idx >= 0) curves[r.strategy][idx].add(r.value);
    }
    if (!curves.empty()) {
      std::vector<Series> series;
      for (const auto& [strategy, pts] : curves) {
        Series s;
        s.label = strategy;
        for (const auto& [idx, acc] : pts) {
          s.x.push_back(idx);
          s.y.push_back(acc.mean());
        }
        series.push_back(std::move(s));
      }
      write_line_plot((fs::path(out_dir) / "plots" / "tuning_curves.svg").string(),
                      "Channel tuning curves", "channel rank",
                      "normalized activation", series);
    }
  }
}

}  // namespace sketchlab::expkit
