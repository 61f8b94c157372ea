#pragma once

#include <optional>
#include <string>
#include <vector>

namespace sketchlab::expkit {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

// Minimal self-contained vector plots; enough for the report artifacts.
void write_line_plot(const std::string& path, const std::string& title,
                     const std::string& xlabel, const std::string& ylabel,
                     const std::vector<Series>& series,
                     std::optional<double> hline = std::nullopt);

struct BarGroup {
  std::string label;                // x-axis category
  std::vector<double> values;       // one per series
};

void write_bar_plot(const std::string& path, const std::string& title,
                    const std::vector<std::string>& series_labels,
                    const std::vector<BarGroup>& groups);

}  // namespace sketchlab::expkit
