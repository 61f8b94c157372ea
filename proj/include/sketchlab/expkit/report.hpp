#pragma once

#include <string>
#include <vector>

#include "sketchlab/expkit/records.hpp"

namespace sketchlab::expkit {

// Writes records.csv, a strategy comparison table, and the plot files
// (accuracy-vs-fraction, cumulative variance, region histogram, tuning
// curves) under out_dir. Byte-stable given identical records.
void emit_report(const std::vector<ExperimentRecord>& records,
                 const std::string& out_dir, double variance_threshold = 0.90);

}  // namespace sketchlab::expkit
