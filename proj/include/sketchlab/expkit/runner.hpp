#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "sketchlab/distill/distill.hpp"
#include "sketchlab/draw/draw.hpp"
#include "sketchlab/expkit/config.hpp"
#include "sketchlab/expkit/records.hpp"
#include "sketchlab/probe/probe.hpp"
#include "sketchlab/train/trainer.hpp"

namespace sketchlab::expkit {

inline const char* kCodeVersionTag = "sketchlab-0.1";

std::string dataset_fingerprint(const corpus::DatasetManifest& m);

// Loaded corpora plus the registry; everything the subcommands operate on.
struct RunContext {
  RunConfig config;
  train::DomainCorpora corpora;  // COLOR and LINE manifests
  corpus::AugmentationPolicy policy;
  std::unique_ptr<Registry> registry;

  const corpus::DatasetManifest& color() const { return corpora.at(corpus::kDomainColor); }
  const corpus::DatasetManifest& line() const { return corpora.at(corpus::kDomainLine); }
};

RunContext make_context(const RunConfig& config);

struct StrategyRunResult {
  std::string run_id;
  std::string strategy;
  double fraction = 1.0;
  uint64_t seed = 0;
  std::string checkpoint_dir;
  std::map<std::string, double> test_accuracy;
  bool resumed = false;
};

// Runs one (strategy, fraction, seed) cell, or resumes it from its DONE
// marker. "DrawToColor" fine-tunes from a draw-encoder checkpoint given in
// encoder_dir. Records land in the registry; checkpoints under
// <output>/runs/<run_id>.
StrategyRunResult run_one(RunContext& ctx, const std::string& strategy,
                          double fraction, uint64_t seed,
                          const std::string& encoder_dir = "",
                          bool verbose = false);

// Full grid; partial failures are recorded and skipped.
std::vector<StrategyRunResult> run_sweep(RunContext& ctx, bool verbose = false);

struct ProbeSummary {
  int pcs_at_threshold = -1;
  probe::RegionHistogram regions;
  double single_region_share = 0.0;
};

// Probes a trained checkpoint on the color test split; emits records tagged
// with the given strategy label and writes artifacts under
// <output>/probe/<tag>.
ProbeSummary run_probes(RunContext& ctx, const std::string& ckpt_dir,
                        const std::string& strategy_label, double fraction,
                        uint64_t seed, bool verbose = false);

struct DistillRunResult {
  std::string run_id;
  double student_accuracy = 0.0;
  double teacher_accuracy = 0.0;
  std::string checkpoint_dir;
  bool resumed = false;
};

DistillRunResult run_distill(RunContext& ctx, const std::string& teacher_ckpt_dir,
                             const std::string& student_arch, uint64_t seed,
                             bool verbose = false);

struct DrawRunResult {
  std::string encoder_dir;
  draw::DrawLossParts final_losses;
  bool resumed = false;
};

// Trains the drawing pretext task on the configured photo/sketch corpora.
// semantic_ckpt_dir supplies the frozen embedding model (empty: semantic
// term disabled unless precomputed embeddings are configured).
DrawRunResult run_draw(RunContext& ctx, const std::string& semantic_ckpt_dir,
                       uint64_t seed, bool verbose = false);

}  // namespace sketchlab::expkit
