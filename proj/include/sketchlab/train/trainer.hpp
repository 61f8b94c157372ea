#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "sketchlab/corpus/augment.hpp"
#include "sketchlab/corpus/dataset.hpp"
#include "sketchlab/nets/archs.hpp"

namespace sketchlab::train {

struct StageSpec {
  std::string domain = corpus::kDomainColor;
  int max_epochs = 200;
  int patience = 10;
  double learning_rate = 0.01;
  int batch_size = 32;
  uint64_t seed = 0;
  double momentum = 0.9;
  double weight_decay = 0.0;

  void validate() const;
};

struct StrategyPlan {
  std::string name;  // ColorOnly | LineOnly | LineToColor | ColorToLine
  std::vector<StageSpec> stages;
};

// Stage order is derived from the name; LineToColor trains LINE then COLOR.
std::vector<std::string> strategy_stage_domains(const std::string& name);

struct Schedule {
  double learning_rate;
  int batch_size;
};

// Linear-scaling rule anchored at (batch 32, lr 0.01):
// batch = clamp(round(32*f), 4, 32), lr = clamp(0.01*batch/32, 0.001, 0.01).
Schedule derive_schedule(double fraction);

StrategyPlan make_strategy_plan(const std::string& name, double fraction,
                                uint64_t seed, int max_epochs, int patience);

struct EpochStats {
  double train_loss = 0.0;
  double val_accuracy = 0.0;
};

// Patience rule: stop after `patience` consecutive epochs without a strict
// improvement of the best validation accuracy.
class EarlyStopper {
 public:
  explicit EarlyStopper(int patience) : patience_(patience) {}

  // call once per epoch; true when this epoch set a new best
  bool observe(double val_accuracy) {
    ++epoch_;
    if (val_accuracy > best_) {
      best_ = val_accuracy;
      best_epoch_ = epoch_;
      stale_ = 0;
      return true;
    }
    ++stale_;
    return false;
  }

  bool should_stop() const { return stale_ >= patience_; }
  int best_epoch() const { return best_epoch_; }
  double best() const { return best_; }

 private:
  int patience_;
  int epoch_ = 0;
  int best_epoch_ = 0;
  int stale_ = 0;
  double best_ = -1.0;
};

struct TrainResult {
  nets::CheckpointArchive best_checkpoint;
  std::vector<EpochStats> history;
  int stopped_epoch = 0;  // epochs actually run
  int best_epoch = 0;     // 1-based epoch of the returned checkpoint
  double wall_time_sec = 0.0;
};

// Training pipeline for one stage: the stratified validation holdout comes
// out of the (possibly subsetted) train split; the test split is never used
// for stopping.
struct StageData {
  std::vector<corpus::Item> train_items;
  std::vector<corpus::Item> val_items;
  corpus::AugmentationPolicy policy;
};

StageData make_stage_data(const corpus::DatasetManifest& manifest,
                          const corpus::AugmentationPolicy& policy,
                          double val_fraction, uint64_t holdout_seed);

// Softmax cross-entropy over a batch; fills dlogits with the mean gradient
// when requested.
double cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                     Tensor* dlogits);

using EpochCallback =
    std::function<void(int epoch, const EpochStats&, double lr)>;

TrainResult train_stage(nets::Classifier& model, const StageData& data,
                        const StageSpec& stage,
                        const EpochCallback& on_epoch = nullptr);

// Top-1 accuracy (percent) over eval views; deterministic.
double evaluate(nets::Classifier& model, const std::vector<corpus::Item>& items,
                const corpus::AugmentationPolicy& policy);

struct StrategyOutcome {
  std::vector<TrainResult> stage_results;
  std::map<std::string, double> test_accuracy;  // domain -> percent
  nets::CheckpointArchive final_checkpoint;
};

// Corpora per domain at full fraction; each stage subsets its own domain with
// the shared subset_seed so color/line selections stay aligned.
using DomainCorpora = std::map<std::string, corpus::DatasetManifest>;

StrategyOutcome run_strategy(const nets::ArchSpec& arch, const DomainCorpora& corpora,
                             const StrategyPlan& plan, double fraction,
                             uint64_t subset_seed,
                             const corpus::AugmentationPolicy& policy,
                             const EpochCallback& on_epoch = nullptr,
                             nets::Classifier* initial_model = nullptr);

}  // namespace sketchlab::train
