#include "sketchlab/train/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "sketchlab/core/error.hpp"
#include "sketchlab/kernels/kernels.hpp"
#include "sketchlab/nets/optim.hpp"

namespace sketchlab::train {

void StageSpec::validate() const {
  if (patience < 1) fail(ErrorCode::InvalidParams, "patience must be >= 1");
  if (max_epochs < 1) fail(ErrorCode::InvalidParams, "max_epochs must be >= 1");
  if (learning_rate < 0.001 || learning_rate > 0.01)
    fail(ErrorCode::InvalidParams, "learning_rate outside [0.001, 0.01]");
  if (batch_size < 4 || batch_size > 32)
    fail(ErrorCode::InvalidParams, "batch_size outside [4, 32]");
}

std::vector<std::string> strategy_stage_domains(const std::string& name) {
  using corpus::kDomainColor;
  using corpus::kDomainLine;
  if (name == "ColorOnly") return {kDomainColor};
  if (name == "LineOnly") return {kDomainLine};
  if (name == "LineToColor") return {kDomainLine, kDomainColor};
  if (name == "ColorToLine") return {kDomainColor, kDomainLine};
  fail(ErrorCode::InvalidParams, "unknown strategy " + name);
}

Schedule derive_schedule(double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    fail(ErrorCode::InvalidParams, "fraction must be in (0,1]");
  const int batch =
      std::clamp((int)std::lround(32.0 * fraction), 4, 32);
  const double lr = std::clamp(0.01 * batch / 32.0, 0.001, 0.01);
  return {lr, batch};
}

StrategyPlan make_strategy_plan(const std::string& name, double fraction,
                                uint64_t seed, int max_epochs, int patience) {
  const Schedule sched = derive_schedule(fraction);
  StrategyPlan plan;
  plan.name = name;
  int k = 0;
  for (const auto& domain : strategy_stage_domains(name)) {
    StageSpec stage;
    stage.domain = domain;
    stage.max_epochs = max_epochs;
    stage.patience = patience;
    stage.learning_rate = sched.learning_rate;
    stage.batch_size = sched.batch_size;
    stage.seed = mix_seed(seed, (uint64_t)k++, 0x57a6e5u);
    plan.stages.push_back(stage);
  }
  return plan;
}

StageData make_stage_data(const corpus::DatasetManifest& manifest,
                          const corpus::AugmentationPolicy& policy,
                          double val_fraction, uint64_t holdout_seed) {
  StageData data;
  data.policy = policy;
  const auto& items = manifest.split("train");
  std::vector<std::vector<size_t>> by_class(manifest.class_names.size());
  for (size_t i = 0; i < items.size(); ++i)
    by_class[(size_t)items[i].label].push_back(i);

  std::vector<char> is_val(items.size(), 0);
  for (size_t c = 0; c < by_class.size(); ++c) {
    auto idx = by_class[c];
    if (idx.size() < 2) continue;  // a singleton class stays in train
    Rng rng(mix_seed(holdout_seed, (uint64_t)c, 0x4a11du));
    rng.shuffle(idx.data(), idx.size());
    size_t k = (size_t)std::floor((double)idx.size() * val_fraction + 0.5);
    k = std::clamp<size_t>(k, 1, idx.size() - 1);
    for (size_t i = 0; i < k; ++i) is_val[idx[i]] = 1;
  }
  for (size_t i = 0; i < items.size(); ++i)
    (is_val[i] ? data.val_items : data.train_items).push_back(items[i]);
  return data;
}

double cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                     Tensor* dlogits) {
  const int b = logits.dim(0), n = logits.dim(1);
  Tensor probs({b, n});
  kernels::softmax_rows(logits.data(), probs.data(), b, n);
  double loss = 0.0;
  for (int i = 0; i < b; ++i) {
    const float p = probs[(int64_t)i * n + labels[(size_t)i]];
    loss -= std::log(std::max(p, 1e-12f));
  }
  loss /= b;
  if (dlogits) {
    *dlogits = probs;
    for (int i = 0; i < b; ++i) {
      for (int j = 0; j < n; ++j) {
        float& g = (*dlogits)[(int64_t)i * n + j];
        g = (g - (j == labels[(size_t)i] ? 1.0f : 0.0f)) / (float)b;
      }
    }
  }
  return loss;
}

namespace {

// Per-run image cache: desk-scale corpora fit in memory comfortably.
class ImageCache {
 public:
  const Tensor& get(const corpus::Item& item) {
    auto it = cache_.find(item.path);
    if (it != cache_.end()) return it->second;
    return cache_.emplace(item.path, corpus::load_item(item).pixels).first->second;
  }

 private:
  std::map<std::string, Tensor> cache_;
};

Tensor assemble_batch(const std::vector<Tensor>& images) {
  const int b = (int)images.size();
  const int c = images[0].dim(0), h = images[0].dim(1), w = images[0].dim(2);
  Tensor batch({b, c, h, w});
  for (int i = 0; i < b; ++i)
    std::copy(images[(size_t)i].data(), images[(size_t)i].data() + images[(size_t)i].numel(),
              batch.data() + (int64_t)i * c * h * w);
  return batch;
}

double accuracy_over(nets::Classifier& model, const std::vector<corpus::Item>& items,
                     const corpus::AugmentationPolicy& policy, ImageCache& cache) {
  if (items.empty()) fail(ErrorCode::EmptyDataset, "no items to evaluate");
  const int eval_batch = 32;
  int correct = 0;
  for (size_t start = 0; start < items.size(); start += eval_batch) {
    const size_t end = std::min(items.size(), start + eval_batch);
    std::vector<Tensor> views;
    for (size_t i = start; i < end; ++i)
      views.push_back(corpus::eval_view(cache.get(items[i]), policy));
    const Tensor batch = assemble_batch(views);
    const Tensor logits = model.logits(batch, /*train=*/false);
    const int n = logits.dim(1);
    for (size_t i = start; i < end; ++i) {
      const float* row = logits.data() + (int64_t)(i - start) * n;
      int arg = 0;
      for (int j = 1; j < n; ++j)
        if (row[j] > row[arg]) arg = j;
      if (arg == items[i].label) ++correct;
    }
  }
  return 100.0 * correct / (double)items.size();
}

nets::CheckpointArchive snapshot(nets::Classifier& model, int epoch, double val_acc) {
  nets::CheckpointArchive a;
  a.manifest = model.meta;
  a.manifest.epoch = epoch;
  a.manifest.metrics["val_acc"] = val_acc;
  a.parameters = nets::export_params(model.net());
  return a;
}

}  // namespace

TrainResult train_stage(nets::Classifier& model, const StageData& data,
                        const StageSpec& stage, const EpochCallback& on_epoch) {
  stage.validate();
  if (data.train_items.empty())
    fail(ErrorCode::EmptyDataset, "stage has no training items");
  for (const auto& item : data.train_items)
    if (item.domain != stage.domain)
      fail(ErrorCode::InvalidParams,
           "dataset domain " + item.domain + " does not match stage domain " + stage.domain);

  const auto t0 = std::chrono::steady_clock::now();
  model.meta.stage_history.push_back(stage.domain);

  ImageCache cache;
  nets::Sgd opt(model.net(), stage.learning_rate, stage.momentum, stage.weight_decay);

  TrainResult result;
  EarlyStopper stopper(stage.patience);

  std::vector<size_t> order(data.train_items.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= stage.max_epochs; ++epoch) {
    Rng shuffle_rng(mix_seed(stage.seed, (uint64_t)epoch, 0x0de2u));
    shuffle_rng.shuffle(order.data(), order.size());

    double loss_sum = 0.0;
    int steps = 0;
    for (size_t start = 0; start < order.size(); start += (size_t)stage.batch_size) {
      const size_t end = std::min(order.size(), start + (size_t)stage.batch_size);
      std::vector<Tensor> images;
      std::vector<int> labels;
      for (size_t i = start; i < end; ++i) {
        const auto& item = data.train_items[order[i]];
        Rng aug_rng(mix_seed(stage.seed, (uint64_t)epoch, order[i], 0xa6u));
        images.push_back(corpus::augment(cache.get(item), data.policy, aug_rng));
        labels.push_back(item.label);
      }
      const Tensor batch = assemble_batch(images);
      opt.zero_grad();
      const Tensor logits = model.logits(batch, /*train=*/true);
      Tensor dlogits;
      const double loss = cross_entropy(logits, labels, &dlogits);
      if (!std::isfinite(loss))
        fail(ErrorCode::NonFiniteLoss,
             "loss diverged at epoch " + std::to_string(epoch) + " step " +
                 std::to_string(steps) + " (lr=" + std::to_string(stage.learning_rate) + ")");
      model.backward(dlogits);
      opt.step();
      loss_sum += loss;
      ++steps;
    }

    EpochStats stats;
    stats.train_loss = steps ? loss_sum / steps : 0.0;
    stats.val_accuracy = data.val_items.empty()
                             ? 0.0
                             : accuracy_over(model, data.val_items, data.policy, cache);
    result.history.push_back(stats);
    result.stopped_epoch = epoch;
    if (on_epoch) on_epoch(epoch, stats, stage.learning_rate);

    if (stopper.observe(stats.val_accuracy)) {
      result.best_epoch = epoch;
      result.best_checkpoint = snapshot(model, epoch, stopper.best());
    } else if (stopper.should_stop()) {
      break;
    }
  }

  result.wall_time_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

double evaluate(nets::Classifier& model, const std::vector<corpus::Item>& items,
                const corpus::AugmentationPolicy& policy) {
  ImageCache cache;
  return accuracy_over(model, items, policy, cache);
}

StrategyOutcome run_strategy(const nets::ArchSpec& arch, const DomainCorpora& corpora,
                             const StrategyPlan& plan, double fraction,
                             uint64_t subset_seed,
                             const corpus::AugmentationPolicy& policy,
                             const EpochCallback& on_epoch,
                             nets::Classifier* initial_model) {
  if (plan.stages.empty()) fail(ErrorCode::InvalidParams, "strategy has no stages");
  const auto expected = strategy_stage_domains(plan.name);
  if (expected.size() != plan.stages.size())
    fail(ErrorCode::InvalidParams, "stage count does not match strategy name");
  for (size_t i = 0; i < expected.size(); ++i)
    if (plan.stages[i].domain != expected[i])
      fail(ErrorCode::InvalidParams, "stage order does not match strategy name");

  std::unique_ptr<nets::Classifier> owned;
  nets::Classifier* model = initial_model;
  if (!model) {
    owned = nets::build_classifier(arch);
    model = owned.get();
  }

  StrategyOutcome outcome;
  for (const auto& stage : plan.stages) {
    auto corpus_it = corpora.find(stage.domain);
    if (corpus_it == corpora.end())
      fail(ErrorCode::MissingData, "no corpus for domain " + stage.domain);
    const corpus::DatasetManifest subset =
        corpus::stratified_subset(corpus_it->second, fraction, subset_seed);
    const StageData data = make_stage_data(subset, policy, 0.1, subset_seed);
    TrainResult stage_result = train_stage(*model, data, stage, on_epoch);
    // the next stage continues from this stage's best epoch
    nets::import_params(model->net(), stage_result.best_checkpoint.parameters);
    model->meta = stage_result.best_checkpoint.manifest;
    outcome.stage_results.push_back(std::move(stage_result));
  }

  for (const auto& [domain, manifest] : corpora) {
    const double acc = evaluate(*model, manifest.split("test"), policy);
    outcome.test_accuracy[domain] = acc;
    outcome.stage_results.back().best_checkpoint.manifest.metrics["test_acc:" + domain] = acc;
  }
  outcome.final_checkpoint = outcome.stage_results.back().best_checkpoint;
  return outcome;
}

}  // namespace sketchlab::train
