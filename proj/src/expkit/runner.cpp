#include "sketchlab/expkit/runner.hpp"

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "sketchlab/core/error.hpp"

namespace fs = std::filesystem;

namespace sketchlab::expkit {

std::string dataset_fingerprint(const corpus::DatasetManifest& m) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s|%d|%zu|%zu|%.4f|%" PRIu64, m.name.c_str(),
                m.num_classes(), m.split("train").size(), m.split("test").size(),
                m.fraction, m.subset_seed);
  return buf;
}

RunContext make_context(const RunConfig& config) {
  RunContext ctx;
  ctx.config = config;
  ctx.corpora[corpus::kDomainColor] =
      corpus::load_dataset(config.dataset_root, config.classes);
  ctx.corpora[corpus::kDomainColor].domain = corpus::kDomainColor;
  for (auto& [split, items] : ctx.corpora[corpus::kDomainColor].splits)
    for (auto& it : items) it.domain = corpus::kDomainColor;

  const std::string line_root = line_root_of(config);
  ctx.corpora[corpus::kDomainLine] = corpus::load_dataset(line_root, config.classes);
  ctx.corpora[corpus::kDomainLine].domain = corpus::kDomainLine;
  for (auto& [split, items] : ctx.corpora[corpus::kDomainLine].splits)
    for (auto& it : items) it.domain = corpus::kDomainLine;

  ctx.policy.out_resolution = config.resolution;
  ctx.policy.eval_center_crop = config.resolution;
  ctx.registry = std::make_unique<Registry>(config.output_dir);
  return ctx;
}

namespace {

void append_metric(RunContext& ctx, const StrategyRunResult& run, int stage,
                   const std::string& split, const std::string& domain,
                   const std::string& metric, double value) {
  ExperimentRecord r;
  r.run_id = run.run_id;
  r.strategy = run.strategy;
  r.fraction = run.fraction;
  r.seed = run.seed;
  r.stage = stage;
  r.split = split;
  r.domain = domain;
  r.metric = metric;
  r.value = value;
  r.timestamp = now_timestamp();
  ctx.registry->append(r);
}

std::string epoch_metric(const char* name, int epoch) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%s.e%03d", name, epoch);
  return buf;
}

std::map<std::string, double> read_done_marker(const fs::path& path) {
  std::map<std::string, double> kv;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos)
      kv[line.substr(0, eq)] = std::stod(line.substr(eq + 1));
  }
  return kv;
}

}  // namespace

StrategyRunResult run_one(RunContext& ctx, const std::string& strategy,
                          double fraction, uint64_t seed,
                          const std::string& encoder_dir, bool verbose) {
  StrategyRunResult result;
  result.strategy = strategy;
  result.fraction = fraction;
  result.seed = seed;
  result.run_id = make_run_id(strategy, fraction, seed,
                              dataset_fingerprint(ctx.color()), kCodeVersionTag);

  const fs::path run_dir = fs::path(ctx.config.output_dir) / "runs" / result.run_id;
  const fs::path done = run_dir / "DONE";
  result.checkpoint_dir = (run_dir / "final").string();
  if (fs::exists(done)) {
    result.resumed = true;
    for (const auto& [k, v] : read_done_marker(done))
      if (k.rfind("test_acc:", 0) == 0) result.test_accuracy[k.substr(9)] = v;
    return result;
  }
  fs::create_directories(run_dir);

  train::StrategyPlan plan = train::make_strategy_plan(
      strategy, fraction, seed, ctx.config.max_epochs, ctx.config.patience);

  std::unique_ptr<nets::Classifier> initial;
  if (strategy == "DrawToColor") {
    if (encoder_dir.empty())
      fail(ErrorCode::MissingData, "DrawToColor needs an encoder checkpoint");
    const nets::CheckpointArchive enc = nets::load_checkpoint(encoder_dir);
    initial = nets::init_classifier_from_encoder(enc, ctx.config.classes,
                                                 /*keep_encoder_pool=*/true,
                                                 mix_seed(seed, 0x4eadu));
    initial->meta.seed = seed;
  }

  nets::ArchSpec arch;
  arch.id = ctx.config.arch;
  arch.num_classes = ctx.config.classes;
  arch.input_resolution = ctx.config.resolution;
  arch.seed = mix_seed(seed, 0x1417u);

  int stage_counter = 0;
  auto on_epoch = [&](int epoch, const train::EpochStats& stats, double) {
    append_metric(ctx, result, stage_counter, "train",
                  plan.stages[(size_t)stage_counter].domain,
                  epoch_metric("train_loss", epoch), stats.train_loss);
    append_metric(ctx, result, stage_counter, "val",
                  plan.stages[(size_t)stage_counter].domain,
                  epoch_metric("val_acc", epoch), stats.val_accuracy);
    if (verbose)
      std::fprintf(stderr, "  [%s f=%.2f s=%" PRIu64 "] stage %d epoch %d loss %.4f val %.2f\n",
                   strategy.c_str(), fraction, seed, stage_counter, epoch,
                   stats.train_loss, stats.val_accuracy);
  };

  // run stages one at a time so the per-stage index is visible to records
  train::StrategyOutcome outcome;
  {
    std::unique_ptr<nets::Classifier> model = std::move(initial);
    if (!model) model = nets::build_classifier(arch);
    for (size_t k = 0; k < plan.stages.size(); ++k) {
      stage_counter = (int)k;
      const auto& stage = plan.stages[k];
      const corpus::DatasetManifest subset = corpus::stratified_subset(
          ctx.corpora.at(stage.domain), fraction, ctx.config.subset_seed);
      const train::StageData data =
          train::make_stage_data(subset, ctx.policy, 0.1, ctx.config.subset_seed);
      train::TrainResult sr = train::train_stage(*model, data, stage, on_epoch);
      nets::import_params(model->net(), sr.best_checkpoint.parameters);
      model->meta = sr.best_checkpoint.manifest;
      append_metric(ctx, result, (int)k, "train", stage.domain, "best_epoch", sr.best_epoch);
      append_metric(ctx, result, (int)k, "train", stage.domain, "stopped_epoch", sr.stopped_epoch);
      append_metric(ctx, result, (int)k, "train", stage.domain, "wall_time_sec", sr.wall_time_sec);
      nets::save_checkpoint(sr.best_checkpoint,
                            (run_dir / ("stage" + std::to_string(k))).string());
      outcome.stage_results.push_back(std::move(sr));
    }
    const int last = (int)plan.stages.size() - 1;
    for (const auto& [domain, manifest] : ctx.corpora) {
      const double acc = train::evaluate(*model, manifest.split("test"), ctx.policy);
      outcome.test_accuracy[domain] = acc;
      model->meta.metrics["test_acc:" + domain] = acc;
      append_metric(ctx, result, last, "test", domain, "test_acc", acc);
    }
    nets::CheckpointArchive final_ckpt;
    final_ckpt.manifest = model->meta;
    final_ckpt.parameters = nets::export_params(model->net());
    nets::save_checkpoint(final_ckpt, result.checkpoint_dir);
  }

  result.test_accuracy = outcome.test_accuracy;
  std::ofstream marker(done);
  for (const auto& [domain, acc] : result.test_accuracy)
    marker << "test_acc:" << domain << "=" << acc << "\n";
  return result;
}

std::vector<StrategyRunResult> run_sweep(RunContext& ctx, bool verbose) {
  std::vector<StrategyRunResult> results;
  for (const auto& strategy : ctx.config.strategies) {
    for (double fraction : ctx.config.fractions) {
      for (uint64_t seed : ctx.config.seeds) {
        try {
          results.push_back(run_one(ctx, strategy, fraction, seed, "", verbose));
          if (verbose) {
            const auto& r = results.back();
            std::fprintf(stderr, "%s f=%.2f seed=%" PRIu64 "%s:", strategy.c_str(),
                         fraction, seed, r.resumed ? " (resumed)" : "");
            for (const auto& [d, a] : r.test_accuracy)
              std::fprintf(stderr, " %s=%.2f", d.c_str(), a);
            std::fprintf(stderr, "\n");
          }
        } catch (const Error& e) {
          // partial failures are recorded, not fatal
          StrategyRunResult failed;
          failed.strategy = strategy;
          failed.fraction = fraction;
          failed.seed = seed;
          failed.run_id = make_run_id(strategy, fraction, seed,
                                      dataset_fingerprint(ctx.color()), kCodeVersionTag);
          append_metric(ctx, failed, 0, "train", "", "failed", 1.0);
          std::fprintf(stderr, "run failed (%s f=%.2f seed=%" PRIu64 "): %s\n",
                       strategy.c_str(), fraction, seed, e.what());
        }
      }
    }
  }
  return results;
}

ProbeSummary run_probes(RunContext& ctx, const std::string& ckpt_dir,
                        const std::string& strategy_label, double fraction,
                        uint64_t seed, bool verbose) {
  const nets::CheckpointArchive archive = nets::load_checkpoint(ckpt_dir);
  auto model = nets::classifier_from_checkpoint(archive);
  const auto& test_items = ctx.color().split("test");

  StrategyRunResult tag;
  tag.run_id = make_run_id("probe:" + strategy_label, fraction, seed,
                           dataset_fingerprint(ctx.color()), kCodeVersionTag);
  tag.strategy = strategy_label;
  tag.fraction = fraction;
  tag.seed = seed;

  const fs::path probe_dir =
      fs::path(ctx.config.output_dir) / "probe" /
      (strategy_label + "-f" + std::to_string(fraction).substr(0, 4) + "-s" +
       std::to_string(seed));
  fs::create_directories(probe_dir);

  ProbeSummary summary;

  if (ctx.config.probe_pca) {
    // features in eval batches of 32
    const int d = model->penultimate_width;
    Tensor features({(int)test_items.size(), d});
    for (size_t start = 0; start < test_items.size(); start += 32) {
      const size_t end = std::min(test_items.size(), start + 32);
      Tensor batch({(int)(end - start), 3, ctx.config.resolution, ctx.config.resolution});
      for (size_t i = start; i < end; ++i) {
        const Tensor img =
            corpus::eval_view(corpus::load_item(test_items[i]).pixels, ctx.policy);
        std::copy(img.data(), img.data() + img.numel(),
                  batch.data() + (int64_t)(i - start) * img.numel());
      }
      const Tensor f = nets::penultimate_features(*model, batch);
      std::copy(f.data(), f.data() + f.numel(), features.data() + (int64_t)start * d);
    }
    probe::save_activation_dump((probe_dir / "features.bin").string(), features);
    const probe::PCAReport report = probe::pca_report(features);
    summary.pcs_at_threshold =
        probe::pcs_to_variance(report, ctx.config.variance_threshold);
    append_metric(ctx, tag, 0, "test", corpus::kDomainColor, "pcs_at_threshold",
                  summary.pcs_at_threshold);
    for (size_t i = 0; i < report.cumulative_variance.size(); ++i) {
      char m[32];
      std::snprintf(m, sizeof(m), "cumvar.p%03zu", i + 1);
      append_metric(ctx, tag, 0, "test", corpus::kDomainColor, m,
                    report.cumulative_variance[i]);
    }
  }

  if (ctx.config.probe_regions) {
    summary.regions = probe::region_histogram(*model, test_items, ctx.policy,
                                              ctx.config.percentile);
    const double n = (double)test_items.size();
    summary.single_region_share = summary.regions.one / n;
    append_metric(ctx, tag, 0, "test", corpus::kDomainColor, "regions.share_one",
                  summary.regions.one / n);
    append_metric(ctx, tag, 0, "test", corpus::kDomainColor, "regions.share_two",
                  summary.regions.two / n);
    append_metric(ctx, tag, 0, "test", corpus::kDomainColor,
                  "regions.share_three_plus", summary.regions.three_plus / n);
    append_metric(ctx, tag, 0, "test", corpus::kDomainColor, "regions.share_zero",
                  summary.regions.zero / n);
  }

  if (ctx.config.probe_tuning) {
    const int n = std::min<int>(ctx.config.tuning_images, (int)test_items.size());
    const probe::TuningCurve curve =
        probe::tuning_curve(*model, test_items, ctx.policy, n, seed);
    for (size_t i = 0; i < curve.values.size(); ++i) {
      char m[32];
      std::snprintf(m, sizeof(m), "tuning.c%03zu", i + 1);
      append_metric(ctx, tag, 0, "test", corpus::kDomainColor, m, curve.values[i]);
    }
  }

  if (verbose)
    std::fprintf(stderr, "probe %s: pcs@%.2f=%d single-region=%.3f\n",
                 strategy_label.c_str(), ctx.config.variance_threshold,
                 summary.pcs_at_threshold, summary.single_region_share);
  return summary;
}

DistillRunResult run_distill(RunContext& ctx, const std::string& teacher_ckpt_dir,
                             const std::string& student_arch, uint64_t seed,
                             bool verbose) {
  const nets::CheckpointArchive teacher = nets::load_checkpoint(teacher_ckpt_dir);
  std::string teacher_tag = "color";
  for (const auto& s : teacher.manifest.stage_history)
    if (s == corpus::kDomainLine || s == corpus::kDomainDraw) teacher_tag = "line";

  DistillRunResult result;
  StrategyRunResult tag;
  tag.strategy = "distill:" + student_arch + ":" + teacher_tag;
  tag.fraction = 1.0;
  tag.seed = seed;
  tag.run_id = make_run_id(tag.strategy + "|" + teacher_ckpt_dir, 1.0, seed,
                           dataset_fingerprint(ctx.color()), kCodeVersionTag);
  result.run_id = tag.run_id;

  const fs::path run_dir = fs::path(ctx.config.output_dir) / "runs" / tag.run_id;
  const fs::path done = run_dir / "DONE";
  result.checkpoint_dir = (run_dir / "final").string();
  if (fs::exists(done)) {
    const auto kv = read_done_marker(done);
    result.resumed = true;
    if (auto it = kv.find("student_acc"); it != kv.end()) result.student_accuracy = it->second;
    if (auto it = kv.find("teacher_acc"); it != kv.end()) result.teacher_accuracy = it->second;
    return result;
  }
  fs::create_directories(run_dir);

  nets::ArchSpec arch;
  arch.id = student_arch;
  arch.num_classes = ctx.config.classes;
  arch.input_resolution = ctx.config.resolution;
  arch.seed = mix_seed(seed, 0x57abULL);

  distill::DistillConfig cfg;
  cfg.temperature = ctx.config.kd_temperature;
  cfg.alpha = ctx.config.kd_alpha;
  cfg.max_epochs = ctx.config.distill_epochs;
  cfg.patience = ctx.config.distill_patience;
  const train::Schedule sched = train::derive_schedule(1.0);
  cfg.learning_rate = sched.learning_rate;
  cfg.batch_size = sched.batch_size;
  cfg.seed = mix_seed(seed, 0xd157ULL);

  auto on_epoch = [&](int epoch, const train::EpochStats& stats, double) {
    append_metric(ctx, tag, 0, "train", corpus::kDomainColor,
                  epoch_metric("train_loss", epoch), stats.train_loss);
    append_metric(ctx, tag, 0, "val", corpus::kDomainColor,
                  epoch_metric("val_acc", epoch), stats.val_accuracy);
    if (verbose)
      std::fprintf(stderr, "  [distill %s seed=%" PRIu64 "] epoch %d loss %.4f val %.2f\n",
                   student_arch.c_str(), seed, epoch, stats.train_loss,
                   stats.val_accuracy);
  };

  const distill::StudentResult sr = distill::train_student(
      arch, teacher, ctx.color(), ctx.policy, cfg, on_epoch);

  result.student_accuracy = sr.student_accuracy;
  result.teacher_accuracy = sr.teacher_accuracy;
  nets::save_checkpoint(sr.checkpoint, result.checkpoint_dir);
  append_metric(ctx, tag, 0, "test", corpus::kDomainColor, "test_acc",
                sr.student_accuracy);
  append_metric(ctx, tag, 0, "test", corpus::kDomainColor, "teacher_acc",
                sr.teacher_accuracy);

  std::ofstream marker(done);
  marker << "student_acc=" << sr.student_accuracy << "\n";
  marker << "teacher_acc=" << sr.teacher_accuracy << "\n";
  return result;
}

DrawRunResult run_draw(RunContext& ctx, const std::string& semantic_ckpt_dir,
                       uint64_t seed, bool verbose) {
  DrawRunResult result;
  const fs::path draw_dir = fs::path(ctx.config.output_dir) / "draw" /
                            ("s" + std::to_string(seed));
  result.encoder_dir = (draw_dir / "encoder").string();
  if (fs::exists(draw_dir / "DONE")) {
    result.resumed = true;
    return result;
  }
  fs::create_directories(draw_dir);

  const corpus::DatasetManifest photos = corpus::load_dataset(ctx.config.photo_root, 1);
  const corpus::DatasetManifest sketches = corpus::load_dataset(ctx.config.sketch_root, 1);

  draw::DrawConfig cfg;
  cfg.epochs = ctx.config.draw_epochs;
  cfg.batch_size = ctx.config.draw_batch;
  cfg.adam_lr = ctx.config.draw_lr;
  cfg.decay_start_epoch = ctx.config.draw_decay_start;
  cfg.lambda_adv = ctx.config.lambda_adv;
  cfg.lambda_geom = ctx.config.lambda_geom;
  cfg.lambda_sem = ctx.config.lambda_sem;
  cfg.lambda_cyc = ctx.config.lambda_cyc;
  cfg.resolution = ctx.config.resolution;
  cfg.seed = seed;

  draw::ProviderSet providers;
  if (!semantic_ckpt_dir.empty()) {
    providers.semantic.model =
        nets::classifier_from_checkpoint(nets::load_checkpoint(semantic_ckpt_dir));
  } else if (cfg.lambda_sem > 0) {
    if (verbose)
      std::fprintf(stderr, "no semantic checkpoint given; disabling semantic loss\n");
    cfg.lambda_sem = 0.0;
  }

  StrategyRunResult tag;
  tag.strategy = "Draw";
  tag.fraction = 1.0;
  tag.seed = seed;
  tag.run_id = make_run_id("Draw", 1.0, seed, dataset_fingerprint(photos),
                           kCodeVersionTag);

  auto on_epoch = [&](int epoch, const draw::DrawLossParts& parts) {
    append_metric(ctx, tag, 0, "train", corpus::kDomainDraw,
                  epoch_metric("loss_total", epoch), parts.total);
    append_metric(ctx, tag, 0, "train", corpus::kDomainDraw,
                  epoch_metric("loss_adv", epoch), parts.adv);
    append_metric(ctx, tag, 0, "train", corpus::kDomainDraw,
                  epoch_metric("loss_geom", epoch), parts.geom);
    append_metric(ctx, tag, 0, "train", corpus::kDomainDraw,
                  epoch_metric("loss_sem", epoch), parts.sem);
    append_metric(ctx, tag, 0, "train", corpus::kDomainDraw,
                  epoch_metric("loss_cyc", epoch), parts.cyc);
    if (verbose)
      std::fprintf(stderr,
                   "  [draw seed=%" PRIu64 "] epoch %d total %.4f adv %.4f geom %.4f sem %.4f cyc %.4f\n",
                   seed, epoch, parts.total, parts.adv, parts.geom, parts.sem,
                   parts.cyc);
  };

  const draw::DrawOutcome outcome =
      draw::train_draw(photos, sketches, cfg, providers, draw_dir.string(), on_epoch);
  if (!outcome.epoch_losses.empty()) result.final_losses = outcome.epoch_losses.back();

  std::ofstream marker(draw_dir / "DONE");
  marker << "total=" << result.final_losses.total << "\n";
  return result;
}

}  // namespace sketchlab::expkit
