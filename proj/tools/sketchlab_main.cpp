// Command-line front end: prepare / train / draw / probe / distill / sweep /
// report. Usage errors exit 2, runtime errors exit 1.

#include <cstdio>
#include <filesystem>
#include <string>

#include <CLI11.hpp>

#include "sketchlab/corpus/line_drawing.hpp"
#include "sketchlab/corpus/synthetic.hpp"
#include "sketchlab/distill/distill.hpp"
#include "sketchlab/expkit/report.hpp"
#include "sketchlab/expkit/runner.hpp"

namespace fs = std::filesystem;
using namespace sketchlab;

namespace {

expkit::RunConfig config_from(const std::string& config_path) {
  if (!config_path.empty()) return expkit::load_config(config_path);
  expkit::RunConfig c;
  c.output_dir = expkit::default_output_dir();
  return c;
}

int cmd_prepare(const std::string& root, int classes, const std::string& convert,
                const std::string& out, bool synthetic, int per_class_train,
                int per_class_test, int resolution, int scenes, uint64_t seed,
                int cue_count) {
  if (synthetic) {
    corpus::SyntheticSpec spec;
    spec.resolution = resolution;
    spec.per_class_train = per_class_train;
    spec.per_class_test = per_class_test;
    spec.seed = seed;
    corpus::make_shape_corpus(root, spec);
    std::printf("wrote synthetic corpus: %s (%d train + %d test per class)\n",
                root.c_str(), per_class_train, per_class_test);
  }
  if (scenes > 0) {
    const std::string scene_root = root + "-scenes";
    corpus::make_scene_corpus(scene_root, scenes, resolution, seed + 1);
    std::printf("wrote scene corpus: %s (%d images)\n", scene_root.c_str(), scenes);
  }
  if (cue_count > 0) {
    const std::string cue_root = root + "-cue";
    corpus::make_cue_conflict_set(cue_root, cue_count, resolution, seed + 2);
    std::printf("wrote cue-conflict set: %s (%d images)\n", cue_root.c_str(), cue_count);
  }
  if (convert == "line") {
    const corpus::DatasetManifest manifest = corpus::load_dataset(root, classes);
    const std::string line_out = out.empty() ? root + "-line" : out;
    corpus::convert_corpus_to_line(manifest, line_out, corpus::EdgeParams{});
    std::printf("wrote line corpus: %s\n", line_out.c_str());
    if (scenes > 0) {
      const corpus::DatasetManifest scene_manifest =
          corpus::load_dataset(root + "-scenes", 1);
      corpus::convert_corpus_to_line(scene_manifest, root + "-scenes-line",
                                     corpus::EdgeParams{});
      std::printf("wrote line scene corpus: %s-scenes-line\n", root.c_str());
    }
  } else if (!convert.empty()) {
    fail(ErrorCode::Usage, "unknown converter: " + convert);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"line-drawing pretraining laboratory"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "config file (sectioned key=value)");

  // prepare ---------------------------------------------------------------
  auto* prepare = app.add_subcommand("prepare", "build or convert corpora");
  std::string p_root = "data/shapes", p_convert, p_out;
  bool p_synthetic = false;
  int p_classes = 10, p_train = 80, p_test = 40, p_res = 32, p_scenes = 0, p_cues = 0;
  uint64_t p_seed = 7;
  prepare->add_option("--root", p_root, "dataset root");
  prepare->add_option("--classes", p_classes, "expected class count");
  prepare->add_option("--convert", p_convert, "converter to apply (line)");
  prepare->add_option("--out", p_out, "output root for conversions");
  prepare->add_flag("--synthetic", p_synthetic, "generate the shape corpus");
  prepare->add_option("--per-class-train", p_train, "train images per class");
  prepare->add_option("--per-class-test", p_test, "test images per class");
  prepare->add_option("--resolution", p_res, "image resolution");
  prepare->add_option("--scenes", p_scenes, "also generate N unlabeled scenes");
  prepare->add_option("--cues", p_cues, "also generate N cue-conflict images");
  prepare->add_option("--seed", p_seed, "generator seed");

  // train -----------------------------------------------------------------
  auto* train_cmd = app.add_subcommand("train", "run one training strategy");
  std::string t_strategy = "ColorOnly", t_encoder;
  double t_fraction = 1.0;
  uint64_t t_seed = 0;
  train_cmd->add_option("--strategy", t_strategy,
                        "ColorOnly|LineOnly|LineToColor|ColorToLine|DrawToColor");
  train_cmd->add_option("--fraction", t_fraction, "train fraction in (0,1]");
  train_cmd->add_option("--seed", t_seed, "training seed");
  train_cmd->add_option("--encoder", t_encoder, "encoder checkpoint (DrawToColor)");

  // draw ------------------------------------------------------------------
  auto* draw_cmd = app.add_subcommand("draw", "drawing pretext pretraining");
  std::string d_semantic;
  uint64_t d_seed = 0;
  draw_cmd->add_option("--semantic-ckpt", d_semantic,
                       "frozen classifier for the semantic loss");
  draw_cmd->add_option("--seed", d_seed, "seed");

  // probe -----------------------------------------------------------------
  auto* probe_cmd = app.add_subcommand("probe", "representation probes");
  std::string pr_ckpt, pr_label = "model", pr_cue_root, pr_features;
  uint64_t pr_seed = 0;
  probe_cmd->add_option("--ckpt", pr_ckpt, "checkpoint directory");
  probe_cmd->add_option("--label", pr_label, "strategy label for records");
  probe_cmd->add_option("--seed", pr_seed, "seed for image order");
  probe_cmd->add_option("--cue-root", pr_cue_root, "cue-conflict folder (shape bias)");
  probe_cmd->add_option("--features", pr_features,
                        "activation dump (runs PCA without a model)");

  // distill ---------------------------------------------------------------
  auto* distill_cmd = app.add_subcommand("distill", "teacher-student distillation");
  std::string k_teacher, k_student = "mobilenet-small";
  uint64_t k_seed = 0;
  distill_cmd->add_option("--teacher", k_teacher, "teacher checkpoint directory")
      ->required();
  distill_cmd->add_option("--student", k_student, "student architecture");
  distill_cmd->add_option("--seed", k_seed, "seed");

  // sweep -----------------------------------------------------------------
  auto* sweep_cmd = app.add_subcommand("sweep", "strategy x fraction x seed grid");
  bool s_verbose = false;
  sweep_cmd->add_flag("--verbose", s_verbose, "per-epoch progress");

  // report ----------------------------------------------------------------
  auto* report_cmd = app.add_subcommand("report", "emit CSV tables and plots");
  std::string r_runs, r_out;
  report_cmd->add_option("--runs", r_runs, "registry directory (default: output dir)");
  report_cmd->add_option("--out", r_out, "report output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : 2;
  }

  try {
    if (prepare->parsed())
      return cmd_prepare(p_root, p_classes, p_convert, p_out, p_synthetic, p_train,
                         p_test, p_res, p_scenes, p_seed, p_cues);

    expkit::RunConfig config = config_from(config_path);

    if (train_cmd->parsed()) {
      expkit::RunContext ctx = expkit::make_context(config);
      const auto r = expkit::run_one(ctx, t_strategy, t_fraction, t_seed, t_encoder,
                                     /*verbose=*/true);
      std::printf("run %s%s\n", r.run_id.c_str(), r.resumed ? " (resumed)" : "");
      for (const auto& [domain, acc] : r.test_accuracy)
        std::printf("  test_acc[%s] = %.2f\n", domain.c_str(), acc);
      return 0;
    }
    if (draw_cmd->parsed()) {
      expkit::RunContext ctx = expkit::make_context(config);
      const auto r = expkit::run_draw(ctx, d_semantic, d_seed, /*verbose=*/true);
      std::printf("encoder checkpoint: %s%s\n", r.encoder_dir.c_str(),
                  r.resumed ? " (resumed)" : "");
      return 0;
    }
    if (probe_cmd->parsed()) {
      if (!pr_features.empty()) {
        const Tensor features = probe::load_activation_dump(pr_features);
        const probe::PCAReport report = probe::pca_report(features);
        const int pcs = probe::pcs_to_variance(report, 0.90);
        std::printf("samples=%d dim=%d pcs@0.90=%d\n", report.n_samples, report.dim,
                    pcs);
        return 0;
      }
      if (pr_ckpt.empty()) fail(ErrorCode::Usage, "probe needs --ckpt or --features");
      expkit::RunContext ctx = expkit::make_context(config);
      if (!pr_cue_root.empty()) {
        auto model =
            nets::classifier_from_checkpoint(nets::load_checkpoint(pr_ckpt));
        std::map<std::string, int> class_map;
        const auto names = ctx.color().class_names;
        for (size_t i = 0; i < names.size(); ++i) class_map[names[i]] = (int)i;
        const auto report =
            probe::shape_bias(*model, pr_cue_root, class_map, ctx.policy);
        for (const auto& [cls, counts] : report.per_class) {
          const auto f = counts.fraction();
          std::printf("%-10s shape=%d texture=%d other=%d fraction=%s\n",
                      cls.c_str(), counts.shape, counts.texture, counts.other,
                      f ? std::to_string(*f).c_str() : "undefined");
        }
        const auto f = report.overall.fraction();
        std::printf("overall shape fraction: %s\n",
                    f ? std::to_string(*f).c_str() : "undefined");
        return 0;
      }
      const auto summary =
          expkit::run_probes(ctx, pr_ckpt, pr_label, 1.0, pr_seed, true);
      std::printf("pcs@0.90=%d single-region share=%.3f (1:%d 2:%d >=3:%d 0:%d)\n",
                  summary.pcs_at_threshold, summary.single_region_share,
                  summary.regions.one, summary.regions.two,
                  summary.regions.three_plus, summary.regions.zero);
      return 0;
    }
    if (distill_cmd->parsed()) {
      expkit::RunContext ctx = expkit::make_context(config);
      const auto r = expkit::run_distill(ctx, k_teacher, k_student, k_seed, true);
      std::printf("student %.2f (teacher %.2f)%s\n", r.student_accuracy,
                  r.teacher_accuracy, r.resumed ? " (resumed)" : "");
      return 0;
    }
    if (sweep_cmd->parsed()) {
      expkit::RunContext ctx = expkit::make_context(config);
      const auto results = expkit::run_sweep(ctx, s_verbose);
      std::printf("sweep complete: %zu runs\n", results.size());
      return 0;
    }
    if (report_cmd->parsed()) {
      const std::string runs_dir = r_runs.empty() ? config.output_dir : r_runs;
      const expkit::Registry registry(runs_dir);
      const auto records = registry.load_all();
      const std::string out_dir = r_out.empty() ? runs_dir + "/report" : r_out;
      expkit::emit_report(records, out_dir);
      std::printf("report written to %s (%zu records)\n", out_dir.c_str(),
                  records.size());
      return 0;
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.code() == ErrorCode::Usage ? 2 : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
