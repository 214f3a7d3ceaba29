#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "milthrow/checkpoint.hpp"
#include "milthrow/corpus.hpp"
#include "milthrow/errors.hpp"
#include "milthrow/evaluator.hpp"
#include "milthrow/objective.hpp"
#include "milthrow/optim.hpp"
#include "milthrow/scorer.hpp"
#include "milthrow/synth.hpp"
#include "milthrow/trainer.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";

using json = nlohmann::json;
namespace fs = std::filesystem;
using namespace milthrow;

// Every run records its fully resolved configuration before any long-running
// work starts: two runs with the same run manifest produce the same outputs.
void emit_run_manifest(const json& run, const std::optional<fs::path>& out_dir) {
  json doc = run;
  doc["tool_version"] = kVersion;
  if (out_dir) {
    fs::create_directories(*out_dir);
    std::ofstream out(*out_dir / "run_manifest.json");
    if (!out) throw RuntimeFailure("cannot write run manifest in " + out_dir->string());
    out << doc.dump(2) << "\n";
  } else {
    std::cout << doc.dump(2) << "\n";
  }
}

struct TrainCli {
  std::string manifest;
  std::string out;
  std::string resume_from;
  std::string optimizer = "adam";
  std::string loss = "original";
  double lambda1 = 8e-5, lambda2 = 8e-5, lambda3 = 1e-3;
  std::optional<double> lr, epsilon;
  double beta1 = 0.9, beta2 = 0.999, rho = 0.95;
  std::uint64_t iterations = 100000;
  std::size_t pairs_per_step = 1;
  std::size_t segments = 32;
  double dropout = 0.6;
  std::uint64_t seed = 0;
  std::uint64_t checkpoint_every = 0;
  std::vector<std::size_t> hidden = kDefaultHiddenDims;
  std::size_t jobs = 1;
};

TrainConfig resolve_train_config(const TrainCli& cli) {
  TrainConfig cfg;
  cfg.optimizer = cli.optimizer == "adam" ? OptimizerKind::adam : OptimizerKind::adadelta;
  cfg.hyper = default_hyper(cfg.optimizer);
  if (cli.lr) cfg.hyper.learning_rate = *cli.lr;
  if (cli.epsilon) cfg.hyper.epsilon = *cli.epsilon;
  cfg.hyper.beta1 = cli.beta1;
  cfg.hyper.beta2 = cli.beta2;
  cfg.hyper.rho = cli.rho;
  cfg.loss.variant = cli.loss == "original" ? LossVariant::original : LossVariant::mean_normal;
  cfg.loss.lambda1 = cli.lambda1;
  cfg.loss.lambda2 = cli.lambda2;
  cfg.loss.lambda3 = cli.lambda3;
  cfg.iterations = cli.iterations;
  cfg.pairs_per_step = cli.pairs_per_step;
  cfg.n_segments = cli.segments;
  cfg.dropout_rate = cli.dropout;
  cfg.seed = cli.seed;
  cfg.checkpoint_every = cli.checkpoint_every;
  cfg.hidden_dims = cli.hidden;
  cfg.out_dir = cli.out;
  cfg.jobs = cli.jobs;
  return cfg;
}

json train_config_json(const TrainConfig& cfg) {
  return json{{"n_segments", cfg.n_segments},
              {"iterations", cfg.iterations},
              {"pairs_per_step", cfg.pairs_per_step},
              {"optimizer", to_string(cfg.optimizer)},
              {"learning_rate", cfg.hyper.learning_rate},
              {"beta1", cfg.hyper.beta1},
              {"beta2", cfg.hyper.beta2},
              {"rho", cfg.hyper.rho},
              {"epsilon", cfg.hyper.epsilon},
              {"loss", to_string(cfg.loss.variant)},
              {"lambda1", cfg.loss.lambda1},
              {"lambda2", cfg.loss.lambda2},
              {"lambda3", cfg.loss.lambda3},
              {"dropout", cfg.dropout_rate},
              {"checkpoint_every", cfg.checkpoint_every},
              {"hidden_dims", cfg.hidden_dims},
              {"jobs", cfg.jobs}};
}

int run_ingest(const std::string& manifest_path) {
  emit_run_manifest(json{{"command", "ingest"}, {"manifest", manifest_path}}, std::nullopt);
  const Manifest manifest = load_manifest(manifest_path);

  std::size_t counts[2][2] = {};  // [split][label]
  std::size_t total_frames = 0, total_intervals = 0;
  for (const auto& record : manifest.records) {
    ++counts[record.split == Split::test][record.label == Label::anomalous];
    total_frames += record.n_frames;
    total_intervals += record.intervals.size();
  }
  std::cout << "records: " << manifest.records.size() << "\n"
            << "dim: " << manifest.dim << "\n"
            << "train: " << counts[0][0] + counts[0][1] << " (" << counts[0][0] << " normal, " << counts[0][1]
            << " anomalous)\n"
            << "test: " << counts[1][0] + counts[1][1] << " (" << counts[1][0] << " normal, " << counts[1][1]
            << " anomalous)\n"
            << "frames: " << total_frames << "\n"
            << "annotated intervals: " << total_intervals << "\n"
            << "ok\n";
  return 0;
}

int run_train(const TrainCli& cli) {
  TrainConfig cfg = resolve_train_config(cli);
  json run{{"command", "train"},
           {"manifest", cli.manifest},
           {"out", cli.out},
           {"seed", cfg.seed},
           {"resume_from", cli.resume_from},
           {"config", train_config_json(cfg)}};
  emit_run_manifest(run, fs::path(cli.out));

  const Manifest manifest = load_manifest(cli.manifest);
  const TrainResult result = cli.resume_from.empty() ? train(manifest, cfg)
                                                     : resume(cli.resume_from, manifest, cfg);
  const auto& records = result.log.records;
  std::cout << "trained " << records.size() << " iterations";
  if (!records.empty()) std::cout << ", final loss " << records.back().total;
  std::cout << "\ncheckpoint: " << (cfg.out_dir / "final.ckpt").string() << "\n";
  return 0;
}

int run_eval(const std::string& manifest_path, const std::string& checkpoint_path, const std::string& out,
             std::size_t segments, double threshold, std::size_t jobs) {
  emit_run_manifest(json{{"command", "eval"},
                         {"manifest", manifest_path},
                         {"checkpoint", checkpoint_path},
                         {"out", out},
                         {"config", {{"n_segments", segments}, {"threshold", threshold}, {"jobs", jobs}}}},
                    fs::path(out));

  const Manifest manifest = load_manifest(manifest_path);
  const ModelParams params = load_checkpoint(checkpoint_path);
  const EvalReport report = evaluate(params, manifest, {segments, jobs});

  double far = std::numeric_limits<double>::quiet_NaN();
  try {
    far = false_alarm_rate(params, manifest, threshold, segments);
  } catch (const ValidationError&) {
    // no normal test videos; far stays NaN and serializes as null
  }
  export_series(report, fs::path(out) / "series");
  write_report_json(report, far, fs::path(out) / "report.json");
  std::cout << "auc: " << report.auc << "\n";
  if (std::isfinite(far)) std::cout << "far_percent: " << far << "\n";
  std::cout << "videos: " << report.n_videos << ", frames: " << report.n_frames << "\n";
  return 0;
}

int run_predict(const std::string& manifest_path, const std::string& checkpoint_path, const std::string& video_id,
                const std::string& out, std::size_t segments) {
  emit_run_manifest(json{{"command", "predict"},
                         {"manifest", manifest_path},
                         {"checkpoint", checkpoint_path},
                         {"video_id", video_id},
                         {"out", out},
                         {"config", {{"n_segments", segments}}}},
                    fs::path(out));

  const Manifest manifest = load_manifest(manifest_path);
  const ModelParams params = load_checkpoint(checkpoint_path);
  const VideoRecord* record = nullptr;
  for (const auto& r : manifest.records)
    if (r.video_id == video_id) record = &r;
  if (!record) throw ValidationError("video_id '" + video_id + "' not in manifest");

  const Vector frame_scores =
      expand_scores_to_frames(predict_video(params, *record, manifest, segments), record->n_frames);
  const auto labels = frame_labels(*record);
  std::ofstream csv(fs::path(out) / (video_id + ".csv"));
  if (!csv) throw RuntimeFailure("cannot write prediction for " + video_id);
  csv << "frame,score,label\n";
  for (std::size_t f = 0; f < frame_scores.size(); ++f) {
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%.17g", frame_scores[f]);
    csv << f << ',' << buffer << ',' << static_cast<int>(labels[f]) << '\n';
  }
  std::cout << "wrote " << (fs::path(out) / (video_id + ".csv")).string() << "\n";
  return 0;
}

int run_gradcheck(std::size_t dim, std::uint64_t seed, std::size_t configs, double h) {
  emit_run_manifest(json{{"command", "gradcheck"},
                         {"config", {{"dim", dim}, {"seed", seed}, {"configs", configs}, {"h", h}}}},
                    std::nullopt);
  GradCheckConfig cfg;
  cfg.dim = dim;
  cfg.seed = seed;
  cfg.n_configs = configs;
  cfg.h = h;
  const auto report = gradient_check(cfg);
  std::cout << "configs: " << report.n_configs << "\nmax relative error: " << report.max_rel_err << "\n";
  return report.max_rel_err < 1e-4 ? 0 : 1;
}

int run_synth(const SynthSpec& spec, const std::string& out) {
  emit_run_manifest(json{{"command", "synth"},
                         {"out", out},
                         {"seed", spec.seed},
                         {"config",
                          {{"dim", spec.dim},
                           {"n_videos_normal", spec.n_videos_normal},
                           {"n_videos_anom", spec.n_videos_anom},
                           {"n_segments", spec.n_segments},
                           {"anomalous_segments_per_video", spec.anomalous_segments_per_video},
                           {"separation", spec.separation},
                           {"noise_sigma", spec.noise_sigma},
                           {"normal_contamination", spec.normal_contamination}}}},
                    fs::path(out));
  const auto manifest_path = generate(spec, out);
  std::cout << "wrote " << manifest_path.string() << "\n";
  return 0;
}

int run_concat(const std::vector<std::string>& manifest_paths, const std::string& out) {
  emit_run_manifest(json{{"command", "concat"}, {"manifests", manifest_paths}, {"out", out}},
                    fs::path(out));
  if (manifest_paths.size() < 2) throw ValidationError("concat: need at least two manifests");

  std::vector<Manifest> manifests;
  for (const auto& path : manifest_paths) manifests.push_back(load_manifest(path));

  const Manifest& first = manifests.front();
  for (const auto& other : manifests) {
    if (other.records.size() != first.records.size())
      throw ValidationError("concat: manifests have different record counts");
  }

  fs::create_directories(fs::path(out) / "features");
  Manifest merged;
  merged.base_dir = out;
  for (std::size_t r = 0; r < first.records.size(); ++r) {
    const VideoRecord& base = first.records[r];
    VideoRecord record = base;
    record.feature_paths.clear();
    for (const auto& other : manifests) {
      const VideoRecord& o = other.records[r];
      if (o.video_id != base.video_id || o.split != base.split || o.label != base.label ||
          o.n_frames != base.n_frames || o.intervals != base.intervals ||
          o.feature_paths.size() != base.feature_paths.size())
        throw ValidationError("concat: record mismatch for '" + base.video_id + "'");
    }
    for (std::size_t variant = 0; variant < base.feature_paths.size(); ++variant) {
      std::vector<ClipFeatureMatrix> parts;
      for (const auto& other : manifests)
        parts.push_back(
            load_clip_features(resolve_feature_path(other, other.records[r].feature_paths[variant]), other.dim));
      const auto joined = concat_features(parts);
      std::string name = "features/" + base.video_id;
      if (variant) name += "__v" + std::to_string(variant);
      name += ".csv";
      write_clip_features(joined, fs::path(out) / name);
      record.feature_paths.push_back(name);
      merged.dim = joined.dim;
    }
    merged.records.push_back(std::move(record));
  }
  write_manifest(merged, fs::path(out) / "manifest.csv");
  std::cout << "wrote " << (fs::path(out) / "manifest.csv").string() << " (dim " << merged.dim << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MIL video anomaly detection on precomputed clip features"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  // ingest
  std::string ingest_manifest;
  auto* ingest = app.add_subcommand("ingest", "Validate a corpus manifest and print statistics");
  ingest->add_option("--manifest", ingest_manifest, "Manifest CSV")->required();

  // train
  TrainCli train_cli;
  auto* train_cmd = app.add_subcommand("train", "Train the segment scorer with the MIL ranking objective");
  train_cmd->add_option("--manifest", train_cli.manifest, "Manifest CSV")->required();
  train_cmd->add_option("--out", train_cli.out, "Output directory for checkpoints and logs")->required();
  train_cmd->add_option("--resume", train_cli.resume_from, "Continue from a training checkpoint");
  train_cmd->add_option("--optimizer", train_cli.optimizer, "Optimizer")
      ->check(CLI::IsMember({"adam", "adadelta"}))
      ->capture_default_str();
  train_cmd->add_option("--lr", train_cli.lr, "Learning rate (default: 0.0005 adam, 0.01 adadelta)");
  train_cmd->add_option("--beta1", train_cli.beta1, "Adam first-moment decay")->capture_default_str();
  train_cmd->add_option("--beta2", train_cli.beta2, "Adam second-moment decay")->capture_default_str();
  train_cmd->add_option("--rho", train_cli.rho, "Adadelta accumulation decay")->capture_default_str();
  train_cmd->add_option("--epsilon", train_cli.epsilon, "Optimizer epsilon (default: 1e-8 adam, 1e-6 adadelta)");
  train_cmd->add_option("--iterations", train_cli.iterations, "Training iterations")->capture_default_str();
  train_cmd->add_option("--pairs-per-step", train_cli.pairs_per_step, "Bag pairs per optimizer step")
      ->capture_default_str();
  train_cmd->add_option("--loss", train_cli.loss, "Ranking loss variant")
      ->check(CLI::IsMember({"original", "mean_normal"}))
      ->capture_default_str();
  train_cmd->add_option("--lambda1", train_cli.lambda1, "Temporal smoothness weight")->capture_default_str();
  train_cmd->add_option("--lambda2", train_cli.lambda2, "Sparsity weight")->capture_default_str();
  train_cmd->add_option("--lambda3", train_cli.lambda3, "Weight-norm weight")->capture_default_str();
  train_cmd->add_option("--segments", train_cli.segments, "Segments per video bag")->capture_default_str();
  train_cmd->add_option("--dropout", train_cli.dropout, "Hidden-layer dropout rate during training")
      ->capture_default_str();
  train_cmd->add_option("--seed", train_cli.seed, "Seed for init, sampling, and dropout")->capture_default_str();
  train_cmd->add_option("--checkpoint-every", train_cli.checkpoint_every,
                        "Write a checkpoint every N iterations (0: final only)")
      ->capture_default_str();
  train_cmd->add_option("--hidden", train_cli.hidden, "Hidden layer sizes")->capture_default_str();
  train_cmd->add_option("--jobs", train_cli.jobs, "Threads scoring the pairs of a step (1 is the reference)")
      ->capture_default_str();

  // eval
  std::string eval_manifest, eval_checkpoint, eval_out;
  std::size_t eval_segments = 32, eval_jobs = 1;
  double eval_threshold = 0.5;
  auto* eval_cmd = app.add_subcommand("eval", "Frame-level ROC/AUC and false-alarm evaluation");
  eval_cmd->add_option("--manifest", eval_manifest, "Manifest CSV")->required();
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "Model checkpoint")->required();
  eval_cmd->add_option("--out", eval_out, "Output directory")->required();
  eval_cmd->add_option("--segments", eval_segments, "Segments per video bag")->capture_default_str();
  eval_cmd->add_option("--threshold", eval_threshold, "False-alarm score threshold")->capture_default_str();
  eval_cmd->add_option("--jobs", eval_jobs, "Parallel scoring threads (1 is the reference)")
      ->capture_default_str();

  // predict
  std::string pred_manifest, pred_checkpoint, pred_video, pred_out;
  std::size_t pred_segments = 32;
  auto* pred_cmd = app.add_subcommand("predict", "Per-frame score series for one video");
  pred_cmd->add_option("--manifest", pred_manifest, "Manifest CSV")->required();
  pred_cmd->add_option("--checkpoint", pred_checkpoint, "Model checkpoint")->required();
  pred_cmd->add_option("--video-id", pred_video, "Video to score")->required();
  pred_cmd->add_option("--out", pred_out, "Output directory")->required();
  pred_cmd->add_option("--segments", pred_segments, "Segments per video bag")->capture_default_str();

  // gradcheck
  std::size_t gc_dim = 5, gc_configs = 20;
  std::uint64_t gc_seed = 3;
  double gc_h = 1e-4;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Analytic vs finite-difference gradients of the objective");
  gc_cmd->add_option("--dim", gc_dim, "Input feature dimension")->capture_default_str();
  gc_cmd->add_option("--seed", gc_seed, "Seed")->capture_default_str();
  gc_cmd->add_option("--configs", gc_configs, "Smooth configurations to check")->capture_default_str();
  gc_cmd->add_option("--step", gc_h, "Finite-difference step")->capture_default_str();

  // synth
  SynthSpec synth_spec;
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic corpus with known ground truth");
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();
  synth_cmd->add_option("--dim", synth_spec.dim, "Feature dimension")->capture_default_str();
  synth_cmd->add_option("--normal", synth_spec.n_videos_normal, "Normal video count")->capture_default_str();
  synth_cmd->add_option("--anomalous", synth_spec.n_videos_anom, "Anomalous video count")->capture_default_str();
  synth_cmd->add_option("--segments", synth_spec.n_segments, "Segments per video")->capture_default_str();
  synth_cmd->add_option("--runs-per-video", synth_spec.anomalous_segments_per_video,
                        "Anomalous runs per anomalous video (1-10)")
      ->capture_default_str();
  synth_cmd->add_option("--separation", synth_spec.separation, "Anomaly mean shift in noise-sigma units")
      ->capture_default_str();
  synth_cmd->add_option("--noise-sigma", synth_spec.noise_sigma, "Feature noise scale")->capture_default_str();
  synth_cmd->add_option("--contamination", synth_spec.normal_contamination,
                        "Fraction of unlabeled noisy segments in normal videos")
      ->capture_default_str();
  synth_cmd->add_option("--seed", synth_spec.seed, "Seed")->capture_default_str();

  // concat
  std::vector<std::string> concat_manifests;
  std::string concat_out;
  auto* concat_cmd = app.add_subcommand("concat", "Concatenate aligned corpora feature-wise");
  concat_cmd->add_option("--manifests", concat_manifests, "Manifest CSVs of the aligned corpora")
      ->required()
      ->expected(2, -1);
  concat_cmd->add_option("--out", concat_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
    if (*ingest) return run_ingest(ingest_manifest);
    if (*train_cmd) return run_train(train_cli);
    if (*eval_cmd) return run_eval(eval_manifest, eval_checkpoint, eval_out, eval_segments, eval_threshold,
                                   eval_jobs);
    if (*pred_cmd) return run_predict(pred_manifest, pred_checkpoint, pred_video, pred_out, pred_segments);
    if (*gc_cmd) return run_gradcheck(gc_dim, gc_seed, gc_configs, gc_h);
    if (*synth_cmd) return run_synth(synth_spec, synth_out);
    if (*concat_cmd) return run_concat(concat_manifests, concat_out);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
