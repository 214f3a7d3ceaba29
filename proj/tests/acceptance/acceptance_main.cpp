// Acceptance suite: one pass/fail line per criterion, exit code equals the
// number of failures. Training-based criteria use only synthetic corpora;
// the published corpus-scale numbers need the real datasets and are carried
// as reference targets, not assertions.

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "milthrow/checkpoint.hpp"
#include "milthrow/corpus.hpp"
#include "milthrow/evaluator.hpp"
#include "milthrow/objective.hpp"
#include "milthrow/optim.hpp"
#include "milthrow/reference_targets.hpp"
#include "milthrow/rng.hpp"
#include "milthrow/scorer.hpp"
#include "milthrow/synth.hpp"
#include "milthrow/trainer.hpp"

using namespace milthrow;
namespace fs = std::filesystem;

namespace {

fs::path g_scratch;

struct Check {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) {
      pass = false;
      detail = what;
    }
  }
};

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

Manifest separable_corpus(const std::string& tag, double separation, std::uint64_t seed,
                          double contamination = 0.0) {
  SynthSpec spec;
  spec.dim = 64;
  spec.n_videos_normal = 40;
  spec.n_videos_anom = 40;
  spec.n_segments = 32;
  spec.anomalous_segments_per_video = 3;
  spec.separation = separation;
  spec.noise_sigma = 1.0;
  spec.normal_contamination = contamination;
  spec.seed = seed;
  return load_manifest(generate(spec, g_scratch / tag));
}

TrainConfig adam_config(std::uint64_t iterations, std::uint64_t seed, LossVariant variant) {
  TrainConfig cfg;
  cfg.iterations = iterations;
  cfg.seed = seed;
  cfg.optimizer = OptimizerKind::adam;
  cfg.hyper = default_hyper(OptimizerKind::adam);  // lr 0.0005
  cfg.loss.variant = variant;
  return cfg;
}

// --- criterion 1 -----------------------------------------------------------

Check criterion_reference_targets() {
  Check c;
  std::printf("    corpus-scale reference targets (need the real feature files):\n");
  std::printf("      max AUC, throwing corpus, MFNet features:        %.2f\n", reference::kAucThrowingMfnet);
  std::printf("      max AUC, combined corpus, concat + mean-normal:  %.2f\n",
              reference::kAucCombinedConcatMeanNormal);
  std::printf("      FAR%%, combined corpus, original vs mean-normal:  %.4f vs %.4f\n",
              reference::kFarCombinedOriginal, reference::kFarCombinedMeanNormal);
  c.require(reference::kFarCombinedMeanNormal <= reference::kFarCombinedOriginal,
            "reference FAR direction inconsistent");
  return c;
}

// --- criterion 2 -----------------------------------------------------------

Check criterion_loss_examples() {
  Check c;
  const double tol = 1e-12;

  auto r = rank_loss(Vector{1.0}, Vector{0.0}, LossVariant::original);
  c.require(r.value == 0.0 && r.d_anom[0] == 0.0 && r.d_norm[0] == 0.0, "hinge not inactive at separation");
  r = rank_loss(Vector{0.5, 0.5}, Vector{0.5, 0.5}, LossVariant::original);
  c.require(near(r.value, 1.0, tol), "symmetric case != 1");
  c.require(r.d_anom[0] == -1.0 && r.d_anom[1] == 0.0, "anomalous argmax tie must break low");
  r = rank_loss(Vector{0.1, 0.9}, Vector{0.2, 0.4}, LossVariant::mean_normal);
  c.require(near(r.value, 0.4, tol), "mean-normal value != 0.4");
  c.require(r.d_anom[0] == 0.0 && r.d_anom[1] == -1.0, "mean-normal d_anom wrong");
  c.require(near(r.d_norm[0], 0.5, tol) && near(r.d_norm[1], 0.5, tol), "mean-normal d_norm wrong");

  auto s = smoothness_term(Vector{0.1, 0.3, 0.2});
  c.require(near(s.value, 0.05, tol), "smoothness hand value");
  c.require(smoothness_term(Vector{0.4, 0.4, 0.4}).value == 0.0, "constant smoothness");
  s = smoothness_term(Vector{0.0, 1.0});
  c.require(s.value == 1.0 && s.d[0] == -2.0 && s.d[1] == 2.0, "smoothness step gradient");

  c.require(near(sparsity_term(Vector{0.25, 0.25}).value, 0.5, tol), "sparsity 0.5");
  c.require(sparsity_term(Vector{0.0, 0.0}).value == 0.0, "sparsity zero");
  c.require(near(sparsity_term(Vector(32, 0.5)).value, 16.0, tol), "sparsity 16");

  ModelParams p;
  p.layer_dims = {1, 1, 1};
  p.weights = {Matrix(1, 1), Matrix(1, 1)};
  p.biases = {{0.0}, {0.0}};
  c.require(weight_norm_term(p).value == 0.0, "zero weight norm");
  c.require(weight_norm_term(p).d_params.weights[0](0, 0) == 0.0, "zero weight norm gradient");
  p.weights[0](0, 0) = 3.0;
  p.weights[1](0, 0) = 4.0;
  c.require(near(weight_norm_term(p).value, 5.0, tol), "3-4-5 weight norm");
  return c;
}

// --- criterion 3 -----------------------------------------------------------

Check criterion_gradient_oracle() {
  Check c;
  GradCheckConfig cfg;
  cfg.dim = 5;
  cfg.hidden_dims = {4, 3};
  cfg.n_configs = 20;
  cfg.seed = 3;
  cfg.h = 1e-4;
  const auto report = gradient_check(cfg);
  char detail[128];
  std::snprintf(detail, sizeof detail, "max relative error %.3e over %zu configs", report.max_rel_err,
                report.n_configs);
  std::printf("    %s\n", detail);
  c.require(report.n_configs >= 20, "fewer than 20 configurations");
  c.require(report.max_rel_err < 1e-4, detail);
  return c;
}

// --- criterion 4 -----------------------------------------------------------

Check criterion_auc_oracle() {
  Check c;
  Rng rng(29);
  double worst = 0.0;
  std::size_t instances = 0;
  while (instances < 1000) {
    const std::size_t n = 2 + rng.next_below(199);
    Vector scores(n);
    std::vector<std::uint8_t> labels(n);
    const std::size_t levels = 1 + rng.next_below(16);
    bool pos = false, neg = false;
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = static_cast<double>(rng.next_below(levels)) / static_cast<double>(levels);
      labels[i] = rng.next_unit() < 0.35 ? 1 : 0;
      (labels[i] ? pos : neg) = true;
    }
    if (!pos || !neg) continue;
    worst = std::max(worst, std::abs(roc_auc(scores, labels) - oracle_auc(scores, labels)));
    ++instances;
  }
  std::printf("    max |roc_auc - oracle| = %.3e over 1000 instances\n", worst);
  c.require(worst < 1e-9, "oracle disagreement above 1e-9");
  return c;
}

// --- criterion 5 -----------------------------------------------------------

Check criterion_end_to_end_separability() {
  Check c;
  {
    const Manifest manifest = separable_corpus("c5_separable", 3.0, 7);
    const auto result = train(manifest, adam_config(2000, 7, LossVariant::original));
    const double auc = evaluate(result.params, manifest).auc;
    std::printf("    separation 3, seed 7, 2000 iterations: AUC %.4f\n", auc);
    c.require(auc >= 0.95, "separable AUC below 0.95");
  }
  {
    const Manifest manifest = separable_corpus("c5_nosignal", 0.0, 7);
    const auto result = train(manifest, adam_config(2000, 7, LossVariant::original));
    const double auc = evaluate(result.params, manifest).auc;
    std::printf("    separation 0, seed 7, 2000 iterations: AUC %.4f\n", auc);
    c.require(auc >= 0.45 && auc <= 0.55, "no-signal AUC outside [0.45, 0.55]");
  }
  return c;
}

// --- criterion 6 -----------------------------------------------------------

Check criterion_mean_normal_far_direction() {
  Check c;
  // The loss contrast lives early in training, where the mean-normal variant
  // has already pushed every normal segment down but the max-only variant has
  // not; 150 iterations sits inside that window.
  double far_original = 0.0, far_mean_normal = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Manifest manifest =
        separable_corpus("c6_seed" + std::to_string(seed), 3.0, seed, 0.2);
    const auto original = train(manifest, adam_config(150, seed, LossVariant::original));
    const auto mean_normal = train(manifest, adam_config(150, seed, LossVariant::mean_normal));
    far_original += false_alarm_rate(original.params, manifest, 0.5);
    far_mean_normal += false_alarm_rate(mean_normal.params, manifest, 0.5);
  }
  far_original /= 5.0;
  far_mean_normal /= 5.0;
  std::printf("    mean FAR over 5 seeds: original %.4f%%, mean-normal %.4f%%\n", far_original, far_mean_normal);
  c.require(far_mean_normal <= far_original, "mean-normal FAR exceeds original FAR");
  return c;
}

// --- criterion 7 -----------------------------------------------------------

std::uint64_t loss_crossing_iteration(const TrainLog& log, double level, std::size_t window) {
  double running = 0.0;
  for (std::size_t i = 0; i < log.records.size(); ++i) {
    running += log.records[i].total;
    if (i >= window) running -= log.records[i - window].total;
    if (i + 1 >= window && running / static_cast<double>(window) < level) return log.records[i].iteration;
  }
  return log.records.size() + 1;  // never crossed
}

Check criterion_optimizer_direction() {
  Check c;
  const std::uint64_t iterations = 1500;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const Manifest manifest = separable_corpus("c7_seed" + std::to_string(seed), 3.0, seed);

    const auto adam_run = train(manifest, adam_config(iterations, seed, LossVariant::original));

    TrainConfig ada = adam_config(iterations, seed, LossVariant::original);
    ada.optimizer = OptimizerKind::adadelta;
    ada.hyper = default_hyper(OptimizerKind::adadelta);  // lr 0.01
    const auto ada_run = train(manifest, ada);

    const auto adam_cross = loss_crossing_iteration(adam_run.log, 0.5, 200);
    const auto ada_cross = loss_crossing_iteration(ada_run.log, 0.5, 200);
    std::printf("    seed %llu: 200-step mean loss < 0.5 at iteration adam=%llu adadelta=%s\n",
                static_cast<unsigned long long>(seed), static_cast<unsigned long long>(adam_cross),
                ada_cross > iterations ? "never" : std::to_string(ada_cross).c_str());
    c.require(adam_cross < ada_cross, "adam did not learn faster than adadelta");
  }
  return c;
}

// --- criterion 8 -----------------------------------------------------------

Check criterion_determinism() {
  Check c;
  SynthSpec spec;
  spec.dim = 8;
  spec.n_videos_normal = 6;
  spec.n_videos_anom = 6;
  spec.n_segments = 8;
  spec.anomalous_segments_per_video = 2;
  spec.separation = 2.0;
  spec.seed = 13;
  const Manifest manifest = load_manifest(generate(spec, g_scratch / "c8_corpus"));

  TrainConfig cfg;
  cfg.iterations = 200;
  cfg.n_segments = 8;
  cfg.hidden_dims = {16, 8};
  cfg.seed = 13;
  cfg.out_dir = g_scratch / "c8_run1";
  train(manifest, cfg);
  cfg.out_dir = g_scratch / "c8_run2";
  train(manifest, cfg);
  c.require(!read_bytes(g_scratch / "c8_run1/final.ckpt").empty(), "checkpoint missing");
  c.require(read_bytes(g_scratch / "c8_run1/final.ckpt") == read_bytes(g_scratch / "c8_run2/final.ckpt"),
            "repeated training produced different checkpoints");

  const ModelParams params = load_checkpoint(g_scratch / "c8_run1/final.ckpt");
  for (int run = 1; run <= 2; ++run) {
    const auto report = evaluate(params, manifest, {8, 1});
    const fs::path out = g_scratch / ("c8_eval" + std::to_string(run));
    fs::create_directories(out);
    export_series(report, out / "series");
    write_report_json(report, false_alarm_rate(params, manifest, 0.5, 8), out / "report.json");
  }
  c.require(read_bytes(g_scratch / "c8_eval1/report.json") == read_bytes(g_scratch / "c8_eval2/report.json"),
            "repeated evaluation produced different reports");
  c.require(read_bytes(g_scratch / "c8_eval1/series/roc.csv") ==
                read_bytes(g_scratch / "c8_eval2/series/roc.csv"),
            "repeated evaluation produced different roc exports");
  return c;
}

// --- criterion 9 -----------------------------------------------------------

Check criterion_format_round_trips() {
  Check c;
  SynthSpec spec;
  spec.dim = 8;
  spec.n_videos_normal = 6;
  spec.n_videos_anom = 6;
  spec.n_segments = 8;
  spec.anomalous_segments_per_video = 2;
  spec.seed = 17;
  const Manifest manifest = load_manifest(generate(spec, g_scratch / "c9_corpus"));
  c.require(manifest.records.size() == 12, "synth corpus failed to reload");

  const ModelParams params = init_params(8, 31, {6, 3});
  save_checkpoint(params, g_scratch / "c9.ckpt");
  const ModelParams reloaded = load_checkpoint(g_scratch / "c9.ckpt");
  bool exact = reloaded.layer_dims == params.layer_dims;
  for (std::size_t l = 0; exact && l < params.n_layers(); ++l)
    exact = reloaded.weights[l].data == params.weights[l].data && reloaded.biases[l] == params.biases[l];
  c.require(exact, "checkpoint round trip not bitwise exact");

  TrainConfig cfg;
  cfg.iterations = 60;
  cfg.n_segments = 8;
  cfg.hidden_dims = {16, 8};
  cfg.seed = 5;
  cfg.out_dir = g_scratch / "c9_straight";
  train(manifest, cfg);

  cfg.iterations = 30;
  cfg.out_dir = g_scratch / "c9_half";
  train(manifest, cfg);
  cfg.out_dir = g_scratch / "c9_resumed";
  resume(g_scratch / "c9_half/final.ckpt", manifest, cfg);
  c.require(read_bytes(g_scratch / "c9_straight/final.ckpt") == read_bytes(g_scratch / "c9_resumed/final.ckpt"),
            "resume at k does not equal the uninterrupted run");
  return c;
}

struct Criterion {
  int id;
  const char* name;
  std::function<Check()> run;
  double time_limit_s;  // 0: no limit stated
};

}  // namespace

int main() {
  g_scratch = fs::temp_directory_path() / ("milthrow_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(g_scratch);
  fs::create_directories(g_scratch);

  const std::vector<Criterion> criteria = {
      {1, "corpus-scale results are reference targets, not assertions", criterion_reference_targets, 0.0},
      {2, "loss terms reproduce the hand-computed examples exactly", criterion_loss_examples, 1.0},
      {3, "analytic gradients match the finite-difference oracle", criterion_gradient_oracle, 30.0},
      {4, "roc_auc equals the exhaustive pairwise oracle", criterion_auc_oracle, 10.0},
      {5, "end-to-end separability on synthetic corpora", criterion_end_to_end_separability, 120.0},
      {6, "mean-normal loss does not raise the false alarm rate", criterion_mean_normal_far_direction, 0.0},
      {7, "adam reaches low training loss before adadelta", criterion_optimizer_direction, 0.0},
      {8, "identical seeds give bitwise-identical artifacts", criterion_determinism, 0.0},
      {9, "file formats round-trip and resume is exact", criterion_format_round_trips, 0.0},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Check result;
    try {
      result = criterion.run();
    } catch (const std::exception& e) {
      result.pass = false;
      result.detail = std::string("exception: ") + e.what();
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (criterion.time_limit_s > 0.0 && seconds >= criterion.time_limit_s) {
      result.pass = false;
      result.detail = "time limit exceeded";
    }
    std::printf("[%s] criterion %d: %s (%.2fs)%s%s\n", result.pass ? "PASS" : "FAIL", criterion.id,
                criterion.name, seconds, result.detail.empty() ? "" : " -- ", result.detail.c_str());
    std::fflush(stdout);
    if (!result.pass) ++failures;
  }

  std::error_code ec;
  fs::remove_all(g_scratch, ec);
  return failures;
}
