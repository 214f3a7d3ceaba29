#include "milthrow/trainer.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "milthrow/errors.hpp"

namespace milthrow {

namespace {

struct TrainContext {
  std::vector<FeatureBag> bags;
  std::vector<std::size_t> anomalous;  // indices into bags
  std::vector<std::size_t> normal;
};

// Bags are pooled once up front; a video yields the same features every time
// it is sampled.
TrainContext load_train_bags(const Manifest& manifest, std::size_t n_segments) {
  TrainContext ctx;
  for (const auto& record : manifest.records) {
    if (record.split != Split::train) continue;
    const auto clips = load_clip_features(resolve_feature_path(manifest, record.feature_paths.front()),
                                          manifest.dim);
    auto bag = pool_segments(clips, n_segments, record.label);
    bag.video_id = record.video_id;
    if (record.label == Label::anomalous)
      ctx.anomalous.push_back(ctx.bags.size());
    else
      ctx.normal.push_back(ctx.bags.size());
    ctx.bags.push_back(std::move(bag));
  }
  if (ctx.anomalous.empty() || ctx.normal.empty())
    throw ValidationError("train split must contain at least one anomalous and one normal video");
  return ctx;
}

void validate_config(const TrainConfig& cfg) {
  if (cfg.iterations == 0) throw ValidationError("iterations must be >= 1");
  if (cfg.pairs_per_step == 0) throw ValidationError("pairs_per_step must be >= 1");
  if (cfg.n_segments == 0) throw ValidationError("n_segments must be >= 1");
  if (cfg.dropout_rate < 0.0 || cfg.dropout_rate >= 1.0) throw ValidationError("dropout_rate must be in [0,1)");
}

std::filesystem::path checkpoint_name(const std::filesystem::path& out_dir, std::uint64_t iteration) {
  char name[64];
  std::snprintf(name, sizeof name, "ckpt_%08llu.ckpt", static_cast<unsigned long long>(iteration));
  return out_dir / name;
}

struct PairResult {
  PairLossResult loss;
  ParamTensors grads;
};

// Scores one sampled pair from a snapshot of the training rng, so pairs can
// run on worker threads and still consume exactly the serial dropout stream.
PairResult process_pair(const ModelParams& params, const TrainConfig& cfg, const FeatureBag& anom_bag,
                        const FeatureBag& norm_bag, const Rng::State& rng_state) {
  Rng rng(0);
  rng.set_state(rng_state);

  Vector scores_anom(cfg.n_segments), scores_norm(cfg.n_segments);
  std::vector<ForwardTrace> traces(2 * cfg.n_segments);
  for (std::size_t i = 0; i < cfg.n_segments; ++i) {
    traces[i] = forward(params, anom_bag.segments[i], cfg.dropout_rate, &rng);
    scores_anom[i] = traces[i].score();
  }
  for (std::size_t i = 0; i < cfg.n_segments; ++i) {
    traces[cfg.n_segments + i] = forward(params, norm_bag.segments[i], cfg.dropout_rate, &rng);
    scores_norm[i] = traces[cfg.n_segments + i].score();
  }

  PairResult result{pair_objective(scores_anom, scores_norm, params, cfg.loss), ParamTensors{}};
  Vector dscores(2 * cfg.n_segments);
  for (std::size_t i = 0; i < cfg.n_segments; ++i) {
    dscores[i] = result.loss.d_scores_anom[i];
    dscores[cfg.n_segments + i] = result.loss.d_scores_norm[i];
  }
  result.grads = backward(params, traces, dscores);
  return result;
}

TrainResult run_loop(const Manifest& manifest, const TrainConfig& cfg, ModelParams params, OptimizerState opt,
                     Rng rng, std::uint64_t start_iteration, TrainLog log) {
  const TrainContext ctx = load_train_bags(manifest, cfg.n_segments);

  const bool write_files = !cfg.out_dir.empty();
  if (write_files) std::filesystem::create_directories(cfg.out_dir);

  // Dropout consumes one draw per hidden unit per forward; walking the main
  // stream past each pair keeps any jobs count on the serial sequence.
  std::size_t hidden_units = 0;
  for (std::size_t l = 1; l + 1 < params.layer_dims.size(); ++l) hidden_units += params.layer_dims[l];
  const std::size_t draws_per_pair = cfg.dropout_rate > 0.0 ? 2 * cfg.n_segments * hidden_units : 0;

  const auto t0 = std::chrono::steady_clock::now();
  struct PairWork {
    const FeatureBag* anom;
    const FeatureBag* norm;
    Rng::State rng_state;
  };
  std::vector<PairWork> work(cfg.pairs_per_step);
  std::vector<PairResult> results(cfg.pairs_per_step);

  for (std::uint64_t step = 1; step <= cfg.iterations; ++step) {
    const std::uint64_t iteration = start_iteration + step;

    for (auto& pair : work) {
      pair.anom = &ctx.bags[ctx.anomalous[rng.next_below(ctx.anomalous.size())]];
      pair.norm = &ctx.bags[ctx.normal[rng.next_below(ctx.normal.size())]];
      pair.rng_state = rng.state();
      for (std::size_t d = 0; d < draws_per_pair; ++d) rng.next_u64();
    }

    const auto run_pair = [&](std::size_t p) {
      results[p] = process_pair(params, cfg, *work[p].anom, *work[p].norm, work[p].rng_state);
    };
    if (cfg.jobs <= 1 || cfg.pairs_per_step == 1) {
      for (std::size_t p = 0; p < cfg.pairs_per_step; ++p) run_pair(p);
    } else {
      std::vector<std::thread> workers;
      std::atomic<std::size_t> next{0};
      std::mutex error_mutex;
      std::exception_ptr first_error;
      for (std::size_t w = 0; w < std::min(cfg.jobs, cfg.pairs_per_step); ++w) {
        workers.emplace_back([&] {
          try {
            for (std::size_t p = next.fetch_add(1); p < cfg.pairs_per_step; p = next.fetch_add(1)) run_pair(p);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
          }
        });
      }
      for (auto& worker : workers) worker.join();
      if (first_error) std::rethrow_exception(first_error);
    }

    // Reduce in fixed pair order before the update.
    ParamTensors grads = ParamTensors::zeros_like(params);
    double total = 0.0, rank = 0.0, smooth = 0.0, sparse = 0.0, weightnorm = 0.0;
    for (std::size_t p = 0; p < cfg.pairs_per_step; ++p) {
      total += results[p].loss.total;
      rank += results[p].loss.rank_term;
      smooth += results[p].loss.smooth_term;
      sparse += results[p].loss.sparse_term;
      weightnorm += results[p].loss.weightnorm_term;
      axpy(1.0, results[p].grads, grads);
    }

    const double inv_pairs = 1.0 / static_cast<double>(cfg.pairs_per_step);
    scale(grads, inv_pairs);
    total *= inv_pairs;
    rank *= inv_pairs;
    smooth *= inv_pairs;
    sparse *= inv_pairs;
    weightnorm *= inv_pairs;

    // Weight-norm gradient is identical across pairs of a step, added once.
    if (cfg.loss.lambda3 > 0.0 && weightnorm > 0.0) {
      const double c = cfg.loss.lambda3 / weightnorm;
      for (std::size_t l = 0; l < params.weights.size(); ++l) {
        const auto& w = params.weights[l].data;
        auto& g = grads.weights[l].data;
        for (std::size_t i = 0; i < w.size(); ++i) g[i] += c * w[i];
      }
    }

    if (!std::isfinite(total))
      throw RuntimeFailure("non-finite loss at iteration " + std::to_string(iteration) +
                           " (rank=" + std::to_string(rank) + ", weightnorm=" + std::to_string(weightnorm) + ")");

    optimizer_step(params, grads, opt);

    const double elapsed_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    log.records.push_back({iteration, total, rank, smooth, sparse, weightnorm, elapsed_ms});

    if (write_files && cfg.checkpoint_every > 0 && iteration % cfg.checkpoint_every == 0 &&
        step != cfg.iterations) {
      save_train_checkpoint(params, {opt, rng.state(), iteration, cfg.loss.variant},
                            checkpoint_name(cfg.out_dir, iteration));
    }
  }

  if (write_files) {
    const std::uint64_t last = start_iteration + cfg.iterations;
    save_train_checkpoint(params, {opt, rng.state(), last, cfg.loss.variant}, cfg.out_dir / "final.ckpt");
    write_train_log_csv(log, cfg.out_dir / "trainlog.csv");
  }
  return {std::move(params), std::move(log)};
}

}  // namespace

void write_train_log_csv(const TrainLog& log, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write train log " + path.string());
  out << "iteration,total,rank,smooth,sparse,weightnorm,elapsed_ms\n";
  char buffer[160];
  for (const auto& r : log.records) {
    std::snprintf(buffer, sizeof buffer, "%llu,%.17g,%.17g,%.17g,%.17g,%.17g,%.3f\n",
                  static_cast<unsigned long long>(r.iteration), r.total, r.rank, r.smooth, r.sparse, r.weightnorm,
                  r.elapsed_ms);
    out << buffer;
  }
  if (!out) throw RuntimeFailure("failed writing train log " + path.string());
}

std::pair<const VideoRecord*, const VideoRecord*> sample_pair(const Manifest& manifest, Rng& rng) {
  std::vector<const VideoRecord*> anomalous, normal;
  for (const auto& record : manifest.records) {
    if (record.split != Split::train) continue;
    (record.label == Label::anomalous ? anomalous : normal).push_back(&record);
  }
  if (anomalous.empty() || normal.empty())
    throw ValidationError("sample_pair: train split must contain both labels");
  return {anomalous[rng.next_below(anomalous.size())], normal[rng.next_below(normal.size())]};
}

TrainResult train(const Manifest& manifest, const TrainConfig& cfg) {
  validate_config(cfg);
  // A single seed drives everything: one subseed for init, then the stream
  // continues into pair sampling and dropout masks.
  Rng rng(cfg.seed);
  ModelParams params = init_params(manifest.dim, rng.next_u64(), cfg.hidden_dims);
  OptimizerState opt = make_state(cfg.optimizer, cfg.hyper, params);
  return run_loop(manifest, cfg, std::move(params), std::move(opt), rng, 0, TrainLog{});
}

TrainResult resume(const std::filesystem::path& checkpoint_path, const Manifest& manifest,
                   const TrainConfig& cfg) {
  validate_config(cfg);
  auto [params, state] = load_train_checkpoint(checkpoint_path);
  if (params.input_dim() != manifest.dim)
    throw ValidationError("resume: checkpoint dim " + std::to_string(params.input_dim()) +
                          " does not match corpus dim " + std::to_string(manifest.dim));

  TrainLog log;
  if (state.loss_variant != cfg.loss.variant) {
    const std::string warning = std::string("resume: checkpoint was trained with the ") +
                                to_string(state.loss_variant) + " loss, continuing with " +
                                to_string(cfg.loss.variant);
    std::cerr << "warning: " << warning << "\n";
    log.warnings.push_back(warning);
  }
  if (state.opt.kind != cfg.optimizer)
    throw ValidationError("resume: checkpoint optimizer is " + std::string(to_string(state.opt.kind)) +
                          ", config requests " + to_string(cfg.optimizer));

  Rng rng(0);
  rng.set_state(state.rng_state);
  return run_loop(manifest, cfg, std::move(params), std::move(state.opt), rng, state.iteration, std::move(log));
}

}  // namespace milthrow
