#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "milthrow/checkpoint.hpp"
#include "milthrow/corpus.hpp"
#include "milthrow/objective.hpp"
#include "milthrow/optim.hpp"
#include "milthrow/scorer.hpp"

namespace milthrow {

struct TrainConfig {
  std::size_t n_segments = 32;
  std::uint64_t iterations = 100000;
  std::size_t pairs_per_step = 1;
  OptimizerKind optimizer = OptimizerKind::adam;
  OptimizerHyper hyper = default_hyper(OptimizerKind::adam);
  LossConfig loss;
  std::uint64_t seed = 0;
  double dropout_rate = 0.6;
  std::uint64_t checkpoint_every = 0;  // 0 writes only the final checkpoint
  std::vector<std::size_t> hidden_dims = kDefaultHiddenDims;
  std::filesystem::path out_dir;  // empty keeps checkpoints off disk
  // Threads scoring the pairs of one step. Any value reproduces the jobs=1
  // stream bit for bit; only pairs_per_step > 1 has anything to parallelize.
  std::size_t jobs = 1;
};

struct TrainRecord {
  std::uint64_t iteration = 0;
  double total = 0.0;
  double rank = 0.0;
  double smooth = 0.0;
  double sparse = 0.0;
  double weightnorm = 0.0;
  double elapsed_ms = 0.0;
};

struct TrainLog {
  std::vector<TrainRecord> records;
  std::vector<std::string> warnings;
};

// CSV columns: iteration,total,rank,smooth,sparse,weightnorm,elapsed_ms
void write_train_log_csv(const TrainLog& log, const std::filesystem::path& path);

// Uniform with replacement within each label class of the train split.
std::pair<const VideoRecord*, const VideoRecord*> sample_pair(const Manifest& manifest, Rng& rng);

struct TrainResult {
  ModelParams params;
  TrainLog log;
};

// One optimizer step per iteration on the mean objective over pairs_per_step
// sampled (anomalous, normal) pairs, dropout active. Deterministic for a
// fixed seed, end to end.
TrainResult train(const Manifest& manifest, const TrainConfig& cfg);

// Continues a training checkpoint for cfg.iterations further steps. With the
// stored rng/optimizer state this matches an uninterrupted run of the same
// total length. A checkpoint trained with a different loss variant logs a
// warning and proceeds with cfg's variant.
TrainResult resume(const std::filesystem::path& checkpoint_path, const Manifest& manifest, const TrainConfig& cfg);

}  // namespace milthrow
