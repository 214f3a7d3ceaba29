#pragma once

#include <filesystem>
#include <utility>

#include "milthrow/objective.hpp"
#include "milthrow/optim.hpp"
#include "milthrow/rng.hpp"
#include "milthrow/scorer.hpp"

namespace milthrow {

// Binary layout: magic `MILTHROW1`, layer-dim count, layer_dims, then per
// layer the row-major weights and the biases as little-endian IEEE-754
// doubles, then a trailing CRC32 of everything after the magic. Training
// checkpoints append optimizer state, rng state, iteration, and loss variant
// between the biases and the CRC.
inline constexpr char kCheckpointMagic[] = "MILTHROW1";

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

struct TrainState {
  OptimizerState opt;
  Rng::State rng_state{};
  std::uint64_t iteration = 0;
  LossVariant loss_variant = LossVariant::original;
};

void save_train_checkpoint(const ModelParams& params, const TrainState& state,
                           const std::filesystem::path& path);
std::pair<ModelParams, TrainState> load_train_checkpoint(const std::filesystem::path& path);

}  // namespace milthrow
