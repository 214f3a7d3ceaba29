#pragma once

#include <cstdint>

#include "milthrow/scorer.hpp"

namespace milthrow {

enum class OptimizerKind { adam, adadelta };

const char* to_string(OptimizerKind kind);

struct OptimizerHyper {
  double learning_rate = 5e-4;
  double beta1 = 0.9;    // adam first-moment decay
  double beta2 = 0.999;  // adam second-moment decay
  double rho = 0.95;     // adadelta accumulation decay
  double epsilon = 1e-8;
};

// Learning rates follow the optimizer comparison: adam 0.0005, adadelta 0.01.
OptimizerHyper default_hyper(OptimizerKind kind);

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::adam;
  std::uint64_t step_count = 0;
  OptimizerHyper hyper;
  // adam: first/second moment; adadelta: E[g^2], E[dx^2].
  ParamTensors acc1;
  ParamTensors acc2;
};

OptimizerState make_state(OptimizerKind kind, const OptimizerHyper& hyper, const ModelParams& params);

// Standard Adam with bias correction; epsilon sits outside the square root.
void adam_step(ModelParams& params, const ParamTensors& grads, OptimizerState& state);

// Adadelta with a learning-rate multiplier on the update, matching the
// lr=0.01 usage this implements.
void adadelta_step(ModelParams& params, const ParamTensors& grads, OptimizerState& state);

// Dispatch on state.kind.
void optimizer_step(ModelParams& params, const ParamTensors& grads, OptimizerState& state);

}  // namespace milthrow
