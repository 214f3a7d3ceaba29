#include "milthrow/optim.hpp"

#include <cmath>

#include "milthrow/errors.hpp"

namespace milthrow {

namespace {

void check_shapes(const ModelParams& params, const ParamTensors& grads, const OptimizerState& state) {
  if (grads.weights.size() != params.weights.size() || grads.biases.size() != params.biases.size() ||
      state.acc1.weights.size() != params.weights.size())
    throw ValidationError("optimizer step: layer count mismatch");
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    if (grads.weights[l].rows != params.weights[l].rows || grads.weights[l].cols != params.weights[l].cols ||
        grads.biases[l].size() != params.biases[l].size())
      throw ValidationError("optimizer step: gradient shape mismatch at layer " + std::to_string(l));
    if (!all_finite(grads.weights[l].data) || !all_finite(grads.biases[l]))
      throw ValidationError("optimizer step: non-finite gradient at layer " + std::to_string(l));
  }
}

template <typename Update>
void for_each_tensor(ModelParams& params, const ParamTensors& grads, OptimizerState& state, Update update) {
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    update(params.weights[l].data, grads.weights[l].data, state.acc1.weights[l].data, state.acc2.weights[l].data);
    update(params.biases[l], grads.biases[l], state.acc1.biases[l], state.acc2.biases[l]);
  }
}

}  // namespace

const char* to_string(OptimizerKind kind) { return kind == OptimizerKind::adam ? "adam" : "adadelta"; }

OptimizerHyper default_hyper(OptimizerKind kind) {
  OptimizerHyper hyper;
  if (kind == OptimizerKind::adam) {
    hyper.learning_rate = 5e-4;
    hyper.epsilon = 1e-8;
  } else {
    hyper.learning_rate = 0.01;
    hyper.epsilon = 1e-6;
  }
  return hyper;
}

OptimizerState make_state(OptimizerKind kind, const OptimizerHyper& hyper, const ModelParams& params) {
  if (!(hyper.learning_rate > 0.0)) throw ValidationError("make_state: learning_rate must be > 0");
  if (!(hyper.epsilon > 0.0)) throw ValidationError("make_state: epsilon must be > 0");
  if (hyper.beta1 < 0.0 || hyper.beta1 >= 1.0 || hyper.beta2 < 0.0 || hyper.beta2 >= 1.0)
    throw ValidationError("make_state: betas must be in [0,1)");
  if (hyper.rho < 0.0 || hyper.rho >= 1.0) throw ValidationError("make_state: rho must be in [0,1)");

  OptimizerState state;
  state.kind = kind;
  state.hyper = hyper;
  state.acc1 = ParamTensors::zeros_like(params);
  state.acc2 = ParamTensors::zeros_like(params);
  return state;
}

void adam_step(ModelParams& params, const ParamTensors& grads, OptimizerState& state) {
  if (state.kind != OptimizerKind::adam) throw ValidationError("adam_step: state kind is not adam");
  check_shapes(params, grads, state);

  state.step_count += 1;
  const auto& h = state.hyper;
  const double bias1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step_count));
  const double bias2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step_count));
  for_each_tensor(params, grads, state,
                  [&](std::vector<double>& theta, const std::vector<double>& g, std::vector<double>& m,
                      std::vector<double>& v) {
                    for (std::size_t i = 0; i < theta.size(); ++i) {
                      m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
                      v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
                      const double m_hat = m[i] / bias1;
                      const double v_hat = v[i] / bias2;
                      theta[i] -= h.learning_rate * m_hat / (std::sqrt(v_hat) + h.epsilon);
                    }
                  });
}

void adadelta_step(ModelParams& params, const ParamTensors& grads, OptimizerState& state) {
  if (state.kind != OptimizerKind::adadelta) throw ValidationError("adadelta_step: state kind is not adadelta");
  check_shapes(params, grads, state);

  state.step_count += 1;
  const auto& h = state.hyper;
  for_each_tensor(params, grads, state,
                  [&](std::vector<double>& theta, const std::vector<double>& g, std::vector<double>& eg2,
                      std::vector<double>& edx2) {
                    for (std::size_t i = 0; i < theta.size(); ++i) {
                      eg2[i] = h.rho * eg2[i] + (1.0 - h.rho) * g[i] * g[i];
                      const double dx = -std::sqrt(edx2[i] + h.epsilon) / std::sqrt(eg2[i] + h.epsilon) * g[i];
                      edx2[i] = h.rho * edx2[i] + (1.0 - h.rho) * dx * dx;
                      theta[i] += h.learning_rate * dx;
                    }
                  });
}

void optimizer_step(ModelParams& params, const ParamTensors& grads, OptimizerState& state) {
  if (state.kind == OptimizerKind::adam)
    adam_step(params, grads, state);
  else
    adadelta_step(params, grads, state);
}

}  // namespace milthrow
