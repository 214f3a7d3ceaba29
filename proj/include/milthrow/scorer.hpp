#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "milthrow/corpus.hpp"
#include "milthrow/la.hpp"
#include "milthrow/rng.hpp"

namespace milthrow {

// Feed-forward scorer mapping a segment feature vector to an anomaly
// likelihood: ReLU hidden layers, sigmoid output. Default D -> 512 -> 32 -> 1.
struct ModelParams {
  std::vector<std::size_t> layer_dims;  // [D, h..., 1]
  std::vector<Matrix> weights;          // weights[l] is layer_dims[l+1] x layer_dims[l]
  std::vector<Vector> biases;           // biases[l] has layer_dims[l+1] entries

  std::size_t input_dim() const { return layer_dims.front(); }
  std::size_t n_layers() const { return weights.size(); }
};

// Gradients and optimizer accumulators share the parameter shapes.
struct ParamTensors {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  static ParamTensors zeros_like(const ModelParams& params);
};

// y += a * x
void axpy(double a, const ParamTensors& x, ParamTensors& y);
void scale(ParamTensors& x, double a);

// Workspace retained by forward for backpropagation.
struct ForwardTrace {
  Vector input;
  std::vector<Vector> pre_acts;
  std::vector<Vector> acts;                           // post ReLU + dropout; last entry is the sigmoid score
  std::vector<std::vector<std::uint8_t>> keep_masks;  // per hidden layer, only when dropout is active
  double dropout_rate = 0.0;

  double score() const { return acts.back()[0]; }
};

struct SegmentScores {
  std::string video_id;
  Vector scores;
};

inline const std::vector<std::size_t> kDefaultHiddenDims = {512, 32};

// Glorot-uniform weights, zero biases. Deterministic for a fixed seed.
ModelParams init_params(std::size_t dim, std::uint64_t seed,
                        const std::vector<std::size_t>& hidden_dims = kDefaultHiddenDims);

// Training mode (dropout_rate > 0) draws inverted-scaling keep masks for the
// hidden activations from `rng`; inference passes rate 0 and no rng.
ForwardTrace forward(const ModelParams& params, std::span<const double> x, double dropout_rate = 0.0,
                     Rng* rng = nullptr);

// Inference-mode scores for every segment, order preserved.
SegmentScores score_bag(const ModelParams& params, const FeatureBag& bag);

// Accumulates d(loss)/d(params) over one or more traced forwards, given the
// upstream d(loss)/d(score) per trace.
ParamTensors backward(const ModelParams& params, std::span<const ForwardTrace> traces,
                      std::span<const double> dscores);

}  // namespace milthrow
