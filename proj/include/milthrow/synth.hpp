#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>

#include "milthrow/corpus.hpp"
#include "milthrow/objective.hpp"
#include "milthrow/scorer.hpp"

namespace milthrow {

// Synthetic MIL corpus with known ground truth. Normal segments are
// N(0, sigma^2 I); each anomalous video carries `anomalous_segments_per_video`
// contiguous runs of segments shifted by separation*sigma along a fixed unit
// direction. `normal_contamination` optionally plants unlabeled moderate
// outliers into normal videos (they stay labeled normal).
struct SynthSpec {
  std::size_t dim = 64;
  std::size_t n_videos_normal = 40;
  std::size_t n_videos_anom = 40;
  std::size_t n_segments = 32;
  std::size_t anomalous_segments_per_video = 3;  // number of runs, 1..10
  double separation = 3.0;                       // mean shift in units of noise_sigma
  double noise_sigma = 1.0;
  double normal_contamination = 0.0;  // fraction of noisy segments per normal video
  std::uint64_t seed = 0;
};

// Writes manifest.csv plus features/*.csv under out_dir (70/30 train/test
// split per class) and returns the manifest path. Byte-identical for a fixed
// spec.
std::filesystem::path generate(const SynthSpec& spec, const std::filesystem::path& out_dir);

// Exhaustive O(pos*neg) Mann-Whitney count, 0.5 per tie. Reference oracle for
// roc_auc.
double oracle_auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

// Central finite differences, one coordinate at a time.
Vector oracle_grad(const std::function<double(std::span<const double>)>& f, Vector at, double h);

// Same, over every weight and bias of a model.
ParamTensors oracle_grad_params(const std::function<double(const ModelParams&)>& f, ModelParams at, double h);

struct GradCheckConfig {
  std::size_t dim = 5;
  std::vector<std::size_t> hidden_dims = {4, 3};
  std::size_t n_segments = 6;
  std::size_t n_configs = 20;
  std::uint64_t seed = 0;
  double h = 1e-4;
  LossConfig loss;  // both variants get exercised regardless
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::size_t n_configs = 0;
};

// Analytic gradients of the full pair objective through the scorer against
// oracle_grad_params, at random smooth configurations (hinge margin > 0.05,
// argmax margins > 0.01, no ReLU pre-activation within 1e-3 of zero).
GradCheckReport gradient_check(const GradCheckConfig& cfg);

}  // namespace milthrow
