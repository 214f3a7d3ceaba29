#pragma once

#include <span>

#include "milthrow/la.hpp"
#include "milthrow/scorer.hpp"

namespace milthrow {

enum class LossVariant { original, mean_normal };

const char* to_string(LossVariant variant);

struct LossConfig {
  LossVariant variant = LossVariant::original;
  double lambda1 = 8e-5;  // temporal smoothness weight
  double lambda2 = 8e-5;  // sparsity weight
  double lambda3 = 1e-3;  // weight-norm weight
};

struct RankLossResult {
  double value = 0.0;
  Vector d_anom;
  Vector d_norm;
};

// Hinge ranking loss over one (anomalous, normal) bag pair:
//   original:     max(0, 1 - max(scores_anom) + max(scores_norm))
//   mean_normal:  max(0, 1 - max(scores_anom) + mean(scores_norm))
// Argmax ties break to the lowest index; a zero hinge yields zero gradients.
RankLossResult rank_loss(std::span<const double> scores_anom, std::span<const double> scores_norm,
                         LossVariant variant);

struct TermResult {
  double value = 0.0;
  Vector d;
};

// Sum of squared differences of consecutive anomalous-bag scores.
TermResult smoothness_term(std::span<const double> scores_anom);

// Sum of anomalous-bag scores.
TermResult sparsity_term(std::span<const double> scores_anom);

struct WeightNormResult {
  double value = 0.0;
  ParamTensors d_params;
};

// Frobenius norm over all weight matrices jointly; biases excluded. The
// gradient at zero weights is defined as zero.
WeightNormResult weight_norm_term(const ModelParams& params);
double weight_norm_value(const ModelParams& params);

struct PairLossResult {
  double total = 0.0;
  double rank_term = 0.0;
  double smooth_term = 0.0;
  double sparse_term = 0.0;
  double weightnorm_term = 0.0;
  Vector d_scores_anom;
  Vector d_scores_norm;
};

// total = rank + l1*smooth + l2*sparse + l3*weightnorm, with the score
// gradients assembled accordingly. The regularizers act on the anomalous bag
// only, for both loss variants.
PairLossResult pair_objective(std::span<const double> scores_anom, std::span<const double> scores_norm,
                              const ModelParams& params, const LossConfig& cfg);

}  // namespace milthrow
