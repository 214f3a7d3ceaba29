#include "milthrow/objective.hpp"

#include <cmath>

#include "milthrow/errors.hpp"

namespace milthrow {

namespace {

std::size_t lowest_argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

}  // namespace

const char* to_string(LossVariant variant) {
  return variant == LossVariant::original ? "original" : "mean_normal";
}

RankLossResult rank_loss(std::span<const double> scores_anom, std::span<const double> scores_norm,
                         LossVariant variant) {
  if (scores_anom.empty() || scores_norm.empty()) throw ValidationError("rank_loss: empty score list");
  if (scores_anom.size() != scores_norm.size()) throw ValidationError("rank_loss: length mismatch");

  const std::size_t n = scores_anom.size();
  const std::size_t argmax_anom = lowest_argmax(scores_anom);

  double normal_agg;
  std::size_t argmax_norm = 0;
  if (variant == LossVariant::original) {
    argmax_norm = lowest_argmax(scores_norm);
    normal_agg = scores_norm[argmax_norm];
  } else {
    normal_agg = 0.0;
    for (double s : scores_norm) normal_agg += s;
    normal_agg /= static_cast<double>(n);
  }

  RankLossResult result;
  result.d_anom.assign(n, 0.0);
  result.d_norm.assign(n, 0.0);
  const double margin = 1.0 - scores_anom[argmax_anom] + normal_agg;
  if (margin > 0.0) {
    result.value = margin;
    result.d_anom[argmax_anom] = -1.0;
    if (variant == LossVariant::original) {
      result.d_norm[argmax_norm] = 1.0;
    } else {
      const double g = 1.0 / static_cast<double>(n);
      for (double& v : result.d_norm) v = g;
    }
  }
  return result;
}

TermResult smoothness_term(std::span<const double> scores_anom) {
  if (scores_anom.empty()) throw ValidationError("smoothness_term: empty score list");
  const std::size_t n = scores_anom.size();
  TermResult result;
  result.d.assign(n, 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double diff = scores_anom[i] - scores_anom[i + 1];
    result.value += diff * diff;
    result.d[i] += 2.0 * diff;
    result.d[i + 1] -= 2.0 * diff;
  }
  return result;
}

TermResult sparsity_term(std::span<const double> scores_anom) {
  if (scores_anom.empty()) throw ValidationError("sparsity_term: empty score list");
  TermResult result;
  result.d.assign(scores_anom.size(), 1.0);
  for (double s : scores_anom) result.value += s;
  return result;
}

double weight_norm_value(const ModelParams& params) {
  double sum_sq = 0.0;
  for (const auto& w : params.weights)
    for (double v : w.data) sum_sq += v * v;
  return std::sqrt(sum_sq);
}

WeightNormResult weight_norm_term(const ModelParams& params) {
  WeightNormResult result;
  result.value = weight_norm_value(params);
  result.d_params = ParamTensors::zeros_like(params);
  if (result.value > 0.0) {
    const double inv = 1.0 / result.value;
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
      const auto& src = params.weights[l].data;
      auto& dst = result.d_params.weights[l].data;
      for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] * inv;
    }
  }
  return result;
}

PairLossResult pair_objective(std::span<const double> scores_anom, std::span<const double> scores_norm,
                              const ModelParams& params, const LossConfig& cfg) {
  if (!(cfg.lambda1 >= 0.0) || !(cfg.lambda2 >= 0.0) || !(cfg.lambda3 >= 0.0))
    throw ValidationError("pair_objective: lambda weights must be finite and >= 0");

  const auto rank = rank_loss(scores_anom, scores_norm, cfg.variant);
  const auto smooth = smoothness_term(scores_anom);
  const auto sparse = sparsity_term(scores_anom);

  PairLossResult result;
  result.rank_term = rank.value;
  result.smooth_term = smooth.value;
  result.sparse_term = sparse.value;
  result.weightnorm_term = weight_norm_value(params);
  result.total = rank.value + cfg.lambda1 * smooth.value + cfg.lambda2 * sparse.value +
                 cfg.lambda3 * result.weightnorm_term;

  result.d_scores_anom = rank.d_anom;
  for (std::size_t i = 0; i < result.d_scores_anom.size(); ++i)
    result.d_scores_anom[i] += cfg.lambda1 * smooth.d[i] + cfg.lambda2 * sparse.d[i];
  result.d_scores_norm = rank.d_norm;
  return result;
}

}  // namespace milthrow
