#include "milthrow/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "milthrow/errors.hpp"
#include "milthrow/rng.hpp"

namespace milthrow {

namespace {

void validate_spec(const SynthSpec& spec) {
  if (spec.dim == 0 || spec.n_videos_normal == 0 || spec.n_videos_anom == 0 || spec.n_segments == 0)
    throw ValidationError("synth: counts must be >= 1");
  if (spec.anomalous_segments_per_video == 0 || spec.anomalous_segments_per_video > 10 ||
      spec.anomalous_segments_per_video > spec.n_segments)
    throw ValidationError("synth: anomalous_segments_per_video must be in [1,10] and <= n_segments");
  if (spec.separation < 0.0) throw ValidationError("synth: separation must be >= 0");
  if (!(spec.noise_sigma > 0.0)) throw ValidationError("synth: noise_sigma must be > 0");
  if (spec.normal_contamination < 0.0 || spec.normal_contamination >= 1.0)
    throw ValidationError("synth: normal_contamination must be in [0,1)");
}

Vector random_unit_direction(Rng& rng, std::size_t dim) {
  Vector u(dim);
  double norm_sq = 0.0;
  for (double& v : u) {
    v = rng.next_gaussian();
    norm_sq += v * v;
  }
  const double inv = 1.0 / std::sqrt(norm_sq);
  for (double& v : u) v *= inv;
  return u;
}

// Contiguous run of anomalous segments per zone; zones partition [0, n) so
// the runs never overlap.
std::vector<std::pair<std::size_t, std::size_t>> place_runs(Rng& rng, std::size_t n_segments, std::size_t k) {
  std::vector<std::pair<std::size_t, std::size_t>> runs;
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t zone_start = j * n_segments / k;
    const std::size_t zone_end = (j + 1) * n_segments / k;
    const std::size_t zone_len = zone_end - zone_start;
    const std::size_t run_len = 1 + rng.next_below(std::min<std::size_t>(3, zone_len));
    const std::size_t start = zone_start + rng.next_below(zone_len - run_len + 1);
    runs.emplace_back(start, start + run_len);
  }
  return runs;
}

}  // namespace

std::filesystem::path generate(const SynthSpec& spec, const std::filesystem::path& out_dir) {
  validate_spec(spec);
  std::filesystem::create_directories(out_dir / "features");

  Rng rng(spec.seed);
  const Vector anomaly_direction = random_unit_direction(rng, spec.dim);
  const double shift = spec.separation * spec.noise_sigma;
  // Unlabeled noise in normal videos sits at a fraction of the anomaly shift,
  // each outlier in its own random direction.
  const double contamination_shift = 0.6 * shift;
  const std::size_t contaminated_per_normal =
      static_cast<std::size_t>(spec.normal_contamination * static_cast<double>(spec.n_segments));

  Manifest manifest;
  manifest.dim = spec.dim;
  manifest.base_dir = out_dir;

  const auto emit_video = [&](const std::string& video_id, Label label, Split split) {
    ClipFeatureMatrix clips;
    clips.video_id = video_id;
    clips.dim = spec.dim;
    clips.clips.resize(spec.n_segments);
    for (auto& clip : clips.clips) {
      clip.resize(spec.dim);
      for (double& v : clip) v = spec.noise_sigma * rng.next_gaussian();
    }

    VideoRecord record;
    record.video_id = video_id;
    record.split = split;
    record.label = label;
    record.n_frames = 16 * spec.n_segments;  // one 16-frame clip per segment
    record.feature_paths.push_back("features/" + video_id + ".csv");

    if (label == Label::anomalous) {
      const auto runs = place_runs(rng, spec.n_segments, spec.anomalous_segments_per_video);
      for (const auto& [start, end] : runs) {
        for (std::size_t s = start; s < end; ++s)
          for (std::size_t d = 0; d < spec.dim; ++d) clips.clips[s][d] += shift * anomaly_direction[d];
        if (split == Split::test) record.intervals.emplace_back(16 * start, 16 * end);
      }
    } else if (contaminated_per_normal > 0) {
      // Partial Fisher-Yates pick of distinct segments.
      std::vector<std::size_t> indices(spec.n_segments);
      std::iota(indices.begin(), indices.end(), 0);
      for (std::size_t j = 0; j < contaminated_per_normal; ++j)
        std::swap(indices[j], indices[j + rng.next_below(spec.n_segments - j)]);
      for (std::size_t j = 0; j < contaminated_per_normal; ++j) {
        const Vector direction = random_unit_direction(rng, spec.dim);
        for (std::size_t d = 0; d < spec.dim; ++d)
          clips.clips[indices[j]][d] += contamination_shift * direction[d];
      }
    }

    write_clip_features(clips, out_dir / record.feature_paths.front());
    manifest.records.push_back(std::move(record));
  };

  const auto emit_class = [&](Label label, std::size_t count, const char* prefix) {
    const std::size_t n_train = count * 7 / 10;
    char video_id[64];
    for (std::size_t i = 0; i < count; ++i) {
      std::snprintf(video_id, sizeof video_id, "%s_%04zu", prefix, i);
      emit_video(video_id, label, i < n_train ? Split::train : Split::test);
    }
  };
  emit_class(Label::normal, spec.n_videos_normal, "normal");
  emit_class(Label::anomalous, spec.n_videos_anom, "anom");

  const auto manifest_path = out_dir / "manifest.csv";
  write_manifest(manifest, manifest_path);
  return manifest_path;
}

double oracle_auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) throw ValidationError("oracle_auc: length mismatch");
  double wins = 0.0;
  std::size_t n_pos = 0, n_neg = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i]) continue;
    ++n_pos;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j]) continue;
      if (scores[i] > scores[j])
        wins += 1.0;
      else if (scores[i] == scores[j])
        wins += 0.5;
    }
  }
  for (auto l : labels) n_neg += l ? 0 : 1;
  if (n_pos == 0 || n_neg == 0) throw ValidationError("oracle_auc: both classes must be present");
  return wins / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

Vector oracle_grad(const std::function<double(std::span<const double>)>& f, Vector at, double h) {
  Vector grad(at.size());
  for (std::size_t i = 0; i < at.size(); ++i) {
    const double saved = at[i];
    at[i] = saved + h;
    const double up = f(at);
    at[i] = saved - h;
    const double down = f(at);
    at[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) throw RuntimeFailure("oracle_grad: non-finite evaluation");
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

ParamTensors oracle_grad_params(const std::function<double(const ModelParams&)>& f, ModelParams at, double h) {
  ParamTensors grad = ParamTensors::zeros_like(at);
  const auto diff = [&](double& theta) {
    const double saved = theta;
    theta = saved + h;
    const double up = f(at);
    theta = saved - h;
    const double down = f(at);
    theta = saved;
    if (!std::isfinite(up) || !std::isfinite(down))
      throw RuntimeFailure("oracle_grad_params: non-finite evaluation");
    return (up - down) / (2.0 * h);
  };
  for (std::size_t l = 0; l < at.weights.size(); ++l) {
    for (std::size_t i = 0; i < at.weights[l].data.size(); ++i)
      grad.weights[l].data[i] = diff(at.weights[l].data[i]);
    for (std::size_t i = 0; i < at.biases[l].size(); ++i) grad.biases[l][i] = diff(at.biases[l][i]);
  }
  return grad;
}

GradCheckReport gradient_check(const GradCheckConfig& cfg) {
  if (cfg.dim == 0 || cfg.n_configs == 0 || cfg.n_segments == 0)
    throw ValidationError("gradient_check: dim, n_configs, n_segments must be >= 1");

  Rng rng(cfg.seed);
  GradCheckReport report;

  const auto evaluate_total = [&](const ModelParams& p, const std::vector<Vector>& anom_x,
                                  const std::vector<Vector>& norm_x, const LossConfig& loss) {
    Vector sa(anom_x.size()), sn(norm_x.size());
    for (std::size_t i = 0; i < anom_x.size(); ++i) sa[i] = forward(p, anom_x[i]).score();
    for (std::size_t i = 0; i < norm_x.size(); ++i) sn[i] = forward(p, norm_x[i]).score();
    return pair_objective(sa, sn, p, loss).total;
  };

  std::size_t attempts = 0;
  while (report.n_configs < cfg.n_configs) {
    if (++attempts > 100 * cfg.n_configs)
      throw RuntimeFailure("gradient_check: could not find enough smooth configurations");

    LossConfig loss = cfg.loss;
    loss.variant = report.n_configs % 2 == 0 ? LossVariant::original : LossVariant::mean_normal;

    ModelParams params = init_params(cfg.dim, rng.next_u64(), cfg.hidden_dims);
    for (auto& w : params.weights)
      for (double& v : w.data) v += 0.4 * rng.next_gaussian();
    for (auto& b : params.biases)
      for (double& v : b) v += 0.2 * rng.next_gaussian();

    std::vector<Vector> anom_x(cfg.n_segments), norm_x(cfg.n_segments);
    for (auto& x : anom_x) {
      x.resize(cfg.dim);
      for (double& v : x) v = rng.next_gaussian();
    }
    for (auto& x : norm_x) {
      x.resize(cfg.dim);
      for (double& v : x) v = rng.next_gaussian();
    }

    // Smoothness guards: FD steps must not flip a ReLU gate, the hinge, or
    // an argmax.
    bool smooth_point = true;
    Vector sa(cfg.n_segments), sn(cfg.n_segments);
    std::vector<ForwardTrace> traces(2 * cfg.n_segments);
    for (std::size_t i = 0; i < cfg.n_segments && smooth_point; ++i) {
      traces[i] = forward(params, anom_x[i]);
      sa[i] = traces[i].score();
      traces[cfg.n_segments + i] = forward(params, norm_x[i]);
      sn[i] = traces[cfg.n_segments + i].score();
      for (const auto* trace : {&traces[i], &traces[cfg.n_segments + i]})
        for (std::size_t l = 0; l + 1 < trace->pre_acts.size(); ++l)
          for (double z : trace->pre_acts[l])
            if (std::abs(z) < 1e-3) smooth_point = false;
    }
    if (!smooth_point) continue;

    const auto top_two_margin = [](const Vector& s) {
      double best = -1.0, second = -1.0;
      for (double v : s) {
        if (v > best) {
          second = best;
          best = v;
        } else if (v > second) {
          second = v;
        }
      }
      return best - second;
    };
    const double max_a = *std::max_element(sa.begin(), sa.end());
    const double agg_n = loss.variant == LossVariant::original
                             ? *std::max_element(sn.begin(), sn.end())
                             : std::accumulate(sn.begin(), sn.end(), 0.0) / static_cast<double>(sn.size());
    if (std::abs(1.0 - max_a + agg_n) < 0.05) continue;
    if (top_two_margin(sa) < 0.01) continue;
    if (loss.variant == LossVariant::original && top_two_margin(sn) < 0.01) continue;

    // Analytic gradient: backprop of the score gradients plus the weight-norm
    // term.
    const auto pair = pair_objective(sa, sn, params, loss);
    Vector dscores(2 * cfg.n_segments);
    for (std::size_t i = 0; i < cfg.n_segments; ++i) {
      dscores[i] = pair.d_scores_anom[i];
      dscores[cfg.n_segments + i] = pair.d_scores_norm[i];
    }
    ParamTensors analytic = backward(params, traces, dscores);
    if (loss.lambda3 > 0.0) {
      const auto wn = weight_norm_term(params);
      axpy(loss.lambda3, wn.d_params, analytic);
    }

    const ParamTensors numeric = oracle_grad_params(
        [&](const ModelParams& p) { return evaluate_total(p, anom_x, norm_x, loss); }, params, cfg.h);

    // Relative error with a 1e-6 denominator floor so that near-zero pairs
    // compare absolutely.
    const auto update_err = [&](double a, double n) {
      const double denom = std::max({std::abs(a), std::abs(n), 1e-6});
      report.max_rel_err = std::max(report.max_rel_err, std::abs(a - n) / denom);
    };
    for (std::size_t l = 0; l < analytic.weights.size(); ++l) {
      for (std::size_t i = 0; i < analytic.weights[l].data.size(); ++i)
        update_err(analytic.weights[l].data[i], numeric.weights[l].data[i]);
      for (std::size_t i = 0; i < analytic.biases[l].size(); ++i)
        update_err(analytic.biases[l][i], numeric.biases[l][i]);
    }
    ++report.n_configs;
  }
  return report;
}

}  // namespace milthrow
