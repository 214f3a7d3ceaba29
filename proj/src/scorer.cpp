#include "milthrow/scorer.hpp"

#include <cmath>
#include <limits>

#include "milthrow/errors.hpp"

namespace milthrow {

namespace {

double sigmoid(double z) {
  double s;
  if (z >= 0.0) {
    s = 1.0 / (1.0 + std::exp(-z));
  } else {
    const double e = std::exp(z);
    s = e / (1.0 + e);
  }
  // Keep the score in the open interval even when the sigmoid saturates in
  // double precision.
  const double lo = std::numeric_limits<double>::min();
  const double hi = std::nextafter(1.0, 0.0);
  return s < lo ? lo : (s > hi ? hi : s);
}

}  // namespace

ParamTensors ParamTensors::zeros_like(const ModelParams& params) {
  ParamTensors t;
  t.weights.reserve(params.weights.size());
  t.biases.reserve(params.biases.size());
  for (const auto& w : params.weights) t.weights.emplace_back(w.rows, w.cols);
  for (const auto& b : params.biases) t.biases.emplace_back(b.size(), 0.0);
  return t;
}

void axpy(double a, const ParamTensors& x, ParamTensors& y) {
  for (std::size_t l = 0; l < x.weights.size(); ++l) {
    const auto& src = x.weights[l].data;
    auto& dst = y.weights[l].data;
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] += a * src[i];
  }
  for (std::size_t l = 0; l < x.biases.size(); ++l) {
    const auto& src = x.biases[l];
    auto& dst = y.biases[l];
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] += a * src[i];
  }
}

void scale(ParamTensors& x, double a) {
  for (auto& w : x.weights)
    for (double& v : w.data) v *= a;
  for (auto& b : x.biases)
    for (double& v : b) v *= a;
}

ModelParams init_params(std::size_t dim, std::uint64_t seed, const std::vector<std::size_t>& hidden_dims) {
  if (dim == 0) throw ValidationError("init_params: dim must be >= 1");
  for (std::size_t h : hidden_dims)
    if (h == 0) throw ValidationError("init_params: hidden dims must be >= 1");

  ModelParams params;
  params.layer_dims.push_back(dim);
  params.layer_dims.insert(params.layer_dims.end(), hidden_dims.begin(), hidden_dims.end());
  params.layer_dims.push_back(1);

  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < params.layer_dims.size(); ++l) {
    const std::size_t fan_in = params.layer_dims[l];
    const std::size_t fan_out = params.layer_dims[l + 1];
    Matrix w(fan_out, fan_in);
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : w.data) v = (2.0 * rng.next_unit() - 1.0) * limit;
    params.weights.push_back(std::move(w));
    params.biases.emplace_back(fan_out, 0.0);
  }
  return params;
}

ForwardTrace forward(const ModelParams& params, std::span<const double> x, double dropout_rate, Rng* rng) {
  if (x.size() != params.input_dim())
    throw ValidationError("forward: input has " + std::to_string(x.size()) + " entries, model expects " +
                          std::to_string(params.input_dim()));
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw ValidationError("forward: dropout_rate must be in [0,1)");
  if (dropout_rate > 0.0 && rng == nullptr) throw ValidationError("forward: dropout requires an rng");

  const std::size_t n_layers = params.n_layers();
  ForwardTrace trace;
  trace.dropout_rate = dropout_rate;
  trace.input.assign(x.begin(), x.end());
  trace.pre_acts.resize(n_layers);
  trace.acts.resize(n_layers);
  if (dropout_rate > 0.0) trace.keep_masks.resize(n_layers - 1);

  const Vector* in = &trace.input;
  const double keep = 1.0 - dropout_rate;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const Matrix& w = params.weights[l];
    const Vector& b = params.biases[l];
    Vector& z = trace.pre_acts[l];
    z.resize(w.rows);
    for (std::size_t r = 0; r < w.rows; ++r) {
      const double* row = &w.data[r * w.cols];
      double acc = b[r];
      for (std::size_t c = 0; c < w.cols; ++c) acc += row[c] * (*in)[c];
      z[r] = acc;
    }
    Vector& a = trace.acts[l];
    a.resize(w.rows);
    if (l + 1 == n_layers) {
      a[0] = sigmoid(z[0]);
    } else {
      for (std::size_t r = 0; r < w.rows; ++r) a[r] = z[r] > 0.0 ? z[r] : 0.0;
      if (dropout_rate > 0.0) {
        auto& mask = trace.keep_masks[l];
        mask.resize(w.rows);
        for (std::size_t r = 0; r < w.rows; ++r) {
          mask[r] = rng->next_unit() >= dropout_rate ? 1 : 0;
          a[r] = mask[r] ? a[r] / keep : 0.0;
        }
      }
    }
    in = &a;
  }
  return trace;
}

SegmentScores score_bag(const ModelParams& params, const FeatureBag& bag) {
  SegmentScores out;
  out.video_id = bag.video_id;
  out.scores.reserve(bag.n_segments());
  for (const auto& segment : bag.segments) out.scores.push_back(forward(params, segment).score());
  return out;
}

ParamTensors backward(const ModelParams& params, std::span<const ForwardTrace> traces,
                      std::span<const double> dscores) {
  if (traces.size() != dscores.size()) throw ValidationError("backward: traces/dscores length mismatch");

  const std::size_t n_layers = params.n_layers();
  ParamTensors grads = ParamTensors::zeros_like(params);
  Vector dz, da;
  for (std::size_t t = 0; t < traces.size(); ++t) {
    const ForwardTrace& trace = traces[t];
    if (trace.acts.size() != n_layers || trace.input.size() != params.input_dim())
      throw ValidationError("backward: trace does not match model shape");
    if (dscores[t] == 0.0) continue;

    const double s = trace.score();
    dz.assign(1, dscores[t] * s * (1.0 - s));
    for (std::size_t l = n_layers; l-- > 0;) {
      const Matrix& w = params.weights[l];
      const Vector& in = l == 0 ? trace.input : trace.acts[l - 1];
      Matrix& dw = grads.weights[l];
      Vector& db = grads.biases[l];
      for (std::size_t r = 0; r < w.rows; ++r) {
        const double g = dz[r];
        if (g == 0.0) continue;
        double* dw_row = &dw.data[r * w.cols];
        for (std::size_t c = 0; c < w.cols; ++c) dw_row[c] += g * in[c];
        db[r] += g;
      }
      if (l == 0) break;

      da.assign(w.cols, 0.0);
      for (std::size_t r = 0; r < w.rows; ++r) {
        const double g = dz[r];
        if (g == 0.0) continue;
        const double* row = &w.data[r * w.cols];
        for (std::size_t c = 0; c < w.cols; ++c) da[c] += row[c] * g;
      }
      // Through dropout scaling and the ReLU gate; subgradient at 0 is 0.
      const Vector& z_prev = trace.pre_acts[l - 1];
      dz.resize(w.cols);
      const bool masked = trace.dropout_rate > 0.0;
      const double keep = 1.0 - trace.dropout_rate;
      for (std::size_t c = 0; c < w.cols; ++c) {
        double g = da[c];
        if (masked) g = trace.keep_masks[l - 1][c] ? g / keep : 0.0;
        dz[c] = z_prev[c] > 0.0 ? g : 0.0;
      }
    }
  }
  return grads;
}

}  // namespace milthrow
