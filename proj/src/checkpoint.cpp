#include "milthrow/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "binio.hpp"
#include "milthrow/errors.hpp"

namespace milthrow {

namespace {

constexpr std::size_t kMagicLen = 9;

void write_params(binio::Writer& w, const ModelParams& params) {
  w.u32(static_cast<std::uint32_t>(params.layer_dims.size()));
  for (std::size_t d : params.layer_dims) w.u32(static_cast<std::uint32_t>(d));
  for (std::size_t l = 0; l < params.n_layers(); ++l) {
    for (double v : params.weights[l].data) w.f64(v);
    for (double v : params.biases[l]) w.f64(v);
  }
}

ModelParams read_params(binio::Reader& r, const std::string& context) {
  const std::uint32_t n_dims = r.u32();
  if (n_dims < 2) throw RuntimeFailure(context + ": corrupt layer dims");
  ModelParams params;
  params.layer_dims.resize(n_dims);
  for (auto& d : params.layer_dims) {
    d = r.u32();
    if (d == 0) throw RuntimeFailure(context + ": corrupt layer dims");
  }
  for (std::size_t l = 0; l + 1 < n_dims; ++l) {
    Matrix w(params.layer_dims[l + 1], params.layer_dims[l]);
    for (double& v : w.data) v = r.f64();
    Vector b(params.layer_dims[l + 1]);
    for (double& v : b) v = r.f64();
    if (!all_finite(w.data) || !all_finite(b)) throw RuntimeFailure(context + ": non-finite parameter value");
    params.weights.push_back(std::move(w));
    params.biases.push_back(std::move(b));
  }
  return params;
}

void write_tensors(binio::Writer& w, const ParamTensors& t) {
  for (std::size_t l = 0; l < t.weights.size(); ++l) {
    for (double v : t.weights[l].data) w.f64(v);
    for (double v : t.biases[l]) w.f64(v);
  }
}

ParamTensors read_tensors(binio::Reader& r, const ModelParams& shape) {
  ParamTensors t = ParamTensors::zeros_like(shape);
  for (std::size_t l = 0; l < t.weights.size(); ++l) {
    for (double& v : t.weights[l].data) v = r.f64();
    for (double& v : t.biases[l]) v = r.f64();
  }
  return t;
}

void write_file(const std::vector<char>& payload, const std::filesystem::path& path) {
  binio::Writer out;
  out.raw(kCheckpointMagic, kMagicLen);
  out.raw(payload.data(), payload.size());
  out.u32(binio::crc32(payload.data(), payload.size()));

  std::ofstream file(path, std::ios::binary);
  if (!file) throw RuntimeFailure("cannot write checkpoint " + path.string());
  file.write(out.bytes().data(), static_cast<std::streamsize>(out.bytes().size()));
  if (!file) throw RuntimeFailure("failed writing checkpoint " + path.string());
}

std::vector<char> read_file(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw RuntimeFailure("cannot open checkpoint " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());

  if (bytes.size() < kMagicLen + 4 || std::memcmp(bytes.data(), kCheckpointMagic, kMagicLen) != 0)
    throw RuntimeFailure(path.string() + ": not a " + kCheckpointMagic + " checkpoint");
  const std::size_t payload_size = bytes.size() - kMagicLen - 4;
  const std::uint32_t stored = binio::Reader(bytes.data() + kMagicLen + payload_size, 4, path.string()).u32();
  const std::uint32_t actual = binio::crc32(bytes.data() + kMagicLen, payload_size);
  if (stored != actual) throw RuntimeFailure(path.string() + ": CRC mismatch, file corrupt");
  return bytes;
}

TrainState read_train_state(binio::Reader& r, const ModelParams& params, const std::string& context) {
  TrainState state;
  const std::uint32_t kind = r.u32();
  if (kind > 1) throw RuntimeFailure(context + ": corrupt optimizer kind");
  state.opt.kind = kind == 0 ? OptimizerKind::adam : OptimizerKind::adadelta;
  state.opt.step_count = r.u64();
  state.opt.hyper.learning_rate = r.f64();
  state.opt.hyper.beta1 = r.f64();
  state.opt.hyper.beta2 = r.f64();
  state.opt.hyper.rho = r.f64();
  state.opt.hyper.epsilon = r.f64();
  state.opt.acc1 = read_tensors(r, params);
  state.opt.acc2 = read_tensors(r, params);
  for (auto& word : state.rng_state) word = r.u64();
  state.iteration = r.u64();
  const std::uint32_t variant = r.u32();
  if (variant > 1) throw RuntimeFailure(context + ": corrupt loss variant");
  state.loss_variant = variant == 0 ? LossVariant::original : LossVariant::mean_normal;
  return state;
}

}  // namespace

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  binio::Writer payload;
  write_params(payload, params);
  write_file(payload.bytes(), path);
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  binio::Reader r(bytes.data() + kMagicLen, bytes.size() - kMagicLen - 4, path.string());
  ModelParams params = read_params(r, path.string());
  // A training checkpoint carries extra state after the parameters; loading
  // just the model out of one is fine.
  if (r.remaining() != 0) read_train_state(r, params, path.string());
  return params;
}

void save_train_checkpoint(const ModelParams& params, const TrainState& state,
                           const std::filesystem::path& path) {
  binio::Writer payload;
  write_params(payload, params);
  payload.u32(state.opt.kind == OptimizerKind::adam ? 0 : 1);
  payload.u64(state.opt.step_count);
  payload.f64(state.opt.hyper.learning_rate);
  payload.f64(state.opt.hyper.beta1);
  payload.f64(state.opt.hyper.beta2);
  payload.f64(state.opt.hyper.rho);
  payload.f64(state.opt.hyper.epsilon);
  write_tensors(payload, state.opt.acc1);
  write_tensors(payload, state.opt.acc2);
  for (std::uint64_t word : state.rng_state) payload.u64(word);
  payload.u64(state.iteration);
  payload.u32(state.loss_variant == LossVariant::original ? 0 : 1);
  write_file(payload.bytes(), path);
}

std::pair<ModelParams, TrainState> load_train_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  binio::Reader r(bytes.data() + kMagicLen, bytes.size() - kMagicLen - 4, path.string());
  ModelParams params = read_params(r, path.string());
  if (r.remaining() == 0)
    throw RuntimeFailure(path.string() + ": checkpoint has no training state, cannot resume");
  TrainState state = read_train_state(r, params, path.string());
  if (r.remaining() != 0) throw RuntimeFailure(path.string() + ": trailing bytes after training state");
  return {std::move(params), std::move(state)};
}

}  // namespace milthrow
