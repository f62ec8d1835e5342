#include "smtc/mlp.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "smtc/errors.hpp"

namespace smtc {

namespace {

DenseLayer make_layer(int inputs, int outputs) {
  DenseLayer layer;
  layer.inputs = inputs;
  layer.outputs = outputs;
  layer.weights.assign(static_cast<std::size_t>(inputs) * outputs, 0.0);
  layer.biases.assign(static_cast<std::size_t>(outputs), 0.0);
  return layer;
}

void check_sizes(const std::vector<int>& sizes) {
  if (sizes.size() < 2) throw ShapeError("need at least input and output sizes");
  for (int s : sizes) {
    if (s <= 0) throw ShapeError("layer sizes must be positive");
  }
  if (sizes.back() != 2) throw ShapeError("output layer must have exactly 2 units");
}

// Activations of one forward pass, kept for backprop.
struct Trace {
  std::vector<std::vector<double>> act;  // act[0] = input, act[l+1] = output of layer l
};

void affine(const DenseLayer& layer, std::span<const double> x, std::span<double> y,
            std::vector<int>& nonzero) {
  nonzero.clear();
  for (int i = 0; i < layer.inputs; ++i) {
    if (x[i] != 0.0) nonzero.push_back(i);
  }
  for (int o = 0; o < layer.outputs; ++o) {
    const double* row = layer.weights.data() + static_cast<std::size_t>(o) * layer.inputs;
    double acc = layer.biases[o];
    for (int i : nonzero) acc += row[i] * x[i];
    y[o] = acc;
  }
}

void forward_trace(const MlpParams& params, std::span<const double> input, Trace& trace,
                   std::vector<int>& scratch) {
  if (input.size() != static_cast<std::size_t>(params.input_size())) {
    throw ShapeError("input length " + std::to_string(input.size()) + " != " +
                     std::to_string(params.input_size()));
  }
  const std::size_t n = params.layers.size();
  trace.act.resize(n + 1);
  trace.act[0].assign(input.begin(), input.end());
  for (std::size_t l = 0; l < n; ++l) {
    const auto& layer = params.layers[l];
    auto& out = trace.act[l + 1];
    out.resize(static_cast<std::size_t>(layer.outputs));
    affine(layer, trace.act[l], out, scratch);
    if (l + 1 < n) {
      for (double& v : out) v = v > 0.0 ? v : 0.0;
    }
  }
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
    return std::bit_cast<double>(v);
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw MalformedPayload("checkpoint truncated");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

MlpParams MlpParams::zeros(std::vector<int> layer_sizes) {
  check_sizes(layer_sizes);
  MlpParams params;
  params.layer_sizes = std::move(layer_sizes);
  for (std::size_t l = 0; l + 1 < params.layer_sizes.size(); ++l) {
    params.layers.push_back(make_layer(params.layer_sizes[l], params.layer_sizes[l + 1]));
  }
  return params;
}

MlpParams MlpParams::he_uniform(std::vector<int> layer_sizes, Rng& rng) {
  MlpParams params = zeros(std::move(layer_sizes));
  for (auto& layer : params.layers) {
    const double bound = std::sqrt(6.0 / layer.inputs);
    for (double& w : layer.weights) w = rng.uniform(-bound, bound);
  }
  return params;
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers) n += layer.weights.size() + layer.biases.size();
  return n;
}

QValues mlp_forward(const MlpParams& params, std::span<const double> input) {
  thread_local Trace trace;
  thread_local std::vector<int> scratch;
  forward_trace(params, input, trace, scratch);
  const auto& out = trace.act.back();
  return {out[0], out[1]};
}

double MlpGradients::norm() const {
  double sq = 0.0;
  for (const auto& layer : layers) {
    for (double g : layer.weights) sq += g * g;
    for (double g : layer.biases) sq += g * g;
  }
  return std::sqrt(sq);
}

void MlpGradients::scale(double factor) {
  for (auto& layer : layers) {
    for (double& g : layer.weights) g *= factor;
    for (double& g : layer.biases) g *= factor;
  }
}

GradientResult mlp_gradients(const MlpParams& params, std::span<const Transition* const> batch,
                             const MlpParams& target, double discount, bool double_q) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  GradientResult result;
  for (const auto& layer : params.layers) {
    result.gradients.layers.push_back(make_layer(layer.inputs, layer.outputs));
  }
  const std::size_t n_layers = params.layers.size();
  const double inv_batch = 1.0 / static_cast<double>(batch.size());

  Trace trace;
  std::vector<int> scratch;
  std::vector<double> delta;
  std::vector<double> delta_prev;
  for (const Transition* t : batch) {
    double bootstrap = 0.0;
    if (!t->terminal) {
      const QValues next = mlp_forward(target, t->next_observation);
      std::size_t best = 0;
      if (t->next_switch_allowed) {
        const QValues chooser = double_q ? mlp_forward(params, t->next_observation) : next;
        best = chooser[1] > chooser[0] ? 1 : 0;
      }
      bootstrap = next[best];
    }
    const double y = t->reward + discount * bootstrap;

    forward_trace(params, t->observation, trace, scratch);
    const auto a = static_cast<std::size_t>(t->action);
    const double td = trace.act.back()[a] - y;
    result.loss += td * td * inv_batch;

    delta.assign(2, 0.0);
    delta[a] = 2.0 * td * inv_batch;
    for (std::size_t l = n_layers; l-- > 0;) {
      const auto& layer = params.layers[l];
      auto& grad = result.gradients.layers[l];
      const auto& in = trace.act[l];
      scratch.clear();
      for (int i = 0; i < layer.inputs; ++i) {
        if (in[i] != 0.0) scratch.push_back(i);
      }
      for (int o = 0; o < layer.outputs; ++o) {
        const double d = delta[o];
        if (d == 0.0) continue;
        grad.biases[o] += d;
        double* grow = grad.weights.data() + static_cast<std::size_t>(o) * layer.inputs;
        for (int i : scratch) grow[i] += d * in[i];
      }
      if (l == 0) break;
      delta_prev.assign(static_cast<std::size_t>(layer.inputs), 0.0);
      for (int o = 0; o < layer.outputs; ++o) {
        const double d = delta[o];
        if (d == 0.0) continue;
        const double* row = layer.weights.data() + static_cast<std::size_t>(o) * layer.inputs;
        for (int i = 0; i < layer.inputs; ++i) delta_prev[i] += row[i] * d;
      }
      // rectifier derivative; hidden activations are exactly 0 where z <= 0
      for (int i = 0; i < layer.inputs; ++i) {
        if (!(in[i] > 0.0)) delta_prev[i] = 0.0;
      }
      delta.swap(delta_prev);
    }
  }
  return result;
}

GradientResult mlp_gradients(const MlpParams& params, std::span<const Transition> batch,
                             const MlpParams& target, double discount, bool double_q) {
  std::vector<const Transition*> ptrs;
  ptrs.reserve(batch.size());
  for (const auto& t : batch) ptrs.push_back(&t);
  return mlp_gradients(params, ptrs, target, discount, double_q);
}

void sgd_step(MlpParams& params, MlpGradients gradients, double learning_rate, double clip_norm) {
  const double norm = gradients.norm();
  if (norm > clip_norm) gradients.scale(clip_norm / norm);
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto& layer = params.layers[l];
    const auto& grad = gradients.layers[l];
    for (std::size_t i = 0; i < layer.weights.size(); ++i) {
      layer.weights[i] -= learning_rate * grad.weights[i];
    }
    for (std::size_t i = 0; i < layer.biases.size(); ++i) {
      layer.biases[i] -= learning_rate * grad.biases[i];
    }
  }
}

std::vector<std::uint8_t> serialize_checkpoint(const MlpParams& params) {
  std::vector<std::uint8_t> out{'S', 'M', 'T', 'C'};
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(params.layer_sizes.size()));
  for (int s : params.layer_sizes) put_u32(out, static_cast<std::uint32_t>(s));
  for (const auto& layer : params.layers) {
    for (double w : layer.weights) put_f64(out, w);
    for (double b : layer.biases) put_f64(out, b);
  }
  return out;
}

MlpParams deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || !std::equal(bytes.begin(), bytes.begin() + 4, "SMTC")) {
    throw MalformedPayload("checkpoint magic mismatch");
  }
  Reader reader(bytes.subspan(4));
  const auto version = reader.u32();
  if (version != kCheckpointVersion) {
    throw MalformedPayload("unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = reader.u32();
  if (count < 2 || count > 64) throw MalformedPayload("implausible layer count");
  std::vector<int> sizes;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto s = reader.u32();
    if (s == 0 || s > (1u << 20)) throw MalformedPayload("implausible layer size");
    sizes.push_back(static_cast<int>(s));
  }
  MlpParams params;
  try {
    params = MlpParams::zeros(sizes);
  } catch (const ShapeError& e) {
    throw MalformedPayload(std::string("checkpoint shape: ") + e.what());
  }
  for (auto& layer : params.layers) {
    for (double& w : layer.weights) w = reader.f64();
    for (double& b : layer.biases) b = reader.f64();
  }
  if (!reader.done()) throw MalformedPayload("trailing bytes after checkpoint");
  return params;
}

void save_checkpoint(const MlpParams& params, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(params);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

MlpParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                        std::istreambuf_iterator<char>()};
  return deserialize_checkpoint(bytes);
}

}  // namespace smtc
