#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "smtc/rng.hpp"
#include "smtc/sim.hpp"

namespace smtc {

/// Fully connected layer, weights stored outputs x inputs row-major.
struct DenseLayer {
  int inputs = 0;
  int outputs = 0;
  std::vector<double> weights;
  std::vector<double> biases;

  double& w(int out, int in) { return weights[static_cast<std::size_t>(out) * inputs + in]; }
  double w(int out, int in) const { return weights[static_cast<std::size_t>(out) * inputs + in]; }
  bool operator==(const DenseLayer&) const = default;
};

/// Q-network: rectifier on hidden layers, identity on the 2-wide output
/// (index 0 = Extend, 1 = Switch).
struct MlpParams {
  std::vector<int> layer_sizes;
  std::vector<DenseLayer> layers;

  static MlpParams zeros(std::vector<int> layer_sizes);
  /// Uniform(-sqrt(6/fan_in), sqrt(6/fan_in)) weights, zero biases.
  static MlpParams he_uniform(std::vector<int> layer_sizes, Rng& rng);

  int input_size() const { return layer_sizes.front(); }
  std::size_t parameter_count() const;
  bool operator==(const MlpParams&) const = default;
};

using QValues = std::array<double, 2>;

/// Throws ShapeError when input.size() != layer_sizes[0].
QValues mlp_forward(const MlpParams& params, std::span<const double> input);

struct Transition {
  std::vector<double> observation;
  Action action = Action::Extend;
  double reward = 0.0;
  std::vector<double> next_observation;
  bool terminal = false;
  // Whether Switch is available in the next state; the bootstrap maximizes over allowed actions.
  bool next_switch_allowed = true;
};

/// Same shape as MlpParams; holds d(loss)/d(parameter).
struct MlpGradients {
  std::vector<DenseLayer> layers;
  double norm() const;
  void scale(double factor);
};

struct GradientResult {
  MlpGradients gradients;
  double loss = 0.0;
};

/// Mean squared TD error against y = r + discount * Q_target(s', a'), where a' is
/// the best action allowed in s' (y = r when terminal), with exact backpropagation.
/// a' maximizes Q_target itself, or the online network when `double_q` is set;
/// the target y is held constant either way.
GradientResult mlp_gradients(const MlpParams& params, std::span<const Transition* const> batch,
                             const MlpParams& target, double discount, bool double_q = false);
GradientResult mlp_gradients(const MlpParams& params, std::span<const Transition> batch,
                             const MlpParams& target, double discount, bool double_q = false);

/// Plain SGD after rescaling the gradient to at most `clip_norm` (L2 over all parameters).
void sgd_step(MlpParams& params, MlpGradients gradients, double learning_rate, double clip_norm);

// Checkpoint: "SMTC", u32 version, u32 layer count, u32 sizes..., then per layer
// the weights (row-major, outputs x inputs) followed by the biases, all as
// little-endian binary64.
inline constexpr std::uint32_t kCheckpointVersion = 1;
std::vector<std::uint8_t> serialize_checkpoint(const MlpParams& params);
MlpParams deserialize_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const MlpParams& params, const std::filesystem::path& path);
MlpParams load_checkpoint(const std::filesystem::path& path);

}  // namespace smtc
