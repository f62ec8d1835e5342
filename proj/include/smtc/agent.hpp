#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "smtc/mlp.hpp"
#include "smtc/perception.hpp"
#include "smtc/semcom.hpp"
#include "smtc/sim.hpp"

namespace smtc {

inline constexpr int kPoolSize = 4;
inline constexpr int kPooledWidth = Image::kWidth / kPoolSize;    // 32
inline constexpr int kPooledHeight = Image::kHeight / kPoolSize;  // 16
inline constexpr int kImageObsSize = kPooledWidth * kPooledHeight + 4;
inline constexpr int kSemanticObsSize = 5;

/// Channel-mean grayscale, 4x4 average pool scaled to [0, 1] (row-major
/// 32x16), then a one-hot phase.
std::vector<double> preprocess_image(const Image& image, Phase phase);

/// Positions divided by the approach length (the -1 sentinel becomes -1/L),
/// phase index divided by 3.
std::vector<double> semantic_features(const SemanticVector& vec, int approach_length_cells);

/// What the controller sees after the payload crosses the link. Returns the
/// observation vector; `bytes_sent` receives the payload length.
std::vector<double> observe(const WorldState& world, ObsMode mode, std::uint64_t* bytes_sent = nullptr);

std::vector<int> default_layer_sizes(ObsMode mode);
/// Image for a 516-wide input, Semantic for a 5-wide input; UnsupportedMode otherwise.
ObsMode mode_of(const MlpParams& params);

struct ActionMask {
  bool extend = true;
  bool switch_ = true;
};
ActionMask action_mask(const WorldState& world);

/// Epsilon-greedy over the allowed actions; ties go to Extend. Always draws
/// once for the exploration test and once more when exploring.
Action select_action(const QValues& q, ActionMask mask, double epsilon, Rng& rng);

/// Fixed-capacity FIFO store of transitions.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition transition);
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  /// Oldest first.
  const Transition& at(std::size_t i) const;
  /// Uniform with replacement.
  std::vector<const Transition*> sample(std::size_t count, Rng& rng) const;

 private:
  std::vector<Transition> slots_;
  std::size_t capacity_;
  std::size_t head_ = 0;  // next slot to overwrite
  std::size_t size_ = 0;
};

struct TrainConfig {
  double learning_rate = 1e-2;
  double discount = 0.99;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  int epsilon_decay_steps = 20000;
  int buffer_capacity = 50000;
  int batch_size = 64;
  int target_sync_interval = 500;  // environment steps
  int episodes = 200;
  ObsMode obs_mode = ObsMode::Semantic;
  // Not part of the environment reward; rescales it before it reaches the TD target.
  double reward_scale = 0.01;
  double clip_norm = 10.0;
  int train_every = 4;      // environment steps per gradient step
  int warmup_steps = 1000;  // transitions collected before the first update
  // Every this many episodes the greedy policy is scored on a held-out seed and the
  // best-scoring snapshot is returned. 0 returns the final parameters.
  int validation_interval = 10;
  // Transitions carry the discounted sum of this many rewards and bootstrap from
  // the state reached after them.
  int n_step = 1;
  // The next-state action is chosen by the online network and valued by the target network.
  bool double_q = true;
  // Step size decays linearly to this value over the training run; negative keeps it constant.
  double learning_rate_final = 1e-4;

  void validate() const;
  double epsilon_at(std::int64_t step) const;
  double learning_rate_at(std::int64_t step, std::int64_t total_steps) const;
};

/// Seed of the held-out episode used for snapshot selection during training.
std::uint64_t validation_seed(std::uint64_t seed);

struct EvalResult {
  EpisodeMetrics metrics;
  double total_reward = 0.0;
  std::int64_t switches = 0;
  std::vector<StepOutcome> log;
};

/// One greedy episode on a fresh world seeded with `seed`.
EvalResult evaluate_policy(const MlpParams& params, const SimConfig& config, std::uint64_t seed);

struct TrainingReport {
  double wall_time_seconds = 0.0;
  std::vector<double> episode_returns;
  EpisodeMetrics final_eval;
  double final_eval_reward = 0.0;
  std::int64_t gradient_steps = 0;
  std::int64_t env_steps = 0;
  std::uint64_t bytes_transmitted = 0;
};

struct TrainResult {
  MlpParams params;
  TrainingReport report;
};

/// Called after each training episode with (episode index, return).
using EpisodeCallback = std::function<void(int, double)>;

/// Seed of the held-out evaluation episode used by dqn_train.
std::uint64_t evaluation_seed(std::uint64_t seed);

TrainResult dqn_train(const SimConfig& config, const TrainConfig& train, std::uint64_t seed,
                      const EpisodeCallback& on_episode = {});

}  // namespace smtc
