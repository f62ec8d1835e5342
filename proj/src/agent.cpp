#include "smtc/agent.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <optional>
#include <string>

#include "smtc/errors.hpp"

namespace smtc {

std::vector<double> preprocess_image(const Image& image, Phase phase) {
  if (image.pixels.size() != Image::kBytes) throw ShapeError("malformed image");
  std::vector<double> obs(kImageObsSize, 0.0);
  constexpr double kScale = 1.0 / (3.0 * kPoolSize * kPoolSize * 255.0);
  for (int py = 0; py < kPooledHeight; ++py) {
    for (int px = 0; px < kPooledWidth; ++px) {
      unsigned sum = 0;
      for (int dy = 0; dy < kPoolSize; ++dy) {
        const auto row = static_cast<std::size_t>(py * kPoolSize + dy) * Image::kWidth;
        for (int dx = 0; dx < kPoolSize; ++dx) {
          const auto i = (row + static_cast<std::size_t>(px * kPoolSize + dx)) * Image::kChannels;
          sum += image.pixels[i] + image.pixels[i + 1] + image.pixels[i + 2];
        }
      }
      obs[static_cast<std::size_t>(py * kPooledWidth + px)] = static_cast<double>(sum) * kScale;
    }
  }
  obs[static_cast<std::size_t>(kPooledWidth * kPooledHeight + phase_index(phase))] = 1.0;
  return obs;
}

std::vector<double> semantic_features(const SemanticVector& vec, int approach_length_cells) {
  const double inv_len = 1.0 / static_cast<double>(approach_length_cells);
  std::vector<double> obs(kSemanticObsSize);
  for (std::size_t i = 0; i < 4; ++i) {
    obs[i] = vec.positions[i] < 0 ? -inv_len : static_cast<double>(vec.positions[i]) * inv_len;
  }
  obs[4] = static_cast<double>(vec.phase_index) / 3.0;
  return obs;
}

std::vector<double> observe(const WorldState& world, ObsMode mode, std::uint64_t* bytes_sent) {
  if (mode == ObsMode::Image) {
    const RawPayload payload = encode_raw(render_frame(world), world.signal.phase);
    if (bytes_sent) *bytes_sent = payload.bytes.size();
    const DecodedRaw received = decode_raw(payload.bytes);
    return preprocess_image(received.image, received.phase);
  }
  const SemanticPayload payload = encode_semantic(extract_semantic(world));
  if (bytes_sent) *bytes_sent = payload.bytes.size();
  return semantic_features(decode_semantic(payload.bytes), world.config.approach_length_cells);
}

std::vector<int> default_layer_sizes(ObsMode mode) {
  if (mode == ObsMode::Image) return {kImageObsSize, 64, 64, 2};
  return {kSemanticObsSize, 32, 32, 2};
}

ObsMode mode_of(const MlpParams& params) {
  if (params.input_size() == kImageObsSize) return ObsMode::Image;
  if (params.input_size() == kSemanticObsSize) return ObsMode::Semantic;
  throw UnsupportedMode("network input width " + std::to_string(params.input_size()) +
                        " matches no observation mode");
}

ActionMask action_mask(const WorldState& world) { return {true, switch_allowed(world)}; }

Action select_action(const QValues& q, ActionMask mask, double epsilon, Rng& rng) {
  if (!mask.switch_) {
    rng.uniform();
    return Action::Extend;
  }
  if (rng.uniform() < epsilon) return rng.below(2) == 0 ? Action::Extend : Action::Switch;
  return q[1] > q[0] ? Action::Switch : Action::Extend;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("buffer_capacity", "must be positive");
  slots_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayBuffer::push(Transition transition) {
  if (slots_.size() < capacity_) {
    slots_.push_back(std::move(transition));
  } else {
    slots_[head_] = std::move(transition);
  }
  head_ = (head_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= size_) throw std::out_of_range("replay index");
  const std::size_t oldest = size_ < capacity_ ? 0 : head_;
  return slots_[(oldest + i) % capacity_];
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t count, Rng& rng) const {
  if (size_ == 0) throw std::logic_error("sampling an empty replay buffer");
  std::vector<const Transition*> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(&slots_[rng.below(size_)]);
  return out;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate", "must be positive");
  if (std::isnan(learning_rate_final)) throw ConfigError("learning_rate_final", "must be a number");
  if (!(discount >= 0.0 && discount < 1.0)) throw ConfigError("discount", "must lie in [0, 1)");
  if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0)) {
    throw ConfigError("epsilon_start", "must lie in [0, 1]");
  }
  if (!(epsilon_end >= 0.0 && epsilon_end <= epsilon_start)) {
    throw ConfigError("epsilon_end", "must lie in [0, epsilon_start]");
  }
  if (epsilon_decay_steps <= 0) throw ConfigError("epsilon_decay_steps", "must be positive");
  if (buffer_capacity <= 0) throw ConfigError("buffer_capacity", "must be positive");
  if (batch_size <= 0) throw ConfigError("batch_size", "must be positive");
  if (target_sync_interval <= 0) throw ConfigError("target_sync_interval", "must be positive");
  if (episodes <= 0) throw ConfigError("episodes", "must be positive");
  if (!(reward_scale > 0.0)) throw ConfigError("reward_scale", "must be positive");
  if (!(clip_norm > 0.0)) throw ConfigError("clip_norm", "must be positive");
  if (n_step <= 0) throw ConfigError("n_step", "must be positive");
  if (validation_interval < 0) throw ConfigError("validation_interval", "must be nonnegative");
  if (train_every <= 0) throw ConfigError("train_every", "must be positive");
  if (warmup_steps < 0) throw ConfigError("warmup_steps", "must be nonnegative");
}

double TrainConfig::epsilon_at(std::int64_t step) const {
  if (step >= epsilon_decay_steps) return epsilon_end;
  const double frac = static_cast<double>(step) / static_cast<double>(epsilon_decay_steps);
  return epsilon_start + (epsilon_end - epsilon_start) * frac;
}

namespace {

void check_finite(const QValues& q, std::int64_t step) {
  if (!std::isfinite(q[0]) || !std::isfinite(q[1])) {
    throw TrainingDiverged("non-finite Q-value at training step " + std::to_string(step));
  }
}

}  // namespace

EvalResult evaluate_policy(const MlpParams& params, const SimConfig& config, std::uint64_t seed) {
  const ObsMode mode = mode_of(params);
  WorldState world = init_world(config, seed);
  EvalResult result;
  Rng unused(0);
  while (!world.finished()) {
    const QValues q = mlp_forward(params, observe(world, mode));
    check_finite(q, world.time);
    const StepOutcome out = step(world, select_action(q, action_mask(world), 0.0, unused));
    result.total_reward += out.reward;
    if (out.switch_initiated) ++result.switches;
  }
  result.metrics = episode_metrics(world.log, config);
  result.log = std::move(world.log);
  return result;
}

std::uint64_t evaluation_seed(std::uint64_t seed) { return derive_seed(seed, 0xE7A1); }
std::uint64_t validation_seed(std::uint64_t seed) { return derive_seed(seed, 0x7A11); }

double TrainConfig::learning_rate_at(std::int64_t step, std::int64_t total_steps) const {
  if (learning_rate_final < 0.0 || total_steps <= 0) return learning_rate;
  const double frac = std::min(1.0, static_cast<double>(step) / static_cast<double>(total_steps));
  return learning_rate + (learning_rate_final - learning_rate) * frac;
}

namespace {

struct PendingStep {
  std::vector<double> observation;
  Action action;
  double reward;
};

}  // namespace

TrainResult dqn_train(const SimConfig& config, const TrainConfig& train, std::uint64_t seed,
                      const EpisodeCallback& on_episode) {
  config.validate();
  train.validate();
  Rng init_rng(derive_seed(seed, 1));
  Rng agent_rng(derive_seed(seed, 2));
  TrainResult result{MlpParams::he_uniform(default_layer_sizes(train.obs_mode), init_rng), {}};
  MlpParams& params = result.params;
  TrainingReport& report = result.report;
  MlpParams target = params;
  ReplayBuffer buffer(static_cast<std::size_t>(train.buffer_capacity));

  const double bootstrap_discount = std::pow(train.discount, train.n_step);
  const std::int64_t total_steps =
      static_cast<std::int64_t>(train.episodes) * config.horizon_steps;
  std::optional<MlpParams> best;
  double best_score = 0.0;

  const auto started = std::chrono::steady_clock::now();
  std::int64_t steps = 0;
  for (int episode = 0; episode < train.episodes; ++episode) {
    WorldState world = init_world(config, derive_seed(seed, 1000 + static_cast<std::uint64_t>(episode)));
    std::uint64_t sent = 0;
    std::vector<double> obs = observe(world, train.obs_mode, &sent);
    double episode_return = 0.0;
    // Steps at the end of an episode without n successors are not stored.
    std::deque<PendingStep> pending;
    while (!world.finished()) {
      report.bytes_transmitted += sent;
      const QValues q = mlp_forward(params, obs);
      check_finite(q, steps);
      const Action action =
          select_action(q, action_mask(world), train.epsilon_at(steps), agent_rng);
      const StepOutcome out = step(world, action);
      episode_return += out.reward;
      std::vector<double> next = observe(world, train.obs_mode, &sent);
      pending.push_back({std::move(obs), action, out.reward});
      if (pending.size() == static_cast<std::size_t>(train.n_step)) {
        double sum = 0.0;
        double weight = 1.0;
        for (const auto& p : pending) {
          sum += weight * p.reward;
          weight *= train.discount;
        }
        // The horizon is a time limit, not a terminal state, so every transition bootstraps.
        buffer.push(Transition{std::move(pending.front().observation), pending.front().action,
                               sum * train.reward_scale, next, false, switch_allowed(world)});
        pending.pop_front();
      }
      ++steps;

      if (steps >= train.warmup_steps && steps % train.train_every == 0 &&
          buffer.size() >= static_cast<std::size_t>(train.batch_size)) {
        const auto batch = buffer.sample(static_cast<std::size_t>(train.batch_size), agent_rng);
        GradientResult g = mlp_gradients(params, batch, target, bootstrap_discount, train.double_q);
        if (!std::isfinite(g.loss)) {
          throw TrainingDiverged("non-finite loss at training step " + std::to_string(steps));
        }
        sgd_step(params, std::move(g.gradients), train.learning_rate_at(steps, total_steps),
                 train.clip_norm);
        ++report.gradient_steps;
      }
      if (steps % train.target_sync_interval == 0) target = params;
      obs = std::move(next);
    }
    report.episode_returns.push_back(episode_return);
    if (on_episode) on_episode(episode, episode_return);
    if (train.validation_interval > 0 && (episode + 1) % train.validation_interval == 0 &&
        steps >= train.warmup_steps) {
      const double score = evaluate_policy(params, config, validation_seed(seed)).total_reward;
      if (!best || score > best_score) {
        best = params;
        best_score = score;
      }
    }
  }
  if (best) params = std::move(*best);
  report.env_steps = steps;
  report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  const EvalResult eval = evaluate_policy(params, config, evaluation_seed(seed));
  report.final_eval = eval.metrics;
  report.final_eval_reward = eval.total_reward;
  return result;
}

}  // namespace smtc
