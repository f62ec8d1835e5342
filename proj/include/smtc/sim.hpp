#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include "smtc/rng.hpp"

namespace smtc {

enum class Approach : std::uint8_t { N = 0, E = 1, S = 2, W = 3 };
inline constexpr std::array<Approach, 4> kApproaches{Approach::N, Approach::E, Approach::S,
                                                     Approach::W};
inline constexpr std::size_t index(Approach a) { return static_cast<std::size_t>(a); }
std::string_view approach_name(Approach a);

enum class Phase : std::uint8_t { NsGreen = 0, NsYellow = 1, EwGreen = 2, EwYellow = 3 };
inline constexpr int phase_index(Phase p) { return static_cast<int>(p); }
inline constexpr bool is_green(Phase p) { return p == Phase::NsGreen || p == Phase::EwGreen; }
inline constexpr bool is_yellow(Phase p) { return !is_green(p); }
inline constexpr Phase next_phase(Phase p) {
  return static_cast<Phase>((static_cast<int>(p) + 1) % 4);
}
/// True when `a` discharges under phase `p` (green only; yellow holds everyone).
inline constexpr bool has_green(Phase p, Approach a) {
  const bool ns = a == Approach::N || a == Approach::S;
  return ns ? p == Phase::NsGreen : p == Phase::EwGreen;
}

enum class Action : std::uint8_t { Extend = 0, Switch = 1 };

struct RewardWeights {
  double queue = 0.5;
  double wait = 0.5;
  double switching = 2.0;
  bool operator==(const RewardWeights&) const = default;
};

struct SimConfig {
  int approach_length_cells = 25;
  std::array<double, 4> arrival_prob{0.15, 0.05, 0.15, 0.05};  // N, E, S, W
  int yellow_steps = 3;
  int min_green_steps = 10;
  int horizon_steps = 1800;
  double step_seconds = 1.0;
  RewardWeights reward_weights;
  int gap_threshold_cells = 2;

  /// Throws ConfigError naming the first offending field.
  void validate() const;
  double free_flow_seconds() const { return approach_length_cells * step_seconds; }
  bool operator==(const SimConfig&) const = default;
};

struct VehicleRecord {
  std::uint64_t id = 0;
  Approach approach = Approach::N;
  int cell = 0;  // 0 = stop line
  std::int64_t spawn_step = 0;
  std::int64_t wait_steps = 0;
  bool halted = false;  // did not move during the last step
  bool operator==(const VehicleRecord&) const = default;
};

struct SignalState {
  Phase phase = Phase::NsGreen;
  int phase_elapsed = 0;
  bool operator==(const SignalState&) const = default;
};

struct ExitRecord {
  std::uint64_t vehicle_id = 0;
  std::int64_t travel_steps = 0;
  bool operator==(const ExitRecord&) const = default;
};

struct StepOutcome {
  std::int64_t time = 0;
  Phase phase = Phase::NsGreen;  // phase in force during the motion update
  std::int64_t queue_total = 0;
  std::int64_t wait_increment = 0;
  bool switch_initiated = false;
  double reward = 0.0;
  std::vector<ExitRecord> exited;
  bool operator==(const StepOutcome&) const = default;
};

/// reward = -(w_q * queue_total + w_w * wait_increment + w_s * [switch_initiated])
double reward_of(const StepOutcome& outcome, const RewardWeights& weights);

struct EpisodeMetrics {
  double avg_travel_time = 0.0;  // seconds
  double avg_delay = 0.0;        // seconds
  std::int64_t vehicles_completed = 0;
  std::int64_t total_steps = 0;
  bool no_completions = true;
  bool operator==(const EpisodeMetrics&) const = default;
};

struct WorldState {
  SimConfig config;
  std::int64_t time = 0;
  std::array<std::vector<VehicleRecord>, 4> lanes;  // per approach, ascending cell
  SignalState signal;
  Rng rng;
  std::uint64_t spawned = 0;
  std::vector<StepOutcome> log;

  std::vector<VehicleRecord> vehicles() const;
  std::size_t vehicle_count() const;
  bool finished() const { return time >= config.horizon_steps; }
  bool operator==(const WorldState&) const = default;
};

WorldState init_world(const SimConfig& config, std::uint64_t seed);

/// True when a Switch request would take effect on the next step.
bool switch_allowed(const WorldState& world);

/// Advances one step in place. Throws EpisodeFinished at the horizon.
StepOutcome step(WorldState& world, Action action);

/// Fixed-cycle controller: switch once the current green has lasted `green_split_steps`.
Action fixed_time_action(const WorldState& world, int green_split_steps);

EpisodeMetrics run_fixed_time(const SimConfig& config, int green_split_steps, std::uint64_t seed);

EpisodeMetrics episode_metrics(const std::vector<StepOutcome>& log, const SimConfig& config);

}  // namespace smtc
