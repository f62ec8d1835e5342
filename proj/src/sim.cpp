#include "smtc/sim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "smtc/errors.hpp"

namespace smtc {

std::string_view approach_name(Approach a) {
  switch (a) {
    case Approach::N:
      return "N";
    case Approach::E:
      return "E";
    case Approach::S:
      return "S";
    case Approach::W:
      return "W";
  }
  return "?";
}

void SimConfig::validate() const {
  if (approach_length_cells <= 0) throw ConfigError("approach_length_cells", "must be positive");
  for (std::size_t i = 0; i < arrival_prob.size(); ++i) {
    const double p = arrival_prob[i];
    if (!(p >= 0.0 && p <= 1.0)) {
      throw ConfigError("arrival_prob[" + std::to_string(i) + "]", "must lie in [0, 1]");
    }
  }
  if (yellow_steps < 0) throw ConfigError("yellow_steps", "must be nonnegative");
  if (min_green_steps <= 0) throw ConfigError("min_green_steps", "must be positive");
  if (min_green_steps <= yellow_steps) {
    throw ConfigError("min_green_steps", "must exceed yellow_steps");
  }
  if (horizon_steps <= 0) throw ConfigError("horizon_steps", "must be positive");
  if (!(step_seconds > 0.0) || !std::isfinite(step_seconds)) {
    throw ConfigError("step_seconds", "must be a positive finite number");
  }
  const auto& w = reward_weights;
  if (!(w.queue >= 0.0)) throw ConfigError("reward_weights.queue", "must be nonnegative");
  if (!(w.wait >= 0.0)) throw ConfigError("reward_weights.wait", "must be nonnegative");
  if (!(w.switching >= 0.0)) throw ConfigError("reward_weights.switch", "must be nonnegative");
  if (gap_threshold_cells <= 0) throw ConfigError("gap_threshold_cells", "must be positive");
}

double reward_of(const StepOutcome& outcome, const RewardWeights& weights) {
  return -(weights.queue * static_cast<double>(outcome.queue_total) +
           weights.wait * static_cast<double>(outcome.wait_increment) +
           weights.switching * (outcome.switch_initiated ? 1.0 : 0.0));
}

std::vector<VehicleRecord> WorldState::vehicles() const {
  std::vector<VehicleRecord> all;
  all.reserve(vehicle_count());
  for (const auto& lane : lanes) all.insert(all.end(), lane.begin(), lane.end());
  return all;
}

std::size_t WorldState::vehicle_count() const {
  std::size_t n = 0;
  for (const auto& lane : lanes) n += lane.size();
  return n;
}

WorldState init_world(const SimConfig& config, std::uint64_t seed) {
  config.validate();
  WorldState world;
  world.config = config;
  world.rng = Rng(seed);
  world.log.reserve(static_cast<std::size_t>(config.horizon_steps));
  return world;
}

bool switch_allowed(const WorldState& world) {
  return is_green(world.signal.phase) &&
         world.signal.phase_elapsed >= world.config.min_green_steps;
}

StepOutcome step(WorldState& world, Action action) {
  const SimConfig& cfg = world.config;
  if (world.finished()) {
    throw EpisodeFinished("step at t=" + std::to_string(world.time) + " beyond horizon " +
                          std::to_string(cfg.horizon_steps));
  }

  StepOutcome out;
  out.time = world.time;
  SignalState& signal = world.signal;

  // (1) action gating; masked switches are dropped without penalty
  if (action == Action::Switch && switch_allowed(world)) {
    out.switch_initiated = true;
    signal.phase = next_phase(signal.phase);
    if (cfg.yellow_steps == 0) signal.phase = next_phase(signal.phase);
    signal.phase_elapsed = 0;
  }
  out.phase = signal.phase;

  // (2) motion, front to back so a discharging leader frees its cell for the follower
  for (const Approach a : kApproaches) {
    auto& lane = world.lanes[index(a)];
    const bool green = has_green(signal.phase, a);
    std::vector<VehicleRecord> kept;
    kept.reserve(lane.size() + 1);
    int front = -1;  // cell held by the vehicle ahead after its move
    for (VehicleRecord v : lane) {
      bool moved = false;
      if (v.cell == 0) {
        if (green) {
          out.exited.push_back({v.id, world.time - v.spawn_step});
          continue;
        }
      } else if (front < v.cell - 1) {
        --v.cell;
        moved = true;
      }
      // (4) waiting
      v.halted = !moved;
      if (!moved) {
        ++v.wait_steps;
        ++out.queue_total;
        ++out.wait_increment;
      }
      front = v.cell;
      kept.push_back(v);
    }
    lane = std::move(kept);
  }

  // (3) arrivals; one draw per approach per step regardless of outcome
  const int entry = cfg.approach_length_cells - 1;
  for (const Approach a : kApproaches) {
    const bool arrives = world.rng.bernoulli(cfg.arrival_prob[index(a)]);
    auto& lane = world.lanes[index(a)];
    if (arrives && (lane.empty() || lane.back().cell < entry)) {
      lane.push_back(VehicleRecord{world.spawned++, a, entry, world.time, 0, false});
    }
  }

  // (5) reward
  out.reward = reward_of(out, cfg.reward_weights);

  ++signal.phase_elapsed;
  if (is_yellow(signal.phase) && signal.phase_elapsed >= cfg.yellow_steps) {
    signal.phase = next_phase(signal.phase);
    signal.phase_elapsed = 0;
  }
  ++world.time;
  world.log.push_back(out);
  return out;
}

Action fixed_time_action(const WorldState& world, int green_split_steps) {
  return is_green(world.signal.phase) && world.signal.phase_elapsed >= green_split_steps
             ? Action::Switch
             : Action::Extend;
}

EpisodeMetrics run_fixed_time(const SimConfig& config, int green_split_steps,
                              std::uint64_t seed) {
  config.validate();
  if (green_split_steps < config.min_green_steps) {
    throw ConfigError("green_split_steps", "must be at least min_green_steps");
  }
  WorldState world = init_world(config, seed);
  while (!world.finished()) step(world, fixed_time_action(world, green_split_steps));
  return episode_metrics(world.log, config);
}

EpisodeMetrics episode_metrics(const std::vector<StepOutcome>& log, const SimConfig& config) {
  EpisodeMetrics m;
  m.total_steps = static_cast<std::int64_t>(log.size());
  double travel_sum = 0.0;
  for (const auto& outcome : log) {
    for (const auto& exit : outcome.exited) {
      travel_sum += static_cast<double>(exit.travel_steps) * config.step_seconds;
      ++m.vehicles_completed;
    }
  }
  if (m.vehicles_completed == 0) return m;
  m.no_completions = false;
  m.avg_travel_time = travel_sum / static_cast<double>(m.vehicles_completed);
  m.avg_delay = std::max(0.0, m.avg_travel_time - config.free_flow_seconds());
  return m;
}

}  // namespace smtc
