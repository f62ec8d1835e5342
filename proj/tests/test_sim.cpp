#include <gtest/gtest.h>

#include <map>

#include "smtc/errors.hpp"
#include "smtc/sim.hpp"

using namespace smtc;

namespace {

SimConfig quiet_config() {
  SimConfig c;
  c.arrival_prob = {0.0, 0.0, 0.0, 0.0};
  return c;
}

void place(WorldState& w, Approach a, int cell, std::int64_t spawn = 0) {
  auto& lane = w.lanes[index(a)];
  lane.push_back({w.spawned++, a, cell, spawn, 0, false});
  std::sort(lane.begin(), lane.end(),
            [](const VehicleRecord& x, const VehicleRecord& y) { return x.cell < y.cell; });
}

Action random_action(Rng& rng) { return rng.bernoulli(0.3) ? Action::Switch : Action::Extend; }

}  // namespace

TEST(InitWorld, StartsEmptyOnNsGreen) {
  const WorldState w = init_world(SimConfig{}, 42);
  EXPECT_EQ(w.time, 0);
  EXPECT_EQ(w.vehicle_count(), 0u);
  EXPECT_EQ(w.signal.phase, Phase::NsGreen);
  EXPECT_EQ(w.signal.phase_elapsed, 0);
  EXPECT_EQ(phase_index(w.signal.phase), 0);
}

TEST(InitWorld, IdenticalInputsGiveIdenticalWorlds) {
  EXPECT_EQ(init_world(SimConfig{}, 7), init_world(SimConfig{}, 7));
}

TEST(InitWorld, RejectsInvalidConfigNamingField) {
  SimConfig c;
  c.arrival_prob[2] = 1.5;
  try {
    init_world(c, 1);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "arrival_prob[2]");
  }
  SimConfig d;
  d.min_green_steps = 3;  // not above yellow_steps
  EXPECT_THROW(init_world(d, 1), ConfigError);
  SimConfig e;
  e.approach_length_cells = 0;
  EXPECT_THROW(init_world(e, 1), ConfigError);
}

TEST(Step, EmptyWorldExtendHasZeroReward) {
  WorldState w = init_world(quiet_config(), 1);
  const StepOutcome out = step(w, Action::Extend);
  EXPECT_EQ(out.queue_total, 0);
  EXPECT_EQ(out.reward, 0.0);
  EXPECT_EQ(w.time, 1);
}

TEST(Step, VehicleOnGreenAdvancesOneCell) {
  WorldState w = init_world(quiet_config(), 1);
  place(w, Approach::N, 3);
  const StepOutcome out = step(w, Action::Extend);
  ASSERT_EQ(w.lanes[index(Approach::N)].size(), 1u);
  EXPECT_EQ(w.lanes[index(Approach::N)][0].cell, 2);
  EXPECT_EQ(out.wait_increment, 0);
}

TEST(Step, SwitchDuringYellowIsCoerced) {
  WorldState w = init_world(quiet_config(), 1);
  w.signal = {Phase::NsYellow, 0};
  const StepOutcome out = step(w, Action::Switch);
  EXPECT_FALSE(out.switch_initiated);
  EXPECT_EQ(w.signal.phase, Phase::NsYellow);
  EXPECT_EQ(w.signal.phase_elapsed, 1);
  EXPECT_EQ(out.reward, 0.0);
}

TEST(Step, SwitchBeforeMinGreenIsCoerced) {
  WorldState w = init_world(quiet_config(), 1);
  for (int i = 0; i < 9; ++i) EXPECT_FALSE(step(w, Action::Switch).switch_initiated);
  EXPECT_EQ(w.signal.phase_elapsed, 9);
  step(w, Action::Extend);
  const StepOutcome out = step(w, Action::Switch);
  EXPECT_TRUE(out.switch_initiated);
  EXPECT_EQ(out.phase, Phase::NsYellow);
  EXPECT_DOUBLE_EQ(out.reward, -2.0);
}

TEST(Step, YellowExpiresAfterExactlyYellowSteps) {
  WorldState w = init_world(quiet_config(), 1);
  w.signal.phase_elapsed = 10;
  step(w, Action::Switch);
  EXPECT_EQ(w.signal.phase, Phase::NsYellow);
  step(w, Action::Extend);
  EXPECT_EQ(w.signal.phase, Phase::NsYellow);
  step(w, Action::Extend);
  EXPECT_EQ(w.signal.phase, Phase::EwGreen);
  EXPECT_EQ(w.signal.phase_elapsed, 0);
}

TEST(Step, NoDischargeDuringYellowOrRed) {
  WorldState w = init_world(quiet_config(), 1);
  place(w, Approach::E, 0);  // red under NS green
  w.signal = {Phase::NsYellow, 0};
  place(w, Approach::N, 0);
  const StepOutcome out = step(w, Action::Extend);
  EXPECT_TRUE(out.exited.empty());
  EXPECT_EQ(out.queue_total, 2);
  EXPECT_EQ(out.wait_increment, 2);
  EXPECT_DOUBLE_EQ(out.reward, -2.0);
}

TEST(Step, QueueDischargesAsPlatoon) {
  WorldState w = init_world(quiet_config(), 1);
  for (int c : {0, 1, 2}) place(w, Approach::S, c);
  const StepOutcome out = step(w, Action::Extend);
  EXPECT_EQ(out.exited.size(), 1u);
  const auto& lane = w.lanes[index(Approach::S)];
  ASSERT_EQ(lane.size(), 2u);
  EXPECT_EQ(lane[0].cell, 0);
  EXPECT_EQ(lane[1].cell, 1);
  EXPECT_EQ(out.queue_total, 0);
}

TEST(Step, StepAfterHorizonThrows) {
  SimConfig c = quiet_config();
  c.horizon_steps = 2;
  WorldState w = init_world(c, 1);
  step(w, Action::Extend);
  step(w, Action::Extend);
  EXPECT_THROW(step(w, Action::Extend), EpisodeFinished);
}

TEST(Step, UnobstructedVehicleHasZeroDelay) {
  WorldState w = init_world(quiet_config(), 1);
  w.config.arrival_prob = {1.0, 0.0, 0.0, 0.0};
  step(w, Action::Extend);
  w.config.arrival_prob = {0.0, 0.0, 0.0, 0.0};
  while (w.vehicle_count() > 0) step(w, Action::Extend);
  const EpisodeMetrics m = episode_metrics(w.log, w.config);
  EXPECT_EQ(m.vehicles_completed, 1);
  EXPECT_DOUBLE_EQ(m.avg_travel_time, 25.0);
  EXPECT_DOUBLE_EQ(m.avg_delay, 0.0);
}

TEST(Properties, ConservationExclusionRewardIdentity) {
  SimConfig c;
  c.arrival_prob = {0.4, 0.3, 0.5, 0.2};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    WorldState w = init_world(c, seed);
    Rng actions(seed + 100);
    std::uint64_t exited = 0;
    while (!w.finished()) {
      const StepOutcome out = step(w, random_action(actions));
      exited += out.exited.size();
      ASSERT_EQ(w.spawned, w.vehicle_count() + exited);
      for (const auto& lane : w.lanes) {
        for (std::size_t i = 1; i < lane.size(); ++i) ASSERT_LT(lane[i - 1].cell, lane[i].cell);
        for (const auto& v : lane) {
          ASSERT_GE(v.cell, 0);
          ASSERT_LT(v.cell, c.approach_length_cells);
          ASSERT_LE(v.wait_steps, w.time - v.spawn_step);
        }
      }
      ASSERT_EQ(out.reward, reward_of(out, c.reward_weights));
      ASSERT_EQ(out.queue_total, out.wait_increment);
    }
  }
}

TEST(Properties, ZeroArrivalRewardCountsSwitchesOnly) {
  SimConfig c = quiet_config();
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    WorldState w = init_world(c, seed);
    Rng actions(seed);
    double total = 0.0;
    int switches = 0;
    while (!w.finished()) {
      const StepOutcome out = step(w, random_action(actions));
      total += out.reward;
      switches += out.switch_initiated;
    }
    EXPECT_GT(switches, 0);
    EXPECT_EQ(total, -c.reward_weights.switching * switches);
  }
}

TEST(Properties, TrajectoryDeterministic) {
  SimConfig c;
  auto run = [&c] {
    WorldState w = init_world(c, 99);
    Rng actions(5);
    while (!w.finished()) step(w, random_action(actions));
    return w;
  };
  EXPECT_EQ(run(), run());
}

TEST(FixedTime, ZeroArrivalsGiveEmptyMetrics) {
  const EpisodeMetrics m = run_fixed_time(quiet_config(), 30, 3);
  EXPECT_EQ(m.vehicles_completed, 0);
  EXPECT_EQ(m.avg_delay, 0.0);
  EXPECT_TRUE(m.no_completions);
  EXPECT_EQ(m.total_steps, 1800);
}

TEST(FixedTime, DeterministicAndCyclic) {
  const SimConfig c;
  EXPECT_EQ(run_fixed_time(c, 30, 11), run_fixed_time(c, 30, 11));
  EXPECT_THROW(run_fixed_time(c, 5, 11), ConfigError);

  WorldState w = init_world(c, 1);
  std::vector<std::int64_t> switch_times;
  while (w.time < 200) {
    if (step(w, fixed_time_action(w, 30)).switch_initiated) switch_times.push_back(w.time - 1);
  }
  ASSERT_GE(switch_times.size(), 3u);
  EXPECT_EQ(switch_times[0], 30);
  EXPECT_EQ(switch_times[1] - switch_times[0], 33);
  EXPECT_EQ(switch_times[2] - switch_times[1], 33);
}

TEST(EpisodeMetrics, EmptyLogIsFlagged) {
  const EpisodeMetrics m = episode_metrics({}, SimConfig{});
  EXPECT_EQ(m.avg_travel_time, 0.0);
  EXPECT_EQ(m.avg_delay, 0.0);
  EXPECT_EQ(m.vehicles_completed, 0);
  EXPECT_TRUE(m.no_completions);
}

// Recount from vehicle appearances and disappearances alone, ignoring the exit records.
TEST(EpisodeMetrics, MatchesNaiveEventRecount) {
  SimConfig c;
  c.arrival_prob = {0.3, 0.2, 0.35, 0.1};
  c.horizon_steps = 200;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    WorldState w = init_world(c, seed);
    Rng actions(seed * 3 + 1);
    std::map<std::uint64_t, std::int64_t> seen_at;
    std::vector<std::int64_t> travel;
    while (!w.finished()) {
      const std::int64_t t = w.time;
      step(w, random_action(actions));
      std::map<std::uint64_t, std::int64_t> now;
      for (const auto& v : w.vehicles()) now[v.id] = seen_at.count(v.id) ? seen_at[v.id] : t;
      for (const auto& [id, spawn] : seen_at) {
        if (!now.count(id)) travel.push_back(t - spawn);
      }
      seen_at = std::move(now);
    }
    const EpisodeMetrics m = episode_metrics(w.log, c);
    ASSERT_EQ(m.vehicles_completed, static_cast<std::int64_t>(travel.size()));
    ASSERT_FALSE(travel.empty());
    double sum = 0.0;
    for (auto x : travel) sum += static_cast<double>(x);
    EXPECT_DOUBLE_EQ(m.avg_travel_time, sum / static_cast<double>(travel.size()));
    EXPECT_DOUBLE_EQ(m.avg_delay, sum / static_cast<double>(travel.size()) - 25.0);
    EXPECT_GE(m.avg_delay, 0.0);
  }
}
