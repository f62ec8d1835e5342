#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "smtc/errors.hpp"
#include "smtc/harness.hpp"

using namespace smtc;
using nlohmann::json;

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "smtc_test_harness" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

SimConfig tiny_config() {
  SimConfig c;
  c.horizon_steps = 60;
  return c;
}

TrainConfig tiny_train() {
  TrainConfig t;
  t.episodes = 2;
  t.warmup_steps = 32;
  t.batch_size = 16;
  t.epsilon_decay_steps = 60;
  t.validation_interval = 1;
  return t;
}

std::string field_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "<no error>";
}

}  // namespace

TEST(Scenario, DefaultsRoundTrip) {
  const SimConfig c;
  EXPECT_EQ(scenario_from_json(scenario_to_json(c)), c);
  EXPECT_EQ(scenario_from_json(json::object()), c);
  SimConfig d;
  d.arrival_prob = {0.05, 0.05, 0.3, 0.05};
  d.reward_weights = {1.0, 0.0, 3.0};
  EXPECT_EQ(scenario_from_json(scenario_to_json(d)), d);
}

TEST(Scenario, ErrorsNameTheField) {
  EXPECT_EQ(field_of([] { scenario_from_json(json{{"arrival_prob", {0.1, 0.1}}}); }), "arrival_prob");
  EXPECT_EQ(field_of([] { scenario_from_json(json{{"yellow_steps", "three"}}); }), "yellow_steps");
  EXPECT_EQ(field_of([] { scenario_from_json(json{{"min_green_steps", 0}}); }), "min_green_steps");
  EXPECT_EQ(field_of([] { scenario_from_json(json{{"colour", 1}}); }), "colour");
  EXPECT_EQ(field_of([] { scenario_from_json(json{{"reward_weights", {1, 2}}}); }), "reward_weights");
  EXPECT_EQ(field_of([] { train_config_from_json(json{{"discount", 1.5}}); }), "discount");
  EXPECT_EQ(field_of([] { train_config_from_json(json{{"obs_mode", "video"}}); }), "obs_mode");
  EXPECT_EQ(field_of([] { selected_features_from_json(json{{"selected_features", {"queue"}}}); }),
            "selected_features");
}

TEST(Scenario, LoadFile) {
  const auto dir = scratch("load");
  write_text(dir / "s.json",
             R"({"arrival_prob": [0.05, 0.05, 0.3, 0.05], "train": {"episodes": 7, "obs_mode": "image"}})");
  const Scenario s = load_scenario(dir / "s.json");
  EXPECT_EQ(s.sim.arrival_prob[2], 0.3);
  EXPECT_EQ(s.train.episodes, 7);
  EXPECT_EQ(s.train.obs_mode, ObsMode::Image);
  EXPECT_EQ(s.selected_features, kDefaultSelectedFeatures);
  write_text(dir / "bad.json", "{ not json");
  EXPECT_THROW(load_scenario(dir / "bad.json"), ConfigError);
  EXPECT_THROW(load_scenario(dir / "missing.json"), IoError);
  EXPECT_EQ(load_scenario({}).sim, SimConfig{});
}

TEST(ConfigHash, StableAndSensitive) {
  const json a = scenario_to_json(SimConfig{});
  EXPECT_EQ(config_hash(a), config_hash(scenario_to_json(SimConfig{})));
  EXPECT_EQ(config_hash(a).size(), 16u);
  SimConfig c;
  c.horizon_steps = 1801;
  EXPECT_NE(config_hash(a), config_hash(scenario_to_json(c)));
  EXPECT_EQ(config_hash(json("")), "07cc7607b4949e25");  // FNV-1a of the two-byte dump ""
}

TEST(Csv, EpisodeLogAndMetrics) {
  WorldState w = init_world(tiny_config(), 3);
  while (!w.finished()) step(w, Action::Extend);
  const std::string log = episode_log_csv(w.log);
  EXPECT_EQ(log.substr(0, log.find('\n')), "time,phase,queue_total,wait_increment,switch,reward");
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 61);
  EXPECT_NE(log.find("\n0,0,"), std::string::npos);
  EpisodeMetrics m;
  m.avg_travel_time = 27.5;
  m.avg_delay = 2.5;
  m.vehicles_completed = 4;
  m.total_steps = 60;
  m.no_completions = false;
  EXPECT_EQ(metrics_csv(m),
            "avg_travel_time_s,avg_delay_s,vehicles_completed,total_steps,no_completions\n"
            "27.500000,2.500000,4,60,0\n");
}

TEST(Csv, CommReport) {
  const std::vector<std::pair<std::string, CommReport>> rows{
      {"image", comm_report(2, ObsMode::Image)}, {"semantic", comm_report(2, ObsMode::Semantic)}};
  EXPECT_EQ(comm_report_csv(rows),
            "mode,per_step_bytes,total_bytes,reduction_vs_raw\n"
            "image,24577,49154,0.000000\n"
            "semantic,20,40,0.999186\n");
}

TEST(Comparison, ZeroArrivalsAndCommColumns) {
  SimConfig c = tiny_config();
  c.arrival_prob = {0, 0, 0, 0};
  const std::vector<std::uint64_t> seeds{1, 2};
  const ComparisonTable t = run_comparison(c, tiny_train(), seeds);
  ASSERT_TRUE(t.complete());
  ASSERT_EQ(t.rows.size(), 3u);
  EXPECT_EQ(t.rows[0].method, "Static");
  EXPECT_EQ(t.rows[1].method, "DRL");
  EXPECT_EQ(t.rows[2].method, "XAI-DRL");
  for (const auto& r : t.rows) {
    EXPECT_EQ(r.avg_travel_time, 0.0);
    EXPECT_EQ(r.seeds, 2);
  }
  EXPECT_FALSE(t.rows[0].comm_bytes_per_step);
  EXPECT_EQ(t.rows[1].comm_bytes_per_step, 24577u);
  EXPECT_EQ(t.rows[2].comm_bytes_per_step, 20u);
  const std::string csv = comparison_csv(t);
  EXPECT_NE(csv.find("\nStatic,0.0000,0.0000,,,2,ok\n"), std::string::npos);
  EXPECT_NE(csv.find("\nDRL,0.0000,0.0000,24577,1474620,2,ok\n"), std::string::npos);
  EXPECT_NE(csv.find("\nXAI-DRL,0.0000,0.0000,20,1200,2,ok\n"), std::string::npos);
  const std::string text = comparison_text(t);
  EXPECT_NE(text.find("Training (s)"), std::string::npos);
  EXPECT_NE(text.find("seeds: 1 2\n"), std::string::npos);
}

TEST(Comparison, GoldenCsvOnTinyConfig) {
  const std::vector<std::uint64_t> seeds{4};
  const auto dir = scratch("golden");
  CompareOptions opt;
  opt.run_dir = dir;
  const std::string a = comparison_csv(run_comparison(tiny_config(), tiny_train(), seeds, opt));
  const std::string b = comparison_csv(run_comparison(tiny_config(), tiny_train(), seeds));
  EXPECT_EQ(a, b);
  // Static row: fixed split 30 on the evaluation seed, computed directly.
  const EpisodeMetrics m = run_fixed_time(tiny_config(), 30, evaluation_seed(4));
  char expected[128];
  std::snprintf(expected, sizeof expected, "\nStatic,%.4f,%.4f,,,1,ok\n", m.avg_travel_time, m.avg_delay);
  EXPECT_NE(a.find(expected), std::string::npos) << a;
  EXPECT_TRUE(std::filesystem::exists(dir / "seed_4" / "image" / "model.smtc"));
  EXPECT_TRUE(std::filesystem::exists(dir / "seed_4" / "semantic" / "training.csv"));
}

TEST(Comparison, FailedRowIsReported) {
  TrainConfig t = tiny_train();
  t.learning_rate = 1e6;
  t.clip_norm = 1e12;
  t.episodes = 3;
  const std::vector<std::uint64_t> seeds{1};
  const ComparisonTable table = run_comparison(tiny_config(), t, seeds);
  if (!table.complete()) {
    EXPECT_NE(comparison_csv(table).find("failed"), std::string::npos);
    EXPECT_NE(comparison_text(table).find("FAILED"), std::string::npos);
  }
  EXPECT_TRUE(table.rows[0].failed == false);
}

TEST(Rollout, SnapshotsMatchEvaluation) {
  Rng rng(5);
  const MlpParams model = MlpParams::he_uniform(default_layer_sizes(ObsMode::Semantic), rng);
  const std::vector<std::int64_t> steps{0, 17, 40};
  const auto snaps = rollout_snapshots(model, tiny_config(), 9, steps);
  ASSERT_EQ(snaps.size(), 3u);
  const EvalResult e = evaluate_policy(model, tiny_config(), 9);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(snaps[i].time, steps[i]);
    for (std::size_t k = 0; k < static_cast<std::size_t>(steps[i]); ++k) {
      EXPECT_EQ(snaps[i].log[k], e.log[k]);
    }
  }
  const std::vector<std::int64_t> bad{60};
  EXPECT_THROW(rollout_snapshots(model, tiny_config(), 9, bad), ConfigError);
}

TEST(Explain, ZeroModelIsInconclusive) {
  const MlpParams zero = MlpParams::zeros(default_layer_sizes(ObsMode::Image));
  const std::vector<std::int64_t> steps{5, 30};
  const auto frames = explain_steps(zero, tiny_config(), 2, steps, TileGrid{}, 20, 1);
  ASSERT_EQ(frames.size(), 2u);
  for (const auto& f : frames) {
    EXPECT_TRUE(f.ranking.inconclusive);
    for (double v : f.map.values) EXPECT_EQ(v, 0.0);
  }
  const std::string csv = ranking_csv(frames);
  EXPECT_NE(csv.find("\n5,0,extend,N,E,S,W,0,0,0,0,0,"), std::string::npos) << csv;
}

TEST(Explain, SemanticCheckpointUnsupported) {
  const MlpParams semantic = MlpParams::zeros(default_layer_sizes(ObsMode::Semantic));
  const std::vector<std::int64_t> steps{1};
  EXPECT_THROW(explain_steps(semantic, tiny_config(), 1, steps, TileGrid{}, 10, 1), UnsupportedMode);
}

TEST(Explain, DeterministicCsv) {
  Rng rng(6);
  const MlpParams model = MlpParams::he_uniform(default_layer_sizes(ObsMode::Image), rng);
  const std::vector<std::int64_t> steps{12, 13};
  const auto a = explain_steps(model, tiny_config(), 4, steps, TileGrid{}, 50, 8);
  const auto b = explain_steps(model, tiny_config(), 4, steps, TileGrid{}, 50, 8);
  const auto regions = tile_regions(TileGrid{}, 25);
  EXPECT_EQ(saliency_csv(a[0].map, regions), saliency_csv(b[0].map, regions));
  EXPECT_EQ(ranking_csv(a), ranking_csv(b));
}

TEST(PreSwitch, FindsQuietWindowBeforeSwitch) {
  // Bias towards Switch: the greedy policy switches as soon as the mask allows.
  MlpParams model = MlpParams::zeros(default_layer_sizes(ObsMode::Semantic));
  model.layers.back().biases[1] = 1.0;
  SimConfig c = tiny_config();
  c.horizon_steps = 200;
  // NsGreen 0..9 switch at 10, yellow 3, EwGreen from 13, switch at 23.
  const auto steps = pre_switch_steps(model, c, 1, 10, Phase::EwGreen);
  ASSERT_EQ(steps.size(), 10u);
  EXPECT_EQ(steps.front(), 13);
  EXPECT_EQ(steps.back(), 22);
  EXPECT_EQ(pre_switch_steps(model, c, 1, 12, Phase::EwGreen).front(), 11);
  // Switches come every 13 steps, so no 13-step window is free of another switch.
  EXPECT_TRUE(pre_switch_steps(model, c, 1, 13, Phase::EwGreen).empty());
  const MlpParams never = MlpParams::zeros(default_layer_sizes(ObsMode::Semantic));
  EXPECT_TRUE(pre_switch_steps(never, c, 1, 10).empty());
}
