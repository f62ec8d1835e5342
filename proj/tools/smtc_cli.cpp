// smtc: train, evaluate, explain, compare and render the traffic-light controllers.

#include <cstdio>
#include <filesystem>
#include <algorithm>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "smtc/errors.hpp"
#include "smtc/harness.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace smtc;

namespace {

std::vector<std::int64_t> parse_steps(const std::string& text) {
  std::vector<std::int64_t> steps;
  std::stringstream in(text);
  std::string part;
  while (std::getline(in, part, ',')) {
    if (part.empty()) continue;
    const auto dash = part.find('-', 1);
    try {
      if (dash == std::string::npos) {
        steps.push_back(std::stoll(part));
      } else {
        const auto lo = std::stoll(part.substr(0, dash));
        const auto hi = std::stoll(part.substr(dash + 1));
        if (hi < lo) throw ConfigError("steps", "empty range " + part);
        for (auto s = lo; s <= hi; ++s) steps.push_back(s);
      }
    } catch (const std::logic_error& e) {
      if (dynamic_cast<const ConfigError*>(&e)) throw;
      throw ConfigError("steps", "cannot parse '" + part + "'");
    }
  }
  return steps;
}

TileGrid parse_grid(const std::string& text) {
  const auto x = text.find('x');
  if (x == std::string::npos) throw ConfigError("grid", "expected CxR, e.g. 8x8");
  try {
    return TileGrid::with_counts(std::stoi(text.substr(0, x)), std::stoi(text.substr(x + 1)));
  } catch (const std::logic_error& e) {
    if (dynamic_cast<const ConfigError*>(&e)) throw;
    throw ConfigError("grid", "expected CxR, e.g. 8x8");
  }
}

json manifest(const std::string& command, const Scenario& scenario, std::uint64_t seed) {
  json canonical{{"scenario", scenario_to_json(scenario.sim)},
                 {"train", train_config_to_json(scenario.train)}};
  return json{{"tool", "smtc"},
              {"version", kToolVersion},
              {"command", command},
              {"seed", seed},
              {"config_hash", config_hash(canonical)},
              {"scenario", canonical["scenario"]},
              {"train", canonical["train"]},
              {"selected_features", scenario.selected_features}};
}

void write_manifest(const fs::path& dir, const json& doc) {
  write_text(dir / "manifest.json", doc.dump(2) + "\n");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic-communication traffic-light control benchmark"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 1;
  std::string obs_mode = "semantic";
  int episodes = 0;
  std::string checkpoint;
  std::string steps_text;
  std::string grid_text = "8x8";
  int perms = 2000;
  int pre_switch = 0;
  std::string seeds_text = "1,2,3,4,5";
  int split = 30;

  auto* train = app.add_subcommand("train", "train a DQN controller");
  train->add_option("--config", config_path, "scenario JSON");
  train->add_option("--obs-mode", obs_mode, "image|semantic");
  train->add_option("--seed", seed);
  train->add_option("--out", out_dir);
  train->add_option("--episodes", episodes, "override the episode count");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint greedily");
  eval->add_option("--checkpoint", checkpoint)->required();
  eval->add_option("--config", config_path);
  eval->add_option("--seed", seed);
  eval->add_option("--out", out_dir);

  auto* explain = app.add_subcommand("explain", "Shapley saliency over frame tiles");
  explain->add_option("--checkpoint", checkpoint)->required();
  explain->add_option("--config", config_path);
  explain->add_option("--seed", seed);
  explain->add_option("--steps", steps_text, "e.g. 100,105 or 100-109");
  explain->add_option("--pre-switch", pre_switch,
                      "explain the N steps before the first EW-to-NS switch");
  explain->add_option("--grid", grid_text, "tile columns x rows");
  explain->add_option("--perms", perms, "sampled permutations");
  explain->add_option("--out", out_dir);

  auto* compare = app.add_subcommand("compare", "Static vs DRL vs XAI-DRL table");
  compare->add_option("--config", config_path);
  compare->add_option("--seeds", seeds_text, "comma-separated");
  compare->add_option("--episodes", episodes, "override the episode count");
  compare->add_option("--split", split, "static green split in steps");
  compare->add_option("--out", out_dir);

  auto* render = app.add_subcommand("render", "write PPM frames of a fixed-time run");
  render->add_option("--config", config_path);
  render->add_option("--seed", seed);
  render->add_option("--steps", steps_text, "range A-B (inclusive)")->required();
  render->add_option("--split", split, "static green split in steps");
  render->add_option("--checkpoint", checkpoint, "drive with a trained policy instead");
  render->add_option("--out", out_dir);

  CLI11_PARSE(app, argc, argv);

  try {
    Scenario scenario = load_scenario(config_path);
    if (episodes > 0) scenario.train.episodes = episodes;
    const fs::path out(out_dir);
    fs::create_directories(out);

    if (*train) {
      scenario.train.obs_mode = parse_obs_mode(obs_mode);
      const TrainResult result = dqn_train(scenario.sim, scenario.train, seed);
      save_checkpoint(result.params, out / "model.smtc");
      write_text(out / "training.csv", training_report_csv(result.report));
      write_text(out / "eval_metrics.csv", metrics_csv(result.report.final_eval));
      const std::pair<std::string, double> timing{std::string(obs_mode_name(scenario.train.obs_mode)),
                                                  result.report.wall_time_seconds};
      write_text(out / "timing.csv", timing_csv({&timing, 1}));
      write_manifest(out, manifest("train", scenario, seed));
      std::printf("trained %s: eval travel %.2f s, delay %.2f s, wall %.2f s\n",
                  std::string(obs_mode_name(scenario.train.obs_mode)).c_str(),
                  result.report.final_eval.avg_travel_time, result.report.final_eval.avg_delay,
                  result.report.wall_time_seconds);
    } else if (*eval) {
      const MlpParams model = load_checkpoint(checkpoint);
      const EvalResult result = evaluate_policy(model, scenario.sim, seed);
      write_text(out / "episode_log.csv", episode_log_csv(result.log));
      write_text(out / "metrics.csv", metrics_csv(result.metrics));
      scenario.train.obs_mode = mode_of(model);
      write_manifest(out, manifest("eval", scenario, seed));
      std::printf("travel %.2f s, delay %.2f s, completed %lld\n", result.metrics.avg_travel_time,
                  result.metrics.avg_delay,
                  static_cast<long long>(result.metrics.vehicles_completed));
    } else if (*explain) {
      const MlpParams model = load_checkpoint(checkpoint);
      if (mode_of(model) != ObsMode::Image) {
        throw UnsupportedMode("explain requires an image-mode checkpoint");
      }
      std::vector<std::int64_t> steps = parse_steps(steps_text);
      if (pre_switch > 0) {
        const auto pre = pre_switch_steps(model, scenario.sim, seed, pre_switch);
        if (pre.empty()) throw ConfigError("pre-switch", "policy never switches from EW green");
        steps.insert(steps.end(), pre.begin(), pre.end());
      }
      if (steps.empty()) throw ConfigError("steps", "give --steps or --pre-switch");
      const TileGrid grid = parse_grid(grid_text);
      const auto frames = explain_steps(model, scenario.sim, seed, steps, grid, perms, seed);
      const auto regions = tile_regions(grid, scenario.sim.approach_length_cells);
      for (const auto& f : frames) {
        const std::string tag = std::to_string(f.step);
        write_text(out / ("saliency_" + tag + ".csv"), saliency_csv(f.map, regions));
        export_saliency(f.map, f.frame, out / ("heatmap_" + tag + ".ppm"));
        write_ppm(f.frame, out / ("frame_" + tag + ".ppm"));
      }
      write_text(out / "ranking.csv", ranking_csv(frames));
      json doc = manifest("explain", scenario, seed);
      doc["grid"] = grid_text;
      doc["permutations"] = perms;
      write_manifest(out, doc);
      for (const auto& f : frames) {
        std::printf("t=%lld top=%s%s\n", static_cast<long long>(f.step),
                    std::string(approach_name(f.ranking.ranked.front().approach)).c_str(),
                    f.ranking.inconclusive ? " (inconclusive)" : "");
      }
    } else if (*compare) {
      std::vector<std::uint64_t> seeds;
      for (const auto s : parse_steps(seeds_text)) {
        if (s < 0) throw ConfigError("seeds", "seeds must be nonnegative");
        seeds.push_back(static_cast<std::uint64_t>(s));
      }
      const ComparisonTable table =
          run_comparison(scenario.sim, scenario.train, seeds, {split, out / "runs"});
      write_text(out / "comparison.csv", comparison_csv(table));
      const std::string text = comparison_text(table);
      write_text(out / "table.txt", text);
      std::vector<std::pair<std::string, double>> timing;
      for (const auto& r : table.rows) {
        if (r.training_wall_time) timing.emplace_back(r.method, *r.training_wall_time);
      }
      write_text(out / "timing.csv", timing_csv(timing));
      json doc = manifest("compare", scenario, seeds.front());
      doc["seeds"] = seeds;
      doc["green_split_steps"] = split;
      write_manifest(out, doc);
      std::cout << text;
      if (!table.complete()) return 2;
    } else if (*render) {
      const auto steps = parse_steps(steps_text);
      if (steps.empty()) throw ConfigError("steps", "empty range");
      std::vector<WorldState> worlds;
      if (!checkpoint.empty()) {
        worlds = rollout_snapshots(load_checkpoint(checkpoint), scenario.sim, seed, steps);
      } else {
        if (split < scenario.sim.min_green_steps) {
          throw ConfigError("split", "must be at least min_green_steps");
        }
        WorldState world = init_world(scenario.sim, seed);
        for (const auto s : steps) {
          if (s < 0 || s >= scenario.sim.horizon_steps) {
            throw ConfigError("steps", "step outside [0, horizon)");
          }
        }
        std::vector<std::int64_t> sorted = steps;
        std::sort(sorted.begin(), sorted.end());
        for (const auto s : sorted) {
          while (world.time < s) step(world, fixed_time_action(world, split));
          worlds.push_back(world);
        }
      }
      for (const auto& w : worlds) {
        write_ppm(render_frame(w), out / ("frame_" + std::to_string(w.time) + ".ppm"));
      }
      write_manifest(out, manifest("render", scenario, seed));
      std::printf("wrote %zu frames\n", worlds.size());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
