#include "smtc/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <sstream>

#include "smtc/errors.hpp"

namespace smtc {

namespace {

using nlohmann::json;

template <class T>
T field(const json& obj, const char* key, const std::string& path, T fallback) {
  const auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(path + key, "has the wrong type");
  }
}

void reject_unknown(const json& obj, std::initializer_list<std::string_view> known,
                    const std::string& path) {
  for (const auto& [key, value] : obj.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError(path + key, "unknown field");
    }
  }
}

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

SimConfig scenario_from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("scenario", "must be a JSON object");
  reject_unknown(doc,
                 {"approach_length_cells", "arrival_prob", "yellow_steps", "min_green_steps",
                  "horizon_steps", "step_seconds", "reward_weights", "gap_threshold_cells",
                  "train", "selected_features"},
                 "");
  SimConfig c;
  c.approach_length_cells = field(doc, "approach_length_cells", "", c.approach_length_cells);
  if (doc.contains("arrival_prob")) {
    const auto& p = doc["arrival_prob"];
    if (!p.is_array() || p.size() != 4) {
      throw ConfigError("arrival_prob", "must be an array of 4 numbers (N, E, S, W)");
    }
    for (std::size_t i = 0; i < 4; ++i) {
      if (!p[i].is_number()) throw ConfigError("arrival_prob", "must contain numbers");
      c.arrival_prob[i] = p[i].get<double>();
    }
  }
  c.yellow_steps = field(doc, "yellow_steps", "", c.yellow_steps);
  c.min_green_steps = field(doc, "min_green_steps", "", c.min_green_steps);
  c.horizon_steps = field(doc, "horizon_steps", "", c.horizon_steps);
  c.step_seconds = field(doc, "step_seconds", "", c.step_seconds);
  if (doc.contains("reward_weights")) {
    const auto& w = doc["reward_weights"];
    if (!w.is_array() || w.size() != 3 || !w[0].is_number() || !w[1].is_number() ||
        !w[2].is_number()) {
      throw ConfigError("reward_weights", "must be an array [w_queue, w_wait, w_switch]");
    }
    c.reward_weights = {w[0].get<double>(), w[1].get<double>(), w[2].get<double>()};
  }
  c.gap_threshold_cells = field(doc, "gap_threshold_cells", "", c.gap_threshold_cells);
  c.validate();
  return c;
}

json scenario_to_json(const SimConfig& c) {
  return json{{"approach_length_cells", c.approach_length_cells},
              {"arrival_prob", c.arrival_prob},
              {"yellow_steps", c.yellow_steps},
              {"min_green_steps", c.min_green_steps},
              {"horizon_steps", c.horizon_steps},
              {"step_seconds", c.step_seconds},
              {"reward_weights",
               {c.reward_weights.queue, c.reward_weights.wait, c.reward_weights.switching}},
              {"gap_threshold_cells", c.gap_threshold_cells}};
}

TrainConfig train_config_from_json(const json& doc, TrainConfig t) {
  if (!doc.is_object()) throw ConfigError("train", "must be a JSON object");
  reject_unknown(doc,
                 {"learning_rate", "discount", "epsilon_start", "epsilon_end",
                  "epsilon_decay_steps", "buffer_capacity", "batch_size", "target_sync_interval",
                  "episodes", "obs_mode", "reward_scale", "clip_norm", "train_every",
                  "warmup_steps", "validation_interval", "n_step", "double_q",
                  "learning_rate_final"},
                 "train.");
  const std::string p = "train.";
  t.learning_rate = field(doc, "learning_rate", p, t.learning_rate);
  t.discount = field(doc, "discount", p, t.discount);
  t.epsilon_start = field(doc, "epsilon_start", p, t.epsilon_start);
  t.epsilon_end = field(doc, "epsilon_end", p, t.epsilon_end);
  t.epsilon_decay_steps = field(doc, "epsilon_decay_steps", p, t.epsilon_decay_steps);
  t.buffer_capacity = field(doc, "buffer_capacity", p, t.buffer_capacity);
  t.batch_size = field(doc, "batch_size", p, t.batch_size);
  t.target_sync_interval = field(doc, "target_sync_interval", p, t.target_sync_interval);
  t.episodes = field(doc, "episodes", p, t.episodes);
  if (doc.contains("obs_mode")) {
    t.obs_mode = parse_obs_mode(field<std::string>(doc, "obs_mode", p, ""));
  }
  t.reward_scale = field(doc, "reward_scale", p, t.reward_scale);
  t.clip_norm = field(doc, "clip_norm", p, t.clip_norm);
  t.train_every = field(doc, "train_every", p, t.train_every);
  t.warmup_steps = field(doc, "warmup_steps", p, t.warmup_steps);
  t.validation_interval = field(doc, "validation_interval", p, t.validation_interval);
  t.n_step = field(doc, "n_step", p, t.n_step);
  t.double_q = field(doc, "double_q", p, t.double_q);
  t.learning_rate_final = field(doc, "learning_rate_final", p, t.learning_rate_final);
  t.validate();
  return t;
}

json train_config_to_json(const TrainConfig& t) {
  return json{{"learning_rate", t.learning_rate},
              {"discount", t.discount},
              {"epsilon_start", t.epsilon_start},
              {"epsilon_end", t.epsilon_end},
              {"epsilon_decay_steps", t.epsilon_decay_steps},
              {"buffer_capacity", t.buffer_capacity},
              {"batch_size", t.batch_size},
              {"target_sync_interval", t.target_sync_interval},
              {"episodes", t.episodes},
              {"obs_mode", obs_mode_name(t.obs_mode)},
              {"reward_scale", t.reward_scale},
              {"clip_norm", t.clip_norm},
              {"train_every", t.train_every},
              {"warmup_steps", t.warmup_steps},
              {"validation_interval", t.validation_interval},
              {"n_step", t.n_step},
              {"double_q", t.double_q},
              {"learning_rate_final", t.learning_rate_final}};
}

std::vector<std::string> selected_features_from_json(const json& doc) {
  if (!doc.contains("selected_features")) return kDefaultSelectedFeatures;
  std::vector<std::string> features;
  try {
    features = doc["selected_features"].get<std::vector<std::string>>();
  } catch (const json::exception&) {
    throw ConfigError("selected_features", "must be an array of strings");
  }
  // The semantic encoder transmits exactly these two features.
  auto sorted = features;
  std::sort(sorted.begin(), sorted.end());
  auto expected = kDefaultSelectedFeatures;
  std::sort(expected.begin(), expected.end());
  if (sorted != expected) {
    throw ConfigError("selected_features", "the semantic encoder supports only [\"platoon_tail\", \"phase\"]");
  }
  return features;
}

Scenario load_scenario(const std::filesystem::path& path) {
  Scenario scenario;
  if (path.empty()) return scenario;
  std::ifstream in(path);
  if (!in) throw IoError("cannot read scenario " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("scenario", std::string("invalid JSON: ") + e.what());
  }
  scenario.sim = scenario_from_json(doc);
  if (doc.contains("train")) scenario.train = train_config_from_json(doc["train"]);
  scenario.selected_features = selected_features_from_json(doc);
  return scenario;
}

std::string config_hash(const json& canonical) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : canonical.dump()) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

std::string episode_log_csv(const std::vector<StepOutcome>& log) {
  std::string out = "time,phase,queue_total,wait_increment,switch,reward\n";
  for (const auto& s : log) {
    out += std::to_string(s.time) + ',' + std::to_string(phase_index(s.phase)) + ',' +
           std::to_string(s.queue_total) + ',' + std::to_string(s.wait_increment) + ',' +
           (s.switch_initiated ? "1" : "0") + ',' + exact(s.reward) + '\n';
  }
  return out;
}

std::string metrics_csv(const EpisodeMetrics& m) {
  return "avg_travel_time_s,avg_delay_s,vehicles_completed,total_steps,no_completions\n" +
         fixed(m.avg_travel_time, 6) + ',' + fixed(m.avg_delay, 6) + ',' +
         std::to_string(m.vehicles_completed) + ',' + std::to_string(m.total_steps) + ',' +
         (m.no_completions ? "1" : "0") + '\n';
}

std::string training_report_csv(const TrainingReport& r) {
  std::string out = "episode,return\n";
  for (std::size_t i = 0; i < r.episode_returns.size(); ++i) {
    out += std::to_string(i) + ',' + exact(r.episode_returns[i]) + '\n';
  }
  out += "# gradient_steps=" + std::to_string(r.gradient_steps) +
         " env_steps=" + std::to_string(r.env_steps) +
         " bytes_transmitted=" + std::to_string(r.bytes_transmitted) +
         " eval_avg_travel_time_s=" + fixed(r.final_eval.avg_travel_time, 6) +
         " eval_avg_delay_s=" + fixed(r.final_eval.avg_delay, 6) + '\n';
  return out;
}

std::string timing_csv(std::span<const std::pair<std::string, double>> rows) {
  std::string out = "run,training_wall_time_s\n";
  for (const auto& [name, seconds] : rows) out += name + ',' + fixed(seconds, 3) + '\n';
  return out;
}

std::string comm_report_csv(std::span<const std::pair<std::string, CommReport>> rows) {
  std::string out = "mode,per_step_bytes,total_bytes,reduction_vs_raw\n";
  for (const auto& [name, r] : rows) {
    out += name + ',' + std::to_string(r.per_step_bytes) + ',' + std::to_string(r.total_bytes) +
           ',' + fixed(r.reduction_vs_raw, 6) + '\n';
  }
  return out;
}

bool ComparisonTable::complete() const {
  return std::none_of(rows.begin(), rows.end(), [](const ComparisonRow& r) { return r.failed; });
}

ComparisonTable run_comparison(const SimConfig& config, const TrainConfig& train,
                               std::span<const std::uint64_t> seeds,
                               const CompareOptions& options) {
  if (seeds.empty()) throw ConfigError("seeds", "need at least one seed");
  config.validate();
  train.validate();
  ComparisonTable table;
  table.seeds.assign(seeds.begin(), seeds.end());

  ComparisonRow fixed_row;
  fixed_row.method = "Static";
  try {
    for (const auto seed : seeds) {
      const EpisodeMetrics m =
          run_fixed_time(config, options.green_split_steps, evaluation_seed(seed));
      fixed_row.avg_travel_time += m.avg_travel_time;
      fixed_row.avg_delay += m.avg_delay;
      ++fixed_row.seeds;
    }
  } catch (const std::exception& e) {
    fixed_row.failed = true;
    fixed_row.error = e.what();
  }
  table.rows.push_back(fixed_row);

  for (const ObsMode mode : {ObsMode::Image, ObsMode::Semantic}) {
    ComparisonRow row;
    row.method = mode == ObsMode::Image ? "DRL" : "XAI-DRL";
    const CommReport comm = comm_report(static_cast<std::uint64_t>(config.horizon_steps), mode);
    row.comm_bytes_per_step = comm.per_step_bytes;
    row.total_comm_bytes = comm.total_bytes;
    double wall = 0.0;
    TrainConfig tc = train;
    tc.obs_mode = mode;
    for (const auto seed : seeds) {
      try {
        const TrainResult result = dqn_train(config, tc, seed);
        row.avg_travel_time += result.report.final_eval.avg_travel_time;
        row.avg_delay += result.report.final_eval.avg_delay;
        wall += result.report.wall_time_seconds;
        ++row.seeds;
        if (options.run_dir) {
          const auto dir = *options.run_dir / ("seed_" + std::to_string(seed)) /
                           std::string(obs_mode_name(mode));
          std::filesystem::create_directories(dir);
          save_checkpoint(result.params, dir / "model.smtc");
          write_text(dir / "training.csv", training_report_csv(result.report));
        }
      } catch (const std::exception& e) {
        row.failed = true;
        row.error += "seed " + std::to_string(seed) + ": " + e.what() + "; ";
      }
    }
    if (row.seeds > 0) row.training_wall_time = wall / row.seeds;
    table.rows.push_back(row);
  }
  for (auto& row : table.rows) {
    if (row.seeds > 0) {
      row.avg_travel_time /= row.seeds;
      row.avg_delay /= row.seeds;
    }
  }
  return table;
}

std::string comparison_csv(const ComparisonTable& table) {
  std::string out = "method,avg_travel_time_s,avg_delay_s,comm_bytes_per_step,total_comm_bytes,seeds,status\n";
  auto opt = [](const std::optional<std::uint64_t>& v) {
    return v ? std::to_string(*v) : std::string();
  };
  for (const auto& r : table.rows) {
    out += r.method + ',' + fixed(r.avg_travel_time) + ',' + fixed(r.avg_delay) + ',' +
           opt(r.comm_bytes_per_step) + ',' + opt(r.total_comm_bytes) + ',' +
           std::to_string(r.seeds) + ',' + (r.failed ? "failed" : "ok") + '\n';
  }
  return out;
}

std::string comparison_text(const ComparisonTable& table) {
  std::ostringstream out;
  auto line = [&out](const std::string& a, const std::string& b, const std::string& c,
                     const std::string& d, const std::string& e, const std::string& f) {
    out << std::left << std::setw(10) << a << std::right << std::setw(14) << b << std::setw(12)
        << c << std::setw(16) << d << std::setw(14) << e << std::setw(16) << f << '\n';
  };
  const std::string dash = "-";
  line("Method", "Travel (s)", "Delay (s)", "Training (s)", "Comm (B)", "Comm/episode");
  for (const auto& r : table.rows) {
    if (r.failed) {
      out << r.method << "  FAILED: " << r.error << '\n';
      continue;
    }
    line(r.method, fixed(r.avg_travel_time, 2), fixed(r.avg_delay, 2),
         r.training_wall_time ? fixed(*r.training_wall_time, 2) : dash,
         r.comm_bytes_per_step ? std::to_string(*r.comm_bytes_per_step) : dash,
         r.total_comm_bytes ? std::to_string(*r.total_comm_bytes) : dash);
  }
  out << "seeds:";
  for (const auto s : table.seeds) out << ' ' << s;
  out << '\n';
  return out.str();
}

std::vector<WorldState> rollout_snapshots(const MlpParams& model, const SimConfig& config,
                                          std::uint64_t seed,
                                          std::span<const std::int64_t> steps) {
  const ObsMode mode = mode_of(model);
  std::vector<std::int64_t> wanted(steps.begin(), steps.end());
  std::sort(wanted.begin(), wanted.end());
  for (const auto s : wanted) {
    if (s < 0 || s >= config.horizon_steps) {
      throw ConfigError("steps", "step " + std::to_string(s) + " outside [0, horizon)");
    }
  }
  std::vector<WorldState> out;
  WorldState world = init_world(config, seed);
  Rng unused(0);
  std::size_t next = 0;
  while (next < wanted.size()) {
    while (next < wanted.size() && wanted[next] == world.time) {
      out.push_back(world);
      ++next;
    }
    if (next == wanted.size()) break;
    const QValues q = mlp_forward(model, observe(world, mode));
    step(world, select_action(q, action_mask(world), 0.0, unused));
  }
  return out;
}

std::vector<std::int64_t> pre_switch_steps(const MlpParams& model, const SimConfig& config,
                                           std::uint64_t seed, int count, Phase from_green,
                                           std::int64_t min_step) {
  if (!is_green(from_green)) throw ConfigError("from_green", "must be a green phase");
  const EvalResult run = evaluate_policy(model, config, seed);
  const Phase yellow_after = config.yellow_steps > 0 ? next_phase(from_green)
                                                     : next_phase(next_phase(from_green));
  std::int64_t last_switch = -1;
  for (const auto& s : run.log) {
    if (!s.switch_initiated) continue;
    if (s.phase == yellow_after && s.time >= min_step && s.time - count >= 0 &&
        s.time - count > last_switch) {
      std::vector<std::int64_t> steps;
      for (std::int64_t t = s.time - count; t < s.time; ++t) steps.push_back(t);
      return steps;
    }
    last_switch = s.time;
  }
  return {};
}

std::vector<FrameExplanation> explain_steps(const MlpParams& model, const SimConfig& config,
                                            std::uint64_t seed,
                                            std::span<const std::int64_t> steps,
                                            const TileGrid& grid, int permutations,
                                            std::uint64_t perm_seed, int top_k) {
  if (mode_of(model) != ObsMode::Image) {
    throw UnsupportedMode("explain requires an image-mode checkpoint");
  }
  const auto regions = tile_regions(grid, config.approach_length_cells);
  std::vector<FrameExplanation> out;
  for (WorldState& world : rollout_snapshots(model, config, seed, steps)) {
    FrameExplanation fe;
    fe.step = world.time;
    fe.phase = world.signal.phase;
    fe.frame = render_frame(world);
    fe.map = explain_frame(model, fe.frame, fe.phase, grid, permutations,
                           derive_seed(perm_seed, static_cast<std::uint64_t>(world.time)),
                           "seed" + std::to_string(seed) + "@t" + std::to_string(world.time));
    fe.ranking = rank_and_select(fe.map, regions, top_k);
    out.push_back(std::move(fe));
  }
  return out;
}

std::string ranking_csv(std::span<const FrameExplanation> frames) {
  std::string out =
      "step,phase,explained_action,rank1,rank2,rank3,rank4,score1,score2,score3,score4,center_score,"
      "top_argmax_tile,inconclusive\n";
  for (const auto& f : frames) {
    const auto& r = f.ranking.ranked;
    out += std::to_string(f.step) + ',' + std::to_string(phase_index(f.phase)) + ',' +
           (f.map.explained == Action::Switch ? "switch" : "extend");
    for (const auto& e : r) out += ',' + std::string(approach_name(e.approach));
    for (const auto& e : r) out += ',' + exact(e.score);
    out += ',' + exact(f.ranking.center_score) + ',' + std::to_string(r.front().argmax_tile) +
           ',' + (f.ranking.inconclusive ? "1" : "0") + '\n';
  }
  return out;
}

}  // namespace smtc
