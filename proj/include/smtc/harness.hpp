#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "smtc/agent.hpp"
#include "smtc/xai.hpp"

namespace smtc {

inline constexpr std::string_view kToolVersion = "1.0.0";

// Scenario files mirror SimConfig; an optional "train" object mirrors
// TrainConfig and "selected_features" pins the transmitted semantic features.
SimConfig scenario_from_json(const nlohmann::json& doc);
nlohmann::json scenario_to_json(const SimConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& doc, TrainConfig base = {});
nlohmann::json train_config_to_json(const TrainConfig& train);

inline const std::vector<std::string> kDefaultSelectedFeatures{"platoon_tail", "phase"};
std::vector<std::string> selected_features_from_json(const nlohmann::json& doc);

struct Scenario {
  SimConfig sim;
  TrainConfig train;
  std::vector<std::string> selected_features = kDefaultSelectedFeatures;
};

/// Reads a scenario file; an empty path yields the defaults.
Scenario load_scenario(const std::filesystem::path& path);

/// FNV-1a of the canonical JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& canonical);

void write_text(const std::filesystem::path& path, std::string_view text);

std::string episode_log_csv(const std::vector<StepOutcome>& log);
std::string metrics_csv(const EpisodeMetrics& metrics);
/// Per-episode returns and the deterministic totals; wall time goes to timing_csv.
std::string training_report_csv(const TrainingReport& report);
std::string timing_csv(std::span<const std::pair<std::string, double>> rows);
std::string comm_report_csv(std::span<const std::pair<std::string, CommReport>> rows);

struct ComparisonRow {
  std::string method;
  double avg_travel_time = 0.0;
  double avg_delay = 0.0;
  std::optional<double> training_wall_time;
  std::optional<std::uint64_t> comm_bytes_per_step;
  std::optional<std::uint64_t> total_comm_bytes;  // one evaluation episode
  int seeds = 0;
  bool failed = false;
  std::string error;
};

struct ComparisonTable {
  std::vector<ComparisonRow> rows;  // Static, DRL, XAI-DRL
  std::vector<std::uint64_t> seeds;
  bool complete() const;
};

struct CompareOptions {
  int green_split_steps = 30;
  std::optional<std::filesystem::path> run_dir;  // per-seed checkpoints and reports
};

/// Static baseline plus image- and semantic-mode DQN, each trained per seed and
/// evaluated greedily on evaluation_seed(seed); rows hold seed means.
ComparisonTable run_comparison(const SimConfig& config, const TrainConfig& train,
                               std::span<const std::uint64_t> seeds,
                               const CompareOptions& options = {});

/// Deterministic columns only.
std::string comparison_csv(const ComparisonTable& table);
/// Aligned table including training wall time.
std::string comparison_text(const ComparisonTable& table);

/// Replays the greedy policy from init_world(config, seed) and returns the
/// world just before the action at each requested step (ascending order).
std::vector<WorldState> rollout_snapshots(const MlpParams& model, const SimConfig& config,
                                          std::uint64_t seed, std::span<const std::int64_t> steps);

/// The `count` steps preceding the first greedy switch out of `from_green`
/// at or after `min_step` with no other switch among them. Empty if none occurs.
std::vector<std::int64_t> pre_switch_steps(const MlpParams& model, const SimConfig& config,
                                           std::uint64_t seed, int count,
                                           Phase from_green = Phase::EwGreen,
                                           std::int64_t min_step = 0);

struct FrameExplanation {
  std::int64_t step = 0;
  Phase phase = Phase::NsGreen;
  Image frame;
  SaliencyMap map;
  FeatureRanking ranking;
};

std::vector<FrameExplanation> explain_steps(const MlpParams& model, const SimConfig& config,
                                            std::uint64_t seed,
                                            std::span<const std::int64_t> steps,
                                            const TileGrid& grid, int permutations,
                                            std::uint64_t perm_seed, int top_k = 1);

/// step,phase,explained_action,rank1..rank4 (approach:score),inconclusive
std::string ranking_csv(std::span<const FrameExplanation> frames);

}  // namespace smtc
