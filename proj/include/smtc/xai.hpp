#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "smtc/mlp.hpp"
#include "smtc/perception.hpp"

namespace smtc {

/// Partition of the frame into equal rectangular tiles, numbered row-major.
struct TileGrid {
  int tile_width = 16;
  int tile_height = 8;

  /// Grid with the given column and row counts; ConfigError unless they divide the frame.
  static TileGrid with_counts(int columns, int rows);

  int columns() const { return Image::kWidth / tile_width; }
  int rows() const { return Image::kHeight / tile_height; }
  int n_tiles() const { return columns() * rows(); }
  void validate() const;
  PixelRect rect(int tile) const;
  int tile_at(int x, int y) const { return (y / tile_height) * columns() + x / tile_width; }
  bool operator==(const TileGrid&) const = default;
};

/// Presence mask over players (tiles): 1 = present, 0 = occluded.
using Coalition = std::vector<std::uint8_t>;
using ValueFn = std::function<double(const Coalition&)>;

/// Absent tiles are painted with `baseline`. Throws std::out_of_range for a bad tile index.
Image occlude(const Image& image, const TileGrid& grid, std::span<const int> present,
              Rgb baseline = kBackground);

/// Greedy action on the unoccluded observation; ties go to Extend.
Action greedy_action(const MlpParams& model, const Image& frame, Phase phase);

/// v(S) = Q(occluded, a*) - Q(occluded, other), a* greedy on the full frame.
/// Reference path: occlude, preprocess, forward.
double coalition_value(const MlpParams& model, const Image& frame, Phase phase,
                       std::span<const int> present, const TileGrid& grid = {},
                       Rgb baseline = kBackground);

/// The same coalition value as a reusable game. When the tiles are aligned to
/// the pooling windows, occlusion is applied directly to the pooled input.
class OcclusionGame {
 public:
  OcclusionGame(MlpParams model, const Image& frame, Phase phase, TileGrid grid,
                Rgb baseline = kBackground);

  int players() const { return grid_.n_tiles(); }
  Action explained_action() const { return greedy_; }
  const TileGrid& grid() const { return grid_; }
  double operator()(const Coalition& present) const;

 private:
  MlpParams model_;
  Image frame_;
  Phase phase_;
  TileGrid grid_;
  Rgb baseline_;
  Action greedy_;
  bool pooled_path_ = false;
  std::vector<double> full_input_;
  std::vector<double> baseline_input_;
  std::vector<int> tile_of_input_;  // -1 for inputs no tile controls
};

inline constexpr int kMaxExactPlayers = 12;

/// Shapley values by enumerating all 2^n coalitions. CapacityError above kMaxExactPlayers.
std::vector<double> shapley_exact(const ValueFn& value, int n_players);

struct SampledShapley {
  std::vector<double> values;
  std::vector<double> std_errors;  // standard error of the mean marginal contribution
};

/// Monte Carlo over `permutations` uniformly random orderings. Permutations
/// are drawn up front from `seed` and their marginals reduced in index order,
/// so the result does not depend on `threads` (0 = hardware concurrency).
SampledShapley shapley_sampled(const ValueFn& value, int n_players, int permutations,
                               std::uint64_t seed, unsigned threads = 0);

struct SaliencyMap {
  TileGrid grid;
  std::vector<double> values;
  std::vector<double> std_errors;
  std::string world_id;
  Action explained = Action::Extend;
  double full_value = 0.0;   // v(all tiles)
  double empty_value = 0.0;  // v(no tiles)
};

SaliencyMap explain_frame(const MlpParams& model, const Image& frame, Phase phase,
                          const TileGrid& grid, int permutations, std::uint64_t seed,
                          std::string world_id = {});

enum class TileRegion : std::uint8_t { N = 0, E = 1, S = 2, W = 3, Center, None };
std::string_view region_name(TileRegion region);

/// Region of each tile: the approach owning most lane cells in it, else Center
/// when it overlaps the intersection box, else None.
std::vector<TileRegion> tile_regions(const TileGrid& grid, int approach_length_cells);

struct RankedApproach {
  Approach approach = Approach::N;
  double score = 0.0;  // sum of |value| over the approach's tiles
  bool selected = false;
  int argmax_tile = -1;  // tile with the largest |value|; -1 when the approach owns none
};

struct FeatureRanking {
  std::vector<RankedApproach> ranked;  // descending score, ties in N, E, S, W order
  double center_score = 0.0;
  bool inconclusive = false;  // every approach scored zero
};

FeatureRanking rank_and_select(const SaliencyMap& map, std::span<const TileRegion> regions,
                               int top_k);

/// Frame dimmed to half, red channel raised by up to 128 in proportion to the
/// tile's |value| between the map's min and max |value|.
Image saliency_overlay(const SaliencyMap& map, const Image& frame);
void export_saliency(const SaliencyMap& map, const Image& frame, const std::filesystem::path& path);

/// CSV: tile_index,row,col,value,stderr,approach
std::string saliency_csv(const SaliencyMap& map, std::span<const TileRegion> regions);

}  // namespace smtc
