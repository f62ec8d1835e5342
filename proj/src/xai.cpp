#include "smtc/xai.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include "smtc/agent.hpp"
#include "smtc/errors.hpp"

namespace smtc {

TileGrid TileGrid::with_counts(int columns, int rows) {
  if (columns <= 0 || rows <= 0 || Image::kWidth % columns != 0 || Image::kHeight % rows != 0) {
    throw ConfigError("grid", std::to_string(columns) + "x" + std::to_string(rows) +
                                  " does not divide the 128x64 frame");
  }
  return {Image::kWidth / columns, Image::kHeight / rows};
}

void TileGrid::validate() const {
  if (tile_width <= 0 || Image::kWidth % tile_width != 0) {
    throw ConfigError("tile_width_px", "must divide the frame width");
  }
  if (tile_height <= 0 || Image::kHeight % tile_height != 0) {
    throw ConfigError("tile_height_px", "must divide the frame height");
  }
}

PixelRect TileGrid::rect(int tile) const {
  const int x = (tile % columns()) * tile_width;
  const int y = (tile / columns()) * tile_height;
  return {x, y, x + tile_width, y + tile_height};
}

Image occlude(const Image& image, const TileGrid& grid, std::span<const int> present,
              Rgb baseline) {
  grid.validate();
  std::vector<std::uint8_t> keep(static_cast<std::size_t>(grid.n_tiles()), 0);
  for (int t : present) {
    if (t < 0 || t >= grid.n_tiles()) {
      throw std::out_of_range("tile index " + std::to_string(t) + " outside 0.." +
                              std::to_string(grid.n_tiles() - 1));
    }
    keep[static_cast<std::size_t>(t)] = 1;
  }
  Image out = image;
  for (int t = 0; t < grid.n_tiles(); ++t) {
    if (keep[static_cast<std::size_t>(t)]) continue;
    const PixelRect r = grid.rect(t);
    for (int y = r.y0; y < r.y1; ++y) {
      for (int x = r.x0; x < r.x1; ++x) out.set(x, y, baseline);
    }
  }
  return out;
}

namespace {

Action argmax(const QValues& q) { return q[1] > q[0] ? Action::Switch : Action::Extend; }

double margin(const QValues& q, Action greedy) {
  return greedy == Action::Switch ? q[1] - q[0] : q[0] - q[1];
}

void require_image_model(const MlpParams& model) {
  if (mode_of(model) != ObsMode::Image) {
    throw UnsupportedMode("saliency needs an image-mode Q-network");
  }
}

}  // namespace

Action greedy_action(const MlpParams& model, const Image& frame, Phase phase) {
  return argmax(mlp_forward(model, preprocess_image(frame, phase)));
}

double coalition_value(const MlpParams& model, const Image& frame, Phase phase,
                       std::span<const int> present, const TileGrid& grid, Rgb baseline) {
  require_image_model(model);
  const Action greedy = greedy_action(model, frame, phase);
  const Image occluded = occlude(frame, grid, present, baseline);
  return margin(mlp_forward(model, preprocess_image(occluded, phase)), greedy);
}

OcclusionGame::OcclusionGame(MlpParams model, const Image& frame, Phase phase, TileGrid grid,
                             Rgb baseline)
    : model_(std::move(model)), frame_(frame), phase_(phase), grid_(grid), baseline_(baseline) {
  require_image_model(model_);
  grid_.validate();
  full_input_ = preprocess_image(frame_, phase_);
  greedy_ = argmax(mlp_forward(model_, full_input_));
  pooled_path_ = grid_.tile_width % kPoolSize == 0 && grid_.tile_height % kPoolSize == 0;
  if (!pooled_path_) return;
  Image flat;
  for (int y = 0; y < Image::kHeight; ++y) {
    for (int x = 0; x < Image::kWidth; ++x) flat.set(x, y, baseline_);
  }
  baseline_input_ = preprocess_image(flat, phase_);
  tile_of_input_.assign(full_input_.size(), -1);
  for (int py = 0; py < kPooledHeight; ++py) {
    for (int px = 0; px < kPooledWidth; ++px) {
      tile_of_input_[static_cast<std::size_t>(py * kPooledWidth + px)] =
          grid_.tile_at(px * kPoolSize, py * kPoolSize);
    }
  }
}

double OcclusionGame::operator()(const Coalition& present) const {
  if (present.size() != static_cast<std::size_t>(players())) {
    throw ShapeError("coalition mask has " + std::to_string(present.size()) + " entries");
  }
  if (!pooled_path_) {
    std::vector<int> tiles;
    for (int t = 0; t < players(); ++t) {
      if (present[static_cast<std::size_t>(t)]) tiles.push_back(t);
    }
    const Image occluded = occlude(frame_, grid_, tiles, baseline_);
    return margin(mlp_forward(model_, preprocess_image(occluded, phase_)), greedy_);
  }
  std::vector<double> input = full_input_;
  for (std::size_t i = 0; i < input.size(); ++i) {
    const int t = tile_of_input_[i];
    if (t >= 0 && !present[static_cast<std::size_t>(t)]) input[i] = baseline_input_[i];
  }
  return margin(mlp_forward(model_, input), greedy_);
}

std::vector<double> shapley_exact(const ValueFn& value, int n_players) {
  if (n_players < 0) throw std::invalid_argument("negative player count");
  if (n_players > kMaxExactPlayers) {
    throw CapacityError("exact Shapley enumeration supports at most " +
                        std::to_string(kMaxExactPlayers) + " players, got " +
                        std::to_string(n_players) + "; use shapley_sampled");
  }
  const auto n = static_cast<std::size_t>(n_players);
  const std::size_t masks = std::size_t{1} << n;
  std::vector<double> v(masks);
  Coalition coalition(n);
  for (std::size_t m = 0; m < masks; ++m) {
    for (std::size_t i = 0; i < n; ++i) coalition[i] = (m >> i) & 1u;
    v[m] = value(coalition);
  }
  // weight[s] = s! (n - s - 1)! / n!
  std::vector<double> weight(n, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    double w = 1.0 / static_cast<double>(n);
    for (std::size_t k = 1; k <= s; ++k) {
      w *= static_cast<double>(k) / static_cast<double>(n - k);
    }
    weight[s] = w;
  }
  std::vector<double> phi(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t bit = std::size_t{1} << i;
    for (std::size_t m = 0; m < masks; ++m) {
      if (m & bit) continue;
      const auto size = static_cast<std::size_t>(std::popcount(m));
      phi[i] += weight[size] * (v[m | bit] - v[m]);
    }
  }
  return phi;
}

SampledShapley shapley_sampled(const ValueFn& value, int n_players, int permutations,
                               std::uint64_t seed, unsigned threads) {
  if (n_players < 0) throw std::invalid_argument("negative player count");
  if (permutations < 1) throw std::invalid_argument("need at least one permutation");
  const auto n = static_cast<std::size_t>(n_players);
  const auto perms = static_cast<std::size_t>(permutations);

  std::vector<std::vector<int>> orders(perms);
  Rng rng(seed);
  for (auto& order : orders) {
    order.resize(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);
    rng.shuffle(order.begin(), order.end());
  }

  const double empty_value = value(Coalition(n, 0));
  std::vector<double> marginals(perms * n);  // [permutation][player]
  auto run = [&](std::size_t begin, std::size_t end) {
    Coalition coalition(n);
    for (std::size_t p = begin; p < end; ++p) {
      std::fill(coalition.begin(), coalition.end(), 0);
      double previous = empty_value;
      for (int player : orders[p]) {
        coalition[static_cast<std::size_t>(player)] = 1;
        const double current = value(coalition);
        marginals[p * n + static_cast<std::size_t>(player)] = current - previous;
        previous = current;
      }
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, perms));
  if (threads <= 1) {
    run(0, perms);
  } else {
    std::vector<std::jthread> workers;
    const std::size_t chunk = (perms + threads - 1) / threads;
    for (std::size_t begin = 0; begin < perms; begin += chunk) {
      workers.emplace_back(run, begin, std::min(perms, begin + chunk));
    }
  }

  SampledShapley result{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  for (std::size_t p = 0; p < perms; ++p) {
    for (std::size_t i = 0; i < n; ++i) result.values[i] += marginals[p * n + i];
  }
  for (double& v : result.values) v /= static_cast<double>(perms);
  if (perms > 1) {
    for (std::size_t i = 0; i < n; ++i) {
      double ss = 0.0;
      for (std::size_t p = 0; p < perms; ++p) {
        const double d = marginals[p * n + i] - result.values[i];
        ss += d * d;
      }
      const double var = ss / static_cast<double>(perms - 1);
      result.std_errors[i] = std::sqrt(var / static_cast<double>(perms));
    }
  }
  return result;
}

SaliencyMap explain_frame(const MlpParams& model, const Image& frame, Phase phase,
                          const TileGrid& grid, int permutations, std::uint64_t seed,
                          std::string world_id) {
  const OcclusionGame game(model, frame, phase, grid);
  const ValueFn fn = [&game](const Coalition& c) { return game(c); };
  SampledShapley sampled = shapley_sampled(fn, game.players(), permutations, seed);
  SaliencyMap map;
  map.grid = grid;
  map.values = std::move(sampled.values);
  map.std_errors = std::move(sampled.std_errors);
  map.world_id = std::move(world_id);
  map.explained = game.explained_action();
  const auto n = static_cast<std::size_t>(game.players());
  map.full_value = game(Coalition(n, 1));
  map.empty_value = game(Coalition(n, 0));
  return map;
}

std::string_view region_name(TileRegion region) {
  switch (region) {
    case TileRegion::N:
      return "N";
    case TileRegion::E:
      return "E";
    case TileRegion::S:
      return "S";
    case TileRegion::W:
      return "W";
    case TileRegion::Center:
      return "center";
    case TileRegion::None:
      return "none";
  }
  return "?";
}

std::vector<TileRegion> tile_regions(const TileGrid& grid, int approach_length_cells) {
  grid.validate();
  const int cells = std::min(approach_length_cells, kMaxRenderableCells);
  const auto n = static_cast<std::size_t>(grid.n_tiles());
  std::vector<std::array<int, 4>> counts(n, {0, 0, 0, 0});
  for (const Approach a : kApproaches) {
    for (int c = 0; c < cells; ++c) {
      const PixelRect b = vehicle_block(a, c);
      ++counts[static_cast<std::size_t>(grid.tile_at(b.x0, b.y0))][index(a)];
    }
  }
  std::vector<TileRegion> regions(n, TileRegion::None);
  for (std::size_t t = 0; t < n; ++t) {
    const auto& c = counts[t];
    const auto best = std::max_element(c.begin(), c.end());
    if (*best > 0) {
      regions[t] = static_cast<TileRegion>(best - c.begin());
      continue;
    }
    const PixelRect r = grid.rect(static_cast<int>(t));
    const PixelRect& box = kIntersectionBox;
    if (r.x0 < box.x1 && box.x0 < r.x1 && r.y0 < box.y1 && box.y0 < r.y1) {
      regions[t] = TileRegion::Center;
    }
  }
  return regions;
}

FeatureRanking rank_and_select(const SaliencyMap& map, std::span<const TileRegion> regions,
                               int top_k) {
  if (regions.size() != map.values.size()) {
    throw ShapeError("region mapping does not cover every tile");
  }
  FeatureRanking out;
  std::array<RankedApproach, 4> per;
  std::array<double, 4> best{-1.0, -1.0, -1.0, -1.0};
  for (const Approach a : kApproaches) per[index(a)].approach = a;
  for (std::size_t t = 0; t < regions.size(); ++t) {
    const double mag = std::abs(map.values[t]);
    if (regions[t] == TileRegion::Center) {
      out.center_score += mag;
      continue;
    }
    if (regions[t] == TileRegion::None) continue;
    const auto a = static_cast<std::size_t>(regions[t]);
    per[a].score += mag;
    if (mag > best[a]) {
      best[a] = mag;
      per[a].argmax_tile = static_cast<int>(t);
    }
  }
  out.ranked.assign(per.begin(), per.end());
  std::stable_sort(out.ranked.begin(), out.ranked.end(),
                   [](const RankedApproach& a, const RankedApproach& b) { return a.score > b.score; });
  for (std::size_t i = 0; i < out.ranked.size(); ++i) {
    out.ranked[i].selected = static_cast<int>(i) < top_k;
  }
  out.inconclusive = std::all_of(out.ranked.begin(), out.ranked.end(),
                                 [](const RankedApproach& r) { return r.score == 0.0; });
  return out;
}

Image saliency_overlay(const SaliencyMap& map, const Image& frame) {
  const auto& grid = map.grid;
  double lo = 0.0;
  double hi = 0.0;
  if (!map.values.empty()) {
    lo = hi = std::abs(map.values.front());
    for (double v : map.values) {
      lo = std::min(lo, std::abs(v));
      hi = std::max(hi, std::abs(v));
    }
  }
  Image out;
  for (int y = 0; y < Image::kHeight; ++y) {
    for (int x = 0; x < Image::kWidth; ++x) {
      const Rgb p = frame.at(x, y);
      double t = 0.0;
      if (hi > lo) t = (std::abs(map.values[static_cast<std::size_t>(grid.tile_at(x, y))]) - lo) / (hi - lo);
      const auto tint = static_cast<int>(std::lround(128.0 * t));
      out.set(x, y, Rgb{static_cast<std::uint8_t>(p.r / 2 + tint),
                        static_cast<std::uint8_t>(p.g / 2), static_cast<std::uint8_t>(p.b / 2)});
    }
  }
  return out;
}

void export_saliency(const SaliencyMap& map, const Image& frame,
                     const std::filesystem::path& path) {
  write_ppm(saliency_overlay(map, frame), path);
}

std::string saliency_csv(const SaliencyMap& map, std::span<const TileRegion> regions) {
  std::ostringstream out;
  out << "tile_index,row,col,value,stderr,approach\n";
  out << std::setprecision(17);
  const int cols = map.grid.columns();
  for (std::size_t t = 0; t < map.values.size(); ++t) {
    const int ti = static_cast<int>(t);
    out << ti << ',' << ti / cols << ',' << ti % cols << ',' << map.values[t] << ','
        << map.std_errors[t] << ',' << (t < regions.size() ? region_name(regions[t]) : "none")
        << '\n';
  }
  return out.str();
}

}  // namespace smtc
