#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "smtc/sim.hpp"

namespace smtc {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

inline constexpr Rgb kBackground{0, 0, 0};
inline constexpr Rgb kRoadGray{64, 64, 64};
inline constexpr Rgb kVehicleWhite{255, 255, 255};
inline constexpr Rgb kSignalGreen{0, 255, 0};
inline constexpr Rgb kSignalAmber{255, 191, 0};
inline constexpr Rgb kSignalRed{255, 0, 0};

/// 128x64 RGB frame, row-major, 3 bytes per pixel.
struct Image {
  static constexpr int kWidth = 128;
  static constexpr int kHeight = 64;
  static constexpr int kChannels = 3;
  static constexpr std::size_t kBytes = std::size_t{kWidth} * kHeight * kChannels;

  std::vector<std::uint8_t> pixels = std::vector<std::uint8_t>(kBytes, 0);

  Rgb at(int x, int y) const;
  void set(int x, int y, Rgb c);
  bool operator==(const Image&) const = default;
};

/// Inclusive-exclusive pixel rectangle.
struct PixelRect {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  bool contains(int x, int y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
  bool operator==(const PixelRect&) const = default;
};

// Frame layout. The intersection box spans columns 60-67 and rows 28-35. The
// NS road band is columns 60-67, the EW band rows 28-35. Each incoming lane is
// half a band wide (4 px); cell c sits in row-of-blocks k = c/2 away from the
// box and lane slot j = c%2 across the lane, so two 2x2 blocks fit side by side:
//   N: lane cols 60-63, block at x = 60 + 2j, y = 26 - 2k
//   S: lane cols 64-67, block at x = 64 + 2j, y = 36 + 2k
//   E: lane rows 28-31, block at x = 68 + 2k, y = 28 + 2j
//   W: lane rows 32-35, block at x = 58 - 2k, y = 32 + 2j
// Signal heads are 2x2 blocks inside the box next to each lane's stop line.
inline constexpr PixelRect kIntersectionBox{60, 28, 68, 36};
inline constexpr int kMaxRenderableCells = 28;

PixelRect vehicle_block(Approach approach, int cell);
PixelRect signal_block(Approach approach);
Rgb signal_color(Phase phase, Approach approach);

/// Throws std::out_of_range for a vehicle beyond kMaxRenderableCells.
Image render_frame(const WorldState& world);

/// Binary PPM (P6, maxval 255).
std::vector<std::uint8_t> to_ppm(const Image& image);
void write_ppm(const Image& image, const std::filesystem::path& path);

/// Tail cell of the platoon nearest the stop line. Members of a platoon are
/// separated by at most `gap_threshold` empty cells.
std::optional<int> first_platoon_tail(std::span<const int> occupied_cells, int gap_threshold);

struct SemanticVector {
  std::array<float, 4> positions{-1.0f, -1.0f, -1.0f, -1.0f};  // N, E, S, W; -1 = empty
  float phase_index = 0.0f;
  bool operator==(const SemanticVector&) const = default;
};

SemanticVector extract_semantic(const WorldState& world, int gap_threshold);
inline SemanticVector extract_semantic(const WorldState& world) {
  return extract_semantic(world, world.config.gap_threshold_cells);
}

double occupancy(const WorldState& world, Approach approach);
int queue_length(const WorldState& world, Approach approach);

}  // namespace smtc
