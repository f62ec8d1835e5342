#include "smtc/perception.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>
#include <string>

#include "smtc/errors.hpp"

namespace smtc {

Rgb Image::at(int x, int y) const {
  const auto i = (static_cast<std::size_t>(y) * kWidth + static_cast<std::size_t>(x)) * kChannels;
  return {pixels[i], pixels[i + 1], pixels[i + 2]};
}

void Image::set(int x, int y, Rgb c) {
  const auto i = (static_cast<std::size_t>(y) * kWidth + static_cast<std::size_t>(x)) * kChannels;
  pixels[i] = c.r;
  pixels[i + 1] = c.g;
  pixels[i + 2] = c.b;
}

namespace {

void fill(Image& image, const PixelRect& rect, Rgb color) {
  for (int y = std::max(rect.y0, 0); y < std::min(rect.y1, Image::kHeight); ++y) {
    for (int x = std::max(rect.x0, 0); x < std::min(rect.x1, Image::kWidth); ++x) {
      image.set(x, y, color);
    }
  }
}

}  // namespace

PixelRect vehicle_block(Approach approach, int cell) {
  if (cell < 0 || cell >= kMaxRenderableCells) {
    throw std::out_of_range("cell " + std::to_string(cell) + " outside the frame layout");
  }
  const int k = cell / 2;
  const int j = cell % 2;
  int x = 0;
  int y = 0;
  switch (approach) {
    case Approach::N:
      x = 60 + 2 * j;
      y = 26 - 2 * k;
      break;
    case Approach::S:
      x = 64 + 2 * j;
      y = 36 + 2 * k;
      break;
    case Approach::E:
      x = 68 + 2 * k;
      y = 28 + 2 * j;
      break;
    case Approach::W:
      x = 58 - 2 * k;
      y = 32 + 2 * j;
      break;
  }
  return {x, y, x + 2, y + 2};
}

PixelRect signal_block(Approach approach) {
  switch (approach) {
    case Approach::N:
      return {60, 28, 62, 30};
    case Approach::E:
      return {66, 28, 68, 30};
    case Approach::S:
      return {66, 34, 68, 36};
    case Approach::W:
      return {60, 34, 62, 36};
  }
  return {};
}

Rgb signal_color(Phase phase, Approach approach) {
  if (has_green(phase, approach)) return kSignalGreen;
  const bool ns = approach == Approach::N || approach == Approach::S;
  if ((ns && phase == Phase::NsYellow) || (!ns && phase == Phase::EwYellow)) return kSignalAmber;
  return kSignalRed;
}

Image render_frame(const WorldState& world) {
  Image image;
  fill(image, {kIntersectionBox.x0, 0, kIntersectionBox.x1, Image::kHeight}, kRoadGray);
  fill(image, {0, kIntersectionBox.y0, Image::kWidth, kIntersectionBox.y1}, kRoadGray);
  for (const auto& lane : world.lanes) {
    for (const auto& v : lane) fill(image, vehicle_block(v.approach, v.cell), kVehicleWhite);
  }
  for (const Approach a : kApproaches) {
    fill(image, signal_block(a), signal_color(world.signal.phase, a));
  }
  return image;
}

std::vector<std::uint8_t> to_ppm(const Image& image) {
  const std::string header =
      "P6\n" + std::to_string(Image::kWidth) + " " + std::to_string(Image::kHeight) + "\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  bytes.insert(bytes.end(), image.pixels.begin(), image.pixels.end());
  return bytes;
}

void write_ppm(const Image& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  const auto bytes = to_ppm(image);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

std::optional<int> first_platoon_tail(std::span<const int> occupied_cells, int gap_threshold) {
  if (occupied_cells.empty()) return std::nullopt;
  std::vector<int> cells(occupied_cells.begin(), occupied_cells.end());
  std::sort(cells.begin(), cells.end());
  int tail = cells.front();
  for (std::size_t i = 1; i < cells.size(); ++i) {
    if (cells[i] - tail - 1 > gap_threshold) break;
    tail = cells[i];
  }
  return tail;
}

SemanticVector extract_semantic(const WorldState& world, int gap_threshold) {
  SemanticVector vec;
  std::vector<int> cells;
  for (const Approach a : kApproaches) {
    const auto& lane = world.lanes[index(a)];
    cells.clear();
    for (const auto& v : lane) cells.push_back(v.cell);
    const auto tail = first_platoon_tail(cells, gap_threshold);
    vec.positions[index(a)] = tail ? static_cast<float>(*tail) : -1.0f;
  }
  vec.phase_index = static_cast<float>(phase_index(world.signal.phase));
  return vec;
}

double occupancy(const WorldState& world, Approach approach) {
  return static_cast<double>(world.lanes[index(approach)].size()) /
         static_cast<double>(world.config.approach_length_cells);
}

int queue_length(const WorldState& world, Approach approach) {
  const auto& lane = world.lanes[index(approach)];
  return static_cast<int>(
      std::count_if(lane.begin(), lane.end(), [](const VehicleRecord& v) { return v.halted; }));
}

}  // namespace smtc
