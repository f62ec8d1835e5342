#include <gtest/gtest.h>

#include <set>

#include "smtc/perception.hpp"
#include "smtc/semcom.hpp"

using namespace smtc;

namespace {

WorldState quiet_world() {
  SimConfig c;
  c.arrival_prob = {0.0, 0.0, 0.0, 0.0};
  return init_world(c, 1);
}

void place(WorldState& w, Approach a, int cell, bool halted = false) {
  auto& lane = w.lanes[index(a)];
  lane.push_back({w.spawned++, a, cell, 0, 0, halted});
  std::sort(lane.begin(), lane.end(),
            [](const VehicleRecord& x, const VehicleRecord& y) { return x.cell < y.cell; });
}

int count_white(const Image& img) {
  int n = 0;
  for (int y = 0; y < Image::kHeight; ++y) {
    for (int x = 0; x < Image::kWidth; ++x) n += img.at(x, y) == kVehicleWhite;
  }
  return n;
}

// Straight scan over a boolean occupancy array.
std::optional<int> naive_tail(const std::vector<bool>& occ, int gap) {
  int i = 0;
  const int n = static_cast<int>(occ.size());
  while (i < n && !occ[i]) ++i;
  if (i == n) return std::nullopt;
  int tail = i;
  int empty_run = 0;
  for (int c = i + 1; c < n; ++c) {
    if (occ[c]) {
      if (empty_run > gap) break;
      tail = c;
      empty_run = 0;
    } else {
      ++empty_run;
    }
  }
  return tail;
}

}  // namespace

TEST(Render, EmptyWorldHasNoVehicles) {
  const Image img = render_frame(quiet_world());
  EXPECT_EQ(img.pixels.size(), 24576u);
  EXPECT_EQ(count_white(img), 0);
  EXPECT_EQ(img.at(0, 0), kBackground);
  EXPECT_EQ(img.at(62, 5), kRoadGray);
  EXPECT_EQ(img.at(5, 30), kRoadGray);
  EXPECT_EQ(img.at(60, 28), kSignalGreen);  // N head under NS green
  EXPECT_EQ(img.at(66, 28), kSignalRed);    // E head
}

TEST(Render, SouthCellFourBlock) {
  WorldState w = quiet_world();
  place(w, Approach::S, 4);
  const Image img = render_frame(w);
  // k = 2, j = 0: x = 64, y = 36 + 4
  EXPECT_EQ(vehicle_block(Approach::S, 4), (PixelRect{64, 40, 66, 42}));
  EXPECT_EQ(count_white(img), 4);
  for (int y = 40; y < 42; ++y) {
    for (int x = 64; x < 66; ++x) EXPECT_EQ(img.at(x, y), kVehicleWhite);
  }
}

TEST(Render, EqualWorldsGiveEqualFrames) {
  SimConfig c;
  WorldState a = init_world(c, 3);
  for (int i = 0; i < 50; ++i) step(a, Action::Extend);
  const WorldState b = a;
  EXPECT_EQ(render_frame(a).pixels, render_frame(b).pixels);
}

TEST(Render, BlocksAreDisjointAndInsideFrame) {
  std::set<std::pair<int, int>> used;
  for (const Approach a : kApproaches) {
    for (int c = 0; c < kMaxRenderableCells; ++c) {
      const PixelRect r = vehicle_block(a, c);
      EXPECT_GE(r.x0, 0);
      EXPECT_GE(r.y0, 0);
      EXPECT_LE(r.x1, Image::kWidth);
      EXPECT_LE(r.y1, Image::kHeight);
      for (int y = r.y0; y < r.y1; ++y) {
        for (int x = r.x0; x < r.x1; ++x) {
          EXPECT_TRUE(used.insert({x, y}).second);
          EXPECT_FALSE(kIntersectionBox.contains(x, y));
        }
      }
    }
  }
  EXPECT_THROW(vehicle_block(Approach::N, kMaxRenderableCells), std::out_of_range);
}

TEST(Render, EveryVehicleVisibleAndViceVersa) {
  SimConfig c;
  c.arrival_prob = {0.5, 0.4, 0.6, 0.3};
  WorldState w = init_world(c, 8);
  Rng actions(2);
  for (int t = 0; t < 400; ++t) {
    step(w, actions.bernoulli(0.1) ? Action::Switch : Action::Extend);
    const Image img = render_frame(w);
    for (const Approach a : kApproaches) {
      std::set<int> occupied;
      for (const auto& v : w.lanes[index(a)]) occupied.insert(v.cell);
      for (int cell = 0; cell < c.approach_length_cells; ++cell) {
        const PixelRect r = vehicle_block(a, cell);
        bool white = true;
        for (int y = r.y0; y < r.y1; ++y) {
          for (int x = r.x0; x < r.x1; ++x) white = white && img.at(x, y) == kVehicleWhite;
        }
        ASSERT_EQ(white, occupied.count(cell) == 1) << "t=" << t << " cell=" << cell;
      }
    }
    ASSERT_EQ(count_white(img), 4 * static_cast<int>(w.vehicle_count()));
  }
}

TEST(Render, PpmHeader) {
  const auto bytes = to_ppm(render_frame(quiet_world()));
  const std::string header = "P6\n128 64\n255\n";
  ASSERT_EQ(bytes.size(), header.size() + 24576);
  EXPECT_TRUE(std::equal(header.begin(), header.end(), bytes.begin()));
}

TEST(PlatoonTail, Examples) {
  EXPECT_EQ(first_platoon_tail({}, 2), std::nullopt);
  const std::vector<int> one{0};
  EXPECT_EQ(first_platoon_tail(one, 2), 0);
  const std::vector<int> split{0, 1, 2, 7, 8};
  EXPECT_EQ(first_platoon_tail(split, 2), 2);
  const std::vector<int> bridged{3, 6, 9};
  EXPECT_EQ(first_platoon_tail(bridged, 2), 9);
  EXPECT_EQ(first_platoon_tail(bridged, 1), 3);
}

TEST(PlatoonTail, MatchesNaiveScanOnRandomSets) {
  Rng rng(2024);
  for (int trial = 0; trial < 10000; ++trial) {
    const int length = 1 + static_cast<int>(rng.below(30));
    const double density = rng.uniform();
    const int gap = 1 + static_cast<int>(rng.below(4));
    std::vector<bool> occ(static_cast<std::size_t>(length));
    std::vector<int> cells;
    for (int c = 0; c < length; ++c) {
      occ[static_cast<std::size_t>(c)] = rng.bernoulli(density);
      if (occ[static_cast<std::size_t>(c)]) cells.push_back(c);
    }
    rng.shuffle(cells.begin(), cells.end());
    ASSERT_EQ(first_platoon_tail(cells, gap), naive_tail(occ, gap)) << "trial " << trial;
  }
}

TEST(Semantic, EmptyWorld) {
  const SemanticVector v = extract_semantic(quiet_world());
  EXPECT_EQ(v, (SemanticVector{{-1, -1, -1, -1}, 0}));
}

TEST(Semantic, SingleSouthVehicleUnderEwGreen) {
  WorldState w = quiet_world();
  place(w, Approach::S, 4);
  w.signal.phase = Phase::EwGreen;
  EXPECT_EQ(extract_semantic(w), (SemanticVector{{-1, -1, 4, -1}, 2}));
}

TEST(Semantic, BoundedByOccupancyAndPure) {
  SimConfig c;
  c.arrival_prob = {0.5, 0.2, 0.6, 0.1};
  WorldState w = init_world(c, 4);
  for (int t = 0; t < 500; ++t) {
    step(w, t % 40 == 39 ? Action::Switch : Action::Extend);
    const SemanticVector v = extract_semantic(w);
    ASSERT_EQ(v, extract_semantic(w));
    ASSERT_EQ(encode_semantic(v).bytes.size(), 20u);
    for (const Approach a : kApproaches) {
      const auto& lane = w.lanes[index(a)];
      const float pos = v.positions[index(a)];
      if (lane.empty()) {
        ASSERT_EQ(pos, -1.0f);
      } else {
        ASSERT_GE(pos, 0.0f);
        ASSERT_LE(pos, static_cast<float>(lane.back().cell));
      }
    }
  }
}

TEST(Occupancy, Examples) {
  WorldState w = quiet_world();
  EXPECT_EQ(occupancy(w, Approach::E), 0.0);
  EXPECT_EQ(queue_length(w, Approach::E), 0);
  for (int c : {0, 1, 2}) place(w, Approach::E, c, true);
  for (int c : {10, 20}) place(w, Approach::E, c, false);
  EXPECT_DOUBLE_EQ(occupancy(w, Approach::E), 0.2);
  EXPECT_EQ(queue_length(w, Approach::E), 3);
  for (int c = 0; c < 25; ++c) place(w, Approach::W, c);
  EXPECT_EQ(occupancy(w, Approach::W), 1.0);
}
