#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <map>

#include "egoloc/error.hpp"
#include "egoloc/world/grid.hpp"
#include "egoloc/world/patch.hpp"
#include "egoloc/world/scene.hpp"
#include "common/test_util.hpp"

namespace egoloc {
namespace {

using world::SceneConfig;
using world::SegmentGrid;

std::pair<double, double> mean_var_z(const num::Tensor& pts) {
  const auto n = pts.dim(0);
  double m = 0.0;
  for (std::int64_t i = 0; i < n; ++i) m += pts[3 * i + 2];
  m /= n;
  double v = 0.0;
  for (std::int64_t i = 0; i < n; ++i) v += (pts[3 * i + 2] - m) * (pts[3 * i + 2] - m);
  return {m, v / n};
}

TEST(Scene, SameSeedGivesIdenticalCloudBytes) {
  SceneConfig cfg;
  auto a = world::generate_scene(cfg, 42);
  auto b = world::generate_scene(cfg, 42);
  EXPECT_EQ(world::cloud_to_bytes(a.cloud), world::cloud_to_bytes(b.cloud));
  EXPECT_EQ(world::scene_to_json(a.scene), world::scene_to_json(b.scene));
  auto c = world::generate_scene(cfg, 43);
  EXPECT_NE(world::cloud_to_bytes(a.cloud), world::cloud_to_bytes(c.cloud));
}

TEST(Scene, OpenFloorOnlySceneIsFlat) {
  SceneConfig cfg;
  cfg.anchor_counts = {0, 0, 0, 0, 0, 4};
  auto g = world::generate_scene(cfg, 5);
  ASSERT_FALSE(g.cloud.points.empty());
  for (const auto& p : g.cloud.points) EXPECT_LE(p[2], 0.05f);
}

TEST(Scene, InvariantsHoldAcrossSeeds) {
  SceneConfig cfg;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    cfg.extent = 2.5 + 0.2 * static_cast<double>(seed);
    auto g = world::generate_scene(cfg, seed);
    const double L = cfg.extent;
    ASSERT_EQ(g.scene.anchors.size(), 8u);
    for (std::size_t i = 0; i < g.scene.anchors.size(); ++i) {
      const auto& a = g.scene.anchors[i];
      EXPECT_TRUE(a.x >= 0 && a.x <= L && a.y >= 0 && a.y <= L);
      for (std::size_t j = 0; j < i; ++j) {
        const auto& b = g.scene.anchors[j];
        EXPECT_GE(std::hypot(a.x - b.x, a.y - b.y), 0.6);
      }
    }
    for (const auto& p : g.cloud.points) {
      ASSERT_TRUE(p[0] >= 0 && p[0] <= L && p[1] >= 0 && p[1] <= L && p[2] >= 0 && p[2] <= 2.5);
    }
  }
}

TEST(Scene, ClusterHeightsDifferAcrossTypes) {
  std::vector<double> means;
  for (int kind = 0; kind < world::kNumAnchorKinds; ++kind) {
    SceneConfig cfg;
    cfg.floor_density = 0.0;
    cfg.anchor_counts = {0, 0, 0, 0, 0, 0};
    cfg.anchor_counts[kind] = 3;
    auto g = world::generate_scene(cfg, 100 + kind);
    double m = 0.0;
    for (const auto& p : g.cloud.points) m += p[2];
    means.push_back(m / g.cloud.points.size());
  }
  for (std::size_t i = 0; i < means.size(); ++i)
    for (std::size_t j = 0; j < i; ++j) EXPECT_GE(std::abs(means[i] - means[j]), 0.15) << i << " vs " << j;
}

TEST(Scene, RejectsBadConfigs) {
  SceneConfig cfg;
  cfg.extent = 7.0;
  EXPECT_THROW(world::generate_scene(cfg, 1), ConfigError);
  cfg = SceneConfig{};
  cfg.anchor_counts = {1, 1, 0, 0, 0, 0};
  EXPECT_THROW(world::generate_scene(cfg, 1), ConfigError);
  cfg = SceneConfig{};
  cfg.extent = 2.5;
  cfg.anchor_counts = {10, 10, 10, 0, 0, 0};
  EXPECT_THROW(world::generate_scene(cfg, 1), ConfigError);
}

TEST(Scene, FilesRoundTrip) {
  auto dir = testing::scratch_dir("world_io");
  auto g = world::generate_scene(SceneConfig{}, 9);
  world::save_scene(g.scene, dir / "s.json");
  world::save_cloud(g.cloud, dir / "s.cloud");
  auto s2 = world::load_scene(dir / "s.json");
  auto c2 = world::load_cloud(dir / "s.cloud", s2.extent);
  EXPECT_EQ(world::scene_to_json(s2), world::scene_to_json(g.scene));
  EXPECT_EQ(c2.points, g.cloud.points);
  auto bytes = testing::read_bytes(dir / "s.cloud");
  EXPECT_EQ(bytes.size(), 8 + 12 * g.cloud.points.size());
  bytes.pop_back();
  EXPECT_THROW(world::cloud_from_bytes(bytes, 4.0), DataError);
  EXPECT_THROW(world::scene_from_json("{\"extent\": 4}"), DataError);
}

TEST(Grid, DefaultPartition) {
  SegmentGrid g(4.0, 20);
  EXPECT_DOUBLE_EQ(g.cell_side(), 0.2);
  EXPECT_EQ(g.num_segments(), 400);
  EXPECT_EQ(world::nearest_segment(0.0, 0.0, g), 0);
  const double eps = 1e-9;
  EXPECT_EQ(world::nearest_segment(4.0 - eps, 4.0 - eps, g), 399);
  EXPECT_EQ(world::nearest_segment(4.0, 4.0, g), 399);
}

TEST(Grid, InteriorBoundaryGoesToHigherCell) {
  for (int G : {3, 7, 20}) {
    SegmentGrid g(4.0, G);
    for (int k = 1; k < G; ++k) {
      const double b = g.boundary_x(k);
      EXPECT_EQ(g.col_of(b), k);
      EXPECT_EQ(g.row_of(b), k);
      EXPECT_EQ(g.col_of(std::nextafter(b, -1.0)), k - 1);
    }
  }
}

TEST(Grid, CellsTileTheFloorExactly) {
  // dyadic cell sides make every area exact
  SegmentGrid g(4.0, 16);
  double area = 0.0;
  for (int r = 0; r < 16; ++r)
    for (int c = 0; c < 16; ++c)
      area += (g.boundary_x(c + 1) - g.boundary_x(c)) * (g.boundary_y(r + 1) - g.boundary_y(r));
  EXPECT_EQ(area, 16.0);

  SegmentGrid d(4.0, 20);
  double widths = 0.0;
  for (int c = 0; c < 20; ++c) widths += d.boundary_x(c + 1) - d.boundary_x(c);
  EXPECT_NEAR(widths * widths, 16.0, 1e-12);

  Rng rng(4);
  for (int i = 0; i < 10000; ++i) {
    const double x = uniform(rng, 0.0, 4.0), y = uniform(rng, 0.0, 4.0);
    const int c = d.col_of(x), r = d.row_of(y);
    ASSERT_TRUE(d.boundary_x(c) <= x && (x < d.boundary_x(c + 1) || c == 19));
    ASSERT_TRUE(d.boundary_y(r) <= y && (y < d.boundary_y(r + 1) || r == 19));
  }
}

TEST(Grid, MatchesBruteForceNearestCenter) {
  SegmentGrid g(4.0, 20);
  Rng rng(77);
  for (int i = 0; i < 1000; ++i) {
    const double x = uniform(rng, 0.0, 4.0), y = uniform(rng, 0.0, 4.0);
    int best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (int s = 0; s < g.num_segments(); ++s) {
      auto [cx, cy] = g.center(s);
      double d = std::hypot(x - cx, y - cy);
      if (d < bd) bd = d, best = s;
    }
    EXPECT_EQ(world::nearest_segment(x, y, g), best);
    EXPECT_LE(bd, g.cell_side() * std::sqrt(2.0) / 2.0);
  }
}

TEST(Grid, CentersAndClamping) {
  SegmentGrid g(4.0, 20);
  for (int s = 0; s < g.num_segments(); ++s) {
    auto [cx, cy] = g.center(s);
    EXPECT_EQ(world::nearest_segment(cx, cy, g), s);
  }
  EXPECT_EQ(world::nearest_segment(-0.1, 2.05, g), 10 * 20 + 0);
  EXPECT_EQ(world::nearest_segment(4.1, -0.1, g), 19);
  EXPECT_THROW(SegmentGrid(4.0, 1), InvalidArgument);
}

TEST(Patch, EmptyFloorIsPadded) {
  world::PointCloud cloud;
  cloud.extent = 4.0;
  cloud.points.push_back({3.9f, 3.9f, 1.0f});
  auto p = world::patch_at(cloud, 1.0, 1.0, 1.0, 256, 3);
  ASSERT_EQ(p.points.shape(), (num::Shape{256, 3}));
  for (std::int64_t i = 0; i < 256; ++i) {
    EXPECT_LE(std::abs(p.points[3 * i]), 0.5);
    EXPECT_LE(std::abs(p.points[3 * i + 1]), 0.5);
    EXPECT_LE(p.points[3 * i + 2], 0.01);
  }
}

TEST(Patch, ClippedAtBorders) {
  world::PointCloud cloud;
  cloud.extent = 4.0;
  auto p = world::patch_at(cloud, 0.1, 3.95, 1.0, 128, 3);
  for (std::int64_t i = 0; i < 128; ++i) {
    EXPECT_GE(p.points[3 * i] + 0.1, 0.0);
    EXPECT_LE(p.points[3 * i + 1] + 3.95, 4.0);
  }
}

TEST(Patch, DeterministicAndExactSize) {
  auto g = world::generate_scene(SceneConfig{}, 8);
  auto a = world::patch_at(g.cloud, 2.0, 2.0, 1.0, 1024, 99);
  auto b = world::patch_at(g.cloud, 2.0, 2.0, 1.0, 1024, 99);
  EXPECT_TRUE(a.points == b.points);
  EXPECT_EQ(a.points.dim(0), 1024);
  auto c = world::patch_at(g.cloud, 2.0, 2.0, 1.0, 1024, 100);
  EXPECT_FALSE(a.points == c.points);
}

TEST(Patch, TranslationConsistent) {
  // dyadic coordinates keep every shift exact in float and double
  Rng rng(6);
  world::PointCloud base;
  base.extent = 4.0;
  std::uniform_int_distribution<int> q(0, 4096);
  for (int i = 0; i < 3000; ++i) {
    base.points.push_back({q(rng) / 1024.0f, q(rng) / 1024.0f, q(rng) / 2048.0f});
  }
  const double dx = 1.25, dy = -0.75;
  world::PointCloud shifted = base;
  shifted.origin_x += dx;
  shifted.origin_y += dy;
  for (auto& p : shifted.points) {
    p[0] += static_cast<float>(dx);
    p[1] += static_cast<float>(dy);
  }
  for (auto [cx, cy] : std::vector<std::pair<double, double>>{{2.0, 2.0}, {0.125, 3.875}, {3.5, 0.25}}) {
    for (int n : {200, 1024}) {
      auto a = world::patch_at(base, cx, cy, 1.0, n, 17);
      auto b = world::patch_at(shifted, cx + dx, cy + dy, 1.0, n, 17);
      EXPECT_TRUE(a.points == b.points) << cx << "," << cy << " n=" << n;
    }
  }
}

TEST(Patch, SinkStandsAboveOpenFloor) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto g = world::generate_scene(SceneConfig{}, seed);
    double sink = 0, floor = 0;
    for (const auto& a : g.scene.anchors) {
      auto p = world::patch_at(g.cloud, a.x, a.y, 1.0, 1024, seed);
      if (a.kind == world::kSink) sink = mean_var_z(p.points).first;
      if (a.kind == world::kOpenFloor) floor = mean_var_z(p.points).first;
    }
    EXPECT_GE(sink - floor, 0.15) << "seed " << seed;
  }
}

struct PatchStats {
  int kind;
  double mean, var;
};

std::vector<PatchStats> anchor_patch_stats(std::uint64_t first_seed, int scenes) {
  std::vector<PatchStats> out;
  for (int i = 0; i < scenes; ++i) {
    const std::uint64_t seed = first_seed + i;
    auto g = world::generate_scene(SceneConfig{}, seed);
    for (const auto& a : g.scene.anchors) {
      auto [m, v] = mean_var_z(world::patch_at(g.cloud, a.x, a.y, 1.0, 1024, seed * 31 + a.kind).points);
      out.push_back({a.kind, m, v});
    }
  }
  return out;
}

TEST(Patch, MeanHeightOrderingFollowsTypeRanges) {
  auto stats = anchor_patch_stats(200, 30);
  std::map<int, std::pair<double, int>> acc;
  for (const auto& s : stats) {
    acc[s.kind].first += s.mean;
    acc[s.kind].second += 1;
  }
  std::vector<std::pair<double, double>> by_type;  // (range midpoint, measured mean)
  for (auto& [kind, v] : acc) {
    const auto& t = world::anchor_type(kind);
    by_type.push_back({0.5 * (t.z_lo + t.z_hi), v.first / v.second});
  }
  std::sort(by_type.begin(), by_type.end());
  for (std::size_t i = 1; i < by_type.size(); ++i) EXPECT_LT(by_type[i - 1].second, by_type[i].second);
}

TEST(Patch, AnchorTypesSeparableByOneNearestNeighbor) {
  auto train = anchor_patch_stats(1000, 30);
  auto test = anchor_patch_stats(5000, 20);
  int correct = 0;
  for (const auto& q : test) {
    double bd = std::numeric_limits<double>::infinity();
    int pred = -1;
    for (const auto& r : train) {
      double d = std::hypot(q.mean - r.mean, q.var - r.var);
      if (d < bd) bd = d, pred = r.kind;
    }
    correct += pred == q.kind;
  }
  const double acc = static_cast<double>(correct) / test.size();
  EXPECT_GE(acc, 0.8) << "1-NN accuracy " << acc;
}

}  // namespace
}  // namespace egoloc
