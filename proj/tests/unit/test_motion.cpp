#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "egoloc/error.hpp"
#include "egoloc/motion/actions.hpp"
#include "egoloc/motion/imu.hpp"
#include "egoloc/motion/labels.hpp"
#include "egoloc/motion/script.hpp"
#include "egoloc/motion/trajectory.hpp"
#include "egoloc/world/grid.hpp"
#include "common/test_util.hpp"

namespace egoloc {
namespace {

using namespace motion;
using world::Anchor;
using world::Scene;

Scene default_scene(std::uint64_t seed) { return world::generate_scene(world::SceneConfig{}, seed).scene; }

Scene two_anchor_scene() {
  Scene s;
  s.extent = 4.0;
  s.anchors = {{world::kSink, 1.0, 1.0}, {world::kTable, 3.0, 1.0}};
  return s;
}

TEST(Script, CoversTotalWithoutGaps) {
  auto actions = default_actions();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto sc = plan_script(default_scene(seed), actions, 60.0, seed);
    ASSERT_FALSE(sc.empty());
    EXPECT_EQ(sc.front().start, 0.0);
    for (std::size_t i = 1; i < sc.size(); ++i) EXPECT_EQ(sc[i].start, sc[i - 1].start + sc[i - 1].duration);
    EXPECT_DOUBLE_EQ(script_end(sc), 60.0);
  }
}

TEST(Script, StationaryEpisodesMatchAnchorAffinity) {
  auto actions = default_actions();
  auto scene = default_scene(3);
  auto sc = plan_script(scene, actions, 120.0, 3);
  for (std::size_t i = 0; i < sc.size(); ++i) {
    const auto& e = sc[i];
    const auto& cls = actions[static_cast<std::size_t>(e.action)];
    if (cls.stationary) {
      EXPECT_EQ(cls.anchor_affinity, scene.anchors[static_cast<std::size_t>(e.anchor)].kind);
      if (i + 1 < sc.size()) {
        EXPECT_GE(e.duration, 2.0);
        EXPECT_LE(e.duration, 8.0);
      }
    } else {
      // walks alternate with stationary episodes and connect consecutive anchors
      ASSERT_GT(i, 0u);
      EXPECT_TRUE(actions[static_cast<std::size_t>(sc[i - 1].action)].stationary);
      EXPECT_NE(sc[i - 1].anchor, e.anchor);
      if (i + 1 < sc.size()) EXPECT_EQ(sc[i + 1].anchor, e.anchor);
    }
  }
}

TEST(Script, SingleSinkWashAlwaysAtSink) {
  auto actions = select_actions(default_actions(), {"walk", "wash"});
  auto scene = two_anchor_scene();
  auto sc = plan_script(scene, actions, 60.0, 8);
  for (const auto& e : sc) {
    EXPECT_EQ(e.action, 1);
    EXPECT_EQ(e.anchor, 0);
  }
}

TEST(Script, DeterministicUnderSeed) {
  auto actions = default_actions();
  auto scene = default_scene(1);
  EXPECT_EQ(script_to_jsonl(plan_script(scene, actions, 60, 5), actions),
            script_to_jsonl(plan_script(scene, actions, 60, 5), actions));
  EXPECT_NE(script_to_jsonl(plan_script(scene, actions, 60, 5), actions),
            script_to_jsonl(plan_script(scene, actions, 60, 6), actions));
}

TEST(Script, RejectsInvalidRequests) {
  auto actions = default_actions();
  EXPECT_THROW(plan_script(default_scene(1), actions, 9.0, 1), InvalidArgument);
  EXPECT_THROW(plan_script(default_scene(1), select_actions(actions, {"wash"}), 60.0, 1), InvalidArgument);
  Scene tables;
  tables.anchors = {{world::kTable, 1, 1}, {world::kTable, 2, 2}, {world::kTable, 3, 3}};
  EXPECT_THROW(plan_script(tables, select_actions(actions, {"walk", "wash"}), 60.0, 1), InvalidArgument);
}

TEST(Script, JsonlRoundTrip) {
  auto actions = default_actions();
  auto sc = plan_script(default_scene(2), actions, 60.0, 2);
  auto back = script_from_jsonl(script_to_jsonl(sc, actions), actions);
  ASSERT_EQ(back.size(), sc.size());
  for (std::size_t i = 0; i < sc.size(); ++i) {
    EXPECT_EQ(back[i].action, sc[i].action);
    EXPECT_EQ(back[i].start, sc[i].start);
    EXPECT_EQ(back[i].duration, sc[i].duration);
    EXPECT_EQ(back[i].anchor, sc[i].anchor);
  }
  EXPECT_THROW(script_from_jsonl("{\"action\":\"dance\",\"start\":0,\"duration\":1,\"anchor\":0}\n", actions),
               DataError);
}

TEST(Trajectory, AllStationaryHoldsPosition) {
  auto actions = select_actions(default_actions(), {"walk", "wash"});
  auto scene = two_anchor_scene();
  auto sc = plan_script(scene, actions, 60.0, 4);
  auto tr = simulate_trajectory(scene, sc, 50, {}, 4);
  ASSERT_EQ(tr.size(), 3000u);
  for (std::size_t i = 0; i < tr.size(); ++i) {
    EXPECT_LE(std::abs(tr.x[i] - 1.0), 0.03);
    EXPECT_LE(std::abs(tr.y[i] - 1.0), 0.03);
  }
}

TEST(Trajectory, StraightWalkArrivalTime) {
  Scene s;
  s.anchors = {{world::kSink, 1.0, 2.0}, {world::kTable, 3.0, 2.0}};
  ActionScript sc = {{1, 0.0, 1.0, 0}, {0, 1.0, 6.0, 1}, {6, 7.0, 3.0, 1}};
  auto tr = simulate_trajectory(s, sc, 50, {}, 1);
  double arrival = -1;
  for (std::size_t i = 0; i < tr.size(); ++i) {
    if (tr.t[i] > 1.0 && std::abs(tr.x[i] - 3.0) < 1e-9) {
      arrival = tr.t[i] - 1.0;
      break;
    }
  }
  EXPECT_NEAR(arrival, 2.0 / 0.8 + 0.8 / 0.5, 0.2);
  EXPECT_NEAR(walk_duration(2.0, 0.8, 0.5), 4.1, 1e-12);
  // triangular profile for short hops
  EXPECT_NEAR(walk_duration(0.5, 0.8, 0.5), 2.0, 1e-12);
}

TEST(Trajectory, InvariantsOnRandomScripts) {
  auto actions = default_actions();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto scene = default_scene(seed);
    auto sc = plan_script(scene, actions, 60.0, seed);
    auto tr = simulate_trajectory(scene, sc, 50, {}, seed);
    ASSERT_EQ(tr.size(), 3000u);
    for (std::size_t i = 0; i < tr.size(); ++i) {
      EXPECT_LE(std::hypot(tr.vx[i], tr.vy[i]), kMaxSpeed);
      EXPECT_TRUE(tr.x[i] >= 0 && tr.x[i] <= scene.extent && tr.y[i] >= 0 && tr.y[i] <= scene.extent);
      if (i > 0) {
        EXPECT_LT(std::abs(tr.heading[i] - tr.heading[i - 1]), 0.2);
        EXPECT_LT(std::hypot(tr.x[i] - tr.x[i - 1], tr.y[i] - tr.y[i - 1]), kMaxSpeed / 50 + 1e-12);
      }
    }
  }
}

TEST(Trajectory, DoubleIntegrationReconstructsPath) {
  auto actions = default_actions();
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    auto scene = default_scene(seed);
    auto sc = plan_script(scene, actions, 60.0, seed);
    auto tr = simulate_trajectory(scene, sc, 50, {}, seed);
    ImuSynthParams p;
    p.noise = ImuNoise::none();
    p.signatures = false;
    auto imu = synthesize_imu(tr, sc, actions, p, seed);
    const double dt = 1.0 / 50;
    double px = tr.x[0], py = tr.y[0], vx = tr.vx[0], vy = tr.vy[0];
    double max_err = 0.0;
    auto world_acc = [&](std::size_t i) {
      const double c = std::cos(tr.heading[i]), s = std::sin(tr.heading[i]);
      const double bx = imu.samples[i][0], by = imu.samples[i][1];
      return std::pair<double, double>{c * bx - s * by, s * bx + c * by};
    };
    for (std::size_t i = 1; i < tr.size(); ++i) {
      auto [ax0, ay0] = world_acc(i - 1);
      auto [ax1, ay1] = world_acc(i);
      const double nvx = vx + 0.5 * dt * (ax0 + ax1), nvy = vy + 0.5 * dt * (ay0 + ay1);
      px += 0.5 * dt * (vx + nvx);
      py += 0.5 * dt * (vy + nvy);
      vx = nvx;
      vy = nvy;
      max_err = std::max(max_err, std::hypot(px - tr.x[i], py - tr.y[i]));
    }
    EXPECT_LT(max_err, 0.05) << "seed " << seed;
  }
}

TEST(Imu, RestCaseIsGravityOnly) {
  Scene s;
  s.anchors = {{world::kSink, 2.0, 2.0}};
  ActionScript sc = {{1, 0.0, 5.0, 0}};
  TrajectoryParams tp;
  tp.jitter = 0.0;
  auto tr = simulate_trajectory(s, sc, 50, tp, 1);
  ImuSynthParams p;
  p.noise = ImuNoise::none();
  p.signatures = false;
  auto imu = synthesize_imu(tr, sc, default_actions(), p, 1);
  ASSERT_EQ(imu.samples.size(), 250u);
  for (const auto& r : imu.samples) {
    EXPECT_EQ(r[0], 0.0f);
    EXPECT_EQ(r[1], 0.0f);
    EXPECT_EQ(r[2], static_cast<float>(kGravity));
    EXPECT_EQ(r[3], 0.0f);
    EXPECT_EQ(r[4], 0.0f);
    EXPECT_EQ(r[5], 0.0f);
  }
}

TEST(Imu, CircularWalkCentripetal) {
  const double r = 1.0, v = 0.5, w = v / r;
  Trajectory tr;
  tr.rate_hz = 50;
  for (int i = 0; i < 500; ++i) {
    const double t = i / 50.0, a = w * t;
    tr.t.push_back(t);
    tr.x.push_back(2 + r * std::cos(a));
    tr.y.push_back(2 + r * std::sin(a));
    tr.heading.push_back(a + std::numbers::pi / 2);
    tr.vx.push_back(-v * std::sin(a));
    tr.vy.push_back(v * std::cos(a));
    tr.ax.push_back(-v * w * std::cos(a));
    tr.ay.push_back(-v * w * std::sin(a));
    tr.yaw_rate.push_back(w);
  }
  ActionScript sc = {{0, 0.0, 10.0, -1}};
  ImuSynthParams p;
  p.noise = ImuNoise::none();
  p.signatures = false;
  auto imu = synthesize_imu(tr, sc, default_actions(), p, 2);
  for (const auto& s : imu.samples) {
    EXPECT_NEAR(std::hypot(s[0], s[1]), 0.25, 1e-6);
    EXPECT_NEAR(s[0], 0.0, 1e-6);  // no tangential component
    EXPECT_NEAR(s[5], w, 1e-6);
  }
}

// Magnitude spectrum of one channel by direct DFT.
std::vector<double> dft_mag(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<double> mag(n / 2 + 1);
  for (std::size_t k = 0; k <= n / 2; ++k) {
    std::complex<double> acc = 0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * std::polar(1.0, -2 * std::numbers::pi * k * i / n);
    mag[k] = std::abs(acc);
  }
  return mag;
}

TEST(Imu, WashSignaturePeaksAtTwoHertz) {
  Scene s;
  s.anchors = {{world::kSink, 2.0, 2.0}};
  ActionScript sc = {{1, 0.0, 10.0, 0}};
  auto tr = simulate_trajectory(s, sc, 50, {}, 3);
  ImuSynthParams p;
  p.noise = ImuNoise::none();
  auto imu = synthesize_imu(tr, sc, default_actions(), p, 3);
  std::vector<double> ax;
  for (const auto& r : imu.samples) ax.push_back(r[0]);
  auto mag = dft_mag(ax);
  std::size_t best = 1;
  for (std::size_t k = 1; k < mag.size(); ++k) {
    if (mag[k] > mag[best]) best = k;
  }
  EXPECT_DOUBLE_EQ(best * 50.0 / ax.size(), 2.0);
}

TEST(Imu, WhiteNoiseLevelMatchesSigma) {
  auto actions = default_actions();
  auto scene = default_scene(5);
  auto sc = plan_script(scene, actions, 60.0, 5);
  auto tr = simulate_trajectory(scene, sc, 50, {}, 5);
  ImuSynthParams clean;
  clean.noise = ImuNoise::none();
  ImuSynthParams noisy = clean;
  noisy.noise.accel_sigma = 0.1;
  auto a = synthesize_imu(tr, sc, actions, clean, 5);
  auto b = synthesize_imu(tr, sc, actions, noisy, 5);
  for (int c = 0; c < 3; ++c) {
    double m = 0, m2 = 0;
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
      double r = static_cast<double>(b.samples[i][c]) - a.samples[i][c];
      m += r;
      m2 += r * r;
    }
    const double n = static_cast<double>(a.samples.size());
    const double sd = std::sqrt(m2 / n - (m / n) * (m / n));
    EXPECT_NEAR(sd, 0.1, 0.01) << "axis " << c;
  }
}

TEST(Imu, ActionSpectraArePairwiseDistinct) {
  auto actions = default_actions();
  const int rate = 50;
  std::vector<std::vector<double>> energy;
  for (const auto& cls : actions) {
    std::vector<double> e;
    for (int ch = 0; ch < 6; ++ch) {
      std::vector<double> x(rate * 8, 0.0);
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double t = static_cast<double>(i) / rate;
        for (const auto& c : cls.signature) {
          const double amp = ch < 3 ? c.accel_amp : c.gyro_amp;
          if (c.axis == ch % 3) x[i] += amp * std::sin(2 * std::numbers::pi * c.freq_hz * t + c.phase);
        }
      }
      auto mag = dft_mag(x);
      for (double m : mag) e.push_back(m * m);
    }
    energy.push_back(e);
  }
  double min_gap = INFINITY;
  for (std::size_t i = 0; i < energy.size(); ++i)
    for (std::size_t j = 0; j < i; ++j) {
      double d = 0;
      for (std::size_t k = 0; k < energy[i].size(); ++k) d += (energy[i][k] - energy[j][k]) * (energy[i][k] - energy[j][k]);
      min_gap = std::min(min_gap, std::sqrt(d));
    }
  EXPECT_GT(min_gap, 0.0);
  for (const auto& cls : actions)
    for (const auto& c : cls.signature) {
      EXPECT_GE(c.freq_hz, kMinSignatureFreq);
      EXPECT_LE(c.freq_hz, kMaxSignatureFreq);
    }
}

TEST(Imu, DeterministicAndRoundTrips) {
  auto actions = default_actions();
  auto scene = default_scene(6);
  auto sc = plan_script(scene, actions, 30.0, 6);
  auto tr = simulate_trajectory(scene, sc, 50, {}, 6);
  ImuSynthParams p;
  p.style = sample_style(12);
  auto a = synthesize_imu(tr, sc, actions, p, 6);
  auto b = synthesize_imu(tr, sc, actions, p, 6);
  EXPECT_EQ(imu_to_bytes(a), imu_to_bytes(b));
  auto dir = testing::scratch_dir("imu_io");
  save_imu(a, dir / "x.imu");
  auto c = load_imu(dir / "x.imu");
  EXPECT_EQ(c.rate_hz, 50);
  EXPECT_EQ(c.samples, a.samples);
  auto bytes = imu_to_bytes(a);
  bytes.resize(bytes.size() - 4);
  EXPECT_THROW(imu_from_bytes(bytes), DataError);
}

TEST(Imu, Windowing) {
  ImuStream s;
  s.rate_hz = 50;
  s.samples.resize(500);
  for (std::size_t i = 0; i < s.samples.size(); ++i)
    for (int c = 0; c < 6; ++c) s.samples[i][c] = static_cast<float>(i * 6 + c);
  auto w = window_imu(s);
  ASSERT_EQ(w.size(), 10u);
  EXPECT_EQ(w[0].shape(), (num::Shape{50, 6}));
  std::size_t k = 0;
  for (const auto& win : w)
    for (double v : win.data()) EXPECT_EQ(v, static_cast<double>(k++));
  s.samples.resize(535);
  EXPECT_EQ(window_imu(s).size(), 10u);
  s.samples.resize(49);
  EXPECT_THROW(window_imu(s), InvalidArgument);
}

TEST(Labels, OnePerSecondWithMeanPositionRule) {
  auto actions = default_actions();
  auto scene = default_scene(7);
  auto sc = plan_script(scene, actions, 60.0, 7);
  auto tr = simulate_trajectory(scene, sc, 50, {}, 7);
  world::SegmentGrid grid(scene.extent, 20);
  auto labels = ground_truth_labels(tr, sc, grid);
  ASSERT_EQ(labels.size(), 60u);
  for (std::size_t k = 0; k < labels.size(); ++k) {
    double mx = 0, my = 0;
    for (int i = 0; i < 50; ++i) {
      mx += tr.x[k * 50 + i];
      my += tr.y[k * 50 + i];
    }
    EXPECT_NEAR(labels[k].x, mx / 50, 1e-12);
    EXPECT_EQ(labels[k].segment, grid.segment_of(labels[k].x, labels[k].y));
    EXPECT_EQ(labels[k].action, sc[episode_at(sc, k + 0.5)].action);
  }
  auto back = labels_from_csv(labels_to_csv(labels));
  ASSERT_EQ(back.size(), labels.size());
  for (std::size_t k = 0; k < labels.size(); ++k) {
    EXPECT_EQ(back[k].segment, labels[k].segment);
    EXPECT_EQ(back[k].x, labels[k].x);
  }
  EXPECT_THROW(labels_from_csv("bogus\n"), DataError);
}

TEST(Labels, StationaryWashAtSink) {
  Scene s;
  s.anchors = {{world::kSink, 1.3, 2.7}};
  ActionScript sc = {{1, 0.0, 12.0, 0}};
  auto tr = simulate_trajectory(s, sc, 50, {}, 2);
  world::SegmentGrid grid(4.0, 20);
  for (const auto& l : ground_truth_labels(tr, sc, grid)) {
    EXPECT_EQ(l.segment, grid.segment_of(1.3, 2.7));
    EXPECT_EQ(l.action, 1);
  }
}

TEST(Labels, CrossingWalkUsesMeanPosition) {
  Scene s;
  s.anchors = {{world::kSink, 0.5, 2.1}, {world::kTable, 3.5, 2.1}};
  ActionScript sc = {{1, 0.0, 2.0, 0}, {0, 2.0, 8.0, 1}};
  auto tr = simulate_trajectory(s, sc, 50, {}, 3);
  world::SegmentGrid grid(4.0, 20);
  auto labels = ground_truth_labels(tr, sc, grid);
  for (std::size_t k = 2; k < labels.size(); ++k) {
    EXPECT_EQ(labels[k].action, 0);
    EXPECT_EQ(labels[k].segment, grid.segment_of(labels[k].x, 2.1));
  }
  // a second whose samples straddle a boundary is labelled by the mean
  EXPECT_NE(labels[4].segment, labels[5].segment);
}

}  // namespace
}  // namespace egoloc
