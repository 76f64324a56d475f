#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "egoloc/encoders/params.hpp"
#include "egoloc/error.hpp"
#include "egoloc/numerics/grad_check.hpp"
#include "egoloc/stage2/stage2.hpp"
#include "common/grad_cases.hpp"
#include "common/test_util.hpp"

namespace egoloc {
namespace {

using num::Graph;
using num::NodeId;
using num::Shape;
using num::Tensor;
using stage2::Reasoner;
using stage2::Stage2Config;
using testing::random_tensor;

Tensor unit_rows(std::int64_t rows, std::int64_t dim, Rng& rng) {
  Tensor t = random_tensor(Shape{rows, dim}, rng);
  for (std::int64_t r = 0; r < rows; ++r) {
    double n = 0.0;
    for (std::int64_t d = 0; d < dim; ++d) n += t.at(r, d) * t.at(r, d);
    for (std::int64_t d = 0; d < dim; ++d) t.at(r, d) /= std::sqrt(n);
  }
  return t;
}

Stage2Config toy_config(int T = 2, int channels = 4) {
  Stage2Config c;
  c.T = T;
  c.channels = channels;
  c.steps = 5;
  return c;
}

void zero_param(Reasoner& m, const std::string& name) { m.param(name).value.fill(0.0); }

// y = x W + b for one row x
std::vector<double> affine_row(const Tensor& x, std::int64_t r, const Tensor& w, const Tensor& b) {
  const auto in = w.dim(0), out = w.dim(1);
  std::vector<double> y(static_cast<std::size_t>(out));
  for (std::int64_t j = 0; j < out; ++j) {
    double s = b[j];
    for (std::int64_t i = 0; i < in; ++i) s += x.at(r, i) * w.at(i, j);
    y[static_cast<std::size_t>(j)] = s;
  }
  return y;
}

// ---- heatmaps --------------------------------------------------------------

TEST(Heatmaps, IdenticalPatchesGiveUniformMass) {
  Rng rng(1);
  Tensor imu = unit_rows(4, 8, rng);
  Tensor one = unit_rows(1, 8, rng);
  Tensor patches(Shape{25, 8}, 0.0);
  for (std::int64_t s = 0; s < 25; ++s) std::copy(one.data().begin(), one.data().end(), patches.data().begin() + s * 8);
  Tensor h = stage2::correspondence_heatmaps(imu, patches, 0.07);
  for (double v : h.data()) EXPECT_NEAR(v, 1.0 / 25, 1e-15);
}

TEST(Heatmaps, SmallTemperatureConcentratesOnMatchingPatch) {
  Tensor patches(Shape{8, 8}, 0.0);
  for (std::int64_t s = 0; s < 8; ++s) patches.at(s, s) = 1.0;
  Tensor imu(Shape{1, 8}, 0.0);
  imu.at(0, 5) = 1.0;
  Tensor h = stage2::correspondence_heatmaps(imu, patches, 0.01);
  EXPECT_GT(h.at(0, 5), 1.0 - 1e-9);
}

TEST(Heatmaps, MatchesBruteForceSoftmaxAndSumsToOne) {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor imu = unit_rows(10, 16, rng);
    Tensor patches = unit_rows(49, 16, rng);
    const double tau = uniform(rng, 0.03, 0.5);
    Tensor h = stage2::correspondence_heatmaps(imu, patches, tau);
    for (std::int64_t t = 0; t < 10; ++t) {
      std::vector<double> logit(49);
      double mx = -1e300;
      for (std::int64_t s = 0; s < 49; ++s) {
        double dot = 0.0;
        for (std::int64_t d = 0; d < 16; ++d) dot += imu.at(t, d) * patches.at(s, d);
        logit[static_cast<std::size_t>(s)] = dot / tau;
        mx = std::max(mx, dot / tau);
      }
      double z = 0.0;
      for (double l : logit) z += std::exp(l - mx);
      double sum = 0.0;
      for (std::int64_t s = 0; s < 49; ++s) {
        const double expect = std::exp(logit[static_cast<std::size_t>(s)] - mx) / z;
        EXPECT_NEAR(h.at(t, s), expect, 1e-12 * std::max(1.0, expect));
        EXPECT_GE(h.at(t, s), 0.0);
        sum += h.at(t, s);
      }
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
  }
  EXPECT_THROW(stage2::correspondence_heatmaps(Tensor(Shape{2, 4}), Tensor(Shape{3, 5}), 0.1), ShapeError);
}

// ---- reasoner --------------------------------------------------------------

struct Inputs {
  Tensor heat, imu, patch;
};

Inputs random_inputs(const Stage2Config& c, int G, int D, Rng& rng) {
  Inputs in;
  in.imu = unit_rows(c.T, D, rng);
  in.patch = unit_rows(static_cast<std::int64_t>(G) * G, D, rng);
  in.heat = stage2::correspondence_heatmaps(in.imu, in.patch, c.heat_tau);
  return in;
}

TEST(Reasoner, DefaultOutputShapes) {
  Stage2Config c;
  Reasoner m(c, 20, 64, 8, 1);
  Rng rng(3);
  auto in = random_inputs(c, 20, 64, rng);
  Graph g;
  auto n = m.forward(g, in.heat, in.imu, in.patch, true);
  EXPECT_EQ(g.value(n.refined).shape(), (Shape{1, 10, 20, 20, 16}));
  EXPECT_EQ(g.value(n.traj_logits).shape(), (Shape{10, 400}));
  EXPECT_EQ(g.value(n.action_logits).shape(), (Shape{10, 8}));
  for (double v : g.value(n.traj_logits).data()) EXPECT_TRUE(std::isfinite(v));
}

TEST(Reasoner, RejectsMismatchedInputs) {
  auto c = toy_config();
  Reasoner m(c, 4, 8, 3, 1);
  Rng rng(4);
  auto in = random_inputs(c, 4, 8, rng);
  Graph g;
  EXPECT_THROW(m.forward(g, in.heat, unit_rows(3, 8, rng), in.patch, true), ShapeError);
  EXPECT_THROW(m.forward(g, in.heat, in.imu, unit_rows(16, 6, rng), true), ShapeError);
  EXPECT_THROW(m.forward(g, Tensor(Shape{2, 9}, 0.1), in.imu, in.patch, true), ShapeError);
  EXPECT_THROW(m.param("s2.nope.w"), InvalidArgument);
}

TEST(Reasoner, ZeroTemporalWeightsPassTheImuProjection) {
  auto c = toy_config(3, 5);
  Reasoner m(c, 4, 8, 3, 2);
  for (const char* n : {"s2.t1.w", "s2.t1.b", "s2.t2.w", "s2.t2.b"}) zero_param(m, n);
  Rng rng(5);
  auto in = random_inputs(c, 4, 8, rng);
  Graph g;
  const Tensor out = g.value(m.temporal(g, in.heat, in.imu, enc::Binding::kFrozen));
  ASSERT_EQ(out.shape(), (Shape{1, 3, 4, 4, 5}));
  const auto& w = m.param("s2.imu_proj.w").value;
  const auto& b = m.param("s2.imu_proj.b").value;
  for (std::int64_t t = 0; t < 3; ++t) {
    auto proj = affine_row(in.imu, t, w, b);
    for (std::int64_t s = 0; s < 16; ++s) {
      for (std::int64_t ch = 0; ch < 5; ++ch) EXPECT_NEAR(out[(t * 16 + s) * 5 + ch], proj[static_cast<std::size_t>(ch)], 1e-14);
    }
  }
}

TEST(Reasoner, TemporalResidualOffDropsTheSkipPath) {
  auto c = toy_config(3, 5);
  c.temporal_residual = false;
  Reasoner m(c, 4, 8, 3, 2);
  for (const char* n : {"s2.t1.w", "s2.t1.b", "s2.t2.w", "s2.t2.b"}) zero_param(m, n);
  Rng rng(5);
  auto in = random_inputs(c, 4, 8, rng);
  Graph g;
  for (double v : g.value(m.temporal(g, in.heat, in.imu, enc::Binding::kFrozen)).data()) EXPECT_EQ(v, 0.0);
}

TEST(Reasoner, ZeroSpatialWeightsGiveHeadOfPointProjection) {
  auto c = toy_config(2, 4);
  Reasoner m(c, 4, 8, 3, 3);
  for (const char* n : {"s2.s1.w", "s2.s1.b", "s2.s2.w", "s2.s2.b", "s2.s3.w", "s2.s3.b"}) zero_param(m, n);
  Rng rng(6);
  auto in = random_inputs(c, 4, 8, rng);
  Graph g;
  NodeId refined = g.constant(random_tensor(Shape{1, 2, 4, 4, 4}, rng));
  const Tensor logits = g.value(m.spatial(g, refined, in.patch, enc::Binding::kFrozen));
  const auto& pw = m.param("s2.pts_proj.w").value;
  const auto& pb = m.param("s2.pts_proj.b").value;
  const auto& hw = m.param("s2.head.w").value;
  const auto& hb = m.param("s2.head.b").value;
  for (std::int64_t s = 0; s < 16; ++s) {
    auto pp = affine_row(in.patch, s, pw, pb);
    double expect = hb[0];
    for (std::int64_t ch = 0; ch < 4; ++ch) expect += pp[static_cast<std::size_t>(ch)] * hw.at(ch, 0);
    for (std::int64_t t = 0; t < 2; ++t) EXPECT_NEAR(logits.at(t, s), expect, 1e-14);
  }
}

TEST(Reasoner, SpatialReasoningIsTranslationEquivariantOnInterior) {
  auto c = toy_config(2, 4);
  const int G = 20;
  const std::int64_t S = G * G, C = 4, D = 8;
  Reasoner m(c, G, static_cast<int>(D), 3, 4);
  Rng rng(7);
  Tensor vol = random_tensor(Shape{1, 2, G, G, C}, rng);
  Tensor patch = unit_rows(S, D, rng);
  const int dr = 1, dc = 2;
  Tensor vol2 = random_tensor(vol.shape(), rng);
  Tensor patch2 = unit_rows(S, D, rng);
  for (int r = dr; r < G; ++r) {
    for (int q = dc; q < G; ++q) {
      const std::int64_t dst = r * G + q, src = (r - dr) * G + (q - dc);
      for (std::int64_t t = 0; t < 2; ++t) {
        std::copy_n(vol.data().begin() + (t * S + src) * C, C, vol2.data().begin() + (t * S + dst) * C);
      }
      std::copy_n(patch.data().begin() + src * D, D, patch2.data().begin() + dst * D);
    }
  }
  Graph g;
  const Tensor a = g.value(m.spatial(g, g.constant(vol), patch, enc::Binding::kFrozen));
  const Tensor b = g.value(m.spatial(g, g.constant(vol2), patch2, enc::Binding::kFrozen));
  // dilations 1, 2, 4 reach 7 cells: compare cells whose field stays inside
  // both grids and away from the unshifted border fill
  int compared = 0;
  for (int r = 7 + dr; r < G - 7; ++r) {
    for (int q = 7 + dc; q < G - 7; ++q) {
      for (std::int64_t t = 0; t < 2; ++t) {
        EXPECT_NEAR(b.at(t, r * G + q), a.at(t, (r - dr) * G + (q - dc)), 1e-12);
        ++compared;
      }
    }
  }
  EXPECT_GT(compared, 20);
}

// attended features enter the action head through the projection alone
std::vector<double> action_oracle(Reasoner& m, const Tensor& imu, std::int64_t t, const std::vector<double>& attended) {
  std::vector<double> fused(static_cast<std::size_t>(m.dim()));
  const auto& aw = m.param("s2.att_proj.w").value;
  const auto& ab = m.param("s2.att_proj.b").value;
  for (std::int64_t j = 0; j < m.dim(); ++j) {
    double s = ab[j] + imu.at(t, j);
    for (std::int64_t i = 0; i < m.dim(); ++i) s += attended[static_cast<std::size_t>(i)] * aw.at(i, j);
    fused[static_cast<std::size_t>(j)] = s;
  }
  Tensor f(Shape{1, m.dim()}, fused);
  auto h = affine_row(f, 0, m.param("s2.act1.w").value, m.param("s2.act1.b").value);
  for (auto& v : h) v = std::max(v, 0.0);
  return affine_row(Tensor(Shape{1, m.dim()}, h), 0, m.param("s2.act2.w").value, m.param("s2.act2.b").value);
}

TEST(Reasoner, ActionHeadAttendsByTrajectoryProbabilities) {
  auto c = toy_config(3, 4);
  Reasoner m(c, 4, 8, 5, 8);
  Rng rng(9);
  auto in = random_inputs(c, 4, 8, rng);
  // t=0: delta at cell 6; t=1: uniform; t=2: delta at cell 0
  Tensor probs(Shape{3, 16}, 0.0);
  probs.at(0, 6) = 1.0;
  for (std::int64_t s = 0; s < 16; ++s) probs.at(1, s) = 1.0 / 16;
  probs.at(2, 0) = 1.0;
  Graph g;
  const Tensor logits = g.value(m.action(g, g.constant(probs), in.patch, in.imu, enc::Binding::kFrozen));
  std::vector<std::vector<double>> attended(3, std::vector<double>(8, 0.0));
  for (std::int64_t d = 0; d < 8; ++d) {
    attended[0][static_cast<std::size_t>(d)] = in.patch.at(6, d);
    for (std::int64_t s = 0; s < 16; ++s) attended[1][static_cast<std::size_t>(d)] += in.patch.at(s, d) / 16;
    attended[2][static_cast<std::size_t>(d)] = in.patch.at(0, d);
  }
  for (std::int64_t t = 0; t < 3; ++t) {
    auto expect = action_oracle(m, in.imu, t, attended[static_cast<std::size_t>(t)]);
    for (std::int64_t k = 0; k < 5; ++k) EXPECT_NEAR(logits.at(t, k), expect[static_cast<std::size_t>(k)], 1e-12);
  }
}

TEST(Reasoner, ZeroAttentionProjectionReducesToImuOnlyHead) {
  auto c = toy_config(3, 4);
  Reasoner full(c, 4, 8, 5, 8);
  zero_param(full, "s2.att_proj.w");
  zero_param(full, "s2.att_proj.b");
  auto imu_only_cfg = c;
  imu_only_cfg.location_attention = false;
  Reasoner imu_only(imu_only_cfg, 4, 8, 5, 8);
  imu_only.param("s2.act1.w").value = full.param("s2.act1.w").value;
  imu_only.param("s2.act1.b").value = full.param("s2.act1.b").value;
  imu_only.param("s2.act2.w").value = full.param("s2.act2.w").value;
  imu_only.param("s2.act2.b").value = full.param("s2.act2.b").value;
  EXPECT_THROW(imu_only.param("s2.att_proj.w"), InvalidArgument);
  Rng rng(10);
  auto in = random_inputs(c, 4, 8, rng);
  Tensor probs = stage2::correspondence_heatmaps(in.imu, in.patch, 0.2);
  Graph g;
  const Tensor a = g.value(full.action(g, g.constant(probs), in.patch, in.imu, enc::Binding::kFrozen));
  const Tensor b = g.value(imu_only.action(g, g.constant(probs), in.patch, in.imu, enc::Binding::kFrozen));
  EXPECT_EQ(a, b);
}

TEST(Reasoner, FullPipelineGradientMatchesFiniteDifferences) {
  num::GradCheckOptions opt;
  opt.max_coords_per_param = 16;
  opt.eps = 1e-5;
  auto base = toy_config(2, 4);
  std::vector<Stage2Config> variants(5, base);
  variants[1].temporal_residual = false;
  variants[1].spatial_residual = false;
  variants[2].temporal = false;
  variants[3].spatial = false;
  variants[4].location_attention = false;
  for (std::size_t v = 0; v < variants.size(); ++v) {
    auto rep = num::grad_check(egoloc::testing::stage2_pipeline_factory(variants[v], 4, 8, 3), 11 + v, opt);
    EXPECT_TRUE(rep.passed()) << "variant " << v << " max rel " << rep.max_rel_error;
    EXPECT_GT(rep.coords_checked, 100);
  }
}

// ---- losses ------------------------------------------------------------------

double ce_oracle(const Tensor& logits, const std::vector<int>& labels) {
  double total = 0.0;
  for (std::int64_t t = 0; t < logits.dim(0); ++t) {
    double mx = -1e300;
    for (std::int64_t k = 0; k < logits.dim(1); ++k) mx = std::max(mx, logits.at(t, k));
    double z = 0.0;
    for (std::int64_t k = 0; k < logits.dim(1); ++k) z += std::exp(logits.at(t, k) - mx);
    total += -(logits.at(t, labels[static_cast<std::size_t>(t)]) - mx - std::log(z));
  }
  return total;
}

TEST(Losses, UniformLogitsGiveLogClassCount) {
  std::vector<int> segs{0, 5, 399, 17, 200, 3, 3, 100, 1, 398};
  std::vector<int> acts{0, 1, 2, 3, 4, 5, 6, 7, 0, 1};
  EXPECT_NEAR(stage2::traj_loss(Tensor(Shape{10, 400}, 0.3), segs), 10 * std::log(400.0), 1e-12);
  EXPECT_NEAR(stage2::action_loss(Tensor(Shape{10, 8}, -2.0), acts), 10 * std::log(8.0), 1e-12);
}

TEST(Losses, ConfidentCorrectLogitsApproachZero) {
  Tensor l(Shape{3, 4}, 0.0);
  for (std::int64_t t = 0; t < 3; ++t) l.at(t, t) = 60.0;
  EXPECT_LT(stage2::traj_loss(l, {0, 1, 2}), 1e-20);
}

TEST(Losses, MatchBruteForceOnRandomInstances) {
  Rng rng(12);
  for (int i = 0; i < 100; ++i) {
    const std::int64_t T = 1 + static_cast<std::int64_t>(rng() % 12), K = 2 + static_cast<std::int64_t>(rng() % 50);
    Tensor l = random_tensor(Shape{T, K}, rng, -5, 5);
    std::vector<int> y;
    for (std::int64_t t = 0; t < T; ++t) y.push_back(static_cast<int>(rng() % static_cast<std::uint64_t>(K)));
    const double oracle = ce_oracle(l, y);
    EXPECT_LE(testing::rel_diff(stage2::traj_loss(l, y), oracle), 1e-9);
    EXPECT_LE(testing::rel_diff(stage2::action_loss(l, y), oracle), 1e-9);
  }
}

TEST(Losses, RejectOutOfRangeLabelsAndShapeMismatch) {
  Tensor l(Shape{2, 4}, 0.0);
  EXPECT_THROW(stage2::traj_loss(l, {0, 4}), InvalidArgument);
  EXPECT_THROW(stage2::action_loss(l, {-1, 0}), InvalidArgument);
  EXPECT_THROW(stage2::traj_loss(l, {0}), ShapeError);
}

// ---- training ----------------------------------------------------------------

stage2::Stage2Data toy_data(int G, int D, int classes, Rng& rng) {
  stage2::Stage2Data data;
  for (int sc = 0; sc < 2; ++sc) data.scene_patch_feats.push_back(unit_rows(G * G, D, rng));
  for (int q = 0; q < 4; ++q) {
    stage2::SequenceFeatures f;
    f.scene = q % 2;
    const std::int64_t L = 6 + q;
    f.imu_feats = Tensor(Shape{L, D}, 0.0);
    for (std::int64_t t = 0; t < L; ++t) {
      const int s = static_cast<int>(rng() % static_cast<std::uint64_t>(G * G));
      f.segments.push_back(s);
      f.actions.push_back(s % classes);
      // IMU feature near the true cell's patch feature
      for (std::int64_t d = 0; d < D; ++d) {
        f.imu_feats.at(t, d) = data.scene_patch_feats[static_cast<std::size_t>(f.scene)].at(s, d) + 0.1 * uniform(rng, -1, 1);
      }
    }
    data.sequences.push_back(std::move(f));
  }
  return data;
}

TEST(Training, ZeroActionWeightTraceEqualsTrajectoryTrace) {
  Rng rng(13);
  auto data = toy_data(4, 8, 3, rng);
  auto c = toy_config(2, 4);
  c.action_weight = 0.0;
  Reasoner m(c, 4, 8, 3, 1);
  auto r = stage2::train_stage2(data, m, c, 5);
  ASSERT_EQ(r.loss_trace.size(), 5u);
  EXPECT_EQ(r.loss_trace, r.traj_trace);
}

TEST(Training, DeterministicUnderSeed) {
  Rng rng(14);
  auto data = toy_data(4, 8, 3, rng);
  auto c = toy_config(2, 4);
  Reasoner a(c, 4, 8, 3, 1), b(c, 4, 8, 3, 1);
  auto ra = stage2::train_stage2(data, a, c, 5);
  auto rb = stage2::train_stage2(data, b, c, 5);
  EXPECT_EQ(ra.loss_trace, rb.loss_trace);
  EXPECT_EQ(enc::checksum(a.params()), enc::checksum(b.params()));
  Reasoner d(c, 4, 8, 3, 1);
  stage2::train_stage2(data, d, c, 6);
  EXPECT_NE(enc::checksum(a.params()), enc::checksum(d.params()));
}

TEST(Training, LossDecreasesOnToyProblem) {
  Rng rng(15);
  auto data = toy_data(4, 8, 3, rng);
  auto c = toy_config(2, 4);
  c.steps = 150;
  c.optim.lr = 3e-3;
  Reasoner m(c, 4, 8, 3, 2);
  auto r = stage2::train_stage2(data, m, c, 3);
  const double first = (r.loss_trace[0] + r.loss_trace[1] + r.loss_trace[2]) / 3;
  double last = 0.0;
  for (std::size_t i = r.loss_trace.size() - 20; i < r.loss_trace.size(); ++i) last += r.loss_trace[i] / 20;
  EXPECT_LT(last, 0.6 * first);
}

TEST(Training, RejectsTooShortSequencesAndMismatchedT) {
  Rng rng(16);
  auto data = toy_data(4, 8, 3, rng);
  auto c = toy_config(20, 4);
  Reasoner m(c, 4, 8, 3, 1);
  EXPECT_THROW(stage2::train_stage2(data, m, c, 1), InvalidArgument);
  auto other = toy_config(2, 4);
  EXPECT_THROW(stage2::train_stage2(data, m, other, 1), ConfigError);
}

// ---- inference and exports -----------------------------------------------------

TEST(Infer, ExactBlockGivesTPredictionsAndNormalizedHeatmaps) {
  auto c = toy_config(4, 4);
  Reasoner m(c, 4, 8, 3, 1);
  world::SegmentGrid grid(4.0, 4);
  Rng rng(17);
  Tensor imu = unit_rows(4, 8, rng), patch = unit_rows(16, 8, rng);
  auto p = stage2::infer(m, imu, patch, grid);
  ASSERT_EQ(p.segments.size(), 4u);
  EXPECT_EQ(p.actions.size(), 4u);
  for (const Tensor* h : {&p.stage1_heat, &p.stage2_heat}) {
    for (std::int64_t t = 0; t < 4; ++t) {
      double sum = 0.0;
      for (std::int64_t s = 0; s < 16; ++s) sum += h->at(t, s);
      EXPECT_NEAR(sum, 1.0, 1e-6);
    }
  }
  for (std::size_t t = 0; t < 4; ++t) {
    auto [x, y] = grid.center(p.segments[t]);
    EXPECT_EQ(p.x[t], x);
    EXPECT_EQ(p.y[t], y);
    EXPECT_EQ(p.confidence[t], p.stage2_heat.at(static_cast<std::int64_t>(t), p.segments[t]));
  }
}

TEST(Infer, TrailingBlockIsPaddedWithLastWindow) {
  auto c = toy_config(4, 4);
  Reasoner m(c, 4, 8, 3, 1);
  world::SegmentGrid grid(4.0, 4);
  Rng rng(18);
  Tensor imu = unit_rows(6, 8, rng), patch = unit_rows(16, 8, rng);
  auto p = stage2::infer(m, imu, patch, grid);
  ASSERT_EQ(p.segments.size(), 6u);
  // the second block sees seconds 4, 5, 5, 5
  Tensor block(Shape{4, 8}, 0.0);
  for (std::int64_t k = 0; k < 4; ++k) {
    const std::int64_t src = std::min<std::int64_t>(4 + k, 5);
    std::copy_n(imu.data().begin() + src * 8, 8, block.data().begin() + k * 8);
  }
  Graph g;
  auto n = m.forward(g, stage2::correspondence_heatmaps(block, patch, c.heat_tau), block, patch, true);
  const Tensor& probs = g.value(n.traj_probs);
  for (std::int64_t k = 0; k < 2; ++k) {
    for (std::int64_t s = 0; s < 16; ++s) EXPECT_EQ(p.stage2_heat.at(4 + k, s), probs.at(k, s));
  }
}

TEST(Infer, RejectsIncompatibleInputs) {
  auto c = toy_config(4, 4);
  Reasoner m(c, 4, 8, 3, 1);
  Rng rng(19);
  Tensor imu = unit_rows(6, 8, rng), patch = unit_rows(16, 8, rng);
  EXPECT_THROW(stage2::infer(m, imu, unit_rows(25, 8, rng), world::SegmentGrid(4.0, 5)), CompatibilityError);
  EXPECT_THROW(stage2::infer(m, unit_rows(6, 6, rng), unit_rows(16, 6, rng), world::SegmentGrid(4.0, 4)),
               CompatibilityError);
  EXPECT_THROW(stage2::infer(m, unit_rows(3, 8, rng), patch, world::SegmentGrid(4.0, 4)), InvalidArgument);
}

TEST(Export, ArgmaxTiesGoToLowestIndex) {
  Tensor m(Shape{2, 4}, {1, 3, 3, 2, 0, 0, 0, 0});
  EXPECT_EQ(stage2::row_argmax(m), (std::vector<int>{1, 0}));
}

TEST(Export, HeatmapCsvAndPgmLayout) {
  Tensor h(Shape{2, 4}, {0.1, 0.2, 0.3, 0.4, 0.25, 0.25, 0.25, 0.25});
  const std::string csv = stage2::heatmap_csv(h, 0, 2);
  EXPECT_EQ(csv, "0.1,0.2\n0.3,0.4\n");
  const std::string pgm = stage2::heatmap_pgm(h, 0, 2);
  const std::string header = "P5\n2 2\n255\n";
  ASSERT_EQ(pgm.size(), header.size() + 4);
  EXPECT_EQ(pgm.substr(0, header.size()), header);
  // top image row is the highest grid row (cells 2, 3)
  EXPECT_EQ(static_cast<unsigned char>(pgm[header.size() + 0]), std::lround(0.3 / 0.4 * 255));
  EXPECT_EQ(static_cast<unsigned char>(pgm[header.size() + 1]), 255);
  EXPECT_EQ(static_cast<unsigned char>(pgm[header.size() + 2]), std::lround(0.1 / 0.4 * 255));
  EXPECT_THROW(stage2::heatmap_csv(h, 2, 2), InvalidArgument);
}

TEST(Export, PredictionsCsvHeaderAndRows) {
  stage2::Prediction p;
  p.segments = {3, 0};
  p.x = {1.5, 0.5};
  p.y = {0.5, 0.5};
  p.actions = {2, 1};
  p.confidence = {0.75, 0.5};
  EXPECT_EQ(stage2::predictions_csv(p), "t,x,y,segment,action,confidence\n0,1.5,0.5,3,2,0.75\n1,0.5,0.5,0,1,0.5\n");
}

}  // namespace
}  // namespace egoloc
