#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "egoloc/error.hpp"
#include "egoloc/eval/metrics.hpp"
#include "egoloc/io.hpp"
#include "common/test_util.hpp"

namespace egoloc {
namespace {

using eval::Point;
using num::Shape;
using num::Tensor;

std::vector<Point> random_points(Rng& rng, std::size_t n, double extent = 4.0) {
  std::vector<Point> out(n);
  for (auto& p : out) p = {uniform(rng, 0, extent), uniform(rng, 0, extent)};
  return out;
}

TEST(SuccessRate, ExamplesAndRejection) {
  Rng rng(1);
  auto gt = random_points(rng, 30);
  for (double tau : {0.2, 0.4, 0.6}) EXPECT_EQ(eval::success_rate(gt, gt, tau), 1.0);
  std::vector<Point> p{{0.5, 0.0}}, g{{0.0, 0.0}};
  EXPECT_EQ(eval::success_rate(p, g, 0.2), 0.0);
  EXPECT_EQ(eval::success_rate(p, g, 0.4), 0.0);
  EXPECT_EQ(eval::success_rate(p, g, 0.6), 1.0);
  EXPECT_THROW(eval::success_rate(p, gt, 0.4), InvalidArgument);
  EXPECT_THROW(eval::success_rate({}, {}, 0.4), InvalidArgument);
}

TEST(SuccessRate, MatchesSquaredDistanceOracleAndIsMonotone) {
  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = 1 + rng() % 80;
    auto gt = random_points(rng, n);
    auto pred = random_points(rng, n);
    const double tau = uniform(rng, 0.05, 3.0);
    int hits = 0;
    for (std::size_t t = 0; t < n; ++t) {
      const double dx = pred[t][0] - gt[t][0], dy = pred[t][1] - gt[t][1];
      if (dx * dx + dy * dy <= tau * tau) ++hits;
    }
    EXPECT_LE(testing::rel_diff(eval::success_rate(pred, gt, tau), static_cast<double>(hits) / n), 1e-9);
    double prev = 0.0;
    for (double t = 0.1; t < 6.0; t += 0.1) {
      const double s = eval::success_rate(pred, gt, t);
      EXPECT_GE(s, prev);
      prev = s;
    }
  }
}

TEST(SuccessRate, UniformRandomPredictorMatchesChanceLevel) {
  world::SegmentGrid grid(4.0, 20);
  Rng rng(3);
  auto gt = random_points(rng, 4);
  const double mc = eval::chance_success_mc(grid, gt, 0.4, 1000000, 7);
  const double exact = eval::chance_success(grid, gt, 0.4);
  EXPECT_NEAR(mc, exact, 0.01);
  // a predictor that picks uniformly random segment centres, run many times
  std::uniform_int_distribution<int> seg(0, grid.num_segments() - 1);
  double sum = 0.0;
  const int runs = 50000;
  for (int r = 0; r < runs; ++r) {
    std::vector<Point> pred;
    for (int t = 0; t < 4; ++t) {
      auto [x, y] = grid.center(seg(rng));
      pred.push_back({x, y});
    }
    sum += eval::success_rate(pred, gt, 0.4);
  }
  EXPECT_NEAR(sum / runs, mc, 0.01);
}

TEST(RelativeScore, TrivialCasesExact) {
  std::vector<double> delta(400, 0.0);
  delta[17] = 1.0;
  EXPECT_EQ(eval::relative_score(delta, 17), 1.0);
  std::vector<double> flat(400, 1.0 / 400);
  EXPECT_EQ(eval::relative_score(flat, 123), 0.5);
  std::vector<double> min_at(400, 0.003);
  min_at[5] = 0.001;
  EXPECT_EQ(eval::relative_score(min_at, 5), 0.0);
  EXPECT_THROW(eval::relative_score(flat, 400), InvalidArgument);
  EXPECT_THROW(eval::relative_score(std::vector<double>{1.0}, 0), InvalidArgument);
}

double rs_oracle(std::vector<double> v, int s_star) {
  const double ref = v[static_cast<std::size_t>(s_star)];
  v.erase(v.begin() + s_star);
  std::sort(v.begin(), v.end());
  const auto lo = std::lower_bound(v.begin(), v.end(), ref) - v.begin();
  const auto hi = std::upper_bound(v.begin(), v.end(), ref) - v.begin();
  return (static_cast<double>(lo) + 0.5 * static_cast<double>(hi - lo)) / static_cast<double>(v.size());
}

TEST(RelativeScore, MatchesSortingOracleAndMonotoneInvariance) {
  Rng rng(4);
  for (int i = 0; i < 100; ++i) {
    const std::size_t S = 2 + rng() % 60;
    std::vector<double> v(S);
    // coarse values so ties occur
    for (auto& x : v) x = static_cast<double>(rng() % 7) / 7.0;
    const int s = static_cast<int>(rng() % S);
    const double rs = eval::relative_score(v, s);
    EXPECT_LE(std::abs(rs - rs_oracle(v, s)), 1e-12);
    std::vector<double> w(S);
    std::transform(v.begin(), v.end(), w.begin(), [](double x) { return std::exp(3.0 * x) - 2.0; });
    EXPECT_EQ(eval::relative_score(w, s), rs);
    EXPECT_GE(rs, 0.0);
    EXPECT_LE(rs, 1.0);
  }
}

TEST(RelativeScore, MeanOverRows) {
  Tensor h(Shape{2, 3}, {0.2, 0.3, 0.5, 0.6, 0.2, 0.2});
  EXPECT_DOUBLE_EQ(eval::mean_relative_score(h, {2, 1}), (1.0 + 0.25) / 2);
  EXPECT_THROW(eval::mean_relative_score(h, {0}), InvalidArgument);
}

double topk_oracle(const Tensor& logits, const std::vector<int>& labels, int k) {
  const auto K = logits.dim(1);
  int hits = 0;
  for (std::size_t r = 0; r < labels.size(); ++r) {
    std::vector<int> idx(static_cast<std::size_t>(K));
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
      return logits.at(static_cast<std::int64_t>(r), a) > logits.at(static_cast<std::int64_t>(r), b);
    });
    if (std::find(idx.begin(), idx.begin() + k, labels[r]) != idx.begin() + k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

TEST(TopK, MatchesStableSortOracle) {
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    const std::int64_t R = 1 + static_cast<std::int64_t>(rng() % 30), K = 2 + static_cast<std::int64_t>(rng() % 20);
    Tensor l(Shape{R, K}, 0.0);
    for (auto& v : l.data()) v = static_cast<double>(rng() % 5);  // many ties
    std::vector<int> y;
    for (std::int64_t r = 0; r < R; ++r) y.push_back(static_cast<int>(rng() % static_cast<std::uint64_t>(K)));
    const int k = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(K));
    EXPECT_LE(std::abs(eval::topk_accuracy(l, y, k) - topk_oracle(l, y, k)), 1e-12);
    EXPECT_EQ(eval::topk_accuracy(l, y, static_cast<int>(K)), 1.0);
  }
}

TEST(TopK, PerfectLogitsRandomChanceAndRejection) {
  Tensor perfect(Shape{3, 4}, 0.0);
  for (std::int64_t t = 0; t < 3; ++t) perfect.at(t, t + 1) = 1.0;
  EXPECT_EQ(eval::topk_accuracy(perfect, {1, 2, 3}, 1), 1.0);
  Rng rng(6);
  const std::int64_t N = 100000;
  Tensor l(Shape{N, 8}, 0.0);
  for (auto& v : l.data()) v = uniform(rng, -1, 1);
  std::vector<int> y;
  for (std::int64_t r = 0; r < N; ++r) y.push_back(static_cast<int>(rng() % 8));
  EXPECT_NEAR(eval::topk_accuracy(l, y, 1), 1.0 / 8, 0.01);
  EXPECT_THROW(eval::topk_accuracy(perfect, {1, 2, 3}, 5), InvalidArgument);
  EXPECT_THROW(eval::topk_accuracy(perfect, {1, 2, 4}, 1), InvalidArgument);
}

TEST(EvalConfig, ValidatesThresholds) {
  eval::EvalConfig c;
  EXPECT_NO_THROW(eval::validate(c));
  c.thresholds_m = {0.4, 0.2};
  EXPECT_THROW(eval::validate(c), ConfigError);
  c.thresholds_m = {0.0, 0.2};
  EXPECT_THROW(eval::validate(c), ConfigError);
}

eval::EvalReport sample_report() {
  eval::EvalReport r;
  eval::MethodResult a;
  a.seconds = 240;
  a.success = {{0.2, 0.125}, {0.4, 0.3}, {0.6, 0.45}};
  a.relative_score = 0.875;
  a.topk = {{1, 0.5}, {5, 0.9}};
  a.drift = {0.1, 0.2, 0.30000000000000004};
  eval::MethodResult b;
  b.seconds = 240;
  b.success = {{0.2, 0.0}, {0.4, 1.0 / 3.0}, {0.6, 0.5}};
  b.drift = {0.0, 0.5};
  r.results["stage2"]["seen"] = a;
  r.results["dead-reckoning"]["seen"] = b;
  r.seeds = {1, 2, 3};
  r.config_hash = "0123456789abcdef";
  r.deviations = eval::default_deviations();
  r.resolved_config = R"({"b":1,"a":[1,2]})";
  return r;
}

TEST(Report, RoundTripsExactlyWithSortedKeys) {
  auto r = sample_report();
  const std::string text = eval::report_to_json(r);
  auto back = eval::report_from_json(text);
  EXPECT_EQ(eval::report_to_json(back), text);
  const auto& a = back.results.at("stage2").at("seen");
  EXPECT_EQ(a.success.at(0.4), 0.3);
  EXPECT_EQ(a.drift[2], 0.30000000000000004);
  EXPECT_FALSE(back.results.at("dead-reckoning").at("seen").relative_score.has_value());
  EXPECT_LT(text.find("\"config\""), text.find("\"config_hash\""));
  EXPECT_LT(text.find("\"dead-reckoning\""), text.find("\"stage2\""));
  EXPECT_THROW(eval::report_from_json("{\"results\": 3}"), DataError);
}

TEST(Report, WritesFileAndDriftCsv) {
  auto dir = testing::scratch_dir("report");
  auto r = sample_report();
  eval::write_report(r, dir / "report.json");
  EXPECT_EQ(eval::report_to_json(eval::read_report(dir / "report.json")), eval::report_to_json(r));
  EXPECT_THROW(eval::write_report(r, dir / "missing" / "x" / "report.json"), IoError);
  EXPECT_EQ(eval::drift_csv(r), "t,dead-reckoning/seen,stage2/seen\n0,0,0.10000000000000001\n1,0.5,0.20000000000000001\n"
                                "2,,0.30000000000000004\n");
}

}  // namespace
}  // namespace egoloc
