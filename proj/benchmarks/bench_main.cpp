#include <benchmark/benchmark.h>

#include "egoloc/encoders/encoders.hpp"
#include "egoloc/numerics/adamw.hpp"
#include "egoloc/numerics/graph.hpp"
#include "egoloc/rng.hpp"
#include "egoloc/runtime.hpp"
#include "egoloc/stage1/stage1.hpp"
#include "egoloc/stage2/stage2.hpp"
#include "egoloc/world/patch.hpp"
#include "egoloc/world/scene.hpp"

using namespace egoloc;
using num::Shape;
using num::Tensor;

namespace {

Tensor random_tensor(Shape shape, Rng& rng) {
  Tensor t(std::move(shape), 0.0);
  for (auto& v : t.data()) v = uniform(rng, -1.0, 1.0);
  return t;
}

Tensor unit_rows(Tensor t) {
  const auto R = t.dim(0), D = t.dim(1);
  for (std::int64_t r = 0; r < R; ++r) {
    double s = 0.0;
    for (std::int64_t k = 0; k < D; ++k) s += t[r * D + k] * t[r * D + k];
    for (std::int64_t k = 0; k < D; ++k) t[r * D + k] /= std::sqrt(s);
  }
  return t;
}

void BM_Conv3dForwardBackward(benchmark::State& state) {
  const int C = static_cast<int>(state.range(0));
  Rng rng(1);
  Tensor x = random_tensor({1, 10, 20, 20, C}, rng);
  num::Parameter w{"w", random_tensor({3, 3, 3, C, C}, rng), {}};
  for (auto _ : state) {
    num::Graph g;
    auto y = g.conv3d(g.constant(x), g.param(w), std::nullopt, {1, 2, 2}, {1, 2, 2});
    auto l = g.meanpool(g.reshape(y, {10 * 20 * 20 * C}), 0);
    g.backward(l);
    benchmark::DoNotOptimize(w.grad.data().data());
  }
}
BENCHMARK(BM_Conv3dForwardBackward)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_EncodePatch(benchmark::State& state) {
  enc::PointEncoder pts(enc::EncoderConfig{}, 1);
  Rng rng(2);
  Tensor p = random_tensor({1024, 3}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(pts.encode_points(p));
}
BENCHMARK(BM_EncodePatch)->Unit(benchmark::kMicrosecond);

void BM_Stage1Step(benchmark::State& state) {
  const int B = static_cast<int>(state.range(0));
  enc::EncoderConfig ecfg;
  enc::ImuEncoder imu(ecfg, 1);
  enc::PointEncoder pts(ecfg, 1);
  Rng rng(3);
  Tensor windows = random_tensor({B, 50, 6}, rng);
  Tensor patches = random_tensor({B, 1024, 3}, rng);
  Tensor fi = unit_rows(random_tensor({B, 64}, rng)), fl = unit_rows(random_tensor({B, 64}, rng));
  stage1::Stage1Config cfg;
  std::vector<num::Parameter*> params;
  for (auto& p : imu.params()) params.push_back(&p);
  for (auto& p : pts.params()) params.push_back(&p);
  num::AdamWState opt;
  for (auto _ : state) {
    for (auto* p : params) p->zero_grad();
    num::Graph g;
    auto fm = imu.forward(g, g.constant(windows));
    auto fp = pts.forward(g, g.constant(patches));
    auto l = stage1::stage1_loss(g, g.constant(fi), g.constant(fl), fm, fp, cfg);
    g.backward(l);
    num::adamw_step(params, opt);
  }
}
BENCHMARK(BM_Stage1Step)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_Stage2Clip(benchmark::State& state) {
  stage2::Stage2Config cfg;
  cfg.channels = static_cast<int>(state.range(0));
  stage2::Reasoner model(cfg, 20, 64, 8, 1);
  Rng rng(4);
  Tensor fm = unit_rows(random_tensor({10, 64}, rng)), fp = unit_rows(random_tensor({400, 64}, rng));
  Tensor heat = stage2::correspondence_heatmaps(fm, fp, cfg.heat_tau);
  std::vector<int> segs(10, 7), acts(10, 1);
  for (auto _ : state) {
    num::Graph g;
    auto n = model.forward(g, heat, fm, fp, enc::Binding::kTrainable);
    auto l = g.add(stage2::traj_loss(g, n.traj_logits, segs), stage2::action_loss(g, n.action_logits, acts));
    g.backward(l);
  }
}
BENCHMARK(BM_Stage2Clip)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_GenerateScene(benchmark::State& state) {
  std::uint64_t seed = 1;
  for (auto _ : state) benchmark::DoNotOptimize(world::generate_scene(world::SceneConfig{}, seed++));
}
BENCHMARK(BM_GenerateScene)->Unit(benchmark::kMillisecond);

}  // namespace
int main(int argc, char** argv) {
  egoloc::tune_allocator();
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
