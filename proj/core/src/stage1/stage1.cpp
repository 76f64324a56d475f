#include "egoloc/stage1/stage1.hpp"

#include <algorithm>
#include <numeric>

#include "egoloc/error.hpp"
#include "egoloc/rng.hpp"
#include "egoloc/world/patch.hpp"

namespace egoloc::stage1 {

using num::Graph;
using num::NodeId;
using num::Tensor;

void validate(const Stage1Config& c) {
  for (double w : {c.alpha, c.beta, c.theta, c.delta, c.gamma}) {
    if (!(w >= 0.0)) throw ConfigError("stage-1 loss weights must be non-negative");
  }
  if (!(c.temperature > 0.0)) throw ConfigError("contrastive temperature must be positive");
  if (c.batch < 1) throw ConfigError("stage-1 batch must be positive");
  if (c.steps < 0) throw ConfigError("stage-1 steps must be non-negative");
  if (!(c.optim.lr >= 0.0)) throw ConfigError("learning rate must be non-negative");
}

NodeId infonce(Graph& g, NodeId a, NodeId b, double tau) {
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  if (av.rank() != 2 || av.shape() != bv.shape()) {
    throw ShapeError("infonce: batches must share shape [B,D], got " + num::to_string(av.shape()) + " and " +
                     num::to_string(bv.shape()));
  }
  const auto B = av.dim(0);
  std::vector<std::int64_t> diag(static_cast<std::size_t>(B));
  std::iota(diag.begin(), diag.end(), 0);
  NodeId ab = g.mul_scalar(g.matmul(a, b, false, true), 1.0 / tau);
  NodeId ba = g.mul_scalar(g.matmul(b, a, false, true), 1.0 / tau);
  NodeId l = g.add(g.cross_entropy(ab, diag, num::Reduction::kMean), g.cross_entropy(ba, diag, num::Reduction::kMean));
  return g.mul_scalar(l, 0.5);
}

double infonce(const Tensor& a, const Tensor& b, double tau) {
  Graph g;
  return g.value(infonce(g, g.constant(a), g.constant(b), tau)).item();
}

NodeId stage1_loss(Graph& g, NodeId fi, NodeId fl, NodeId fm, NodeId fp, const Stage1Config& cfg) {
  const std::pair<double, std::pair<NodeId, NodeId>> terms[] = {
      {cfg.alpha, {fi, fm}}, {cfg.beta, {fi, fp}}, {cfg.theta, {fl, fm}}, {cfg.delta, {fl, fp}}, {cfg.gamma, {fm, fp}}};
  NodeId total = -1;
  for (const auto& [w, pair] : terms) {
    if (w == 0.0) continue;
    NodeId t = g.mul_scalar(infonce(g, pair.first, pair.second, cfg.temperature), w);
    total = total < 0 ? t : g.add(total, t);
  }
  if (total < 0) total = g.constant(Tensor(num::Shape{1}, 0.0));
  return total;
}

double stage1_loss(const Tensor& fi, const Tensor& fl, const Tensor& fm, const Tensor& fp, const Stage1Config& cfg) {
  Graph g;
  NodeId l = stage1_loss(g, g.constant(fi), g.constant(fl), g.constant(fm), g.constant(fp), cfg);
  return g.value(l).item();
}

Stage1Result train_stage1(const AlignedDataset& data, enc::ImuEncoder& imu, enc::PointEncoder& pts,
                          const enc::SemanticTable& table, const Stage1Config& cfg, std::uint64_t seed,
                          const StepCallback& on_step) {
  validate(cfg);
  const auto B = static_cast<std::size_t>(cfg.batch);
  if (data.items.size() < B) {
    throw InvalidArgument("stage-1 dataset has " + std::to_string(data.items.size()) + " items, fewer than batch " +
                          std::to_string(B));
  }
  if (table.dim() != imu.config().dim) throw ConfigError("semantic table and encoders disagree on D");
  const int D = imu.config().dim;
  const int N = pts.config().patch_points;

  std::vector<num::Parameter*> params;
  for (auto& p : imu.params()) params.push_back(&p);
  for (auto& p : pts.params()) params.push_back(&p);
  num::AdamWState opt;
  opt.hyper = cfg.optim;

  Rng shuffle_rng(derive_seed(seed, {0x73316dULL}));
  std::vector<std::size_t> order(data.items.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();

  Stage1Result res;
  for (int step = 0; step < cfg.steps; ++step) {
    if (cursor + B > order.size()) {
      std::shuffle(order.begin(), order.end(), shuffle_rng);
      cursor = 0;
    }
    Tensor windows(num::Shape{cfg.batch, imu.config().rate_hz, 6}, 0.0);
    Tensor patches(num::Shape{cfg.batch, N, 3}, 0.0);
    Tensor fi(num::Shape{cfg.batch, D}, 0.0), fl(num::Shape{cfg.batch, D}, 0.0);
    for (std::size_t b = 0; b < B; ++b) {
      const std::size_t idx = order[cursor + b];
      const auto& it = data.items[idx];
      const Tensor& w = *it.window;
      if (w.size() * static_cast<std::int64_t>(B) != windows.size()) throw ShapeError("stage-1 window shape mismatch");
      std::copy(w.data().begin(), w.data().end(), windows.data().begin() + static_cast<std::ptrdiff_t>(b) * w.size());
      auto patch = world::patch_at(*data.clouds.at(static_cast<std::size_t>(it.scene)), it.x, it.y, data.patch_side, N,
                                   derive_seed(seed, {0x70ULL, idx}));
      std::copy(patch.points.data().begin(), patch.points.data().end(),
                patches.data().begin() + static_cast<std::ptrdiff_t>(b * N * 3));
      Tensor img = table.image(it.action, it.time_index, seed);
      Tensor txt = table.text(it.action);
      std::copy(img.data().begin(), img.data().end(), fi.data().begin() + static_cast<std::ptrdiff_t>(b * D));
      std::copy(txt.data().begin(), txt.data().end(), fl.data().begin() + static_cast<std::ptrdiff_t>(b * D));
    }
    cursor += B;

    for (auto* p : params) p->zero_grad();
    Graph g;
    NodeId fm = imu.forward(g, g.constant(std::move(windows)));
    NodeId fp = pts.forward(g, g.constant(std::move(patches)));
    NodeId loss = stage1_loss(g, g.constant(std::move(fi)), g.constant(std::move(fl)), fm, fp, cfg);
    const double lv = g.value(loss).item();
    if (!std::isfinite(lv)) throw Error(ErrorKind::kData, "stage-1 loss became non-finite at step " + std::to_string(step));
    g.backward(loss);
    num::adamw_step(params, opt);
    res.loss_trace.push_back(lv);
    if (on_step) on_step(step, lv);
  }
  enc::round_to_float(imu.params());
  enc::round_to_float(pts.params());
  return res;
}

std::vector<int> retrieve_location(const Tensor& imu_feats, const Tensor& patch_feats) {
  if (imu_feats.rank() != 2 || patch_feats.rank() != 2 || imu_feats.dim(1) != patch_feats.dim(1)) {
    throw ShapeError("retrieve_location: feature dimensions differ");
  }
  const auto T = imu_feats.dim(0), S = patch_feats.dim(0), D = imu_feats.dim(1);
  std::vector<int> out(static_cast<std::size_t>(T));
  for (std::int64_t t = 0; t < T; ++t) {
    double best = -INFINITY;
    int arg = 0;
    for (std::int64_t s = 0; s < S; ++s) {
      double d = 0.0;
      for (std::int64_t k = 0; k < D; ++k) d += imu_feats[t * D + k] * patch_feats[s * D + k];
      if (d > best) {
        best = d;
        arg = static_cast<int>(s);
      }
    }
    out[static_cast<std::size_t>(t)] = arg;
  }
  return out;
}

double window_mean(const std::vector<double>& trace, std::size_t begin, std::size_t window) {
  if (window == 0 || begin + window > trace.size()) throw InvalidArgument("window_mean: window outside trace");
  double s = 0.0;
  for (std::size_t i = begin; i < begin + window; ++i) s += trace[i];
  return s / static_cast<double>(window);
}

}  // namespace egoloc::stage1
