#include "egoloc/stage2/stage2.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "egoloc/encoders/params.hpp"
#include "egoloc/error.hpp"
#include "egoloc/rng.hpp"
#include "egoloc/world/patch.hpp"

namespace egoloc::stage2 {

using num::Graph;
using num::NodeId;
using num::Shape;
using num::Tensor;

void validate(const Stage2Config& c) {
  if (c.T < 1) throw ConfigError("stage-2 clip length T must be positive");
  if (c.channels < 1) throw ConfigError("stage-2 channel count must be positive");
  if (!(c.heat_tau > 0.0)) throw ConfigError("heatmap temperature must be positive");
  if (!(c.action_weight >= 0.0)) throw ConfigError("action loss weight must be non-negative");
  if (c.batch < 1) throw ConfigError("stage-2 batch must be positive");
  if (c.steps < 0) throw ConfigError("stage-2 steps must be non-negative");
  if (!(c.optim.lr >= 0.0)) throw ConfigError("learning rate must be non-negative");
}

Tensor correspondence_heatmaps(const Tensor& imu_feats, const Tensor& patch_feats, double tau) {
  if (imu_feats.rank() != 2 || patch_feats.rank() != 2 || imu_feats.dim(1) != patch_feats.dim(1)) {
    throw ShapeError("correspondence_heatmaps: feature shapes " + num::to_string(imu_feats.shape()) + " and " +
                     num::to_string(patch_feats.shape()) + " disagree");
  }
  if (!(tau > 0.0)) throw InvalidArgument("heatmap temperature must be positive");
  Graph g;
  NodeId sim = g.mul_scalar(g.matmul(g.constant(imu_feats), g.constant(patch_feats), false, true), 1.0 / tau);
  return g.value(g.softmax(sim, 1));
}

// ---- reasoner ------------------------------------------------------------

Reasoner::Reasoner(const Stage2Config& cfg, int grid, int dim, int num_classes, std::uint64_t seed)
    : cfg_(cfg), grid_(grid), dim_(dim), classes_(num_classes) {
  validate(cfg);
  if (grid < 1 || dim < 1 || num_classes < 1) throw ConfigError("reasoner sizes must be positive");
  Rng rng(derive_seed(seed, {0x733272ULL}));
  const std::int64_t C = cfg.channels, D = dim;
  auto add = [&](const std::string& name, Shape shape, std::int64_t fan_in) {
    params_.push_back(enc::init_param(name, std::move(shape), fan_in, rng));
  };
  auto conv = [&](const std::string& name, std::int64_t cin, std::int64_t cout) {
    add(name + ".w", {3, 3, 3, cin, cout}, 27 * cin);
    add(name + ".b", {cout}, 27 * cin);
  };
  auto lin = [&](const std::string& name, std::int64_t in, std::int64_t out) {
    add(name + ".w", {in, out}, in);
    add(name + ".b", {out}, in);
  };
  lin("s2.imu_proj", D, C);
  if (cfg.temporal) {
    conv("s2.t1", C + 1, C);
    conv("s2.t2", C, C);
  }
  const std::int64_t cr = cfg.temporal ? C : C + 1;
  lin("s2.pts_proj", D, C);
  if (cfg.spatial) {
    conv("s2.s1", cr + C, C);
    conv("s2.s2", C, C);
    conv("s2.s3", C, C);
    lin("s2.head", C, 1);
  } else {
    lin("s2.head", cr + C, 1);
  }
  if (cfg.location_attention) lin("s2.att_proj", D, D);
  lin("s2.act1", D, D);
  lin("s2.act2", D, num_classes);
}

const num::Parameter& Reasoner::find(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return p;
  }
  throw InvalidArgument("reasoner has no parameter '" + name + "'");
}

num::Parameter& Reasoner::param(const std::string& name) { return const_cast<num::Parameter&>(find(name)); }

Reasoner::Bind Reasoner::binder(Graph& g, enc::Binding b) {
  if (b == enc::Binding::kFrozen) return [this, &g](const std::string& n) { return g.constant(find(n).value); };
  return [this, &g](const std::string& n) { return g.param(param(n)); };
}

void Reasoner::check_inputs(const Tensor& heat, const Tensor& imu_feats, const Tensor& patch_feats) const {
  const std::int64_t S = static_cast<std::int64_t>(grid_) * grid_;
  if (heat.rank() != 2 || heat.dim(0) != cfg_.T || heat.dim(1) != S) {
    throw ShapeError("reasoner expects a [" + std::to_string(cfg_.T) + "," + std::to_string(S) + "] heatmap, got " +
                     num::to_string(heat.shape()));
  }
  if (imu_feats.rank() != 2 || imu_feats.dim(0) != cfg_.T || imu_feats.dim(1) != dim_) {
    throw ShapeError("reasoner expects [" + std::to_string(cfg_.T) + "," + std::to_string(dim_) +
                     "] IMU features, got " + num::to_string(imu_feats.shape()));
  }
  if (patch_feats.rank() != 2 || patch_feats.dim(0) != S || patch_feats.dim(1) != dim_) {
    throw ShapeError("reasoner expects [" + std::to_string(S) + "," + std::to_string(dim_) +
                     "] patch features, got " + num::to_string(patch_feats.shape()));
  }
}

namespace {

// Rows of x [T,D] repeated for each of the S cells -> [T*S, D].
Tensor repeat_rows(const Tensor& x, std::int64_t S) {
  const auto T = x.dim(0), D = x.dim(1);
  Tensor out(Shape{T * S, D}, 0.0);
  for (std::int64_t t = 0; t < T; ++t) {
    for (std::int64_t s = 0; s < S; ++s) {
      std::copy(x.data().begin() + t * D, x.data().begin() + (t + 1) * D, out.data().begin() + (t * S + s) * D);
    }
  }
  return out;
}

NodeId conv_block(Graph& g, NodeId x, NodeId w, NodeId b, int dil) {
  return g.relu(g.conv3d(x, w, b, {1, dil, dil}, {1, dil, dil}));
}

}  // namespace

NodeId Reasoner::temporal_impl(Graph& g, const Tensor& heat, const Tensor& imu_feats, const Bind& p) const {
  const std::int64_t T = cfg_.T, G = grid_, S = G * G, C = cfg_.channels;
  NodeId h = g.reshape(g.constant(heat), {1, T, G, G, 1});
  NodeId pm = g.affine(g.constant(repeat_rows(imu_feats, S)), p("s2.imu_proj.w"), p("s2.imu_proj.b"));
  pm = g.reshape(pm, {1, T, G, G, C});
  NodeId x = g.concat({h, pm}, 4);
  if (!cfg_.temporal) return x;
  NodeId y = conv_block(g, x, p("s2.t1.w"), p("s2.t1.b"), 1);
  y = conv_block(g, y, p("s2.t2.w"), p("s2.t2.b"), 1);
  return cfg_.temporal_residual ? g.add(y, pm) : y;
}

NodeId Reasoner::spatial_impl(Graph& g, NodeId refined, const Tensor& patch_feats, const Bind& p) const {
  const std::int64_t T = cfg_.T, G = grid_, S = G * G, C = cfg_.channels;
  const Shape& rs = g.value(refined).shape();
  if (rs.size() != 5 || rs[1] != T || rs[2] != G || rs[3] != G) {
    throw ShapeError("spatial reasoning expects a [1,T,G,G,C] volume, got " + num::to_string(rs));
  }
  NodeId pp = g.affine(g.constant(patch_feats), p("s2.pts_proj.w"), p("s2.pts_proj.b"));  // [S,C]
  pp = g.reshape(g.broadcast(pp, {T, S, C}), {1, T, G, G, C});
  NodeId x = g.concat({refined, pp}, 4);
  if (cfg_.spatial) {
    NodeId y = conv_block(g, x, p("s2.s1.w"), p("s2.s1.b"), 1);
    y = conv_block(g, y, p("s2.s2.w"), p("s2.s2.b"), 2);
    y = conv_block(g, y, p("s2.s3.w"), p("s2.s3.b"), 4);
    x = cfg_.spatial_residual ? g.add(y, pp) : y;
  }
  const auto width = g.value(x).dim(4);
  NodeId logits = g.affine(g.reshape(x, {T * S, width}), p("s2.head.w"), p("s2.head.b"));
  return g.reshape(logits, {T, S});
}

NodeId Reasoner::action_impl(Graph& g, NodeId traj_probs, const Tensor& patch_feats, const Tensor& imu_feats,
                             const Bind& p) const {
  NodeId fused = g.constant(imu_feats);
  if (cfg_.location_attention) {
    NodeId attended = g.matmul(traj_probs, g.constant(patch_feats));
    fused = g.add(g.affine(attended, p("s2.att_proj.w"), p("s2.att_proj.b")), fused);
  }
  NodeId hdn = g.relu(g.affine(fused, p("s2.act1.w"), p("s2.act1.b")));
  return g.affine(hdn, p("s2.act2.w"), p("s2.act2.b"));
}

Reasoner::Nodes Reasoner::forward_impl(Graph& g, const Tensor& heat, const Tensor& imu_feats,
                                       const Tensor& patch_feats, const Bind& p, bool with_action) const {
  check_inputs(heat, imu_feats, patch_feats);
  Nodes n;
  n.refined = temporal_impl(g, heat, imu_feats, p);
  n.traj_logits = spatial_impl(g, n.refined, patch_feats, p);
  n.traj_probs = g.softmax(n.traj_logits, 1);
  if (with_action) n.action_logits = action_impl(g, n.traj_probs, patch_feats, imu_feats, p);
  return n;
}

Reasoner::Nodes Reasoner::forward(Graph& g, const Tensor& heat, const Tensor& imu_feats, const Tensor& patch_feats,
                                  enc::Binding b, bool with_action) {
  return forward_impl(g, heat, imu_feats, patch_feats, binder(g, b), with_action);
}

Reasoner::Nodes Reasoner::forward(Graph& g, const Tensor& heat, const Tensor& imu_feats, const Tensor& patch_feats,
                                  bool with_action) const {
  Bind p = [this, &g](const std::string& n) { return g.constant(find(n).value); };
  return forward_impl(g, heat, imu_feats, patch_feats, p, with_action);
}

NodeId Reasoner::temporal(Graph& g, const Tensor& heat, const Tensor& imu_feats, enc::Binding b) {
  return temporal_impl(g, heat, imu_feats, binder(g, b));
}

NodeId Reasoner::spatial(Graph& g, NodeId refined, const Tensor& patch_feats, enc::Binding b) {
  return spatial_impl(g, refined, patch_feats, binder(g, b));
}

NodeId Reasoner::action(Graph& g, NodeId traj_probs, const Tensor& patch_feats, const Tensor& imu_feats,
                        enc::Binding b) {
  return action_impl(g, traj_probs, patch_feats, imu_feats, binder(g, b));
}

// ---- losses --------------------------------------------------------------

namespace {

NodeId summed_ce(Graph& g, NodeId logits, const std::vector<int>& labels, const char* what) {
  const Tensor& lv = g.value(logits);
  if (lv.rank() != 2 || lv.dim(0) != static_cast<std::int64_t>(labels.size())) {
    throw ShapeError(std::string(what) + ": logits " + num::to_string(lv.shape()) + " do not match " +
                     std::to_string(labels.size()) + " labels");
  }
  for (int l : labels) {
    if (l < 0 || l >= lv.dim(1)) {
      throw InvalidArgument(std::string(what) + ": label " + std::to_string(l) + " outside [0," +
                            std::to_string(lv.dim(1)) + ")");
    }
  }
  return g.cross_entropy(logits, std::vector<std::int64_t>(labels.begin(), labels.end()), num::Reduction::kSum);
}

}  // namespace

NodeId traj_loss(Graph& g, NodeId logits, const std::vector<int>& segments) {
  return summed_ce(g, logits, segments, "traj_loss");
}

NodeId action_loss(Graph& g, NodeId logits, const std::vector<int>& actions) {
  return summed_ce(g, logits, actions, "action_loss");
}

double traj_loss(const Tensor& logits, const std::vector<int>& segments) {
  Graph g;
  return g.value(traj_loss(g, g.constant(logits), segments)).item();
}

double action_loss(const Tensor& logits, const std::vector<int>& actions) {
  Graph g;
  return g.value(action_loss(g, g.constant(logits), actions)).item();
}

// ---- training ------------------------------------------------------------

namespace {

Tensor rows(const Tensor& m, std::int64_t begin, std::int64_t count) {
  const auto W = m.dim(1);
  Tensor out(Shape{count, W}, 0.0);
  std::copy(m.data().begin() + begin * W, m.data().begin() + (begin + count) * W, out.data().begin());
  return out;
}

}  // namespace

Stage2Result train_stage2(const Stage2Data& data, Reasoner& model, const Stage2Config& cfg, std::uint64_t seed,
                          const StepCallback& on_step) {
  validate(cfg);
  if (cfg.T != model.config().T) throw ConfigError("training T differs from the model's T");
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < data.sequences.size(); ++i) {
    if (data.sequences[i].imu_feats.dim(0) >= cfg.T) usable.push_back(i);
  }
  if (usable.empty()) throw InvalidArgument("no training sequence holds a full " + std::to_string(cfg.T) + " s clip");

  // heatmaps depend only on frozen features: compute once per sequence
  std::vector<Tensor> heats;
  heats.reserve(data.sequences.size());
  for (const auto& s : data.sequences) {
    heats.push_back(correspondence_heatmaps(s.imu_feats, data.scene_patch_feats.at(static_cast<std::size_t>(s.scene)),
                                            model.config().heat_tau));
  }

  auto params = enc::pointers(model.params());
  num::AdamWState opt;
  opt.hyper = cfg.optim;
  Rng rng(derive_seed(seed, {0x733274ULL}));
  const bool with_action = cfg.action_weight != 0.0;
  const double inv_b = 1.0 / cfg.batch;

  Stage2Result res;
  for (int step = 0; step < cfg.steps; ++step) {
    for (auto* p : params) p->zero_grad();
    double loss = 0.0, lt = 0.0, la = 0.0;
    for (int b = 0; b < cfg.batch; ++b) {
      const auto& seq = data.sequences[usable[std::uniform_int_distribution<std::size_t>(0, usable.size() - 1)(rng)]];
      const auto si = static_cast<std::size_t>(&seq - data.sequences.data());
      const std::int64_t L = seq.imu_feats.dim(0);
      const std::int64_t start = std::uniform_int_distribution<std::int64_t>(0, L - cfg.T)(rng);
      const Tensor heat = rows(heats[si], start, cfg.T);
      const Tensor feats = rows(seq.imu_feats, start, cfg.T);
      const auto first = static_cast<std::ptrdiff_t>(start);
      std::vector<int> segs(seq.segments.begin() + first, seq.segments.begin() + first + cfg.T);
      std::vector<int> acts(seq.actions.begin() + first, seq.actions.begin() + first + cfg.T);

      Graph g;
      auto n = model.forward(g, heat, feats, data.scene_patch_feats.at(static_cast<std::size_t>(seq.scene)),
                             enc::Binding::kTrainable, with_action);
      NodeId l_traj = traj_loss(g, n.traj_logits, segs);
      NodeId total = l_traj;
      if (with_action) {
        NodeId l_act = action_loss(g, n.action_logits, acts);
        la += g.value(l_act).item() * inv_b;
        total = g.add(l_traj, g.mul_scalar(l_act, cfg.action_weight));
      }
      lt += g.value(l_traj).item() * inv_b;
      loss += g.value(total).item() * inv_b;
      g.backward(g.mul_scalar(total, inv_b));
    }
    if (!std::isfinite(loss)) throw Error(ErrorKind::kData, "stage-2 loss became non-finite at step " + std::to_string(step));
    num::adamw_step(params, opt);
    res.loss_trace.push_back(loss);
    res.traj_trace.push_back(lt);
    res.action_trace.push_back(la);
    if (on_step) on_step(step, loss);
  }
  enc::round_to_float(model.params());
  return res;
}

Stage2Result train_action_head(const Stage2Data& data, Reasoner& model, const Stage2Config& cfg, std::uint64_t seed) {
  validate(cfg);
  if (model.config().location_attention) throw InvalidArgument("train_action_head needs a model without location attention");
  if (cfg.T != model.config().T) throw ConfigError("training T differs from the model's T");
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < data.sequences.size(); ++i) {
    if (data.sequences[i].imu_feats.dim(0) >= cfg.T) usable.push_back(i);
  }
  if (usable.empty()) throw InvalidArgument("no training sequence holds a full " + std::to_string(cfg.T) + " s clip");
  std::vector<num::Parameter*> params;
  for (auto& p : model.params()) {
    if (p.name.rfind("s2.act", 0) == 0) params.push_back(&p);
  }
  num::AdamWState opt;
  opt.hyper = cfg.optim;
  Rng rng(derive_seed(seed, {0x616374ULL}));
  const double inv_b = 1.0 / cfg.batch;
  Stage2Result res;
  for (int step = 0; step < cfg.steps; ++step) {
    for (auto* p : params) p->zero_grad();
    double loss = 0.0;
    for (int b = 0; b < cfg.batch; ++b) {
      const auto& seq = data.sequences[usable[std::uniform_int_distribution<std::size_t>(0, usable.size() - 1)(rng)]];
      const std::int64_t L = seq.imu_feats.dim(0);
      const std::int64_t start = std::uniform_int_distribution<std::int64_t>(0, L - cfg.T)(rng);
      const auto first = static_cast<std::ptrdiff_t>(start);
      std::vector<int> acts(seq.actions.begin() + first, seq.actions.begin() + first + cfg.T);
      const Tensor& patches = data.scene_patch_feats.at(static_cast<std::size_t>(seq.scene));
      Graph g;
      // without location attention the head ignores the trajectory probabilities
      NodeId logits = model.action(g, -1, patches, rows(seq.imu_feats, start, cfg.T), enc::Binding::kTrainable);
      NodeId l = action_loss(g, logits, acts);
      loss += g.value(l).item() * inv_b;
      g.backward(g.mul_scalar(l, inv_b));
    }
    if (!std::isfinite(loss)) throw Error(ErrorKind::kData, "action loss became non-finite at step " + std::to_string(step));
    num::adamw_step(params, opt);
    res.loss_trace.push_back(loss);
    res.action_trace.push_back(loss);
  }
  enc::round_to_float(model.params());
  return res;
}

Tensor scene_patch_features(const enc::PointEncoder& enc, const world::PointCloud& cloud,
                            const world::SegmentGrid& grid, double patch_side, std::uint64_t seed) {
  std::vector<Tensor> patches;
  patches.reserve(static_cast<std::size_t>(grid.num_segments()));
  for (int s = 0; s < grid.num_segments(); ++s) {
    auto [cx, cy] = grid.center(s);
    patches.push_back(world::patch_at(cloud, cx, cy, patch_side, enc.config().patch_points,
                                      derive_seed(seed, {0x636c6cULL, static_cast<std::uint64_t>(s)}), s)
                          .points);
  }
  return enc.encode_batch(patches);
}

// ---- inference -----------------------------------------------------------

std::vector<int> row_argmax(const Tensor& m) {
  if (m.rank() != 2) throw ShapeError("row_argmax expects a matrix, got " + num::to_string(m.shape()));
  const auto R = m.dim(0), K = m.dim(1);
  std::vector<int> out(static_cast<std::size_t>(R), 0);
  for (std::int64_t r = 0; r < R; ++r) {
    std::int64_t best = 0;
    for (std::int64_t k = 1; k < K; ++k) {
      if (m[r * K + k] > m[r * K + best]) best = k;
    }
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

Prediction infer(const Reasoner& model, const Tensor& imu_feats, const Tensor& patch_feats,
                 const world::SegmentGrid& grid) {
  const int T = model.config().T;
  const std::int64_t S = grid.num_segments();
  if (grid.cells_per_side() != model.grid()) {
    throw CompatibilityError("scene grid has G=" + std::to_string(grid.cells_per_side()) + " but the model uses G=" +
                             std::to_string(model.grid()));
  }
  if (patch_feats.rank() != 2 || patch_feats.dim(0) != S || patch_feats.dim(1) != model.dim() ||
      imu_feats.rank() != 2 || imu_feats.dim(1) != model.dim()) {
    throw CompatibilityError("feature shapes " + num::to_string(imu_feats.shape()) + " / " +
                             num::to_string(patch_feats.shape()) + " do not fit the model");
  }
  const std::int64_t L = imu_feats.dim(0);
  if (L < T) throw InvalidArgument("sequence of " + std::to_string(L) + " s is shorter than T=" + std::to_string(T));
  const std::int64_t D = model.dim(), C = model.num_classes();

  Prediction out;
  out.stage1_heat = correspondence_heatmaps(imu_feats, patch_feats, model.config().heat_tau);
  out.stage2_heat = Tensor(Shape{L, S}, 0.0);
  out.action_logits = Tensor(Shape{L, C}, 0.0);
  for (std::int64_t start = 0; start < L; start += T) {
    Tensor feats(Shape{T, D}, 0.0);
    Tensor heat(Shape{T, S}, 0.0);
    for (std::int64_t k = 0; k < T; ++k) {
      const std::int64_t src = std::min(start + k, L - 1);
      std::copy(imu_feats.data().begin() + src * D, imu_feats.data().begin() + (src + 1) * D,
                feats.data().begin() + k * D);
      std::copy(out.stage1_heat.data().begin() + src * S, out.stage1_heat.data().begin() + (src + 1) * S,
                heat.data().begin() + k * S);
    }
    Graph g;
    auto n = model.forward(g, heat, feats, patch_feats, true);
    const Tensor& probs = g.value(n.traj_probs);
    const Tensor& act = g.value(n.action_logits);
    const std::int64_t keep = std::min<std::int64_t>(T, L - start);
    std::copy(probs.data().begin(), probs.data().begin() + keep * S, out.stage2_heat.data().begin() + start * S);
    std::copy(act.data().begin(), act.data().begin() + keep * C, out.action_logits.data().begin() + start * C);
  }
  out.segments = row_argmax(out.stage2_heat);
  out.actions = row_argmax(out.action_logits);
  out.stage1_segments = row_argmax(out.stage1_heat);
  for (std::int64_t t = 0; t < L; ++t) {
    const int s = out.segments[static_cast<std::size_t>(t)];
    auto [x, y] = grid.center(s);
    out.x.push_back(x);
    out.y.push_back(y);
    out.confidence.push_back(out.stage2_heat[t * S + s]);
  }
  return out;
}

// ---- exports -------------------------------------------------------------

namespace {

void check_slice(const Tensor& heat, int t, int grid) {
  if (heat.rank() != 2 || heat.dim(1) != static_cast<std::int64_t>(grid) * grid || t < 0 || t >= heat.dim(0)) {
    throw InvalidArgument("heatmap slice " + std::to_string(t) + " unavailable in " + num::to_string(heat.shape()));
  }
}

}  // namespace

std::string heatmap_csv(const Tensor& heat, int t, int grid) {
  check_slice(heat, t, grid);
  const std::int64_t S = static_cast<std::int64_t>(grid) * grid;
  std::string out;
  char buf[32];
  for (int r = 0; r < grid; ++r) {
    for (int c = 0; c < grid; ++c) {
      std::snprintf(buf, sizeof(buf), "%.9g", heat[t * S + r * grid + c]);
      if (c) out += ',';
      out += buf;
    }
    out += '\n';
  }
  return out;
}

std::string heatmap_pgm(const Tensor& heat, int t, int grid) {
  check_slice(heat, t, grid);
  const std::int64_t S = static_cast<std::int64_t>(grid) * grid;
  double mx = 0.0;
  for (std::int64_t s = 0; s < S; ++s) mx = std::max(mx, heat[t * S + s]);
  std::string out = "P5\n" + std::to_string(grid) + " " + std::to_string(grid) + "\n255\n";
  // image row 0 is the top, i.e. the highest grid row
  for (int r = grid - 1; r >= 0; --r) {
    for (int c = 0; c < grid; ++c) {
      const double v = mx > 0.0 ? heat[t * S + r * grid + c] / mx : 0.0;
      out += static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
    }
  }
  return out;
}

std::string predictions_csv(const Prediction& p) {
  std::string out = "t,x,y,segment,action,confidence\n";
  char buf[160];
  for (std::size_t t = 0; t < p.segments.size(); ++t) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%d,%d,%.17g\n", t, p.x[t], p.y[t], p.segments[t], p.actions[t],
                  p.confidence[t]);
    out += buf;
  }
  return out;
}

}  // namespace egoloc::stage2
