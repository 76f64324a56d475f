#include "egoloc/encoders/encoders.hpp"

#include "egoloc/encoders/params.hpp"
#include "egoloc/error.hpp"
#include "egoloc/motion/imu.hpp"

namespace egoloc::enc {

using num::Graph;
using num::NodeId;
using num::Shape;
using num::Tensor;

void validate(const EncoderConfig& cfg) {
  if (cfg.dim < 4) throw ConfigError("feature dimension must be at least 4");
  if (cfg.rate_hz < 8) throw ConfigError("IMU rate must be at least 8 Hz for the encoder's strided convolutions");
  if (cfg.patch_points < 1) throw ConfigError("patch_points must be positive");
}

Tensor stack(const std::vector<Tensor>& items) {
  if (items.empty()) throw InvalidArgument("stack: no items");
  Shape s = items.front().shape();
  s.insert(s.begin(), static_cast<std::int64_t>(items.size()));
  Tensor out(s, 0.0);
  const auto n = items.front().size();
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].shape() != items.front().shape()) throw ShapeError("stack: items differ in shape");
    std::copy(items[i].data().begin(), items[i].data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(i * n));
  }
  return out;
}

namespace {

std::function<NodeId(std::size_t)> binder(Graph& g, std::vector<num::Parameter>& params, Binding b) {
  return [&g, &params, b](std::size_t i) {
    return b == Binding::kTrainable ? g.param(params[i]) : g.constant(params[i].value);
  };
}

std::function<NodeId(std::size_t)> const_binder(Graph& g, const std::vector<num::Parameter>& params) {
  return [&g, &params](std::size_t i) { return g.constant(params[i].value); };
}

}  // namespace

// ---- IMU encoder ---------------------------------------------------------

ImuEncoder::ImuEncoder(const EncoderConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  validate(cfg);
  Rng rng(derive_seed(seed, {0x696d75ULL}));
  params_.push_back(init_param("imu.conv1.w", {5, 6, 16}, 5 * 6, rng));
  params_.push_back(init_param("imu.conv1.b", {16}, 5 * 6, rng));
  params_.push_back(init_param("imu.conv2.w", {5, 16, 32}, 5 * 16, rng));
  params_.push_back(init_param("imu.conv2.b", {32}, 5 * 16, rng));
  if (cfg.imu_residual) {
    params_.push_back(init_param("imu.res.w", {3, 32, 32}, 3 * 32, rng));
    params_.push_back(init_param("imu.res.b", {32}, 3 * 32, rng));
  }
  params_.push_back(init_param("imu.head.w", {32, cfg.dim}, 32, rng));
  params_.push_back(init_param("imu.head.b", {cfg.dim}, 32, rng));
}

NodeId ImuEncoder::build(Graph& g, NodeId x, const std::function<NodeId(std::size_t)>& bind) const {
  const Tensor& xv = g.value(x);
  if (xv.rank() != 3 || xv.dim(1) != cfg_.rate_hz || xv.dim(2) != 6) {
    throw InvalidArgument("IMU encoder expects [B," + std::to_string(cfg_.rate_hz) + ",6] windows, got " +
                          num::to_string(xv.shape()));
  }
  NodeId h = g.add(x, g.constant(Tensor(Shape{6}, {0.0, 0.0, -motion::kGravity, 0.0, 0.0, 0.0})));
  std::size_t i = 0;
  h = g.relu(g.conv1d(h, bind(i), bind(i + 1), 2, 2));
  i += 2;
  h = g.relu(g.conv1d(h, bind(i), bind(i + 1), 2, 2));
  i += 2;
  if (cfg_.imu_residual) {
    h = g.add(h, g.relu(g.conv1d(h, bind(i), bind(i + 1), 1, 1)));
    i += 2;
  }
  h = g.meanpool(h, 1);
  h = g.affine(h, bind(i), bind(i + 1));
  return g.l2_normalize(h, 1);
}

NodeId ImuEncoder::forward(Graph& g, NodeId windows, Binding b) { return build(g, windows, binder(g, params_, b)); }

Tensor ImuEncoder::encode_batch(const std::vector<Tensor>& windows) const {
  Graph g;
  NodeId out = build(g, g.constant(stack(windows)), const_binder(g, params_));
  return g.value(out);
}

Tensor ImuEncoder::encode(const Tensor& window) const {
  if (window.rank() != 2 || window.dim(0) != cfg_.rate_hz || window.dim(1) != 6) {
    throw InvalidArgument("IMU window must be [" + std::to_string(cfg_.rate_hz) + ",6], got " +
                          num::to_string(window.shape()));
  }
  return encode_batch({window}).reshaped({cfg_.dim});
}

// ---- point encoder -------------------------------------------------------

PointEncoder::PointEncoder(const EncoderConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  validate(cfg);
  Rng rng(derive_seed(seed, {0x707473ULL}));
  params_.push_back(init_param("pts.fc1.w", {3, 32}, 3, rng));
  params_.push_back(init_param("pts.fc1.b", {32}, 3, rng));
  params_.push_back(init_param("pts.fc2.w", {32, 64}, 32, rng));
  params_.push_back(init_param("pts.fc2.b", {64}, 32, rng));
  params_.push_back(init_param("pts.head.w", {64, cfg.dim}, 64, rng));
  params_.push_back(init_param("pts.head.b", {cfg.dim}, 64, rng));
}

NodeId PointEncoder::build(Graph& g, NodeId x, const std::function<NodeId(std::size_t)>& bind) const {
  const Tensor& xv = g.value(x);
  if (xv.rank() != 3 || xv.dim(2) != 3) {
    throw InvalidArgument("point encoder expects [B,N,3] points, got " + num::to_string(xv.shape()));
  }
  NodeId h = g.relu(g.affine(x, bind(0), bind(1)));
  h = g.relu(g.affine(h, bind(2), bind(3)));
  h = g.maxpool(h, 1);
  h = g.affine(h, bind(4), bind(5));
  return g.l2_normalize(h, 1);
}

NodeId PointEncoder::forward(Graph& g, NodeId points, Binding b) { return build(g, points, binder(g, params_, b)); }

Tensor PointEncoder::encode_points(const Tensor& points) const {
  if (points.rank() != 2 || points.dim(0) != cfg_.patch_points || points.dim(1) != 3) {
    throw InvalidArgument("patch must hold exactly " + std::to_string(cfg_.patch_points) + " points, got " +
                          num::to_string(points.shape()));
  }
  Graph g;
  NodeId out = build(g, g.constant(points.reshaped({1, points.dim(0), 3})), const_binder(g, params_));
  return g.value(out).reshaped({cfg_.dim});
}

Tensor PointEncoder::encode(const world::SegmentPatch& patch) const { return encode_points(patch.points); }

Tensor PointEncoder::encode_batch(const std::vector<Tensor>& patches, std::size_t chunk) const {
  if (patches.empty()) throw InvalidArgument("encode_batch: no patches");
  Tensor out(Shape{static_cast<std::int64_t>(patches.size()), cfg_.dim}, 0.0);
  for (std::size_t s = 0; s < patches.size(); s += chunk) {
    const std::size_t e = std::min(patches.size(), s + chunk);
    std::vector<Tensor> part(patches.begin() + static_cast<std::ptrdiff_t>(s),
                             patches.begin() + static_cast<std::ptrdiff_t>(e));
    for (const auto& p : part) {
      if (p.rank() != 2 || p.dim(0) != cfg_.patch_points) {
        throw InvalidArgument("patch must hold exactly " + std::to_string(cfg_.patch_points) + " points");
      }
    }
    Graph g;
    NodeId f = build(g, g.constant(stack(part)), const_binder(g, params_));
    const Tensor& fv = g.value(f);
    std::copy(fv.data().begin(), fv.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(s * cfg_.dim));
  }
  return out;
}

}  // namespace egoloc::enc
