#include "egoloc/baselines/velocity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "egoloc/encoders/encoders.hpp"
#include "egoloc/encoders/params.hpp"
#include "egoloc/error.hpp"
#include "egoloc/rng.hpp"

namespace egoloc::base {

using num::Graph;
using num::NodeId;
using num::Shape;
using num::Tensor;

void validate(const VelocityConfig& c) {
  if (c.rate_hz < 8) throw ConfigError("velocity net needs an IMU rate of at least 8 Hz");
  if (c.batch < 1) throw ConfigError("velocity batch must be positive");
  if (c.steps < 0) throw ConfigError("velocity steps must be non-negative");
  if (!(c.optim.lr >= 0.0)) throw ConfigError("learning rate must be non-negative");
}

VelocityNet::VelocityNet(const VelocityConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  validate(cfg);
  Rng rng(derive_seed(seed, {0x76656cULL}));
  params_.push_back(enc::init_param("vel.conv1.w", {5, 6, 16}, 5 * 6, rng));
  params_.push_back(enc::init_param("vel.conv1.b", {16}, 5 * 6, rng));
  params_.push_back(enc::init_param("vel.conv2.w", {5, 16, 32}, 5 * 16, rng));
  params_.push_back(enc::init_param("vel.conv2.b", {32}, 5 * 16, rng));
  params_.push_back(enc::init_param("vel.head.w", {32, 2}, 32, rng));
  params_.push_back(enc::init_param("vel.head.b", {2}, 32, rng));
}

NodeId VelocityNet::build(Graph& g, NodeId x, const std::function<NodeId(std::size_t)>& bind) const {
  const Tensor& xv = g.value(x);
  if (xv.rank() != 3 || xv.dim(1) != 2 * cfg_.rate_hz || xv.dim(2) != 6) {
    throw InvalidArgument("velocity net expects [B," + std::to_string(2 * cfg_.rate_hz) + ",6] inputs, got " +
                          num::to_string(xv.shape()));
  }
  NodeId h = g.add(x, g.constant(Tensor(Shape{6}, {0.0, 0.0, -motion::kGravity, 0.0, 0.0, 0.0})));
  h = g.relu(g.conv1d(h, bind(0), bind(1), 2, 2));
  h = g.relu(g.conv1d(h, bind(2), bind(3), 2, 2));
  h = g.meanpool(h, 1);
  return g.affine(h, bind(4), bind(5));
}

NodeId VelocityNet::forward(Graph& g, NodeId inputs, bool trainable) {
  return build(g, inputs, [&](std::size_t i) {
    return trainable ? g.param(params_[i]) : g.constant(params_[i].value);
  });
}

Tensor VelocityNet::predict(const Tensor& inputs) const {
  Graph g;
  NodeId out = build(g, g.constant(inputs), [&](std::size_t i) { return g.constant(params_[i].value); });
  return g.value(out);
}

VelocityResult train_velocity_net(const std::vector<DisplacementSample>& data, VelocityNet& net,
                                  const VelocityConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  if (data.empty()) throw InvalidArgument("velocity training set is empty");
  const std::int64_t rows = 2 * cfg.rate_hz;
  for (const auto& d : data) {
    if (d.input.rank() != 2 || d.input.dim(0) != rows || d.input.dim(1) != 6) {
      throw ShapeError("velocity sample must be [" + std::to_string(rows) + ",6], got " +
                       num::to_string(d.input.shape()));
    }
  }
  const std::size_t B = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch), data.size());
  auto params = enc::pointers(net.params());
  num::AdamWState opt;
  opt.hyper = cfg.optim;
  Rng rng(derive_seed(seed, {0x767472ULL}));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();

  VelocityResult res;
  for (int step = 0; step < cfg.steps; ++step) {
    if (cursor + B > order.size()) {
      std::shuffle(order.begin(), order.end(), rng);
      cursor = 0;
    }
    Tensor x(Shape{static_cast<std::int64_t>(B), rows, 6}, 0.0);
    Tensor y(Shape{static_cast<std::int64_t>(B), 2}, 0.0);
    for (std::size_t b = 0; b < B; ++b) {
      const auto& d = data[order[cursor + b]];
      std::copy(d.input.data().begin(), d.input.data().end(),
                x.data().begin() + static_cast<std::ptrdiff_t>(b * rows * 6));
      y[static_cast<std::int64_t>(b) * 2] = -d.target[0];
      y[static_cast<std::int64_t>(b) * 2 + 1] = -d.target[1];
    }
    cursor += B;
    for (auto* p : params) p->zero_grad();
    Graph g;
    NodeId err = g.add(net.forward(g, g.constant(std::move(x))), g.constant(std::move(y)));
    // mean squared error = mean of err . err
    NodeId flat = g.reshape(err, {static_cast<std::int64_t>(B) * 2, 1});
    NodeId sq = g.matmul(flat, flat, true, false);
    NodeId loss = g.mul_scalar(g.reshape(sq, {1}), 1.0 / static_cast<double>(B));
    const double lv = g.value(loss).item();
    if (!std::isfinite(lv)) throw Error(ErrorKind::kData, "velocity loss became non-finite at step " + std::to_string(step));
    g.backward(loss);
    num::adamw_step(params, opt);
    res.loss_trace.push_back(lv);
  }
  enc::round_to_float(net.params());
  return res;
}

std::vector<double> integrate_heading(const motion::ImuStream& imu, double heading0) {
  const std::size_t R = static_cast<std::size_t>(imu.rate_hz);
  const std::size_t seconds = imu.samples.size() / R;
  std::vector<double> out;
  out.reserve(seconds);
  double h = heading0;
  for (std::size_t k = 0; k < seconds; ++k) {
    out.push_back(h);
    for (std::size_t i = k * R; i < (k + 1) * R; ++i) h += imu.samples[i][5] / static_cast<double>(imu.rate_hz);
  }
  return out;
}

std::vector<Tensor> displacement_inputs(const std::vector<Tensor>& windows) {
  std::vector<Tensor> out;
  for (std::size_t t = 1; t < windows.size(); ++t) {
    const auto& a = windows[t - 1];
    const auto& b = windows[t];
    Tensor x(Shape{a.dim(0) + b.dim(0), 6}, 0.0);
    std::copy(a.data().begin(), a.data().end(), x.data().begin());
    std::copy(b.data().begin(), b.data().end(), x.data().begin() + a.size());
    out.push_back(std::move(x));
  }
  return out;
}

std::vector<DisplacementSample> displacement_samples(const motion::ImuStream& imu,
                                                     const std::vector<motion::SecondLabel>& labels) {
  auto inputs = displacement_inputs(motion::window_imu(imu));
  if (labels.size() != inputs.size() + 1) {
    throw InvalidArgument("displacement_samples: " + std::to_string(labels.size()) + " labels for " +
                          std::to_string(inputs.size() + 1) + " windows");
  }
  std::vector<DisplacementSample> out;
  out.reserve(inputs.size());
  for (std::size_t t = 1; t < labels.size(); ++t) {
    const double dx = labels[t].x - labels[t - 1].x, dy = labels[t].y - labels[t - 1].y;
    const double c = std::cos(labels[t - 1].heading), s = std::sin(labels[t - 1].heading);
    out.push_back({std::move(inputs[t - 1]), Vec2{c * dx + s * dy, -s * dx + c * dy}});
  }
  return out;
}

std::vector<Vec2> to_world(const std::vector<Vec2>& local, const std::vector<double>& heading) {
  if (heading.size() < local.size()) throw InvalidArgument("to_world: fewer headings than displacements");
  std::vector<Vec2> out(local.size());
  for (std::size_t k = 0; k < local.size(); ++k) {
    const double c = std::cos(heading[k]), s = std::sin(heading[k]);
    out[k] = {c * local[k][0] - s * local[k][1], s * local[k][0] + c * local[k][1]};
  }
  return out;
}

std::vector<Vec2> dead_reckon(const std::vector<Vec2>& displacements, Vec2 z0) {
  std::vector<Vec2> out;
  out.reserve(displacements.size() + 1);
  out.push_back(z0);
  Vec2 z = z0;
  for (const auto& d : displacements) {
    z = {z[0] + d[0], z[1] + d[1]};
    out.push_back(z);
  }
  return out;
}

std::vector<Vec2> dead_reckon_sequence(const VelocityNet& net, const motion::ImuStream& imu, Vec2 z0,
                                       double heading0) {
  auto windows = motion::window_imu(imu);
  auto inputs = displacement_inputs(windows);
  std::vector<Vec2> local;
  if (!inputs.empty()) {
    Tensor pred = net.predict(enc::stack(inputs));
    for (std::int64_t k = 0; k < pred.dim(0); ++k) local.push_back({pred[k * 2], pred[k * 2 + 1]});
  }
  return dead_reckon(to_world(local, integrate_heading(imu, heading0)), z0);
}

std::vector<double> drift_curve(const std::vector<std::vector<Vec2>>& pred, const std::vector<std::vector<Vec2>>& gt) {
  if (pred.size() != gt.size()) throw InvalidArgument("drift_curve: prediction and ground-truth counts differ");
  std::size_t longest = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i].size() != gt[i].size()) {
      throw InvalidArgument("drift_curve: sequence " + std::to_string(i) + " has " + std::to_string(pred[i].size()) +
                            " predictions for " + std::to_string(gt[i].size()) + " ground-truth seconds");
    }
    longest = std::max(longest, pred[i].size());
  }
  std::vector<double> sum(longest, 0.0);
  std::vector<int> count(longest, 0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    for (std::size_t t = 0; t < pred[i].size(); ++t) {
      sum[t] += std::hypot(pred[i][t][0] - gt[i][t][0], pred[i][t][1] - gt[i][t][1]);
      ++count[t];
    }
  }
  for (std::size_t t = 0; t < longest; ++t) sum[t] /= count[t];
  return sum;
}

}  // namespace egoloc::base
