#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "egoloc/motion/imu.hpp"
#include "egoloc/motion/labels.hpp"
#include "egoloc/numerics/adamw.hpp"
#include "egoloc/numerics/graph.hpp"

namespace egoloc::base {

using Vec2 = std::array<double, 2>;

struct VelocityConfig {
  int rate_hz = 50;
  int batch = 32;
  int steps = 1500;
  num::AdamWConfig optim;
};

void validate(const VelocityConfig& cfg);

/// Input to the velocity net for second t >= 1: windows t-1 and t stacked
/// ([2*rate, 6]); the target is the heading-frame displacement of the
/// per-second mean position from second t-1 to second t, expressed in the
/// frame of the heading at the start of second t-1.
struct DisplacementSample {
  num::Tensor input;  // [2*rate, 6]
  Vec2 target{};      // metres, (forward, left)
};

/// 1-D conv stack (6->16->32, k5 s2, relu), mean over time, affine to 2.
class VelocityNet {
 public:
  VelocityNet(const VelocityConfig& cfg, std::uint64_t seed);

  num::NodeId forward(num::Graph& g, num::NodeId inputs, bool trainable = true);
  /// [B, 2*rate, 6] -> [B, 2]
  num::Tensor predict(const num::Tensor& inputs) const;

  const VelocityConfig& config() const { return cfg_; }
  std::vector<num::Parameter>& params() { return params_; }
  const std::vector<num::Parameter>& params() const { return params_; }

 private:
  num::NodeId build(num::Graph& g, num::NodeId x, const std::function<num::NodeId(std::size_t)>& bind) const;
  VelocityConfig cfg_;
  std::vector<num::Parameter> params_;
};

struct VelocityResult {
  std::vector<double> loss_trace;  // mean squared error per step
};

/// Mean-squared-error regression with AdamW on seeded mini-batches. Trained
/// parameters are rounded to float32. Throws InvalidArgument on an empty
/// dataset.
VelocityResult train_velocity_net(const std::vector<DisplacementSample>& data, VelocityNet& net,
                                  const VelocityConfig& cfg, std::uint64_t seed);

/// Heading at the start of every full second, integrated from the gyro yaw
/// rate (sample i covers [i, i+1) / rate) starting from heading0.
std::vector<double> integrate_heading(const motion::ImuStream& imu, double heading0);

/// Stacked window pairs for seconds 1..L-1 of a windowed stream.
std::vector<num::Tensor> displacement_inputs(const std::vector<num::Tensor>& windows);

/// Training pairs for seconds 1..L-1 of one sequence, with targets taken
/// from the per-second labels. Throws InvalidArgument when the label count
/// differs from the number of windows.
std::vector<DisplacementSample> displacement_samples(const motion::ImuStream& imu,
                                                     const std::vector<motion::SecondLabel>& labels);

/// Rotates heading-frame displacements into the world frame: the k-th
/// displacement (second k+1) uses heading[k].
std::vector<Vec2> to_world(const std::vector<Vec2>& local, const std::vector<double>& heading);

/// z_0 = z0, z_t = z0 + sum_{k<=t} d_k for per-second world displacements
/// d_1..d_{L-1} (given as a vector of L-1 entries). No clamping to the scene.
std::vector<Vec2> dead_reckon(const std::vector<Vec2>& displacements, Vec2 z0);

/// Full baseline on one sequence: integrated heading from heading0, net
/// displacements, accumulation from z0.
std::vector<Vec2> dead_reckon_sequence(const VelocityNet& net, const motion::ImuStream& imu, Vec2 z0,
                                       double heading0);

/// error_t = mean of |pred_t - gt_t| over the sequences that reach second t.
/// Throws InvalidArgument when a prediction and its ground truth differ in
/// length or the list sizes differ.
std::vector<double> drift_curve(const std::vector<std::vector<Vec2>>& pred, const std::vector<std::vector<Vec2>>& gt);

}  // namespace egoloc::base
