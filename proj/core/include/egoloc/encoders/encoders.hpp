#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "egoloc/numerics/graph.hpp"
#include "egoloc/world/patch.hpp"

namespace egoloc::enc {

struct EncoderConfig {
  int dim = 64;           // feature dimension D
  int rate_hz = 50;       // IMU window rows
  int patch_points = 1024;
  bool imu_residual = false;  // extra 32->32 residual conv block
};

void validate(const EncoderConfig& cfg);

/// How a forward pass binds parameters: as trainable graph parameters or as
/// constants (inference, frozen use).
enum class Binding { kTrainable, kFrozen };

/// 1-D conv stack: conv(6->16,k5,s2)+relu, conv(16->32,k5,s2)+relu,
/// [optional x + relu(conv(32->32,k3))], mean over time, affine to D, L2 norm.
/// Nominal gravity is removed from a_z before the first convolution.
class ImuEncoder {
 public:
  ImuEncoder(const EncoderConfig& cfg, std::uint64_t seed);

  /// windows [B, rate, 6] -> features [B, D]
  num::NodeId forward(num::Graph& g, num::NodeId windows, Binding b = Binding::kTrainable);
  /// Single window [rate, 6] -> unit vector [D]. Throws InvalidArgument on a
  /// rate mismatch.
  num::Tensor encode(const num::Tensor& window) const;
  /// Stacks windows and encodes them in one pass -> [B, D].
  num::Tensor encode_batch(const std::vector<num::Tensor>& windows) const;

  const EncoderConfig& config() const { return cfg_; }
  std::vector<num::Parameter>& params() { return params_; }
  const std::vector<num::Parameter>& params() const { return params_; }

 private:
  num::NodeId build(num::Graph& g, num::NodeId x, const std::function<num::NodeId(std::size_t)>& bind) const;
  EncoderConfig cfg_;
  std::vector<num::Parameter> params_;
};

/// Shared per-point MLP (3->32->64, relu), max over points, affine to D, L2 norm.
class PointEncoder {
 public:
  PointEncoder(const EncoderConfig& cfg, std::uint64_t seed);

  /// points [B, N, 3] -> features [B, D]
  num::NodeId forward(num::Graph& g, num::NodeId points, Binding b = Binding::kTrainable);
  /// Throws InvalidArgument unless the patch has exactly patch_points points.
  num::Tensor encode(const world::SegmentPatch& patch) const;
  num::Tensor encode_points(const num::Tensor& points) const;
  /// [B, N, 3] -> [B, D] in chunks of at most `chunk` patches.
  num::Tensor encode_batch(const std::vector<num::Tensor>& patches, std::size_t chunk = 64) const;

  const EncoderConfig& config() const { return cfg_; }
  std::vector<num::Parameter>& params() { return params_; }
  const std::vector<num::Parameter>& params() const { return params_; }

 private:
  num::NodeId build(num::Graph& g, num::NodeId x, const std::function<num::NodeId(std::size_t)>& bind) const;
  EncoderConfig cfg_;
  std::vector<num::Parameter> params_;
};

/// Stacks equally shaped tensors along a new leading axis.
num::Tensor stack(const std::vector<num::Tensor>& items);

}  // namespace egoloc::enc
