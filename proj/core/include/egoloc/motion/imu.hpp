#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "egoloc/motion/actions.hpp"
#include "egoloc/motion/script.hpp"
#include "egoloc/motion/trajectory.hpp"
#include "egoloc/numerics/tensor.hpp"

namespace egoloc::motion {

inline constexpr double kGravity = 9.81;

struct ImuNoise {
  double accel_sigma = 0.1;        // white noise, m/s^2
  double gyro_sigma = 0.01;        // white noise, rad/s
  double accel_bias_init = 0.02;   // turn-on bias std, m/s^2
  double gyro_bias_init = 0.005;   // turn-on bias std, rad/s
  double accel_bias_walk = 0.005;  // random-walk std per sqrt(s)
  double gyro_bias_walk = 0.0005;

  static ImuNoise none() { return {0, 0, 0, 0, 0, 0}; }
};

struct ImuSynthParams {
  ImuNoise noise;
  SignatureStyle style;
  bool signatures = true;
  /// Walking signatures scale with speed relative to this cruise speed.
  double nominal_speed = 0.8;
};

/// Samples are (a_x, a_y, a_z, w_x, w_y, w_z) in a yaw-aligned body frame
/// (x forward, y left, z up), stored in single precision.
struct ImuStream {
  int rate_hz = 50;
  std::vector<std::array<float, 6>> samples;

  double duration() const { return static_cast<double>(samples.size()) / rate_hz; }
};

ImuStream synthesize_imu(const Trajectory& traj, const ActionScript& script, const ActionSet& actions,
                         const ImuSynthParams& params, std::uint64_t seed);

/// Non-overlapping one-second windows as [rate, 6] tensors; a trailing partial
/// second is dropped. Throws InvalidArgument for streams shorter than 1 s.
std::vector<num::Tensor> window_imu(const ImuStream& stream);

std::vector<char> imu_to_bytes(const ImuStream& s);
ImuStream imu_from_bytes(const std::vector<char>& bytes);
void save_imu(const ImuStream& s, const std::filesystem::path& path);
ImuStream load_imu(const std::filesystem::path& path);

}  // namespace egoloc::motion
