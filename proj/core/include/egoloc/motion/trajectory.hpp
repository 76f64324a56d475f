#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "egoloc/motion/script.hpp"
#include "egoloc/world/scene.hpp"

namespace egoloc::motion {

/// Ground-truth kinematics sampled at the IMU rate (sample i at t = i / rate).
/// Heading is unwrapped; derivatives are analytic, not differenced.
struct Trajectory {
  int rate_hz = 50;
  std::vector<double> t, x, y, heading;
  std::vector<double> vx, vy, ax, ay, yaw_rate;

  std::size_t size() const { return t.size(); }
};

struct TrajectoryParams {
  double walk_speed = 0.8;
  double walk_accel = 0.5;
  double jitter = 0.02;     // max per-axis stationary sway (m)
  double turn_time = 0.5;   // heading transition at the start of a walk (s)
};

inline constexpr double kMaxSpeed = 1.6;

/// Number of samples covering [0, duration) at the given rate.
std::size_t sample_count(double duration_s, int rate_hz);

Trajectory simulate_trajectory(const world::Scene& scene, const ActionScript& script, int rate_hz,
                               const TrajectoryParams& params, std::uint64_t seed);

std::string trajectory_to_csv(const Trajectory& traj);

}  // namespace egoloc::motion
