#include "egoloc/motion/trajectory.hpp"

#include <cmath>
#include <numbers>

#include "egoloc/error.hpp"
#include "egoloc/io.hpp"
#include "egoloc/rng.hpp"

namespace egoloc::motion {
namespace {

constexpr double kPi = std::numbers::pi;

struct Profile {
  double s, v, a;
};

// Rest-to-rest motion over distance d in time T. The speed profile is a
// trapezoid whose ramps use a raised-cosine acceleration 2*acc*sin^2(pi*tau/ta):
// the mean ramp acceleration is acc (so ramp times and distances match the
// constant-acceleration trapezoid) and acceleration is continuous.
Profile trapezoid(double tau, double d, double T, double vmax, double acc) {
  if (d <= 0.0 || T <= 0.0) return {0.0, 0.0, 0.0};
  tau = std::clamp(tau, 0.0, T);
  const bool full = d >= vmax * vmax / acc;
  const double ta = full ? vmax / acc : T / 2.0;
  auto ramp = [&](double r) {
    const double w = 2.0 * kPi / ta;
    const double sn = std::sin(w * r);
    return Profile{acc * (0.5 * r * r + (std::cos(w * r) - 1.0) / (w * w)), acc * (r - sn / w),
                   2.0 * acc * std::sin(0.5 * w * r) * std::sin(0.5 * w * r)};
  };
  if (tau < ta) return ramp(tau);
  if (tau > T - ta) {
    const auto pr = ramp(T - tau);
    return {d - pr.s, pr.v, -pr.a};
  }
  return {0.5 * acc * ta * ta + vmax * (tau - ta), vmax, 0.0};
}

double wrap_pi(double a) {
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a < 0) a += 2.0 * kPi;
  return a - kPi;
}

struct EpisodeKin {
  bool walk = false;
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  double dist = 0, walk_T = 0;
  double theta0 = 0, dtheta = 0, turn_T = 0;
  double jx = 0, jy = 0;
  int kx = 1, ky = 1;
};

}  // namespace

std::size_t sample_count(double duration_s, int rate_hz) {
  return static_cast<std::size_t>(std::floor(duration_s * rate_hz + 1e-9));
}

Trajectory simulate_trajectory(const world::Scene& scene, const ActionScript& script, int rate_hz,
                               const TrajectoryParams& p, std::uint64_t seed) {
  if (rate_hz < 1) throw InvalidArgument("IMU rate must be positive");
  if (script.empty()) throw InvalidArgument("empty action script");
  auto anchor_xy = [&](int idx) {
    if (idx < 0 || static_cast<std::size_t>(idx) >= scene.anchors.size()) {
      throw InvalidArgument("script references anchor " + std::to_string(idx) + " not in the scene");
    }
    const auto& a = scene.anchors[static_cast<std::size_t>(idx)];
    return std::pair<double, double>{a.x, a.y};
  };

  Rng rng(derive_seed(seed, {4}));
  std::vector<EpisodeKin> kin(script.size());
  double heading = uniform(rng, -kPi, kPi);
  auto [cx, cy] = anchor_xy(script.front().anchor);
  for (std::size_t i = 0; i < script.size(); ++i) {
    const auto& e = script[i];
    auto& k = kin[i];
    k.x0 = cx;
    k.y0 = cy;
    k.theta0 = heading;
    auto [tx, ty] = anchor_xy(e.anchor);
    k.walk = !(tx == cx && ty == cy) && i > 0;
    if (k.walk) {
      k.x1 = tx;
      k.y1 = ty;
      k.dist = std::hypot(tx - cx, ty - cy);
      k.walk_T = walk_duration(k.dist, p.walk_speed, p.walk_accel);
      k.dtheta = wrap_pi(std::atan2(ty - cy, tx - cx) - heading);
      k.turn_T = std::min(p.turn_time, k.walk_T);
      heading += k.dtheta;
      cx = tx;
      cy = ty;
    } else {
      k.x1 = cx;
      k.y1 = cy;
      Rng jr(derive_seed(seed, {5, i}));
      k.jx = uniform(jr, -p.jitter, p.jitter);
      k.jy = uniform(jr, -p.jitter, p.jitter);
      k.kx = 1 + static_cast<int>(jr() % 2);
      k.ky = 1 + static_cast<int>(jr() % 2);
    }
  }

  Trajectory tr;
  tr.rate_hz = rate_hz;
  const std::size_t n = sample_count(script_end(script), rate_hz);
  for (auto* v : {&tr.t, &tr.x, &tr.y, &tr.heading, &tr.vx, &tr.vy, &tr.ax, &tr.ay, &tr.yaw_rate}) v->resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    const double t = static_cast<double>(s) / rate_hz;
    const std::size_t ei = episode_at(script, t);
    const auto& e = script[ei];
    const auto& k = kin[ei];
    const double tau = t - e.start;
    tr.t[s] = t;
    if (k.walk) {
      const auto pr = trapezoid(tau, k.dist, k.walk_T, p.walk_speed, p.walk_accel);
      const double ux = (k.x1 - k.x0) / k.dist, uy = (k.y1 - k.y0) / k.dist;
      tr.x[s] = k.x0 + pr.s * ux;
      tr.y[s] = k.y0 + pr.s * uy;
      tr.vx[s] = pr.v * ux;
      tr.vy[s] = pr.v * uy;
      tr.ax[s] = pr.a * ux;
      tr.ay[s] = pr.a * uy;
      if (tau < k.turn_T) {
        const double u = tau / k.turn_T;
        tr.heading[s] = k.theta0 + k.dtheta * u * u * (3.0 - 2.0 * u);
        tr.yaw_rate[s] = k.dtheta * 6.0 * u * (1.0 - u) / k.turn_T;
      } else {
        tr.heading[s] = k.theta0 + k.dtheta;
        tr.yaw_rate[s] = 0.0;
      }
    } else {
      // sway A sin^4(pi k u): position, velocity and acceleration all vanish
      // at both episode ends
      const double D = e.duration;
      const double u = tau / D;
      auto sway = [&](double A, int kk, double& pos, double& vel, double& acc) {
        const double w = kPi * kk;
        const double x = w * u;
        pos = A * (0.375 - 0.5 * std::cos(2 * x) + 0.125 * std::cos(4 * x));
        vel = A * (w / D) * (std::sin(2 * x) - 0.5 * std::sin(4 * x));
        acc = A * (w / D) * (w / D) * (2 * std::cos(2 * x) - 2 * std::cos(4 * x));
      };
      double px, vx, ax, py, vy, ay;
      sway(k.jx, k.kx, px, vx, ax);
      sway(k.jy, k.ky, py, vy, ay);
      tr.x[s] = k.x0 + px;
      tr.y[s] = k.y0 + py;
      tr.vx[s] = vx;
      tr.vy[s] = vy;
      tr.ax[s] = ax;
      tr.ay[s] = ay;
      tr.heading[s] = k.theta0;
      tr.yaw_rate[s] = 0.0;
    }
  }
  return tr;
}

std::string trajectory_to_csv(const Trajectory& tr) {
  std::string out = "t,x,y,heading,vx,vy,ax,ay,yaw_rate\n";
  for (std::size_t i = 0; i < tr.size(); ++i) {
    for (double v : {tr.t[i], tr.x[i], tr.y[i], tr.heading[i], tr.vx[i], tr.vy[i], tr.ax[i], tr.ay[i], tr.yaw_rate[i]}) {
      out += io::fmt_double(v);
      out += ',';
    }
    out.back() = '\n';
  }
  return out;
}

}  // namespace egoloc::motion
