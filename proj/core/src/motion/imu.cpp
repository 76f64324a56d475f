#include "egoloc/motion/imu.hpp"

#include <cmath>
#include <numbers>

#include "egoloc/error.hpp"
#include "egoloc/io.hpp"
#include "egoloc/rng.hpp"

namespace egoloc::motion {

ImuStream synthesize_imu(const Trajectory& tr, const ActionScript& script, const ActionSet& actions,
                         const ImuSynthParams& p, std::uint64_t seed) {
  const std::size_t n = tr.size();
  if (n > 0 && std::abs(script_end(script) * tr.rate_hz - static_cast<double>(n)) > 1.0 + 1e-9) {
    throw InvalidArgument("trajectory and script cover different durations");
  }
  ImuStream out;
  out.rate_hz = tr.rate_hz;
  out.samples.resize(n);
  const double dt = 1.0 / tr.rate_hz;
  const auto& nz = p.noise;

  Rng noise_rng(derive_seed(seed, {6}));
  std::array<double, 6> bias{};
  for (int c = 0; c < 3; ++c) bias[c] = gaussian(noise_rng, 0.0, 1.0) * nz.accel_bias_init;
  for (int c = 3; c < 6; ++c) bias[c] = gaussian(noise_rng, 0.0, 1.0) * nz.gyro_bias_init;
  const double acc_step = nz.accel_bias_walk * std::sqrt(dt);
  const double gyr_step = nz.gyro_bias_walk * std::sqrt(dt);

  for (std::size_t i = 0; i < n; ++i) {
    const double t = tr.t[i];
    const double c = std::cos(tr.heading[i]), s = std::sin(tr.heading[i]);
    std::array<double, 6> v{c * tr.ax[i] + s * tr.ay[i], -s * tr.ax[i] + c * tr.ay[i], kGravity, 0.0, 0.0,
                            tr.yaw_rate[i]};
    if (p.signatures) {
      const std::size_t ei = episode_at(script, t);
      const auto& e = script[ei];
      const auto& cls = actions.at(static_cast<std::size_t>(e.action));
      double gain = p.style.amp_scale;
      if (!cls.stationary && p.nominal_speed > 0.0) gain *= std::hypot(tr.vx[i], tr.vy[i]) / p.nominal_speed;
      if (cls.burst_prob > 0.0) {
        const auto sec = static_cast<std::uint64_t>(std::floor(t - e.start));
        Rng br(derive_seed(seed, {7, ei, sec}));
        if (uniform(br, 0.0, 1.0) < cls.burst_prob) gain *= kBurstGain;
      }
      for (const auto& comp : cls.signature) {
        const double w = 2.0 * std::numbers::pi * comp.freq_hz * p.style.freq_scale;
        const double sn = std::sin(w * t + comp.phase + p.style.phase_offset);
        v[static_cast<std::size_t>(comp.axis)] += gain * comp.accel_amp * sn;
        v[static_cast<std::size_t>(3 + comp.axis)] += gain * comp.gyro_amp * sn;
      }
    }
    for (int k = 0; k < 6; ++k) {
      const double sigma = k < 3 ? nz.accel_sigma : nz.gyro_sigma;
      v[k] += bias[k] + sigma * gaussian(noise_rng, 0.0, 1.0);
      out.samples[i][k] = static_cast<float>(v[k]);
    }
    for (int k = 0; k < 6; ++k) bias[k] += (k < 3 ? acc_step : gyr_step) * gaussian(noise_rng, 0.0, 1.0);
  }
  return out;
}

std::vector<num::Tensor> window_imu(const ImuStream& stream) {
  const auto r = static_cast<std::size_t>(stream.rate_hz);
  if (r == 0 || stream.samples.size() < r) throw InvalidArgument("IMU stream shorter than one second");
  const std::size_t nw = stream.samples.size() / r;
  std::vector<num::Tensor> w;
  w.reserve(nw);
  for (std::size_t k = 0; k < nw; ++k) {
    num::Tensor t(num::Shape{static_cast<std::int64_t>(r), 6}, 0.0);
    for (std::size_t i = 0; i < r; ++i) {
      for (int c = 0; c < 6; ++c) t[static_cast<std::int64_t>(i * 6 + c)] = stream.samples[k * r + i][c];
    }
    w.push_back(std::move(t));
  }
  return w;
}

std::vector<char> imu_to_bytes(const ImuStream& s) {
  std::vector<char> buf;
  buf.reserve(12 + s.samples.size() * 24);
  io::put<std::uint32_t>(buf, static_cast<std::uint32_t>(s.rate_hz));
  io::put<std::uint64_t>(buf, s.samples.size());
  for (const auto& row : s.samples) {
    for (float v : row) io::put<float>(buf, v);
  }
  return buf;
}

ImuStream imu_from_bytes(const std::vector<char>& bytes) {
  io::Reader r(bytes, "IMU stream");
  ImuStream s;
  s.rate_hz = static_cast<int>(r.get<std::uint32_t>());
  const auto n = r.get<std::uint64_t>();
  if (s.rate_hz < 1) throw DataError("IMU stream: invalid rate");
  if (r.remaining() != n * 24) throw DataError("IMU stream: sample count does not match payload size");
  s.samples.resize(n);
  for (auto& row : s.samples) {
    for (float& v : row) v = r.get<float>();
  }
  return s;
}

void save_imu(const ImuStream& s, const std::filesystem::path& path) { io::write_file(path, imu_to_bytes(s)); }
ImuStream load_imu(const std::filesystem::path& path) { return imu_from_bytes(io::read_file(path)); }

}  // namespace egoloc::motion
