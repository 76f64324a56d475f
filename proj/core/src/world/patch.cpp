#include "egoloc/world/patch.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "egoloc/error.hpp"
#include "egoloc/rng.hpp"

namespace egoloc::world {

SegmentPatch patch_at(const PointCloud& cloud, double cx, double cy, double side, int n, std::uint64_t seed,
                      int segment) {
  if (n < 1) throw InvalidArgument("patch needs at least one point");
  if (!(side > 0.0)) throw InvalidArgument("patch side must be positive");
  const double h = side / 2.0;
  // clipped square in patch-relative coordinates
  const double rx_lo = std::max(cloud.origin_x - cx, -h);
  const double rx_hi = std::min(cloud.origin_x + cloud.extent - cx, h);
  const double ry_lo = std::max(cloud.origin_y - cy, -h);
  const double ry_hi = std::min(cloud.origin_y + cloud.extent - cy, h);

  std::vector<std::uint32_t> inside;
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const double dx = static_cast<double>(cloud.points[i][0]) - cx;
    const double dy = static_cast<double>(cloud.points[i][1]) - cy;
    if (std::abs(dx) <= h && std::abs(dy) <= h) inside.push_back(static_cast<std::uint32_t>(i));
  }

  Rng rng(seed);
  SegmentPatch patch;
  patch.segment = segment;
  patch.side = side;
  patch.points = num::Tensor(num::Shape{n, 3}, 0.0);
  double* out = patch.points.ptr();
  const auto want = static_cast<std::size_t>(n);
  if (inside.size() > want) {
    // partial Fisher-Yates: the first n entries become a uniform sample
    for (std::size_t i = 0; i < want; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, inside.size() - 1);
      std::swap(inside[i], inside[pick(rng)]);
    }
    inside.resize(want);
  }
  std::size_t k = 0;
  for (auto idx : inside) {
    const auto& p = cloud.points[idx];
    out[3 * k] = static_cast<double>(p[0]) - cx;
    out[3 * k + 1] = static_cast<double>(p[1]) - cy;
    out[3 * k + 2] = static_cast<double>(p[2]);
    ++k;
  }
  for (; k < want; ++k) {
    out[3 * k] = rx_lo + uniform(rng, 0.0, 1.0) * (rx_hi - rx_lo);
    out[3 * k + 1] = ry_lo + uniform(rng, 0.0, 1.0) * (ry_hi - ry_lo);
    out[3 * k + 2] = uniform(rng, 0.0, kFloorThickness);
  }
  return patch;
}

}  // namespace egoloc::world
