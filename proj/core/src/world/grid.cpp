#include "egoloc/world/grid.hpp"

#include <algorithm>
#include <cmath>

#include "egoloc/error.hpp"

namespace egoloc::world {

SegmentGrid::SegmentGrid(double extent, int cells_per_side, double origin_x, double origin_y)
    : extent_(extent), g_(cells_per_side), ox_(origin_x), oy_(origin_y) {
  if (cells_per_side < 2) throw InvalidArgument("grid needs at least 2 cells per side");
  if (!(extent > 0.0)) throw InvalidArgument("grid extent must be positive");
}

int SegmentGrid::axis_index(double v, double origin) const {
  const double rel = v - origin;
  auto k = static_cast<int>(std::floor(rel * g_ / extent_));
  k = std::clamp(k, 0, g_ - 1);
  // reconcile with the exact boundary positions origin + k*L/G
  auto bound = [&](int i) { return origin + extent_ * i / g_; };
  while (k + 1 < g_ && v >= bound(k + 1)) ++k;
  while (k > 0 && v < bound(k)) --k;
  return k;
}

int SegmentGrid::col_of(double x) const { return axis_index(x, ox_); }
int SegmentGrid::row_of(double y) const { return axis_index(y, oy_); }

std::pair<double, double> SegmentGrid::center(int segment) const {
  if (segment < 0 || segment >= num_segments()) {
    throw InvalidArgument("segment " + std::to_string(segment) + " outside [0," + std::to_string(num_segments()) + ")");
  }
  const int row = segment / g_, col = segment % g_;
  return {ox_ + extent_ * (col + 0.5) / g_, oy_ + extent_ * (row + 0.5) / g_};
}

SegmentGrid partition(const PointCloud& cloud, int cells_per_side) {
  return SegmentGrid(cloud.extent, cells_per_side, cloud.origin_x, cloud.origin_y);
}

int nearest_segment(double x, double y, const SegmentGrid& grid) { return grid.segment_of(x, y); }

}  // namespace egoloc::world
