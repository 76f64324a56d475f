#pragma once

#include <cstdint>
#include <utility>

#include "egoloc/world/scene.hpp"

namespace egoloc::world {

/// Uniform G x G partition of the floor square. Cell s = row * G + col with
/// row along y and col along x.
class SegmentGrid {
 public:
  SegmentGrid(double extent, int cells_per_side, double origin_x = 0.0, double origin_y = 0.0);

  double extent() const noexcept { return extent_; }
  int cells_per_side() const noexcept { return g_; }
  int num_segments() const noexcept { return g_ * g_; }
  double cell_side() const noexcept { return extent_ / g_; }
  double origin_x() const noexcept { return ox_; }
  double origin_y() const noexcept { return oy_; }

  /// Coordinate of the k-th cell boundary along one axis (k in [0, G]).
  double boundary_x(int k) const { return ox_ + extent_ * k / g_; }
  double boundary_y(int k) const { return oy_ + extent_ * k / g_; }

  /// Column (or row) containing a coordinate, floor convention, clamped to
  /// [0, G-1]. Points on an interior boundary go to the higher cell.
  int col_of(double x) const;
  int row_of(double y) const;
  int segment_of(double x, double y) const { return row_of(y) * g_ + col_of(x); }

  std::pair<double, double> center(int segment) const;

 private:
  int axis_index(double v, double origin) const;

  double extent_;
  int g_;
  double ox_, oy_;
};

SegmentGrid partition(const PointCloud& cloud, int cells_per_side);

/// Index of the cell containing z, clamping z into the scene first.
int nearest_segment(double x, double y, const SegmentGrid& grid);

}  // namespace egoloc::world
