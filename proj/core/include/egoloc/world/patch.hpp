#pragma once

#include <cstdint>

#include "egoloc/numerics/tensor.hpp"
#include "egoloc/world/scene.hpp"

namespace egoloc::world {

struct SegmentPatch {
  int segment = -1;
  double side = 1.0;
  /// [N,3] points; x,y relative to the patch center, z absolute.
  num::Tensor points;
};

/// Extracts exactly n points whose (x,y) lie in the axis-aligned square of the
/// given side around (cx,cy), clipped to the scene. Larger selections are
/// subsampled without replacement; smaller ones are padded with floor samples
/// drawn uniformly in the clipped square.
SegmentPatch patch_at(const PointCloud& cloud, double cx, double cy, double side, int n, std::uint64_t seed,
                      int segment = -1);

}  // namespace egoloc::world
