#pragma once

#include <string>
#include <vector>

#include "egoloc/motion/script.hpp"
#include "egoloc/motion/trajectory.hpp"
#include "egoloc/world/grid.hpp"

namespace egoloc::motion {

/// Ground truth for one second of a sequence.
struct SecondLabel {
  int segment = 0;
  int action = 0;
  double x = 0.0;  // mean position within the second
  double y = 0.0;
  double heading = 0.0;  // heading at the start of the second
};

/// One label per full second: the segment of the mean position within the
/// second and the action active at the window midpoint.
std::vector<SecondLabel> ground_truth_labels(const Trajectory& traj, const ActionScript& script,
                                             const world::SegmentGrid& grid);

std::string labels_to_csv(const std::vector<SecondLabel>& labels);
std::vector<SecondLabel> labels_from_csv(const std::string& text);

}  // namespace egoloc::motion
