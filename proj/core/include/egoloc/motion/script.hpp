#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "egoloc/motion/actions.hpp"
#include "egoloc/world/scene.hpp"

namespace egoloc::motion {

/// For walks, `anchor` is the destination; for stationary episodes it is the
/// anchor being used.
struct Episode {
  int action = 0;
  double start = 0.0;
  double duration = 0.0;
  int anchor = -1;
};

using ActionScript = std::vector<Episode>;

struct ScriptParams {
  double min_stationary = 2.0;
  double max_stationary = 8.0;
  double walk_speed = 0.8;   // m/s cruise speed
  double walk_accel = 0.5;   // m/s^2
};

/// Duration of a rest-to-rest straight walk with a trapezoidal (or, for short
/// distances, triangular) speed profile.
double walk_duration(double distance, double speed, double accel);

ActionScript plan_script(const world::Scene& scene, const ActionSet& actions, double total_s, std::uint64_t seed,
                         const ScriptParams& params = {});

double script_end(const ActionScript& script);
/// Index of the episode active at time t (the last episode covers its end).
std::size_t episode_at(const ActionScript& script, double t);

std::string script_to_jsonl(const ActionScript& script, const ActionSet& actions);
ActionScript script_from_jsonl(const std::string& text, const ActionSet& actions);

}  // namespace egoloc::motion
