#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace egoloc::motion {

/// One sinusoid of an action's head-motion signature. `axis` selects the body
/// axis (0 = forward, 1 = left, 2 = up); the same phase drives the linear
/// acceleration on that axis and the angular rate about it.
struct SignatureComponent {
  int axis = 0;
  double freq_hz = 1.0;
  double accel_amp = 0.0;  // m/s^2
  double gyro_amp = 0.0;   // rad/s
  double phase = 0.0;      // rad
};

struct ActionClass {
  int id = 0;
  std::string name;
  int anchor_affinity = -1;  // AnchorKind, or -1 for none
  bool stationary = true;
  std::vector<SignatureComponent> signature;
  double burst_prob = 0.0;  // chance that a given second of an episode is amplified
};

/// Classes are indexed by position; ids equal positions.
using ActionSet = std::vector<ActionClass>;

inline constexpr double kBurstGain = 1.6;
inline constexpr double kMinSignatureFreq = 0.3;
inline constexpr double kMaxSignatureFreq = 8.0;

/// Eight hand-designed classes: walk, wash, fry, stir, fetch, chop, eat, idle.
ActionSet default_actions();
/// The default classes extended (or truncated) to `n` classes; extra classes
/// get seeded procedural signatures and cycle through the anchor types.
ActionSet make_actions(int n);
/// Sub-set by name, re-indexed in the given order.
ActionSet select_actions(const ActionSet& all, const std::vector<std::string>& names);

int walk_action(const ActionSet& actions);  // throws InvalidArgument if absent

/// Per-participant modulation of signatures.
struct SignatureStyle {
  double freq_scale = 1.0;
  double amp_scale = 1.0;
  double phase_offset = 0.0;
};
SignatureStyle sample_style(std::uint64_t style_seed);

}  // namespace egoloc::motion
