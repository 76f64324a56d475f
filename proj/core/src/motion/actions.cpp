#include "egoloc/motion/actions.hpp"

#include <cmath>
#include <numbers>

#include "egoloc/error.hpp"
#include "egoloc/rng.hpp"
#include "egoloc/world/scene.hpp"

namespace egoloc::motion {

using namespace world;

ActionSet default_actions() {
  constexpr double pi = std::numbers::pi;
  ActionSet a = {
      {0, "walk", -1, false, {{2, 1.8, 1.2, 0.10, 0.0}, {1, 0.9, 0.4, 0.15, 0.5}, {0, 1.8, 0.3, 0.0, 1.0}}, 0.0},
      {1, "wash", kSink, true, {{0, 2.0, 0.6, 0.05, 0.0}, {2, 2.0, 0.1, 0.30, 0.3}, {1, 1.0, 0.2, 0.0, 1.1}}, 0.15},
      {2, "fry", kStove, true, {{1, 1.5, 0.5, 0.20, 0.0}, {2, 3.0, 0.2, 0.0, 0.7}}, 0.10},
      {3, "stir", kStove, true, {{0, 1.2, 0.4, 0.0, 0.0}, {1, 1.2, 0.4, 0.0, pi / 2}, {2, 1.2, 0.0, 0.20, 0.0}}, 0.10},
      {4, "fetch", kCabinet, true, {{2, 0.5, 0.8, 0.0, 0.0}, {1, 0.5, 0.0, 0.40, 0.2}}, 0.20},
      {5, "chop", kCounter, true, {{0, 2.2, 0.55, 0.05, 0.0}, {2, 2.2, 0.1, 0.25, 0.4}, {2, 4.0, 0.3, 0.0, 0.9}}, 0.15},
      {6, "eat", kTable, true, {{1, 0.8, 0.0, 0.30, 0.0}, {2, 0.8, 0.3, 0.0, 0.6}, {0, 0.4, 0.2, 0.0, 0.2}}, 0.05},
      {7, "idle", kOpenFloor, true, {{0, 0.3, 0.05, 0.0, 0.0}, {2, 0.3, 0.0, 0.05, 0.0}}, 0.0},
  };
  return a;
}

ActionSet make_actions(int n) {
  if (n < 2) throw ConfigError("need at least 2 action classes (walk plus one stationary class)");
  ActionSet a = default_actions();
  if (n <= static_cast<int>(a.size())) {
    a.resize(static_cast<std::size_t>(n));
    return a;
  }
  Rng rng(derive_seed(0x61637473ULL, {static_cast<std::uint64_t>(n)}));
  for (int id = static_cast<int>(a.size()); id < n; ++id) {
    ActionClass c;
    c.id = id;
    c.name = "action_" + std::to_string(id);
    c.anchor_affinity = (id - 1) % kNumAnchorKinds;
    c.stationary = true;
    const int comps = 2 + static_cast<int>(rng() % 2);
    for (int k = 0; k < comps; ++k) {
      SignatureComponent s;
      s.axis = static_cast<int>(rng() % 3);
      s.freq_hz = uniform(rng, 0.4, 4.0);
      s.accel_amp = uniform(rng, 0.05, 0.6);
      s.gyro_amp = uniform(rng, 0.0, 0.3);
      s.phase = uniform(rng, 0.0, 2 * std::numbers::pi);
      c.signature.push_back(s);
    }
    c.burst_prob = uniform(rng, 0.0, 0.2);
    a.push_back(c);
  }
  return a;
}

ActionSet select_actions(const ActionSet& all, const std::vector<std::string>& names) {
  ActionSet out;
  for (const auto& n : names) {
    bool found = false;
    for (const auto& c : all) {
      if (c.name == n) {
        out.push_back(c);
        out.back().id = static_cast<int>(out.size()) - 1;
        found = true;
        break;
      }
    }
    if (!found) throw InvalidArgument("unknown action '" + n + "'");
  }
  return out;
}

int walk_action(const ActionSet& actions) {
  for (const auto& c : actions) {
    if (!c.stationary) return c.id;
  }
  throw InvalidArgument("action set has no walking class");
}

SignatureStyle sample_style(std::uint64_t style_seed) {
  Rng rng(derive_seed(style_seed, {0x7374796cULL}));
  SignatureStyle s;
  s.freq_scale = uniform(rng, 0.9, 1.1);
  s.amp_scale = uniform(rng, 0.8, 1.2);
  s.phase_offset = uniform(rng, 0.0, 2 * std::numbers::pi);
  return s;
}

}  // namespace egoloc::motion
