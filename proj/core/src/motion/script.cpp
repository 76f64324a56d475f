#include "egoloc/motion/script.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <sstream>

#include "egoloc/error.hpp"
#include "egoloc/rng.hpp"

namespace egoloc::motion {

double walk_duration(double distance, double speed, double accel) {
  if (distance <= 0.0) return 0.0;
  if (distance >= speed * speed / accel) return distance / speed + speed / accel;
  return 2.0 * std::sqrt(distance / accel);
}

ActionScript plan_script(const world::Scene& scene, const ActionSet& actions, double total_s, std::uint64_t seed,
                         const ScriptParams& params) {
  if (!(total_s >= 10.0)) throw InvalidArgument("script length must be at least 10 s");
  const int walk = walk_action(actions);
  // stationary actions usable at each anchor
  std::vector<std::vector<int>> usable(scene.anchors.size());
  std::vector<int> eligible;
  for (std::size_t i = 0; i < scene.anchors.size(); ++i) {
    for (const auto& c : actions) {
      if (c.stationary && c.anchor_affinity == scene.anchors[i].kind) usable[i].push_back(c.id);
    }
    if (!usable[i].empty()) eligible.push_back(static_cast<int>(i));
  }
  if (eligible.empty()) throw InvalidArgument("no anchor in the scene matches any stationary action");

  Rng rng(derive_seed(seed, {3}));
  auto pick = [&](const std::vector<int>& v) {
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
  };
  ActionScript script;
  double t = 0.0;
  int at = pick(eligible);
  while (t < total_s) {
    Episode st;
    st.action = pick(usable[static_cast<std::size_t>(at)]);
    st.start = t;
    st.duration = std::min(uniform(rng, params.min_stationary, params.max_stationary), total_s - t);
    st.anchor = at;
    script.push_back(st);
    t += st.duration;
    if (t >= total_s || eligible.size() < 2) continue;

    std::vector<int> others;
    for (int e : eligible) {
      if (e != at) others.push_back(e);
    }
    const int next = pick(others);
    const auto& a = scene.anchors[static_cast<std::size_t>(at)];
    const auto& b = scene.anchors[static_cast<std::size_t>(next)];
    Episode w;
    w.action = walk;
    w.start = t;
    w.duration = std::min(walk_duration(std::hypot(b.x - a.x, b.y - a.y), params.walk_speed, params.walk_accel),
                          total_s - t);
    w.anchor = next;
    script.push_back(w);
    t += w.duration;
    at = next;
  }
  return script;
}

double script_end(const ActionScript& script) {
  return script.empty() ? 0.0 : script.back().start + script.back().duration;
}

std::size_t episode_at(const ActionScript& script, double t) {
  if (script.empty()) throw InvalidArgument("empty action script");
  auto it = std::upper_bound(script.begin(), script.end(), t,
                             [](double v, const Episode& e) { return v < e.start; });
  if (it == script.begin()) return 0;
  return static_cast<std::size_t>(it - script.begin()) - 1;
}

std::string script_to_jsonl(const ActionScript& script, const ActionSet& actions) {
  std::string out;
  for (const auto& e : script) {
    nlohmann::ordered_json j;
    j["action"] = actions.at(static_cast<std::size_t>(e.action)).name;
    j["start"] = e.start;
    j["duration"] = e.duration;
    if (e.anchor >= 0) {
      j["anchor"] = e.anchor;
    } else {
      j["anchor"] = nullptr;
    }
    out += j.dump() + "\n";
  }
  return out;
}

ActionScript script_from_jsonl(const std::string& text, const ActionSet& actions) {
  ActionScript s;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      Episode e;
      const auto name = j.at("action").get<std::string>();
      e.action = -1;
      for (const auto& c : actions) {
        if (c.name == name) e.action = c.id;
      }
      if (e.action < 0) throw DataError("unknown action '" + name + "'");
      e.start = j.at("start").get<double>();
      e.duration = j.at("duration").get<double>();
      e.anchor = j.at("anchor").is_null() ? -1 : j.at("anchor").get<int>();
      s.push_back(e);
    } catch (const nlohmann::json::exception& ex) {
      throw DataError("script line " + std::to_string(lineno) + ": " + ex.what());
    }
  }
  return s;
}

}  // namespace egoloc::motion
