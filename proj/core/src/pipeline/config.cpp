#include "egoloc/pipeline/config.hpp"

#include <json.hpp>
#include <set>

#include "egoloc/error.hpp"
#include "egoloc/io.hpp"

namespace egoloc::pipeline {

using nlohmann::json;

namespace {

// One field list per section drives both writing and strict reading.
class Writer {
 public:
  explicit Writer(json& j) : j_(j) {}
  template <typename T>
  void operator()(const char* key, T& v) {
    j_[key] = v;
  }
  template <typename F>
  void section(const char* key, F&& f) {
    json sub = json::object();
    Writer w(sub);
    f(w);
    j_[key] = std::move(sub);
  }

 private:
  json& j_;
};

class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("config: '" + path_ + "' must be a JSON object");
  }
  template <typename T>
  void operator()(const char* key, T& v) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const json& x = j_.at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!x.is_boolean()) throw ConfigError("");
      } else if constexpr (std::is_integral_v<T>) {
        if (!x.is_number_integer()) throw ConfigError("");
        if constexpr (std::is_unsigned_v<T>) {
          if (x.is_number_integer() && !x.is_number_unsigned()) throw ConfigError("");
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!x.is_number()) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!x.is_string()) throw ConfigError("");
      }
      v = x.get<T>();
    } catch (const std::exception&) {
      throw ConfigError("config: '" + name(key) + "' has the wrong type");
    }
  }
  template <typename F>
  void section(const char* key, F&& f) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    Reader r(j_.at(key), name(key));
    f(r);
    r.finish();
  }
  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError("config: unknown key '" + name(k) + "'");
    }
  }

 private:
  std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename V>
void optim_fields(V& v, num::AdamWConfig& c) {
  v("lr", c.lr);
  v("beta1", c.beta1);
  v("beta2", c.beta2);
  v("eps", c.eps);
  v("weight_decay", c.weight_decay);
}

template <typename V>
void fields(V& v, RunConfig& c) {
  v("profile", c.profile);
  v("seed", c.seed);
  v.section("dataset", [&](auto& s) {
    auto& d = c.dataset;
    s("train_scenes", d.train_scenes);
    s("seen_test_scenes", d.seen_test_scenes);
    s("unseen_scenes", d.unseen_scenes);
    s("train_sequences_per_scene", d.train_sequences_per_scene);
    s("test_sequences_per_scene", d.test_sequences_per_scene);
    s("sequence_seconds", d.sequence_seconds);
    s("train_participants", d.train_participants);
    s("unseen_participants", d.unseen_participants);
  });
  v.section("world", [&](auto& s) {
    auto& w = c.scene;
    s("extent", w.extent);
    s("anchor_counts", w.anchor_counts);
    s("points_per_anchor", w.points_per_anchor);
    s("floor_density", w.floor_density);
    s("min_anchor_distance", w.min_anchor_distance);
    s("wall_margin", w.wall_margin);
    s("max_attempts", w.max_attempts);
    s("grid", c.grid);
    s("patch_side", c.patch_side);
  });
  v.section("motion", [&](auto& s) {
    auto& m = c.motion;
    s("rate_hz", m.rate_hz);
    s("num_actions", m.num_actions);
    s("signatures", m.signatures);
    s("min_stationary", m.script.min_stationary);
    s("max_stationary", m.script.max_stationary);
    s("walk_speed", m.script.walk_speed);
    s("walk_accel", m.script.walk_accel);
    s("jitter", m.trajectory.jitter);
    s("turn_time", m.trajectory.turn_time);
    s.section("noise", [&](auto& n) {
      n("accel_sigma", m.noise.accel_sigma);
      n("gyro_sigma", m.noise.gyro_sigma);
      n("accel_bias_init", m.noise.accel_bias_init);
      n("gyro_bias_init", m.noise.gyro_bias_init);
      n("accel_bias_walk", m.noise.accel_bias_walk);
      n("gyro_bias_walk", m.noise.gyro_bias_walk);
    });
  });
  v.section("encoders", [&](auto& s) {
    s("dim", c.encoders.dim);
    s("patch_points", c.encoders.patch_points);
    s("imu_residual", c.encoders.imu_residual);
    s("image_sigma", c.image_sigma);
    s("semantic_seed", c.semantic_seed);
  });
  v.section("stage1", [&](auto& s) {
    auto& p = c.stage1;
    s("alpha", p.alpha);
    s("beta", p.beta);
    s("theta", p.theta);
    s("delta", p.delta);
    s("gamma", p.gamma);
    s("temperature", p.temperature);
    s("batch", p.batch);
    s("steps", p.steps);
    s.section("optim", [&](auto& o) { optim_fields(o, p.optim); });
  });
  v.section("stage2", [&](auto& s) {
    auto& p = c.stage2;
    s("T", p.T);
    s("channels", p.channels);
    s("heat_tau", p.heat_tau);
    s("temporal", p.temporal);
    s("spatial", p.spatial);
    s("temporal_residual", p.temporal_residual);
    s("spatial_residual", p.spatial_residual);
    s("location_attention", p.location_attention);
    s("action_weight", p.action_weight);
    s("batch", p.batch);
    s("steps", p.steps);
    s.section("optim", [&](auto& o) { optim_fields(o, p.optim); });
  });
  v.section("velocity", [&](auto& s) {
    s("batch", c.velocity.batch);
    s("steps", c.velocity.steps);
    s.section("optim", [&](auto& o) { optim_fields(o, c.velocity.optim); });
  });
  v.section("eval", [&](auto& s) {
    s("thresholds_m", c.eval.thresholds_m);
    s("topk", c.eval.topk);
    s("heatmap_format", c.eval.heatmap_format);
  });
}

json to_json(const RunConfig& cfg) {
  json j = json::object();
  Writer w(j);
  fields(w, const_cast<RunConfig&>(cfg));
  return j;
}

void sync_rates(RunConfig& c) {
  c.encoders.rate_hz = c.motion.rate_hz;
  c.velocity.rate_hz = c.motion.rate_hz;
}

}  // namespace

RunConfig profile_config(const std::string& name) {
  RunConfig c;
  if (name == "desk") {
    // defaults
  } else if (name == "full") {
    c.motion.rate_hz = 800;
    c.encoders.patch_points = 8192;
    c.motion.num_actions = 35;
    c.grid = 20;
  } else {
    throw ConfigError("unknown profile '" + name + "' (expected desk or full)");
  }
  c.profile = name;
  sync_rates(c);
  return c;
}

void validate(const RunConfig& c) {
  const auto& d = c.dataset;
  if (d.train_scenes < 1) throw ConfigError("dataset.train_scenes must be positive");
  if (d.seen_test_scenes < 0 || d.seen_test_scenes > d.train_scenes) {
    throw ConfigError("dataset.seen_test_scenes must lie in [0, train_scenes]");
  }
  if (d.unseen_scenes < 0) throw ConfigError("dataset.unseen_scenes must be non-negative");
  if (d.train_sequences_per_scene < 1 || d.test_sequences_per_scene < 0) {
    throw ConfigError("dataset sequence counts must be positive");
  }
  if (!(d.sequence_seconds >= 2.0)) throw ConfigError("dataset.sequence_seconds must be at least 2");
  if (d.train_participants < 1 || d.unseen_participants < 1) throw ConfigError("participant counts must be positive");
  world::validate(c.scene);
  if (c.grid < 1) throw ConfigError("world.grid must be positive");
  if (!(c.patch_side > 0.0)) throw ConfigError("world.patch_side must be positive");
  if (c.motion.rate_hz < 8) throw ConfigError("motion.rate_hz must be at least 8");
  if (c.motion.num_actions < 2) throw ConfigError("motion.num_actions must be at least 2");
  if (c.encoders.rate_hz != c.motion.rate_hz || c.velocity.rate_hz != c.motion.rate_hz) {
    throw ConfigError("encoder and baseline rates must equal motion.rate_hz");
  }
  enc::validate(c.encoders);
  if (!(c.image_sigma >= 0.0)) throw ConfigError("encoders.image_sigma must be non-negative");
  stage1::validate(c.stage1);
  stage2::validate(c.stage2);
  if (c.stage2.T > d.sequence_seconds) throw ConfigError("stage2.T exceeds the sequence length");
  base::validate(c.velocity);
  eval::validate(c.eval);
  for (int k : c.eval.topk) {
    if (k > c.motion.num_actions) throw ConfigError("eval.topk exceeds the number of action classes");
  }
}

std::string config_to_json(const RunConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

RunConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  std::string profile = "desk";
  if (j.contains("profile")) {
    if (!j.at("profile").is_string()) throw ConfigError("config: 'profile' has the wrong type");
    profile = j.at("profile").get<std::string>();
  }
  RunConfig c = profile_config(profile);
  Reader r(j, "");
  fields(r, c);
  r.finish();
  sync_rates(c);
  validate(c);
  return c;
}

std::string config_hash(const RunConfig& cfg) { return io::hex64(io::fnv1a64(to_json(cfg).dump())); }

std::string data_hash(const RunConfig& cfg) {
  json all = to_json(cfg);
  json j = json::object();
  for (const char* k : {"seed", "dataset", "world", "motion"}) j[k] = all[k];
  return io::hex64(io::fnv1a64(j.dump()));
}

}  // namespace egoloc::pipeline
