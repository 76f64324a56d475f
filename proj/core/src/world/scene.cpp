#include "egoloc/world/scene.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

#include "egoloc/error.hpp"
#include "egoloc/io.hpp"
#include "egoloc/rng.hpp"

namespace egoloc::world {

using nlohmann::json;

const std::vector<AnchorType>& anchor_types() {
  static const std::vector<AnchorType> types = {
      {kSink, "sink", 0.75, 1.05, 0.15, 1.0},
      {kStove, "stove", 1.20, 1.40, 0.15, 1.0},
      {kCabinet, "cabinet", 1.50, 2.20, 0.20, 1.0},
      {kCounter, "counter", 1.00, 1.20, 0.20, 1.0},
      {kTable, "table", 0.65, 0.75, 0.18, 1.0},
      {kOpenFloor, "open-floor", 0.00, 0.05, 0.25, 0.5},
  };
  return types;
}

const AnchorType& anchor_type(int id) {
  if (id < 0 || id >= kNumAnchorKinds) throw InvalidArgument("unknown anchor kind " + std::to_string(id));
  return anchor_types()[static_cast<std::size_t>(id)];
}

int anchor_kind_from_name(const std::string& name) {
  for (const auto& t : anchor_types()) {
    if (t.name == name) return t.id;
  }
  throw InvalidArgument("unknown anchor type '" + name + "'");
}

void validate(const SceneConfig& cfg) {
  if (!(cfg.extent >= kMinExtent && cfg.extent <= kMaxExtent)) {
    throw ConfigError("scene extent " + io::fmt_double(cfg.extent) + " m outside [2.5, 6.5]");
  }
  int total = 0;
  for (int c : cfg.anchor_counts) {
    if (c < 0) throw ConfigError("anchor counts must be non-negative");
    total += c;
  }
  if (total < 3) throw ConfigError("a scene needs at least 3 anchors, got " + std::to_string(total));
  if (cfg.points_per_anchor < 1 || cfg.floor_density < 0.0) throw ConfigError("point budgets must be positive");
  if (cfg.min_anchor_distance < 0.0 || cfg.wall_margin < 0.0 || 2 * cfg.wall_margin >= cfg.extent) {
    throw ConfigError("invalid anchor spacing or wall margin");
  }
  if (cfg.max_attempts < 1) throw ConfigError("max_attempts must be positive");
}

Scene place_anchors(const SceneConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  Scene scene;
  scene.extent = cfg.extent;
  scene.seed = seed;
  Rng rng(derive_seed(seed, {1}));
  const double lo = cfg.wall_margin, hi = cfg.extent - cfg.wall_margin;
  const double d2 = cfg.min_anchor_distance * cfg.min_anchor_distance;
  for (int kind = 0; kind < kNumAnchorKinds; ++kind) {
    for (int i = 0; i < cfg.anchor_counts[kind]; ++i) {
      bool placed = false;
      for (int attempt = 0; attempt < cfg.max_attempts && !placed; ++attempt) {
        Anchor a{kind, uniform(rng, lo, hi), uniform(rng, lo, hi)};
        placed = std::all_of(scene.anchors.begin(), scene.anchors.end(), [&](const Anchor& b) {
          return (a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) >= d2;
        });
        if (placed) scene.anchors.push_back(a);
      }
      if (!placed) {
        throw ConfigError("could not place anchor '" + anchor_type(kind).name + "' after " +
                          std::to_string(cfg.max_attempts) + " attempts (extent " + io::fmt_double(cfg.extent) +
                          " m, min distance " + io::fmt_double(cfg.min_anchor_distance) + " m)");
      }
    }
  }
  return scene;
}

PointCloud build_cloud(const Scene& scene, const SceneConfig& cfg) {
  PointCloud cloud;
  cloud.extent = scene.extent;
  const double L = scene.extent;
  Rng rng(derive_seed(scene.seed, {2}));
  const auto n_floor = static_cast<std::int64_t>(std::llround(cfg.floor_density * L * L));
  for (std::int64_t i = 0; i < n_floor; ++i) {
    cloud.points.push_back({static_cast<float>(uniform(rng, 0.0, L)), static_cast<float>(uniform(rng, 0.0, L)),
                            static_cast<float>(uniform(rng, 0.0, kFloorThickness))});
  }
  for (const auto& a : scene.anchors) {
    const auto& t = anchor_type(a.kind);
    const auto n = static_cast<std::int64_t>(std::llround(cfg.points_per_anchor * t.density));
    for (std::int64_t i = 0; i < n; ++i) {
      double x, y;
      do {
        x = a.x + gaussian(rng, 0.0, t.spread);
        y = a.y + gaussian(rng, 0.0, t.spread);
      } while (!(x >= 0.0 && x <= L && y >= 0.0 && y <= L));
      const double z = uniform(rng, t.z_lo, t.z_hi);
      std::array<float, 3> p{static_cast<float>(x), static_cast<float>(y), static_cast<float>(z)};
      // float rounding may push a point just past the border
      p[0] = std::clamp(p[0], 0.0f, static_cast<float>(L));
      p[1] = std::clamp(p[1], 0.0f, static_cast<float>(L));
      cloud.points.push_back(p);
    }
  }
  return cloud;
}

GeneratedScene generate_scene(const SceneConfig& cfg, std::uint64_t seed) {
  GeneratedScene g;
  g.scene = place_anchors(cfg, seed);
  g.cloud = build_cloud(g.scene, cfg);
  return g;
}

std::string scene_to_json(const Scene& scene) {
  json j;
  j["extent"] = scene.extent;
  j["seed"] = scene.seed;
  j["anchors"] = json::array();
  for (const auto& a : scene.anchors) {
    j["anchors"].push_back({{"type", anchor_type(a.kind).name}, {"x", a.x}, {"y", a.y}});
  }
  return j.dump(2) + "\n";
}

Scene scene_from_json(const std::string& text) {
  try {
    json j = json::parse(text);
    Scene s;
    s.extent = j.at("extent").get<double>();
    s.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& a : j.at("anchors")) {
      s.anchors.push_back({anchor_kind_from_name(a.at("type").get<std::string>()), a.at("x").get<double>(),
                           a.at("y").get<double>()});
    }
    return s;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed scene document: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw DataError(std::string("malformed scene document: ") + e.what());
  }
}

void save_scene(const Scene& scene, const std::filesystem::path& path) { io::write_text(path, scene_to_json(scene)); }

Scene load_scene(const std::filesystem::path& path) { return scene_from_json(io::read_text(path)); }

std::vector<char> cloud_to_bytes(const PointCloud& cloud) {
  std::vector<char> buf;
  buf.reserve(8 + cloud.points.size() * 12);
  io::put<std::uint64_t>(buf, cloud.points.size());
  for (const auto& p : cloud.points) {
    for (float v : p) io::put<float>(buf, v);
  }
  return buf;
}

PointCloud cloud_from_bytes(const std::vector<char>& bytes, double extent) {
  io::Reader r(bytes, "point cloud");
  const auto n = r.get<std::uint64_t>();
  if (r.remaining() != n * 12) {
    throw DataError("point cloud: header declares " + std::to_string(n) + " points but payload has " +
                    std::to_string(r.remaining()) + " bytes");
  }
  PointCloud c;
  c.extent = extent;
  c.points.resize(n);
  for (auto& p : c.points) {
    for (float& v : p) v = r.get<float>();
  }
  return c;
}

void save_cloud(const PointCloud& cloud, const std::filesystem::path& path) {
  io::write_file(path, cloud_to_bytes(cloud));
}

PointCloud load_cloud(const std::filesystem::path& path, double extent) {
  return cloud_from_bytes(io::read_file(path), extent);
}

}  // namespace egoloc::world
