#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace egoloc::world {

/// Anchor type ids; the order is part of the file formats.
enum AnchorKind : int {
  kSink = 0,
  kStove = 1,
  kCabinet = 2,
  kCounter = 3,
  kTable = 4,
  kOpenFloor = 5,
};
inline constexpr int kNumAnchorKinds = 6;

struct AnchorType {
  int id = 0;
  std::string name;
  double z_lo = 0.0;  // height range of the cluster (m)
  double z_hi = 0.0;
  double spread = 0.1;   // std of the Gaussian (x,y) blob (m)
  double density = 1.0;  // multiplier on the per-anchor point budget
};

const std::vector<AnchorType>& anchor_types();
const AnchorType& anchor_type(int id);
/// Throws InvalidArgument for unknown names.
int anchor_kind_from_name(const std::string& name);

struct Anchor {
  int kind = 0;
  double x = 0.0;
  double y = 0.0;
};

struct Scene {
  double extent = 4.0;
  std::vector<Anchor> anchors;
  std::uint64_t seed = 0;
};

/// Points are stored in single precision, as in the on-disk format. The
/// floor square is [origin, origin + extent]^2.
struct PointCloud {
  double extent = 4.0;
  double origin_x = 0.0;
  double origin_y = 0.0;
  std::vector<std::array<float, 3>> points;
};

struct SceneConfig {
  double extent = 4.0;
  /// Number of anchors per kind, indexed by AnchorKind.
  std::array<int, kNumAnchorKinds> anchor_counts{1, 1, 2, 2, 1, 1};
  int points_per_anchor = 1500;
  double floor_density = 400.0;  // floor points per m^2
  double min_anchor_distance = 0.6;
  double wall_margin = 0.3;
  int max_attempts = 1000;
};

inline constexpr double kMinExtent = 2.5;
inline constexpr double kMaxExtent = 6.5;
inline constexpr double kMaxHeight = 2.5;
inline constexpr double kFloorThickness = 0.01;

/// Throws ConfigError for invalid configs or when an anchor cannot be placed.
void validate(const SceneConfig& cfg);
Scene place_anchors(const SceneConfig& cfg, std::uint64_t seed);
PointCloud build_cloud(const Scene& scene, const SceneConfig& cfg);

struct GeneratedScene {
  Scene scene;
  PointCloud cloud;
};
GeneratedScene generate_scene(const SceneConfig& cfg, std::uint64_t seed);

std::string scene_to_json(const Scene& scene);
Scene scene_from_json(const std::string& text);
void save_scene(const Scene& scene, const std::filesystem::path& path);
Scene load_scene(const std::filesystem::path& path);

std::vector<char> cloud_to_bytes(const PointCloud& cloud);
PointCloud cloud_from_bytes(const std::vector<char>& bytes, double extent);
void save_cloud(const PointCloud& cloud, const std::filesystem::path& path);
PointCloud load_cloud(const std::filesystem::path& path, double extent);

}  // namespace egoloc::world
