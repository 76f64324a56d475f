#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "egoloc/motion/actions.hpp"
#include "egoloc/motion/imu.hpp"
#include "egoloc/motion/labels.hpp"
#include "egoloc/pipeline/config.hpp"
#include "egoloc/world/grid.hpp"
#include "egoloc/world/scene.hpp"

namespace egoloc::pipeline {

inline constexpr int kManifestVersion = 1;

/// Split names as written to the manifest.
inline constexpr const char* kTrain = "train";
inline constexpr const char* kTestSeen = "test-seen";
inline constexpr const char* kTestUnseen = "test-unseen";

struct SceneEntry {
  int id = 0;
  std::uint64_t seed = 0;
  bool unseen = false;
  world::Scene scene;
  world::PointCloud cloud;
};

struct SequenceEntry {
  int id = 0;
  int scene = 0;
  std::string split;
  int participant = 0;
  std::uint64_t seed = 0;
  motion::ImuStream imu;
  std::vector<motion::SecondLabel> labels;
};

struct Dataset {
  RunConfig config;
  std::string data_hash;
  std::vector<SceneEntry> scenes;
  std::vector<SequenceEntry> sequences;

  world::SegmentGrid grid(int scene) const;
  std::vector<const SequenceEntry*> split(const std::string& name) const;
};

/// The action classes of a run.
motion::ActionSet run_actions(const RunConfig& cfg);

/// Builds every scene and sequence in memory.
Dataset build_dataset(const RunConfig& cfg);

/// Writes manifest.json, scenes/ and sequences/ under `dir`. A non-empty
/// existing directory is rejected with InvalidArgument unless `force`, in
/// which case it is cleared first.
void write_dataset(const Dataset& data, const std::filesystem::path& dir, bool force);

/// Reads and verifies a dataset directory. A missing or malformed manifest,
/// a missing file or a file whose hash disagrees with the manifest throws
/// DataError.
Dataset load_dataset(const std::filesystem::path& dir);

/// FNV-1a over the sorted relative paths and contents of every file.
std::string directory_checksum(const std::filesystem::path& dir);

}  // namespace egoloc::pipeline
