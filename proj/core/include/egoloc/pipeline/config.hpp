#pragma once

#include <cstdint>
#include <string>

#include "egoloc/baselines/velocity.hpp"
#include "egoloc/encoders/encoders.hpp"
#include "egoloc/eval/metrics.hpp"
#include "egoloc/motion/imu.hpp"
#include "egoloc/motion/script.hpp"
#include "egoloc/motion/trajectory.hpp"
#include "egoloc/stage1/stage1.hpp"
#include "egoloc/stage2/stage2.hpp"
#include "egoloc/world/scene.hpp"

namespace egoloc::pipeline {

/// Split sizes. Seen-test sequences are new trajectories in the first
/// `seen_test_scenes` training scenes; unseen-test scenes and their
/// participants never appear in training.
struct DatasetConfig {
  int train_scenes = 8;
  int seen_test_scenes = 2;
  int unseen_scenes = 2;
  int train_sequences_per_scene = 20;
  int test_sequences_per_scene = 4;
  double sequence_seconds = 60.0;
  int train_participants = 4;
  int unseen_participants = 2;
};

struct MotionConfig {
  int rate_hz = 50;
  int num_actions = 8;
  motion::ScriptParams script;
  motion::TrajectoryParams trajectory;
  motion::ImuNoise noise;
  bool signatures = true;
};

struct RunConfig {
  std::string profile = "desk";
  std::uint64_t seed = 1;
  DatasetConfig dataset;
  world::SceneConfig scene;
  int grid = 20;
  double patch_side = 1.0;
  MotionConfig motion;
  enc::EncoderConfig encoders;  // rate_hz mirrors motion.rate_hz
  double image_sigma = 0.1;
  std::uint64_t semantic_seed = 7;
  stage1::Stage1Config stage1;
  stage2::Stage2Config stage2;
  base::VelocityConfig velocity;  // rate_hz mirrors motion.rate_hz
  eval::EvalConfig eval;
};

/// "desk" (defaults) or "full" (800 Hz, 8192-point patches, 35 classes,
/// G = 20). Throws ConfigError for other names.
RunConfig profile_config(const std::string& name);

/// Validates every section and the cross-section constraints.
void validate(const RunConfig& cfg);

/// Canonical JSON (sorted keys, 2-space indent) of the resolved config.
std::string config_to_json(const RunConfig& cfg);
/// Starts from the profile named in the document (default "desk") and
/// overrides the given fields. Unknown keys, wrong types and invalid values
/// throw ConfigError.
RunConfig config_from_json(const std::string& text);

/// 16-hex-digit hash of the canonical JSON.
std::string config_hash(const RunConfig& cfg);
/// Hash of the sections that determine the generated dataset.
std::string data_hash(const RunConfig& cfg);

}  // namespace egoloc::pipeline
