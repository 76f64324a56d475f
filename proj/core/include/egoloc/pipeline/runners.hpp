#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "egoloc/baselines/velocity.hpp"
#include "egoloc/encoders/encoders.hpp"
#include "egoloc/encoders/params.hpp"
#include "egoloc/eval/metrics.hpp"
#include "egoloc/pipeline/dataset.hpp"
#include "egoloc/stage2/stage2.hpp"

namespace egoloc::pipeline {

using Log = std::function<void(const std::string&)>;

inline constexpr const char* kStage1Kind = "stage1";
inline constexpr const char* kStage2Kind = "stage2";
inline constexpr const char* kVelocityKind = "velocity";

struct TrainOutput {
  enc::Checkpoint checkpoint;
  std::string trace_csv;
  std::vector<double> loss_trace;
};

/// Throws CompatibilityError unless the dataset was generated from the same
/// dataset-defining sections as `cfg`.
void check_compatible(const Dataset& data, const RunConfig& cfg);

struct Encoders {
  enc::ImuEncoder imu;
  enc::PointEncoder pts;
};

/// Freshly initialised encoders for a run seed.
Encoders init_encoders(const RunConfig& cfg, std::uint64_t seed);
/// Encoders from a stage-1 checkpoint; CompatibilityError when the kind,
/// shapes or feature width disagree with `cfg`.
Encoders load_encoders(const enc::Checkpoint& ckpt, const RunConfig& cfg);
std::uint64_t encoder_checksum(const Encoders& e);

TrainOutput train_stage1_run(const Dataset& data, const RunConfig& cfg, std::uint64_t seed, const Log& log = {});

/// Frozen per-second IMU features (indexed by sequence id) and per-scene
/// patch features.
struct FeatureSet {
  std::vector<num::Tensor> imu;
  std::vector<num::Tensor> patch;
};
FeatureSet compute_features(const Dataset& data, const Encoders& enc);

stage2::Stage2Data stage2_data(const Dataset& data, const FeatureSet& feats, const std::string& split);

/// Trains a reasoner with the stage-2 section of `cfg` on frozen stage-1
/// features. When `feats` is null they are computed from the checkpoint.
TrainOutput train_stage2_run(const Dataset& data, const RunConfig& cfg, const enc::Checkpoint& stage1,
                             std::uint64_t seed, const FeatureSet* feats = nullptr, const Log& log = {});
/// The IMU-only action ablation: a reasoner without location attention whose
/// action head alone is trained.
TrainOutput train_imu_only_action_run(const Dataset& data, const RunConfig& cfg, const enc::Checkpoint& stage1,
                                      std::uint64_t seed, const FeatureSet* feats = nullptr);
/// Rebuilds a reasoner from a stage-2 checkpoint; CompatibilityError when it
/// was trained on other data or other stage-1 encoders.
stage2::Reasoner load_reasoner(const enc::Checkpoint& ckpt, const Dataset& data, const enc::Checkpoint& stage1);

TrainOutput train_velocity_run(const Dataset& data, const RunConfig& cfg, std::uint64_t seed, const Log& log = {});
base::VelocityNet load_velocity(const enc::Checkpoint& ckpt, const Dataset& data);

/// Ground-truth per-second positions of a sequence.
std::vector<eval::Point> gt_positions(const SequenceEntry& s);

struct Stage2Eval {
  eval::MethodResult stage2;
  eval::MethodResult retrieval;
  std::vector<stage2::Prediction> predictions;  // one per sequence of the split
  std::vector<int> sequence_ids;
};

/// Stage-2 inference and stage-1 retrieval over one split.
Stage2Eval evaluate_stage2(const Dataset& data, const FeatureSet& feats, const stage2::Reasoner& model,
                           const std::string& split, const eval::EvalConfig& cfg);
eval::MethodResult evaluate_dead_reckoning(const Dataset& data, const base::VelocityNet& net,
                                           const std::string& split, const eval::EvalConfig& cfg);

/// Mean chance success at tau of a uniform random segment predictor over the
/// ground truth of a split.
double split_chance(const Dataset& data, const std::string& split, double tau);

/// Writes one heatmap file per evaluated second under
/// dir/<split>/seq_XXXX/<stage>_tNNN.<csv|pgm>, plus predictions.csv.
void export_heatmaps(const Dataset& data, const Stage2Eval& ev, const std::string& split,
                     const std::filesystem::path& dir, const std::string& format, bool stage1_too);

/// Evaluates stage 2, stage-1 retrieval and dead reckoning on the seen and
/// unseen splits. Heatmaps are exported when `heatmap_dir` is non-empty.
eval::EvalReport run_eval(const Dataset& data, const RunConfig& cfg, const enc::Checkpoint& stage1,
                          const enc::Checkpoint& stage2_ckpt, const enc::Checkpoint& velocity,
                          const std::filesystem::path& heatmap_dir = {}, const Log& log = {});

}  // namespace egoloc::pipeline
