#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "egoloc/encoders/encoders.hpp"
#include "egoloc/numerics/adamw.hpp"
#include "egoloc/numerics/graph.hpp"
#include "egoloc/world/grid.hpp"

namespace egoloc::stage2 {

struct Stage2Config {
  int T = 10;            // clip length in seconds
  int channels = 16;     // C, width of the reasoning volume
  double heat_tau = 0.07;
  bool temporal = true;  // temporal 3-D conv stack on/off
  bool spatial = true;   // dilated spatial 3-D conv stack on/off
  bool temporal_residual = true;
  bool spatial_residual = true;
  bool location_attention = true;  // false: action head sees IMU features only
  double action_weight = 1.0;      // 0 disables the action loss
  int batch = 2;                   // clips per step
  int steps = 1000;
  num::AdamWConfig optim;
};

void validate(const Stage2Config& cfg);

/// H[t,s] = softmax_s(<F^M_t, F^P_s> / tau) for imu_feats [T,D], patch_feats [S,D].
num::Tensor correspondence_heatmaps(const num::Tensor& imu_feats, const num::Tensor& patch_feats, double tau);

/// Temporal + spatial reasoning over a G x G grid and the action head.
///
/// Temporal: the IMU features are projected to C channels and broadcast to
/// every cell (P_M); [H, P_M] -> conv3d -> relu -> conv3d -> relu, plus P_M
/// when the residual is on. With the module off the volume is [H, P_M].
/// Spatial: the patch features are projected to C channels per cell (P_P);
/// [F^R, P_P] -> three conv3d + relu with spatial dilations 1, 2, 4, plus P_P
/// when the residual is on, then a per-cell affine head to one logit. With the
/// module off the head reads [F^R, P_P] directly.
/// Action head: attended_t = sum_s y_ts F^P_s, affine D->D, added to F^M_t,
/// then affine D->D, relu, affine D->|C|.
class Reasoner {
 public:
  Reasoner(const Stage2Config& cfg, int grid, int dim, int num_classes, std::uint64_t seed);

  struct Nodes {
    num::NodeId refined = -1;        // [1,T,G,G,C']
    num::NodeId traj_logits = -1;    // [T,S]
    num::NodeId traj_probs = -1;     // [T,S]
    num::NodeId action_logits = -1;  // [T,|C|], -1 when not requested
  };

  /// heat [T,S], imu_feats [T,D], patch_feats [S,D]. Throws ShapeError on a
  /// T, S or D mismatch.
  Nodes forward(num::Graph& g, const num::Tensor& heat, const num::Tensor& imu_feats, const num::Tensor& patch_feats,
                enc::Binding b, bool with_action = true);
  Nodes forward(num::Graph& g, const num::Tensor& heat, const num::Tensor& imu_feats, const num::Tensor& patch_feats,
                bool with_action = true) const;

  num::NodeId temporal(num::Graph& g, const num::Tensor& heat, const num::Tensor& imu_feats, enc::Binding b);
  num::NodeId spatial(num::Graph& g, num::NodeId refined, const num::Tensor& patch_feats, enc::Binding b);
  num::NodeId action(num::Graph& g, num::NodeId traj_probs, const num::Tensor& patch_feats,
                     const num::Tensor& imu_feats, enc::Binding b);

  const Stage2Config& config() const { return cfg_; }
  int grid() const { return grid_; }
  int dim() const { return dim_; }
  int num_classes() const { return classes_; }
  std::vector<num::Parameter>& params() { return params_; }
  const std::vector<num::Parameter>& params() const { return params_; }
  /// Parameter by name; throws InvalidArgument if absent.
  num::Parameter& param(const std::string& name);

 private:
  using Bind = std::function<num::NodeId(const std::string&)>;
  Bind binder(num::Graph& g, enc::Binding b);
  num::NodeId temporal_impl(num::Graph& g, const num::Tensor& heat, const num::Tensor& imu_feats, const Bind& p) const;
  num::NodeId spatial_impl(num::Graph& g, num::NodeId refined, const num::Tensor& patch_feats, const Bind& p) const;
  num::NodeId action_impl(num::Graph& g, num::NodeId traj_probs, const num::Tensor& patch_feats,
                          const num::Tensor& imu_feats, const Bind& p) const;
  Nodes forward_impl(num::Graph& g, const num::Tensor& heat, const num::Tensor& imu_feats,
                     const num::Tensor& patch_feats, const Bind& p, bool with_action) const;
  void check_inputs(const num::Tensor& heat, const num::Tensor& imu_feats, const num::Tensor& patch_feats) const;
  const num::Parameter& find(const std::string& name) const;

  Stage2Config cfg_;
  int grid_, dim_, classes_;
  std::vector<num::Parameter> params_;
};

/// Summed cross-entropy over t; labels outside [0, K) throw InvalidArgument.
num::NodeId traj_loss(num::Graph& g, num::NodeId logits, const std::vector<int>& segments);
num::NodeId action_loss(num::Graph& g, num::NodeId logits, const std::vector<int>& actions);
double traj_loss(const num::Tensor& logits, const std::vector<int>& segments);
double action_loss(const num::Tensor& logits, const std::vector<int>& actions);

/// Frozen per-second features of one labelled sequence.
struct SequenceFeatures {
  int scene = 0;
  num::Tensor imu_feats;  // [L,D]
  std::vector<int> segments;
  std::vector<int> actions;
};

struct Stage2Data {
  std::vector<num::Tensor> scene_patch_feats;  // per scene [S,D]
  std::vector<SequenceFeatures> sequences;
};

struct Stage2Result {
  std::vector<double> loss_trace;    // L_traj + w L_action, mean over the clips of a step
  std::vector<double> traj_trace;
  std::vector<double> action_trace;
};

using StepCallback = std::function<void(int step, double loss)>;

/// Trains the reasoner on random T-second clips (seeded choice of sequence and
/// start). Encoder features are inputs, so the encoders cannot change.
/// Trained parameters are rounded to float32 at the end. Throws
/// InvalidArgument when no sequence is at least T seconds long.
Stage2Result train_stage2(const Stage2Data& data, Reasoner& model, const Stage2Config& cfg, std::uint64_t seed,
                          const StepCallback& on_step = {});

/// Trains only the action head (s2.act1, s2.act2) of a model built without
/// location attention, on the same random clips; the trajectory parameters are
/// untouched. Throws InvalidArgument when the model uses location attention.
Stage2Result train_action_head(const Stage2Data& data, Reasoner& model, const Stage2Config& cfg, std::uint64_t seed);

/// Features of the patch centred on every grid cell, in segment order.
num::Tensor scene_patch_features(const enc::PointEncoder& enc, const world::PointCloud& cloud,
                                 const world::SegmentGrid& grid, double patch_side, std::uint64_t seed);

struct Prediction {
  std::vector<int> segments;
  std::vector<double> x, y;  // centre of the predicted segment
  std::vector<int> actions;
  std::vector<double> confidence;  // stage-2 probability of the chosen segment
  std::vector<int> stage1_segments;
  num::Tensor stage1_heat;  // [L,S]
  num::Tensor stage2_heat;  // [L,S]
  num::Tensor action_logits;  // [L,|C|]
};

/// Sliding blocks of T seconds with stride T; a trailing partial block is
/// padded by repeating the last window and the padded predictions are
/// dropped. Throws CompatibilityError when the grid or feature width
/// disagrees with the model and InvalidArgument for sequences shorter than T.
Prediction infer(const Reasoner& model, const num::Tensor& imu_feats, const num::Tensor& patch_feats,
                 const world::SegmentGrid& grid);

/// Argmax with ties to the lowest index, per row of a [R,K] tensor.
std::vector<int> row_argmax(const num::Tensor& m);

std::string heatmap_csv(const num::Tensor& heat, int t, int grid);
/// 8-bit binary PGM of one t-slice, scaled so the maximum maps to 255.
std::string heatmap_pgm(const num::Tensor& heat, int t, int grid);
std::string predictions_csv(const Prediction& p);

}  // namespace egoloc::stage2
