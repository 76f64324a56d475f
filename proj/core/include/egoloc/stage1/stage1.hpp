#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "egoloc/encoders/encoders.hpp"
#include "egoloc/encoders/params.hpp"
#include "egoloc/encoders/semantic.hpp"
#include "egoloc/numerics/adamw.hpp"
#include "egoloc/world/scene.hpp"

namespace egoloc::stage1 {

struct Stage1Config {
  // weights of the five pairwise terms: (I,M), (I,P), (L,M), (L,P), (M,P)
  double alpha = 0.1;
  double beta = 1.0;
  double theta = 1.0;
  double delta = 1.0;
  double gamma = 1.0;
  double temperature = 0.07;
  int batch = 64;
  int steps = 1000;
  num::AdamWConfig optim;
};

void validate(const Stage1Config& cfg);

/// Symmetric InfoNCE between row-aligned feature batches a, b [B, D]:
///   0.5 * (mean_i CE(a b^T / tau, i) + mean_i CE(b a^T / tau, i)).
/// Throws ShapeError when the batches differ in shape.
num::NodeId infonce(num::Graph& g, num::NodeId a, num::NodeId b, double tau);
double infonce(const num::Tensor& a, const num::Tensor& b, double tau);

/// Weighted five-term sum; zero-weight terms are skipped.
num::NodeId stage1_loss(num::Graph& g, num::NodeId fi, num::NodeId fl, num::NodeId fm, num::NodeId fp,
                        const Stage1Config& cfg);
double stage1_loss(const num::Tensor& fi, const num::Tensor& fl, const num::Tensor& fm, const num::Tensor& fp,
                   const Stage1Config& cfg);

/// One synchronised second: IMU window, user position in its scene, action,
/// and a globally unique time index used to seed the simulated image.
struct AlignedItem {
  int scene = 0;
  const num::Tensor* window = nullptr;  // [rate, 6]
  double x = 0.0;
  double y = 0.0;
  int action = 0;
  std::int64_t time_index = 0;
};

struct AlignedDataset {
  std::vector<const world::PointCloud*> clouds;
  std::vector<AlignedItem> items;
  double patch_side = 1.0;
};

struct Stage1Result {
  std::vector<double> loss_trace;
};

using StepCallback = std::function<void(int step, double loss)>;

/// Trains both encoders in place. Batches are drawn from a seeded shuffle of
/// the items, reshuffled each epoch; the trailing partial batch of an epoch is
/// dropped. Patches are cut on the fly at each item's position with a
/// per-item subsampling seed. Trained parameters are rounded to float32 at the
/// end. Throws InvalidArgument when the dataset is smaller than one batch.
Stage1Result train_stage1(const AlignedDataset& data, enc::ImuEncoder& imu, enc::PointEncoder& pts,
                          const enc::SemanticTable& table, const Stage1Config& cfg, std::uint64_t seed,
                          const StepCallback& on_step = {});

/// Per-row argmax of imu_feats [T,D] against patch_feats [S,D]; ties go to
/// the lowest index.
std::vector<int> retrieve_location(const num::Tensor& imu_feats, const num::Tensor& patch_feats);

/// Mean of the trace over [begin, begin + window).
double window_mean(const std::vector<double>& trace, std::size_t begin, std::size_t window);

}  // namespace egoloc::stage1
