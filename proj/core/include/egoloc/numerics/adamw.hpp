#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "egoloc/numerics/graph.hpp"

namespace egoloc::num {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

struct AdamWState {
  AdamWConfig hyper;
  std::int64_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

/// One decoupled-weight-decay Adam step:
///   w <- w * (1 - lr * wd)
///   w <- w - lr * m_hat / (sqrt(v_hat) + eps)
/// Moments are created lazily on the first call. Throws ShapeError when a
/// parameter, its gradient, or its stored moments disagree in shape.
void adamw_step(std::span<Parameter* const> params, AdamWState& state);

}  // namespace egoloc::num
