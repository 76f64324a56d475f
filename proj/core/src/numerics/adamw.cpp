#include "egoloc/numerics/adamw.hpp"

#include <cmath>
#include <string>

#include "egoloc/error.hpp"

namespace egoloc::num {

void adamw_step(std::span<Parameter* const> params, AdamWState& state) {
  if (state.m.empty() && state.v.empty()) {
    for (const auto* p : params) {
      state.m.emplace_back(p->value.shape(), 0.0);
      state.v.emplace_back(p->value.shape(), 0.0);
    }
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ShapeError("adamw_step: state holds " + std::to_string(state.m.size()) + " moments for " +
                     std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto* p = params[i];
    const Shape& s = p->value.shape();
    if (p->grad.shape() != s || state.m[i].shape() != s || state.v[i].shape() != s) {
      throw ShapeError("adamw_step: shape mismatch for parameter '" + p->name + "' " + to_string(s) + " vs grad " +
                       to_string(p->grad.shape()));
    }
  }

  const auto& h = state.hyper;
  state.step += 1;
  const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
  const double decay = 1.0 - h.lr * h.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    double* w = params[i]->value.ptr();
    const double* g = params[i]->grad.ptr();
    double* m = state.m[i].ptr();
    double* v = state.v[i].ptr();
    const std::int64_t n = params[i]->value.size();
    for (std::int64_t k = 0; k < n; ++k) {
      m[k] = h.beta1 * m[k] + (1.0 - h.beta1) * g[k];
      v[k] = h.beta2 * v[k] + (1.0 - h.beta2) * g[k] * g[k];
      const double mh = m[k] / bc1;
      const double vh = v[k] / bc2;
      w[k] = w[k] * decay - h.lr * mh / (std::sqrt(vh) + h.eps);
    }
  }
}

}  // namespace egoloc::num
