#include "egoloc/numerics/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "egoloc/rng.hpp"

namespace egoloc::num {
namespace {

double eval_loss(Network& net) {
  Graph g;
  NodeId l = net.loss(g, net.params);
  return g.value(l).item();
}

}  // namespace

GradCheckReport grad_check(const NetworkFactory& factory, std::uint64_t seed, const GradCheckOptions& opt) {
  Network net = factory(seed);
  GradCheckReport rep;
  std::vector<Tensor> analytic;
  {
    Graph g;
    if (opt.fault) g.inject_fault(*opt.fault);
    for (auto& p : net.params) p.zero_grad();
    NodeId l = net.loss(g, net.params);
    if (!std::isfinite(g.value(l).item())) {
      rep.finite = false;
      return rep;
    }
    g.backward(l);
    for (auto& p : net.params) analytic.push_back(p.grad);
  }

  Rng rng(derive_seed(seed, {0x67636bULL}));
  for (std::size_t pi = 0; pi < net.params.size(); ++pi) {
    auto& p = net.params[pi];
    std::vector<std::int64_t> coords(static_cast<std::size_t>(p.value.size()));
    std::iota(coords.begin(), coords.end(), 0);
    if (opt.max_coords_per_param > 0 && static_cast<std::int64_t>(coords.size()) > opt.max_coords_per_param) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(static_cast<std::size_t>(opt.max_coords_per_param));
      std::sort(coords.begin(), coords.end());
    }
    for (std::int64_t c : coords) {
      const double saved = p.value[c];
      p.value[c] = saved + opt.eps;
      const double lp = eval_loss(net);
      p.value[c] = saved - opt.eps;
      const double lm = eval_loss(net);
      p.value[c] = saved;
      const double num = (lp - lm) / (2.0 * opt.eps);
      const double ana = analytic[pi][c];
      ++rep.coords_checked;
      if (!std::isfinite(num) || !std::isfinite(ana)) {
        rep.finite = false;
        rep.failures.push_back({p.name, c, ana, num, INFINITY});
        continue;
      }
      const double denom = std::max({std::abs(ana), std::abs(num), opt.denominator_floor});
      const double rel = std::abs(ana - num) / denom;
      rep.max_rel_error = std::max(rep.max_rel_error, rel);
      if (rel > opt.tolerance) rep.failures.push_back({p.name, c, ana, num, rel});
    }
  }
  return rep;
}

}  // namespace egoloc::num
