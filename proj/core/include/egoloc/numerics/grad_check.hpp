#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "egoloc/numerics/graph.hpp"

namespace egoloc::num {

/// A scalar-loss network over its own parameters. `loss` records the forward
/// pass into the given graph and returns the loss node.
struct Network {
  std::vector<Parameter> params;
  std::function<NodeId(Graph&, std::vector<Parameter>&)> loss;
};

using NetworkFactory = std::function<Network(std::uint64_t seed)>;

struct GradCheckOptions {
  double eps = 1e-4;
  double tolerance = 1e-3;
  /// Lower bound on the relative-error denominator, so coordinates whose true
  /// gradient is ~0 are judged by absolute error.
  double denominator_floor = 1e-5;
  /// Check at most this many coordinates per parameter (0 = all), chosen by seed.
  std::int64_t max_coords_per_param = 0;
  /// Negative-control hook forwarded to Graph::inject_fault.
  std::optional<OpKind> fault;
};

struct GradCheckFailure {
  std::string param;
  std::int64_t coord = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::int64_t coords_checked = 0;
  bool finite = true;
  std::vector<GradCheckFailure> failures;
  bool passed() const { return finite && failures.empty(); }
};

GradCheckReport grad_check(const NetworkFactory& factory, std::uint64_t seed, const GradCheckOptions& opt = {});

}  // namespace egoloc::num
