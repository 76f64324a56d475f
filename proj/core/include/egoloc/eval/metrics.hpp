#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "egoloc/numerics/tensor.hpp"
#include "egoloc/world/grid.hpp"

namespace egoloc::eval {

using Point = std::array<double, 2>;

struct EvalConfig {
  std::vector<double> thresholds_m{0.2, 0.4, 0.6};
  std::vector<int> topk{1, 5};
  std::string heatmap_format = "csv";  // csv or pgm
};

/// Thresholds must be positive and strictly ascending; top-k values positive;
/// the heatmap format csv or pgm.
void validate(const EvalConfig& cfg);

/// Fraction of t with |pred_t - gt_t| <= tau. Throws InvalidArgument on a
/// length mismatch or empty input.
double success_rate(const std::vector<Point>& pred, const std::vector<Point>& gt, double tau);

/// (#{s != s*: H[s] < H[s*]} + 0.5 #{s != s*: H[s] = H[s*]}) / (S - 1).
/// Throws InvalidArgument when s* is out of range or S < 2.
double relative_score(std::span<const double> slice, int s_star);
/// Mean relative score over the rows of a [L,S] heatmap.
double mean_relative_score(const num::Tensor& heat, const std::vector<int>& segments);

/// Fraction of rows whose label ranks among the k largest logits, ties
/// ranked by lowest index. Throws InvalidArgument when k is outside [1, K]
/// or a label is out of range.
double topk_accuracy(const num::Tensor& logits, const std::vector<int>& labels, int k);

/// Success rate at tau of a predictor that picks a uniformly random segment
/// centre, averaged over the given ground-truth positions. Exact count.
double chance_success(const world::SegmentGrid& grid, const std::vector<Point>& gt, double tau);
/// The same quantity estimated with `draws` seeded random predictions.
double chance_success_mc(const world::SegmentGrid& grid, const std::vector<Point>& gt, double tau,
                         std::int64_t draws, std::uint64_t seed);

/// Metrics of one method on one split. Families a method does not produce
/// stay empty.
struct MethodResult {
  std::int64_t seconds = 0;
  std::map<double, double> success;        // threshold -> rate
  std::optional<double> relative_score;    // mean RS
  std::map<int, double> topk;              // k -> accuracy
  std::vector<double> drift;               // mean error per elapsed second
};

struct EvalReport {
  // method -> split -> result
  std::map<std::string, std::map<std::string, MethodResult>> results;
  std::vector<std::uint64_t> seeds;
  std::string config_hash;
  std::vector<std::string> deviations;
  std::string resolved_config;  // JSON text of the resolved run config
};

/// JSON with sorted keys and 2-space indentation.
std::string report_to_json(const EvalReport& r);
/// Throws DataError on malformed input.
EvalReport report_from_json(const std::string& text);
/// Throws IoError when the path cannot be written.
void write_report(const EvalReport& r, const std::filesystem::path& path);
EvalReport read_report(const std::filesystem::path& path);

/// Columns t and one per (method, split) drift curve, padded with empty
/// cells where a curve is shorter.
std::string drift_csv(const EvalReport& r);

/// Deviations recorded in every report: conventions chosen where the method leaves them open.
std::vector<std::string> default_deviations();

}  // namespace egoloc::eval
