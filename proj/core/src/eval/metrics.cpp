#include "egoloc/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "egoloc/error.hpp"
#include "egoloc/io.hpp"
#include "egoloc/rng.hpp"

namespace egoloc::eval {

using nlohmann::json;

void validate(const EvalConfig& c) {
  if (c.thresholds_m.empty()) throw ConfigError("at least one success threshold is required");
  for (std::size_t i = 0; i < c.thresholds_m.size(); ++i) {
    if (!(c.thresholds_m[i] > 0.0)) throw ConfigError("success thresholds must be positive");
    if (i > 0 && !(c.thresholds_m[i] > c.thresholds_m[i - 1])) {
      throw ConfigError("success thresholds must be strictly ascending");
    }
  }
  for (int k : c.topk) {
    if (k < 1) throw ConfigError("top-k values must be positive");
  }
  if (c.heatmap_format != "csv" && c.heatmap_format != "pgm") throw ConfigError("heatmap format must be csv or pgm");
}

double success_rate(const std::vector<Point>& pred, const std::vector<Point>& gt, double tau) {
  if (pred.size() != gt.size()) {
    throw InvalidArgument("success_rate: " + std::to_string(pred.size()) + " predictions for " +
                          std::to_string(gt.size()) + " ground-truth points");
  }
  if (pred.empty()) throw InvalidArgument("success_rate: no points");
  std::size_t hits = 0;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    if (std::hypot(pred[t][0] - gt[t][0], pred[t][1] - gt[t][1]) <= tau) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

double relative_score(std::span<const double> slice, int s_star) {
  const auto S = static_cast<std::int64_t>(slice.size());
  if (S < 2) throw InvalidArgument("relative_score needs at least two positions");
  if (s_star < 0 || s_star >= S) {
    throw InvalidArgument("relative_score: ground-truth segment " + std::to_string(s_star) + " outside [0," +
                          std::to_string(S) + ")");
  }
  const double ref = slice[static_cast<std::size_t>(s_star)];
  double lower = 0.0, ties = 0.0;
  for (std::int64_t s = 0; s < S; ++s) {
    if (s == s_star) continue;
    const double v = slice[static_cast<std::size_t>(s)];
    if (v < ref) {
      lower += 1.0;
    } else if (v == ref) {
      ties += 1.0;
    }
  }
  return (lower + 0.5 * ties) / static_cast<double>(S - 1);
}

double mean_relative_score(const num::Tensor& heat, const std::vector<int>& segments) {
  if (heat.rank() != 2 || heat.dim(0) != static_cast<std::int64_t>(segments.size()) || segments.empty()) {
    throw InvalidArgument("mean_relative_score: heatmap " + num::to_string(heat.shape()) + " does not match " +
                          std::to_string(segments.size()) + " labels");
  }
  const auto S = heat.dim(1);
  double sum = 0.0;
  for (std::size_t t = 0; t < segments.size(); ++t) {
    sum += relative_score(heat.data().subspan(t * static_cast<std::size_t>(S), static_cast<std::size_t>(S)),
                          segments[t]);
  }
  return sum / static_cast<double>(segments.size());
}

double topk_accuracy(const num::Tensor& logits, const std::vector<int>& labels, int k) {
  if (logits.rank() != 2 || logits.dim(0) != static_cast<std::int64_t>(labels.size()) || labels.empty()) {
    throw InvalidArgument("topk_accuracy: logits " + num::to_string(logits.shape()) + " do not match " +
                          std::to_string(labels.size()) + " labels");
  }
  const auto K = logits.dim(1);
  if (k < 1 || k > K) throw InvalidArgument("topk_accuracy: k=" + std::to_string(k) + " outside [1," + std::to_string(K) + "]");
  std::size_t hits = 0;
  for (std::size_t r = 0; r < labels.size(); ++r) {
    const int y = labels[r];
    if (y < 0 || y >= K) throw InvalidArgument("topk_accuracy: label " + std::to_string(y) + " out of range");
    const auto row = static_cast<std::int64_t>(r) * K;
    const double ly = logits[row + y];
    // rank of y: strictly larger logits, plus equal logits at a lower index
    std::int64_t rank = 0;
    for (std::int64_t j = 0; j < K; ++j) {
      const double lj = logits[row + j];
      if (lj > ly || (lj == ly && j < y)) ++rank;
    }
    if (rank < k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double chance_success(const world::SegmentGrid& grid, const std::vector<Point>& gt, double tau) {
  if (gt.empty()) throw InvalidArgument("chance_success: no ground-truth points");
  const int S = grid.num_segments();
  double total = 0.0;
  for (const auto& z : gt) {
    int within = 0;
    for (int s = 0; s < S; ++s) {
      auto [cx, cy] = grid.center(s);
      if (std::hypot(cx - z[0], cy - z[1]) <= tau) ++within;
    }
    total += static_cast<double>(within) / S;
  }
  return total / static_cast<double>(gt.size());
}

double chance_success_mc(const world::SegmentGrid& grid, const std::vector<Point>& gt, double tau,
                         std::int64_t draws, std::uint64_t seed) {
  if (gt.empty()) throw InvalidArgument("chance_success_mc: no ground-truth points");
  if (draws < 1) throw InvalidArgument("chance_success_mc: draws must be positive");
  Rng rng(seed);
  std::uniform_int_distribution<int> seg(0, grid.num_segments() - 1);
  std::uniform_int_distribution<std::size_t> pick(0, gt.size() - 1);
  std::int64_t hits = 0;
  for (std::int64_t i = 0; i < draws; ++i) {
    const auto& z = gt[pick(rng)];
    auto [cx, cy] = grid.center(seg(rng));
    if (std::hypot(cx - z[0], cy - z[1]) <= tau) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(draws);
}

// ---- report ----------------------------------------------------------------

namespace {

std::string threshold_key(double t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", t);
  return buf;
}

json result_to_json(const MethodResult& m) {
  json j;
  j["seconds"] = m.seconds;
  json succ = json::object();
  for (const auto& [t, v] : m.success) succ[threshold_key(t)] = v;
  j["success"] = succ;
  j["relative_score"] = m.relative_score ? json(*m.relative_score) : json(nullptr);
  json tk = json::object();
  for (const auto& [k, v] : m.topk) tk[std::to_string(k)] = v;
  j["topk"] = tk;
  j["drift"] = m.drift;
  return j;
}

MethodResult result_from_json(const json& j) {
  MethodResult m;
  m.seconds = j.at("seconds").get<std::int64_t>();
  for (const auto& [k, v] : j.at("success").items()) m.success[std::stod(k)] = v.get<double>();
  if (!j.at("relative_score").is_null()) m.relative_score = j.at("relative_score").get<double>();
  for (const auto& [k, v] : j.at("topk").items()) m.topk[std::stoi(k)] = v.get<double>();
  m.drift = j.at("drift").get<std::vector<double>>();
  return m;
}

}  // namespace

std::string report_to_json(const EvalReport& r) {
  json j;
  json res = json::object();
  for (const auto& [method, splits] : r.results) {
    for (const auto& [split, m] : splits) res[method][split] = result_to_json(m);
  }
  j["results"] = res;
  j["seeds"] = r.seeds;
  j["config_hash"] = r.config_hash;
  j["deviations"] = r.deviations;
  j["config"] = r.resolved_config.empty() ? json::object() : json::parse(r.resolved_config);
  return j.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& text) {
  try {
    json j = json::parse(text);
    EvalReport r;
    for (const auto& [method, splits] : j.at("results").items()) {
      for (const auto& [split, m] : splits.items()) r.results[method][split] = result_from_json(m);
    }
    r.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.deviations = j.at("deviations").get<std::vector<std::string>>();
    r.resolved_config = j.at("config").dump();
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed evaluation report: ") + e.what());
  } catch (const std::logic_error& e) {
    throw DataError(std::string("malformed evaluation report: ") + e.what());
  }
}

void write_report(const EvalReport& r, const std::filesystem::path& path) { io::write_text(path, report_to_json(r)); }

EvalReport read_report(const std::filesystem::path& path) { return report_from_json(io::read_text(path)); }

std::string drift_csv(const EvalReport& r) {
  std::vector<std::pair<std::string, const std::vector<double>*>> cols;
  std::size_t rows = 0;
  for (const auto& [method, splits] : r.results) {
    for (const auto& [split, m] : splits) {
      if (m.drift.empty()) continue;
      cols.emplace_back(method + "/" + split, &m.drift);
      rows = std::max(rows, m.drift.size());
    }
  }
  std::string out = "t";
  for (const auto& c : cols) out += "," + c.first;
  out += '\n';
  for (std::size_t t = 0; t < rows; ++t) {
    out += std::to_string(t);
    for (const auto& c : cols) {
      out += ',';
      if (t < c.second->size()) out += io::fmt_double((*c.second)[t]);
    }
    out += '\n';
  }
  return out;
}

std::vector<std::string> default_deviations() {
  return {
      "relative score: ties with the ground-truth cell earn half credit; denominator S-1 excludes the ground-truth cell",
      "argmax ties resolve to the lowest index (segments, actions, top-k ranking)",
      "stage-2 inference uses stride-T blocks; a trailing partial block is padded with the last window",
      "unseen split: held-out scenes and participant signature styles disjoint from training",
      "vision-language guidance replaced by a frozen simulated semantic table",
      "dead-reckoning baseline: heading-frame displacement net with gyro-integrated heading from the known start",
      "synthetic IMU and scenes at desk scale; absolute numbers are desk-scale only",
  };
}

}  // namespace egoloc::eval
