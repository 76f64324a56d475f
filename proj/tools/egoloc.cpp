#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "egoloc/error.hpp"
#include "egoloc/eval/metrics.hpp"
#include "egoloc/io.hpp"
#include "egoloc/pipeline/config.hpp"
#include "egoloc/pipeline/dataset.hpp"
#include "egoloc/pipeline/runners.hpp"
#include "egoloc/runtime.hpp"

namespace {

namespace fs = std::filesystem;
using namespace egoloc;
using namespace egoloc::pipeline;

enum Exit { kOk = 0, kOther = 1, kConfig = 2, kData = 3, kCompat = 4 };

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string data;
  std::string stage;
  std::optional<int> steps;
  bool heatmaps = false;
  bool force = false;
};

Log stderr_log() {
  const auto t0 = std::chrono::steady_clock::now();
  return [t0](const std::string& msg) {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::fprintf(stderr, "[%7.1fs] %s\n", s, msg.c_str());
  };
}

RunConfig read_config_file(const std::string& path) {
  if (path.empty()) return profile_config("desk");
  try {
    return config_from_json(io::read_text(path));
  } catch (const IoError& e) {
    throw ConfigError(std::string("cannot read config: ") + e.what());
  }
}

void echo_config(const RunConfig& cfg, const fs::path& out_dir) {
  const std::string text = config_to_json(cfg);
  std::cout << text << "\nconfig_hash " << config_hash(cfg) << "\n";
  if (!out_dir.empty()) io::write_text(out_dir / "config.json", text);
}

/// The run config of a command that consumes a dataset: the dataset's own
/// config unless --config is given, which must then describe the same data.
RunConfig consumer_config(const Options& o, const Dataset& data) {
  RunConfig cfg = o.config_path.empty() ? data.config : read_config_file(o.config_path);
  check_compatible(data, cfg);
  return cfg;
}

fs::path ckpt_path(const fs::path& dir, const char* kind) { return dir / (std::string(kind) + ".ckpt"); }

enc::Checkpoint load_required(const fs::path& dir, const char* kind) {
  const fs::path p = ckpt_path(dir, kind);
  if (!fs::exists(p)) {
    throw InvalidArgument("missing prerequisite checkpoint " + p.string() + "; run 'egoloc train --stage " +
                          (std::string(kind) == kStage1Kind ? "1" : std::string(kind) == kStage2Kind ? "2" : "velocity") +
                          "' first");
  }
  return enc::load_checkpoint(p);
}

int cmd_gen(const Options& o) {
  RunConfig cfg = read_config_file(o.config_path);
  if (o.seed) cfg.seed = *o.seed;
  validate(cfg);
  echo_config(cfg, {});
  const Dataset data = build_dataset(cfg);
  write_dataset(data, o.out, o.force);
  std::cout << "data_hash " << data.data_hash << "\nchecksum " << directory_checksum(o.out) << "\n";
  return kOk;
}

int cmd_train(const Options& o) {
  const Dataset data = load_dataset(o.data);
  RunConfig cfg = consumer_config(o, data);
  const std::uint64_t seed = o.seed.value_or(cfg.seed);
  if (o.steps) {
    if (o.stage == "1") cfg.stage1.steps = *o.steps;
    if (o.stage == "2") cfg.stage2.steps = *o.steps;
    if (o.stage == "velocity") cfg.velocity.steps = *o.steps;
  }
  validate(cfg);
  fs::create_directories(o.out);
  echo_config(cfg, o.out);
  const Log log = stderr_log();
  TrainOutput out;
  if (o.stage == "1") {
    out = train_stage1_run(data, cfg, seed, log);
  } else if (o.stage == "2") {
    out = train_stage2_run(data, cfg, load_required(o.out, kStage1Kind), seed, nullptr, log);
  } else {
    out = train_velocity_run(data, cfg, seed, log);
  }
  enc::save_checkpoint(out.checkpoint, ckpt_path(o.out, out.checkpoint.kind.c_str()));
  io::write_text(fs::path(o.out) / (out.checkpoint.kind + "_trace.csv"), out.trace_csv);
  std::cout << "checkpoint " << ckpt_path(o.out, out.checkpoint.kind.c_str()).string() << " checksum "
            << io::hex64(enc::checksum(out.checkpoint.params)) << "\n";
  return kOk;
}

int cmd_eval(const Options& o) {
  const Dataset data = load_dataset(o.data);
  const RunConfig cfg = consumer_config(o, data);
  echo_config(cfg, {});
  const auto s1 = load_required(o.out, kStage1Kind);
  const auto s2 = load_required(o.out, kStage2Kind);
  const auto vel = load_required(o.out, kVelocityKind);
  const fs::path heat = o.heatmaps ? fs::path(o.out) / "heatmaps" : fs::path();
  const auto report = run_eval(data, cfg, s1, s2, vel, heat, stderr_log());
  eval::write_report(report, fs::path(o.out) / "report.json");
  io::write_text(fs::path(o.out) / "drift.csv", eval::drift_csv(report));
  for (const auto& [method, splits] : report.results) {
    for (const auto& [split, r] : splits) {
      std::cout << method << " " << split;
      for (const auto& [tau, s] : r.success) std::cout << " success@" << tau << "=" << s;
      if (r.relative_score) std::cout << " rs=" << *r.relative_score;
      for (const auto& [k, a] : r.topk) std::cout << " top" << k << "=" << a;
      std::cout << "\n";
    }
  }
  std::cout << "report " << (fs::path(o.out) / "report.json").string() << "\n";
  return kOk;
}

int cmd_export(const Options& o) {
  const Dataset data = load_dataset(o.data);
  const RunConfig cfg = consumer_config(o, data);
  echo_config(cfg, {});
  const auto s1 = load_required(o.out, kStage1Kind);
  const auto s2 = load_required(o.out, kStage2Kind);
  const auto model = load_reasoner(s2, data, s1);
  const FeatureSet feats = compute_features(data, load_encoders(s1, cfg));
  const fs::path dir = fs::path(o.out) / "heatmaps";
  for (const auto& [name, split] : {std::pair<std::string, std::string>{"seen", kTestSeen}, {"unseen", kTestUnseen}}) {
    if (data.split(split).empty()) continue;
    const auto ev = evaluate_stage2(data, feats, model, split, cfg.eval);
    export_heatmaps(data, ev, name, dir, cfg.eval.heatmap_format, true);
  }
  std::cout << "heatmaps " << dir.string() << "\n";
  return kOk;
}

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::kConfig:
      return kConfig;
    case ErrorKind::kData:
      return kData;
    case ErrorKind::kCompatibility:
      return kCompat;
    default:
      return kOther;
  }
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"Synthetic egocentric inertial localization pipeline"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* c, bool needs_data) {
    c->add_option("--config", o.config_path, "JSON config document (defaults to the desk profile)");
    c->add_option("--seed", o.seed, "run seed");
    c->add_option("--out", o.out, "output directory")->required();
    if (needs_data) c->add_option("dataset", o.data, "dataset directory written by 'gen'")->required();
  };
  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  common(gen, false);
  gen->add_flag("--force", o.force, "overwrite a non-empty output directory");

  auto* train = app.add_subcommand("train", "train one stage; checkpoints go to --out");
  common(train, true);
  train->add_option("--stage", o.stage, "1, 2 or velocity")->required()->check(CLI::IsMember({"1", "2", "velocity"}));
  train->add_option("--steps", o.steps, "override the stage's step budget")->check(CLI::NonNegativeNumber);

  auto* ev = app.add_subcommand("eval", "evaluate the checkpoints in --out and write report.json");
  common(ev, true);
  ev->add_flag("--heatmaps", o.heatmaps, "also export stage-2 heatmaps");

  auto* ex = app.add_subcommand("export-heatmaps", "write stage-1 and stage-2 heatmaps for the test splits");
  common(ex, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (*gen) return cmd_gen(o);
    if (*train) return cmd_train(o);
    if (*ev) return cmd_eval(o);
    return cmd_export(o);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kOther;
  }
}
