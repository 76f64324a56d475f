#include "egoloc/pipeline/runners.hpp"

#include <cstdio>
#include <json.hpp>

#include "egoloc/encoders/semantic.hpp"
#include "egoloc/error.hpp"
#include "egoloc/io.hpp"
#include "egoloc/rng.hpp"
#include "egoloc/stage1/stage1.hpp"

namespace egoloc::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;
using num::Tensor;

namespace {

constexpr std::uint64_t kImuInitTag = 0x696d7569ULL;
constexpr std::uint64_t kPtsInitTag = 0x70747369ULL;
constexpr std::uint64_t kStage1Tag = 0x73747231ULL;
constexpr std::uint64_t kStage2Tag = 0x73747232ULL;
constexpr std::uint64_t kActionTag = 0x61637469ULL;
constexpr std::uint64_t kVelocityTag = 0x76656c6fULL;
constexpr std::uint64_t kPatchTag = 0x70617463ULL;

void say(const Log& log, const std::string& msg) {
  if (log) log(msg);
}

json extra_of(const enc::Checkpoint& c) {
  try {
    return json::parse(c.extra_json);
  } catch (const json::exception&) {
    throw CompatibilityError("checkpoint metadata is not valid JSON");
  }
}

void expect_kind(const enc::Checkpoint& c, const char* kind) {
  if (c.kind != kind) {
    throw CompatibilityError("expected a " + std::string(kind) + " checkpoint, got '" + c.kind + "'");
  }
}

void expect_data(const enc::Checkpoint& c, const Dataset& data) {
  const json x = extra_of(c);
  if (!x.contains("data_hash") || x.at("data_hash") != data.data_hash) {
    throw CompatibilityError("config hash mismatch: checkpoint was trained on data " +
                             (x.contains("data_hash") ? x.at("data_hash").get<std::string>() : std::string("?")) +
                             ", dataset is " + data.data_hash);
  }
}

std::string trace_csv(const std::vector<double>& loss) {
  std::string out = "step,loss\n";
  for (std::size_t i = 0; i < loss.size(); ++i) out += std::to_string(i) + "," + io::fmt_double(loss[i]) + "\n";
  return out;
}

std::vector<num::Parameter> concat(const std::vector<num::Parameter>& a, const std::vector<num::Parameter>& b) {
  std::vector<num::Parameter> out(a);
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

}  // namespace

void check_compatible(const Dataset& data, const RunConfig& cfg) {
  const std::string h = data_hash(cfg);
  if (h != data.data_hash) {
    throw CompatibilityError("config hash mismatch: dataset was generated with data hash " + data.data_hash +
                             " but the config gives " + h);
  }
}

Encoders init_encoders(const RunConfig& cfg, std::uint64_t seed) {
  return Encoders{enc::ImuEncoder(cfg.encoders, derive_seed(seed, {kImuInitTag})),
                  enc::PointEncoder(cfg.encoders, derive_seed(seed, {kPtsInitTag}))};
}

Encoders load_encoders(const enc::Checkpoint& ckpt, const RunConfig& cfg) {
  expect_kind(ckpt, kStage1Kind);
  Encoders e = init_encoders(cfg, 0);
  if (static_cast<std::size_t>(enc::param_count(ckpt.params)) !=
      static_cast<std::size_t>(enc::param_count(e.imu.params()) + enc::param_count(e.pts.params()))) {
    throw CompatibilityError("stage-1 checkpoint does not match the encoder configuration");
  }
  enc::assign_params(e.imu.params(), ckpt.params);
  enc::assign_params(e.pts.params(), ckpt.params);
  return e;
}

std::uint64_t encoder_checksum(const Encoders& e) { return enc::checksum(concat(e.imu.params(), e.pts.params())); }

TrainOutput train_stage1_run(const Dataset& data, const RunConfig& cfg, std::uint64_t seed, const Log& log) {
  check_compatible(data, cfg);
  Encoders e = init_encoders(cfg, seed);
  enc::SemanticTable table(cfg.motion.num_actions, cfg.encoders.dim, cfg.image_sigma, cfg.semantic_seed);

  stage1::AlignedDataset ad;
  ad.patch_side = cfg.patch_side;
  for (const auto& s : data.scenes) ad.clouds.push_back(&s.cloud);
  const auto train = data.split(kTrain);
  std::vector<std::vector<Tensor>> windows;
  windows.reserve(train.size());
  for (const auto* s : train) windows.push_back(motion::window_imu(s->imu));
  for (std::size_t i = 0; i < train.size(); ++i) {
    const auto& s = *train[i];
    const std::size_t L = std::min(windows[i].size(), s.labels.size());
    for (std::size_t t = 0; t < L; ++t) {
      stage1::AlignedItem it;
      it.scene = s.scene;
      it.window = &windows[i][t];
      it.x = s.labels[t].x;
      it.y = s.labels[t].y;
      it.action = s.labels[t].action;
      it.time_index = static_cast<std::int64_t>(s.id) * 100000 + static_cast<std::int64_t>(t);
      ad.items.push_back(it);
    }
  }
  say(log, "stage 1: " + std::to_string(ad.items.size()) + " aligned seconds, " + std::to_string(cfg.stage1.steps) +
               " steps");
  auto res = stage1::train_stage1(ad, e.imu, e.pts, table, cfg.stage1, derive_seed(seed, {kStage1Tag}),
                                  [&](int step, double loss) {
                                    if (log && (step % 250 == 0 || step + 1 == cfg.stage1.steps)) {
                                      say(log, "stage 1 step " + std::to_string(step) + " loss " + io::fmt_double(loss));
                                    }
                                  });
  TrainOutput out;
  out.checkpoint.kind = kStage1Kind;
  out.checkpoint.config_json = config_to_json(cfg);
  out.checkpoint.params = concat(e.imu.params(), e.pts.params());
  json x;
  x["data_hash"] = data.data_hash;
  x["config_hash"] = config_hash(cfg);
  x["seed"] = seed;
  x["semantic_checksum"] = io::hex64(table.checksum());
  x["final_loss"] = res.loss_trace.empty() ? json(nullptr) : json(res.loss_trace.back());
  out.checkpoint.extra_json = x.dump();
  out.trace_csv = trace_csv(res.loss_trace);
  out.loss_trace = std::move(res.loss_trace);
  return out;
}

FeatureSet compute_features(const Dataset& data, const Encoders& e) {
  FeatureSet f;
  for (const auto& s : data.sequences) f.imu.push_back(e.imu.encode_batch(motion::window_imu(s.imu)));
  for (const auto& sc : data.scenes) {
    f.patch.push_back(stage2::scene_patch_features(e.pts, sc.cloud, data.grid(sc.id), data.config.patch_side,
                                                   derive_seed(sc.seed, {kPatchTag})));
  }
  return f;
}

stage2::Stage2Data stage2_data(const Dataset& data, const FeatureSet& feats, const std::string& split) {
  stage2::Stage2Data d;
  d.scene_patch_feats = feats.patch;
  for (const auto* s : data.split(split)) {
    stage2::SequenceFeatures q;
    q.scene = s->scene;
    q.imu_feats = feats.imu.at(static_cast<std::size_t>(s->id));
    const auto L = static_cast<std::size_t>(q.imu_feats.dim(0));
    for (std::size_t t = 0; t < L; ++t) {
      q.segments.push_back(s->labels.at(t).segment);
      q.actions.push_back(s->labels.at(t).action);
    }
    d.sequences.push_back(std::move(q));
  }
  return d;
}

namespace {

TrainOutput reasoner_output(const stage2::Reasoner& m, const Dataset& data, const RunConfig& cfg,
                            const enc::Checkpoint& stage1, std::uint64_t seed, const stage2::Stage2Result& res) {
  TrainOutput out;
  out.checkpoint.kind = kStage2Kind;
  out.checkpoint.config_json = config_to_json(cfg);
  out.checkpoint.params = m.params();
  json x;
  x["data_hash"] = data.data_hash;
  x["config_hash"] = config_hash(cfg);
  x["stage1_checksum"] = io::hex64(enc::checksum(stage1.params));
  x["seed"] = seed;
  x["final_loss"] = res.loss_trace.empty() ? json(nullptr) : json(res.loss_trace.back());
  out.checkpoint.extra_json = x.dump();
  std::string csv = "step,loss,traj,action\n";
  for (std::size_t i = 0; i < res.loss_trace.size(); ++i) {
    csv += std::to_string(i) + "," + io::fmt_double(res.loss_trace[i]) + "," +
           io::fmt_double(i < res.traj_trace.size() ? res.traj_trace[i] : 0.0) + "," +
           io::fmt_double(i < res.action_trace.size() ? res.action_trace[i] : 0.0) + "\n";
  }
  out.trace_csv = std::move(csv);
  out.loss_trace = res.loss_trace;
  return out;
}

}  // namespace

TrainOutput train_stage2_run(const Dataset& data, const RunConfig& cfg, const enc::Checkpoint& stage1,
                             std::uint64_t seed, const FeatureSet* feats, const Log& log) {
  check_compatible(data, cfg);
  expect_data(stage1, data);
  FeatureSet local;
  if (!feats) {
    local = compute_features(data, load_encoders(stage1, cfg));
    feats = &local;
  }
  stage2::Reasoner m(cfg.stage2, cfg.grid, cfg.encoders.dim, cfg.motion.num_actions, derive_seed(seed, {kStage2Tag}));
  say(log, "stage 2: " + std::to_string(cfg.stage2.steps) + " steps of " + std::to_string(cfg.stage2.batch) +
               " clips");
  auto res = stage2::train_stage2(stage2_data(data, *feats, kTrain), m, cfg.stage2, derive_seed(seed, {kStage2Tag, 1}),
                                  [&](int step, double loss) {
                                    if (log && (step % 100 == 0 || step + 1 == cfg.stage2.steps)) {
                                      say(log, "stage 2 step " + std::to_string(step) + " loss " + io::fmt_double(loss));
                                    }
                                  });
  return reasoner_output(m, data, cfg, stage1, seed, res);
}

TrainOutput train_imu_only_action_run(const Dataset& data, const RunConfig& cfg, const enc::Checkpoint& stage1,
                                      std::uint64_t seed, const FeatureSet* feats) {
  check_compatible(data, cfg);
  expect_data(stage1, data);
  FeatureSet local;
  if (!feats) {
    local = compute_features(data, load_encoders(stage1, cfg));
    feats = &local;
  }
  RunConfig c = cfg;
  c.stage2.location_attention = false;
  stage2::Reasoner m(c.stage2, c.grid, c.encoders.dim, c.motion.num_actions, derive_seed(seed, {kStage2Tag}));
  auto res = stage2::train_action_head(stage2_data(data, *feats, kTrain), m, c.stage2, derive_seed(seed, {kActionTag}));
  return reasoner_output(m, data, c, stage1, seed, res);
}

stage2::Reasoner load_reasoner(const enc::Checkpoint& ckpt, const Dataset& data, const enc::Checkpoint& stage1) {
  expect_kind(ckpt, kStage2Kind);
  expect_data(ckpt, data);
  const json x = extra_of(ckpt);
  if (!x.contains("stage1_checksum") || x.at("stage1_checksum") != io::hex64(enc::checksum(stage1.params))) {
    throw CompatibilityError("stage-2 checkpoint was trained on different stage-1 encoders");
  }
  RunConfig cfg;
  try {
    cfg = config_from_json(ckpt.config_json);
  } catch (const ConfigError& e) {
    throw CompatibilityError(std::string("stage-2 checkpoint carries an invalid config: ") + e.what());
  }
  stage2::Reasoner m(cfg.stage2, cfg.grid, cfg.encoders.dim, cfg.motion.num_actions, 0);
  if (m.params().size() != ckpt.params.size()) throw CompatibilityError("stage-2 checkpoint parameter list differs");
  enc::assign_params(m.params(), ckpt.params);
  return m;
}

TrainOutput train_velocity_run(const Dataset& data, const RunConfig& cfg, std::uint64_t seed, const Log& log) {
  check_compatible(data, cfg);
  std::vector<base::DisplacementSample> samples;
  for (const auto* s : data.split(kTrain)) {
    for (auto& d : base::displacement_samples(s->imu, s->labels)) samples.push_back(std::move(d));
  }
  base::VelocityNet net(cfg.velocity, derive_seed(seed, {kVelocityTag}));
  say(log, "velocity: " + std::to_string(samples.size()) + " samples, " + std::to_string(cfg.velocity.steps) + " steps");
  auto res = base::train_velocity_net(samples, net, cfg.velocity, derive_seed(seed, {kVelocityTag, 1}));
  TrainOutput out;
  out.checkpoint.kind = kVelocityKind;
  out.checkpoint.config_json = config_to_json(cfg);
  out.checkpoint.params = net.params();
  json x;
  x["data_hash"] = data.data_hash;
  x["config_hash"] = config_hash(cfg);
  x["seed"] = seed;
  x["final_loss"] = res.loss_trace.empty() ? json(nullptr) : json(res.loss_trace.back());
  out.checkpoint.extra_json = x.dump();
  out.trace_csv = trace_csv(res.loss_trace);
  out.loss_trace = std::move(res.loss_trace);
  return out;
}

base::VelocityNet load_velocity(const enc::Checkpoint& ckpt, const Dataset& data) {
  expect_kind(ckpt, kVelocityKind);
  expect_data(ckpt, data);
  base::VelocityNet net(data.config.velocity, 0);
  if (net.params().size() != ckpt.params.size()) throw CompatibilityError("velocity checkpoint parameter list differs");
  enc::assign_params(net.params(), ckpt.params);
  return net;
}

std::vector<eval::Point> gt_positions(const SequenceEntry& s) {
  std::vector<eval::Point> out;
  for (const auto& l : s.labels) out.push_back({l.x, l.y});
  return out;
}

namespace {

void fill_success(eval::MethodResult& r, const std::vector<eval::Point>& pred, const std::vector<eval::Point>& gt,
                  const eval::EvalConfig& cfg) {
  r.seconds = static_cast<std::int64_t>(gt.size());
  for (double tau : cfg.thresholds_m) r.success[tau] = eval::success_rate(pred, gt, tau);
}

Tensor stack_rows(const std::vector<const Tensor*>& parts) {
  std::int64_t rows = 0;
  const auto W = parts.front()->dim(1);
  for (const auto* p : parts) rows += p->dim(0);
  Tensor out(num::Shape{rows, W}, 0.0);
  std::int64_t r = 0;
  for (const auto* p : parts) {
    std::copy(p->data().begin(), p->data().end(), out.data().begin() + r * W);
    r += p->dim(0);
  }
  return out;
}

}  // namespace

Stage2Eval evaluate_stage2(const Dataset& data, const FeatureSet& feats, const stage2::Reasoner& model,
                           const std::string& split, const eval::EvalConfig& cfg) {
  Stage2Eval ev;
  std::vector<eval::Point> gt_all, s2_all, s1_all;
  std::vector<std::vector<eval::Point>> gt_seq, s2_seq, s1_seq;
  std::vector<int> segs, acts;
  for (const auto* s : data.split(split)) {
    const auto grid = data.grid(s->scene);
    auto p = stage2::infer(model, feats.imu.at(static_cast<std::size_t>(s->id)),
                           feats.patch.at(static_cast<std::size_t>(s->scene)), grid);
    auto gt = gt_positions(*s);
    gt.resize(p.segments.size());
    std::vector<eval::Point> s2, s1;
    for (std::size_t t = 0; t < p.segments.size(); ++t) {
      s2.push_back({p.x[t], p.y[t]});
      auto [x, y] = grid.center(p.stage1_segments[t]);
      s1.push_back({x, y});
      segs.push_back(s->labels[t].segment);
      acts.push_back(s->labels[t].action);
    }
    gt_all.insert(gt_all.end(), gt.begin(), gt.end());
    s2_all.insert(s2_all.end(), s2.begin(), s2.end());
    s1_all.insert(s1_all.end(), s1.begin(), s1.end());
    gt_seq.push_back(std::move(gt));
    s2_seq.push_back(std::move(s2));
    s1_seq.push_back(std::move(s1));
    ev.predictions.push_back(std::move(p));
    ev.sequence_ids.push_back(s->id);
  }
  if (ev.predictions.empty()) throw InvalidArgument("split '" + split + "' has no sequences");
  std::vector<const Tensor*> h2, h1, al;
  for (const auto& p : ev.predictions) {
    h2.push_back(&p.stage2_heat);
    h1.push_back(&p.stage1_heat);
    al.push_back(&p.action_logits);
  }
  fill_success(ev.stage2, s2_all, gt_all, cfg);
  fill_success(ev.retrieval, s1_all, gt_all, cfg);
  ev.stage2.relative_score = eval::mean_relative_score(stack_rows(h2), segs);
  ev.retrieval.relative_score = eval::mean_relative_score(stack_rows(h1), segs);
  const Tensor logits = stack_rows(al);
  for (int k : cfg.topk) ev.stage2.topk[k] = eval::topk_accuracy(logits, acts, k);
  ev.stage2.drift = base::drift_curve(s2_seq, gt_seq);
  ev.retrieval.drift = base::drift_curve(s1_seq, gt_seq);
  return ev;
}

eval::MethodResult evaluate_dead_reckoning(const Dataset& data, const base::VelocityNet& net, const std::string& split,
                                           const eval::EvalConfig& cfg) {
  std::vector<eval::Point> gt_all, pr_all;
  std::vector<std::vector<eval::Point>> gt_seq, pr_seq;
  for (const auto* s : data.split(split)) {
    auto gt = gt_positions(*s);
    auto z = base::dead_reckon_sequence(net, s->imu, gt.front(), s->labels.front().heading);
    z.resize(std::min(z.size(), gt.size()));
    gt.resize(z.size());
    gt_all.insert(gt_all.end(), gt.begin(), gt.end());
    pr_all.insert(pr_all.end(), z.begin(), z.end());
    gt_seq.push_back(std::move(gt));
    pr_seq.push_back(std::move(z));
  }
  if (gt_seq.empty()) throw InvalidArgument("split '" + split + "' has no sequences");
  eval::MethodResult r;
  fill_success(r, pr_all, gt_all, cfg);
  r.drift = base::drift_curve(pr_seq, gt_seq);
  return r;
}

double split_chance(const Dataset& data, const std::string& split, double tau) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto* s : data.split(split)) {
    auto gt = gt_positions(*s);
    sum += eval::chance_success(data.grid(s->scene), gt, tau) * static_cast<double>(gt.size());
    n += gt.size();
  }
  if (n == 0) throw InvalidArgument("split '" + split + "' has no sequences");
  return sum / static_cast<double>(n);
}

void export_heatmaps(const Dataset& data, const Stage2Eval& ev, const std::string& split, const fs::path& dir,
                     const std::string& format, bool stage1_too) {
  const int G = data.config.grid;
  for (std::size_t i = 0; i < ev.predictions.size(); ++i) {
    const auto& p = ev.predictions[i];
    char name[32];
    std::snprintf(name, sizeof(name), "seq_%04d", ev.sequence_ids[i]);
    const fs::path sd = dir / split / name;
    fs::create_directories(sd);
    auto write = [&](const Tensor& heat, const char* stage) {
      for (int t = 0; t < static_cast<int>(heat.dim(0)); ++t) {
        char file[48];
        std::snprintf(file, sizeof(file), "%s_t%03d.%s", stage, t, format.c_str());
        io::write_text(sd / file, format == "pgm" ? stage2::heatmap_pgm(heat, t, G) : stage2::heatmap_csv(heat, t, G));
      }
    };
    write(p.stage2_heat, "stage2");
    if (stage1_too) write(p.stage1_heat, "stage1");
    io::write_text(sd / "predictions.csv", stage2::predictions_csv(p));
  }
}

eval::EvalReport run_eval(const Dataset& data, const RunConfig& cfg, const enc::Checkpoint& stage1,
                          const enc::Checkpoint& stage2_ckpt, const enc::Checkpoint& velocity,
                          const fs::path& heatmap_dir, const Log& log) {
  check_compatible(data, cfg);
  expect_data(stage1, data);
  const Encoders e = load_encoders(stage1, cfg);
  const auto model = load_reasoner(stage2_ckpt, data, stage1);
  const auto net = load_velocity(velocity, data);
  say(log, "eval: encoding features");
  const FeatureSet feats = compute_features(data, e);

  eval::EvalReport r;
  r.seeds = {cfg.seed};
  r.config_hash = config_hash(cfg);
  r.deviations = eval::default_deviations();
  r.resolved_config = config_to_json(cfg);
  for (const auto& [name, split] : {std::pair<std::string, std::string>{"seen", kTestSeen}, {"unseen", kTestUnseen}}) {
    if (data.split(split).empty()) continue;
    say(log, "eval: " + name + " split");
    auto ev = evaluate_stage2(data, feats, model, split, cfg.eval);
    r.results["stage2"][name] = ev.stage2;
    r.results["stage1-retrieval"][name] = ev.retrieval;
    r.results["dead-reckoning"][name] = evaluate_dead_reckoning(data, net, split, cfg.eval);
    if (!heatmap_dir.empty()) export_heatmaps(data, ev, name, heatmap_dir, cfg.eval.heatmap_format, false);
  }
  return r;
}

}  // namespace egoloc::pipeline
