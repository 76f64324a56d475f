#include "egoloc/pipeline/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <json.hpp>

#include "egoloc/error.hpp"
#include "egoloc/io.hpp"
#include "egoloc/motion/script.hpp"
#include "egoloc/motion/trajectory.hpp"
#include "egoloc/rng.hpp"

namespace egoloc::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kSceneTag = 0x7363656eULL;
constexpr std::uint64_t kSeqTag = 0x73657175ULL;
constexpr std::uint64_t kStyleTag = 0x7374796cULL;

std::string numbered(const char* prefix, int id, int width) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%0*d", prefix, width, id);
  return buf;
}

std::string scene_stem(int id) { return "scenes/" + numbered("scene", id, 2); }
std::string sequence_dir(int id) { return "sequences/" + numbered("seq", id, 4); }

std::string file_hash(const std::vector<char>& bytes) { return io::hex64(io::fnv1a64(bytes.data(), bytes.size())); }

std::vector<char> text_bytes(const std::string& s) { return {s.begin(), s.end()}; }

}  // namespace

world::SegmentGrid Dataset::grid(int scene) const {
  const auto& c = scenes.at(static_cast<std::size_t>(scene)).cloud;
  return world::SegmentGrid(c.extent, config.grid, c.origin_x, c.origin_y);
}

std::vector<const SequenceEntry*> Dataset::split(const std::string& name) const {
  std::vector<const SequenceEntry*> out;
  for (const auto& s : sequences) {
    if (s.split == name) out.push_back(&s);
  }
  return out;
}

motion::ActionSet run_actions(const RunConfig& cfg) { return motion::make_actions(cfg.motion.num_actions); }

Dataset build_dataset(const RunConfig& cfg) {
  validate(cfg);
  Dataset data;
  data.config = cfg;
  data.data_hash = data_hash(cfg);
  const auto& d = cfg.dataset;
  const auto actions = run_actions(cfg);

  const int n_scenes = d.train_scenes + d.unseen_scenes;
  for (int i = 0; i < n_scenes; ++i) {
    SceneEntry e;
    e.id = i;
    e.unseen = i >= d.train_scenes;
    e.seed = derive_seed(cfg.seed, {kSceneTag, static_cast<std::uint64_t>(i)});
    auto gen = world::generate_scene(cfg.scene, e.seed);
    e.scene = std::move(gen.scene);
    e.cloud = std::move(gen.cloud);
    data.scenes.push_back(std::move(e));
  }

  // participants 0..train-1 act in training and seen-test sequences; the
  // unseen participants follow and appear only in unseen scenes
  auto add_sequences = [&](int scene, const char* split, int count, int first_participant, int participants) {
    for (int k = 0; k < count; ++k) {
      SequenceEntry s;
      s.id = static_cast<int>(data.sequences.size());
      s.scene = scene;
      s.split = split;
      s.participant = first_participant + (s.id % participants);
      s.seed = derive_seed(cfg.seed, {kSeqTag, static_cast<std::uint64_t>(s.id)});
      const auto& sc = data.scenes[static_cast<std::size_t>(scene)];
      auto script = motion::plan_script(sc.scene, actions, d.sequence_seconds, derive_seed(s.seed, {1}), cfg.motion.script);
      auto traj = motion::simulate_trajectory(sc.scene, script, cfg.motion.rate_hz, cfg.motion.trajectory,
                                              derive_seed(s.seed, {2}));
      motion::ImuSynthParams p;
      p.noise = cfg.motion.noise;
      p.signatures = cfg.motion.signatures;
      p.nominal_speed = cfg.motion.script.walk_speed;
      p.style = motion::sample_style(derive_seed(cfg.seed, {kStyleTag, static_cast<std::uint64_t>(s.participant)}));
      s.imu = motion::synthesize_imu(traj, script, actions, p, derive_seed(s.seed, {3}));
      s.labels = motion::ground_truth_labels(traj, script, data.grid(scene));
      data.sequences.push_back(std::move(s));
    }
  };
  for (int i = 0; i < d.train_scenes; ++i) add_sequences(i, kTrain, d.train_sequences_per_scene, 0, d.train_participants);
  for (int i = 0; i < d.seen_test_scenes; ++i) add_sequences(i, kTestSeen, d.test_sequences_per_scene, 0, d.train_participants);
  for (int i = d.train_scenes; i < n_scenes; ++i) {
    add_sequences(i, kTestUnseen, d.test_sequences_per_scene, d.train_participants, d.unseen_participants);
  }
  return data;
}

namespace {

// Relative path -> bytes of every file of a dataset, plus the manifest JSON.
std::vector<std::pair<std::string, std::vector<char>>> serialize(const Dataset& data, json& manifest) {
  const auto actions = run_actions(data.config);
  std::vector<std::pair<std::string, std::vector<char>>> files;
  manifest = json::object();
  manifest["format_version"] = kManifestVersion;
  manifest["config"] = json::parse(config_to_json(data.config));
  manifest["config_hash"] = config_hash(data.config);
  manifest["data_hash"] = data.data_hash;
  json scenes = json::array();
  for (const auto& s : data.scenes) {
    const std::string stem = scene_stem(s.id);
    auto scene_bytes = text_bytes(world::scene_to_json(s.scene));
    auto cloud_bytes = world::cloud_to_bytes(s.cloud);
    json e;
    e["id"] = s.id;
    e["seed"] = s.seed;
    e["split"] = s.unseen ? "unseen" : "train";
    e["files"] = {{"scene", {{"path", stem + ".json"}, {"hash", file_hash(scene_bytes)}}},
                  {"cloud", {{"path", stem + ".cloud"}, {"hash", file_hash(cloud_bytes)}}}};
    files.emplace_back(stem + ".json", std::move(scene_bytes));
    files.emplace_back(stem + ".cloud", std::move(cloud_bytes));
    scenes.push_back(std::move(e));
  }
  manifest["scenes"] = std::move(scenes);
  json seqs = json::array();
  for (const auto& s : data.sequences) {
    const std::string dir = sequence_dir(s.id);
    auto imu_bytes = motion::imu_to_bytes(s.imu);
    auto label_bytes = text_bytes(motion::labels_to_csv(s.labels));
    json e;
    e["id"] = s.id;
    e["scene"] = s.scene;
    e["split"] = s.split;
    e["participant"] = s.participant;
    e["seed"] = s.seed;
    e["files"] = {{"imu", {{"path", dir + "/imu.bin"}, {"hash", file_hash(imu_bytes)}}},
                  {"labels", {{"path", dir + "/labels.csv"}, {"hash", file_hash(label_bytes)}}}};
    files.emplace_back(dir + "/imu.bin", std::move(imu_bytes));
    files.emplace_back(dir + "/labels.csv", std::move(label_bytes));
    seqs.push_back(std::move(e));
  }
  manifest["sequences"] = std::move(seqs);
  return files;
}

}  // namespace

void write_dataset(const Dataset& data, const fs::path& dir, bool force) {
  std::error_code ec;
  if (fs::exists(dir, ec) && !fs::is_empty(dir, ec)) {
    if (!force) throw InvalidArgument("output directory " + dir.string() + " is not empty (use --force to overwrite)");
    fs::remove_all(dir, ec);
    if (ec) throw IoError("cannot clear " + dir.string() + ": " + ec.message());
  }
  json manifest;
  auto files = serialize(data, manifest);
  fs::create_directories(dir / "scenes", ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  for (const auto& [rel, bytes] : files) {
    fs::create_directories((dir / rel).parent_path(), ec);
    io::write_file(dir / rel, bytes);
  }
  io::write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

Dataset load_dataset(const fs::path& dir) {
  const fs::path mpath = dir / "manifest.json";
  if (!fs::exists(mpath)) throw DataError("manifest error: " + mpath.string() + " not found");
  json m;
  try {
    m = json::parse(io::read_text(mpath));
  } catch (const json::exception& e) {
    throw DataError("manifest error: " + mpath.string() + " is not valid JSON (" + e.what() + ")");
  }
  Dataset data;
  auto read_checked = [&](const json& f) {
    const std::string rel = f.at("path").get<std::string>();
    if (!fs::exists(dir / rel)) throw DataError("dataset file " + rel + " is missing");
    auto bytes = io::read_file(dir / rel);
    if (file_hash(bytes) != f.at("hash").get<std::string>()) {
      throw DataError("dataset file " + rel + " does not match its manifest hash");
    }
    return bytes;
  };
  try {
    if (m.at("format_version").get<int>() != kManifestVersion) {
      throw DataError("manifest error: unsupported format version " + m.at("format_version").dump());
    }
    try {
      data.config = config_from_json(m.at("config").dump());
    } catch (const ConfigError& e) {
      throw DataError(std::string("manifest error: embedded config is invalid: ") + e.what());
    }
    data.data_hash = m.at("data_hash").get<std::string>();
    if (data.data_hash != data_hash(data.config)) throw DataError("manifest error: data hash does not match config");
    for (const auto& e : m.at("scenes")) {
      SceneEntry s;
      s.id = e.at("id").get<int>();
      s.seed = e.at("seed").get<std::uint64_t>();
      s.unseen = e.at("split").get<std::string>() == "unseen";
      auto sb = read_checked(e.at("files").at("scene"));
      s.scene = world::scene_from_json(std::string(sb.begin(), sb.end()));
      s.cloud = world::cloud_from_bytes(read_checked(e.at("files").at("cloud")), s.scene.extent);
      if (s.id != static_cast<int>(data.scenes.size())) throw DataError("manifest error: scene ids out of order");
      data.scenes.push_back(std::move(s));
    }
    for (const auto& e : m.at("sequences")) {
      SequenceEntry s;
      s.id = e.at("id").get<int>();
      s.scene = e.at("scene").get<int>();
      s.split = e.at("split").get<std::string>();
      s.participant = e.at("participant").get<int>();
      s.seed = e.at("seed").get<std::uint64_t>();
      if (s.scene < 0 || s.scene >= static_cast<int>(data.scenes.size())) {
        throw DataError("manifest error: sequence " + std::to_string(s.id) + " names an unknown scene");
      }
      if (s.split != kTrain && s.split != kTestSeen && s.split != kTestUnseen) {
        throw DataError("manifest error: unknown split '" + s.split + "'");
      }
      s.imu = motion::imu_from_bytes(read_checked(e.at("files").at("imu")));
      auto lb = read_checked(e.at("files").at("labels"));
      s.labels = motion::labels_from_csv(std::string(lb.begin(), lb.end()));
      data.sequences.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("manifest error: ") + e.what());
  }
  return data;
}

std::string directory_checksum(const fs::path& dir) {
  std::vector<fs::path> paths;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) paths.push_back(fs::relative(e.path(), dir));
  }
  std::sort(paths.begin(), paths.end());
  std::uint64_t h = io::kFnvOffset;
  for (const auto& p : paths) {
    h = io::fnv1a64(p.generic_string(), h);
    auto bytes = io::read_file(dir / p);
    h = io::fnv1a64(bytes.data(), bytes.size(), h);
  }
  return io::hex64(h);
}

}  // namespace egoloc::pipeline
