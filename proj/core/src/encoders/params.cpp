#include "egoloc/encoders/params.hpp"

#include <cmath>
#include <cstring>
#include <nlohmann/json.hpp>

#include "egoloc/error.hpp"
#include "egoloc/io.hpp"

namespace egoloc::enc {

using nlohmann::json;

namespace {
constexpr char kMagic[8] = {'E', 'G', 'L', 'C', 'K', 'P', 'T', '1'};
}

num::Parameter init_param(std::string name, num::Shape shape, std::int64_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  num::Parameter p{std::move(name), num::Tensor(std::move(shape), 0.0), {}};
  for (auto& v : p.value.data()) v = uniform(rng, -bound, bound);
  return p;
}

std::int64_t param_count(const std::vector<num::Parameter>& params) {
  std::int64_t n = 0;
  for (const auto& p : params) n += p.value.size();
  return n;
}

std::uint64_t checksum(const std::vector<num::Parameter>& params) {
  std::uint64_t h = io::kFnvOffset;
  for (const auto& p : params) {
    h = io::fnv1a64(p.name, h);
    for (auto d : p.value.shape()) h = io::fnv1a64(&d, sizeof(d), h);
    h = io::fnv1a64(p.value.ptr(), sizeof(double) * static_cast<std::size_t>(p.value.size()), h);
  }
  return h;
}

void round_to_float(std::vector<num::Parameter>& params) {
  for (auto& p : params) {
    for (auto& v : p.value.data()) v = static_cast<double>(static_cast<float>(v));
  }
}

std::vector<num::Parameter*> pointers(std::vector<num::Parameter>& params) {
  std::vector<num::Parameter*> out;
  for (auto& p : params) out.push_back(&p);
  return out;
}

std::vector<char> checkpoint_to_bytes(const Checkpoint& ckpt) {
  json h;
  h["format_version"] = kCheckpointFormatVersion;
  h["kind"] = ckpt.kind;
  h["module_versions"] = {{"encoders", 1}, {"stage1", 1}, {"stage2", 1}, {"baselines", 1}};
  h["params"] = json::array();
  for (const auto& p : ckpt.params) h["params"].push_back({{"name", p.name}, {"shape", p.value.shape()}});
  h["config"] = json::parse(ckpt.config_json);
  h["extra"] = json::parse(ckpt.extra_json);
  const std::string header = h.dump();

  std::vector<char> buf(kMagic, kMagic + 8);
  io::put<std::uint64_t>(buf, header.size());
  buf.insert(buf.end(), header.begin(), header.end());
  for (const auto& p : ckpt.params) {
    for (double v : p.value.data()) io::put<float>(buf, static_cast<float>(v));
  }
  return buf;
}

Checkpoint checkpoint_from_bytes(const std::vector<char>& bytes) {
  io::Reader r(bytes, "checkpoint");
  if (r.bytes(8) != std::string(kMagic, 8)) throw DataError("checkpoint: bad magic");
  const auto hlen = r.get<std::uint64_t>();
  if (hlen > r.remaining()) throw DataError("checkpoint: header length exceeds file size");
  Checkpoint c;
  try {
    json h = json::parse(r.bytes(hlen));
    if (h.at("format_version").get<int>() != kCheckpointFormatVersion) {
      throw CompatibilityError("checkpoint: unsupported format version " + h.at("format_version").dump());
    }
    c.kind = h.at("kind").get<std::string>();
    c.config_json = h.at("config").dump();
    c.extra_json = h.at("extra").dump();
    for (const auto& pj : h.at("params")) {
      num::Shape shape = pj.at("shape").get<num::Shape>();
      for (auto d : shape) {
        if (d <= 0) throw DataError("checkpoint: non-positive extent in '" + pj.at("name").get<std::string>() + "'");
      }
      c.params.push_back({pj.at("name").get<std::string>(), num::Tensor(shape, 0.0), {}});
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint: malformed header: ") + e.what());
  }
  std::size_t need = 0;
  for (const auto& p : c.params) need += static_cast<std::size_t>(p.value.size()) * 4;
  if (r.remaining() != need) {
    throw DataError("checkpoint: payload has " + std::to_string(r.remaining()) + " bytes, header implies " +
                    std::to_string(need));
  }
  for (auto& p : c.params) {
    for (auto& v : p.value.data()) v = static_cast<double>(r.get<float>());
  }
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  io::write_file(path, checkpoint_to_bytes(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return checkpoint_from_bytes(io::read_file(path)); }

void assign_params(std::vector<num::Parameter>& dst, const std::vector<num::Parameter>& src,
                   const std::string& prefix) {
  for (auto& d : dst) {
    const num::Parameter* hit = nullptr;
    for (const auto& s : src) {
      if (s.name == prefix + d.name) hit = &s;
    }
    if (hit == nullptr) throw CompatibilityError("checkpoint lacks parameter '" + prefix + d.name + "'");
    if (hit->value.shape() != d.value.shape()) {
      throw CompatibilityError("parameter '" + d.name + "' has shape " + num::to_string(hit->value.shape()) +
                               " in checkpoint, expected " + num::to_string(d.value.shape()));
    }
    d.value = hit->value;
  }
}

}  // namespace egoloc::enc
