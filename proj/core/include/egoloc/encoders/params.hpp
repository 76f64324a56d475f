#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "egoloc/numerics/graph.hpp"
#include "egoloc/rng.hpp"

namespace egoloc::enc {

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialised parameter.
num::Parameter init_param(std::string name, num::Shape shape, std::int64_t fan_in, Rng& rng);

std::int64_t param_count(const std::vector<num::Parameter>& params);
/// FNV-1a over names, shapes and the exact double values.
std::uint64_t checksum(const std::vector<num::Parameter>& params);
/// Rounds every value to the nearest float, so a float32 round trip is exact.
void round_to_float(std::vector<num::Parameter>& params);
std::vector<num::Parameter*> pointers(std::vector<num::Parameter>& params);

/// Persisted parameter set: a JSON header followed by a float32 blob.
///
///   bytes 0..7    magic "EGLCKPT1"
///   bytes 8..15   uint64 LE header length H
///   next H bytes  UTF-8 JSON header {format_version, kind, module_versions,
///                 params: [{name, shape}], config, extra}
///   remainder     float32 LE values of each param in header order
struct Checkpoint {
  std::string kind;
  std::string config_json = "{}";
  std::string extra_json = "{}";
  std::vector<num::Parameter> params;
};

inline constexpr int kCheckpointFormatVersion = 1;

std::vector<char> checkpoint_to_bytes(const Checkpoint& ckpt);
Checkpoint checkpoint_from_bytes(const std::vector<char>& bytes);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies values for every name in `dst` from `src`; throws CompatibilityError
/// when a name is missing or a shape differs.
void assign_params(std::vector<num::Parameter>& dst, const std::vector<num::Parameter>& src,
                   const std::string& prefix = "");

}  // namespace egoloc::enc
