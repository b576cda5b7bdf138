#pragma once

#include <filesystem>
#include "json.hpp"

#include "fragq/fanet.hpp"

namespace fragq {

nlohmann::json config_to_json(const FanetConfig& cfg);
// ConfigError on missing or malformed fields.
FanetConfig config_from_json(const nlohmann::json& j);

// Single-file checkpoint (little endian):
//   8 bytes magic "FRGQCKPT", u32 version (1), u64 header length N,
//   N bytes JSON header {"config": {...}, "tensors": [{"name", "rows", "cols"}...], "extra": {...}},
//   then every tensor's values as f64, in header order, row-major.
void save_checkpoint(const std::filesystem::path& path, const Fanet& model,
                     const nlohmann::json& extra = nlohmann::json::object());

struct LoadedCheckpoint {
  Fanet model;
  nlohmann::json extra;
};

// DecodeError on a malformed file. The stored tensors must match the
// parameters implied by the stored config exactly; otherwise ConfigError with
// a per-parameter diff.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

// Loads the tensors of `path` into an existing model, rejecting any name or
// shape difference with the same diff report.
void load_parameters(const std::filesystem::path& path, Fanet& model);

}  // namespace fragq
