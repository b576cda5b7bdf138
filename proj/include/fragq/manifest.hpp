#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace fragq {

// Dataset manifest, a UTF-8 text file:
//
//   # fragq-manifest v1
//   <path>\t<mos>\t<split>
//   ...
//
// Lines starting with '#' are comments; the first must be the version line.
// Relative paths are resolved against the manifest's directory. mos is printed
// with 17 significant digits so values round-trip exactly.
struct ManifestEntry {
  std::string path;
  double mos = 0;
  std::string split;

  bool operator==(const ManifestEntry&) const = default;
};

struct Manifest {
  std::filesystem::path base_dir;
  std::vector<ManifestEntry> entries;

  std::filesystem::path resolve(const ManifestEntry& e) const;
  std::vector<ManifestEntry> split(const std::string& name) const;
};

Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

struct SplitRatios {
  double train = 0.6;
  double val = 0.2;  // test gets the remainder
};

// Deterministic split assignment: ids are ordered by FNV-1a hash (ties by id),
// the first round(n * train) go to "train", the next round(n * val) to "val",
// the rest to "test". Returned in the order of `ids`.
std::vector<std::string> assign_splits(const std::vector<std::string>& ids, SplitRatios ratios = {});

}  // namespace fragq
