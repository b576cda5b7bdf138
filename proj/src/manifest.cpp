#include "fragq/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "fragq/errors.hpp"
#include "fragq/rng.hpp"

namespace fragq {

namespace {
constexpr const char* kManifestHeader = "# fragq-manifest v1";
}

std::filesystem::path Manifest::resolve(const ManifestEntry& e) const {
  std::filesystem::path p(e.path);
  return p.is_absolute() ? p : base_dir / p;
}

std::vector<ManifestEntry> Manifest::split(const std::string& name) const {
  std::vector<ManifestEntry> out;
  std::copy_if(entries.begin(), entries.end(), std::back_inserter(out),
               [&](const ManifestEntry& e) { return e.split == name; });
  return out;
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  Manifest m;
  m.base_dir = path.parent_path();
  std::string line;
  if (!std::getline(in, line) || line != kManifestHeader)
    throw DecodeError("manifest " + path.string() + " lacks the '" + kManifestHeader + "' header");
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    ManifestEntry e;
    std::string mos;
    if (!std::getline(fields, e.path, '\t') || !std::getline(fields, mos, '\t') ||
        !std::getline(fields, e.split))
      throw DecodeError("manifest " + path.string() + ":" + std::to_string(lineno) +
                        ": expected <path>\\t<mos>\\t<split>");
    try {
      std::size_t used = 0;
      e.mos = std::stod(mos, &used);
      if (used != mos.size()) throw std::invalid_argument(mos);
    } catch (const std::exception&) {
      throw DecodeError("manifest " + path.string() + ":" + std::to_string(lineno) +
                        ": invalid mos '" + mos + "'");
    }
    m.entries.push_back(std::move(e));
  }
  return m;
}

void write_manifest(const std::filesystem::path& path, const Manifest& manifest) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest " + path.string());
  out << kManifestHeader << '\n';
  char buf[64];
  for (const auto& e : manifest.entries) {
    std::snprintf(buf, sizeof buf, "%.17g", e.mos);
    out << e.path << '\t' << buf << '\t' << e.split << '\n';
  }
}

std::vector<std::string> assign_splits(const std::vector<std::string>& ids, SplitRatios ratios) {
  if (ratios.train < 0 || ratios.val < 0 || ratios.train + ratios.val > 1.0)
    throw ConfigError("split ratios must be non-negative and sum to at most 1");
  const std::size_t n = ids.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto ha = fnv1a(ids[a]), hb = fnv1a(ids[b]);
    return ha != hb ? ha < hb : ids[a] < ids[b];
  });
  const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios.train));
  const auto n_val = std::min(n - n_train,
                              static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios.val)));
  std::vector<std::string> out(n);
  for (std::size_t r = 0; r < n; ++r)
    out[order[r]] = r < n_train ? "train" : (r < n_train + n_val ? "val" : "test");
  return out;
}

}  // namespace fragq
