#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "fragq/media.hpp"
#include "fragq/rng.hpp"

namespace fragq::test {

inline VideoClip random_clip(int t, int h, int w, int c, std::uint64_t seed, std::string id = "clip") {
  VideoClip clip(t, h, w, c, std::move(id));
  Rng rng(seed);
  for (auto& p : clip.pixels) p = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
  return clip;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("fragq_" + tag + "_" + std::to_string(fnv1a(tag) ^ static_cast<std::uint64_t>(::getpid())));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

}  // namespace fragq::test
