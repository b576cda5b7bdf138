#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace fragq {

// A decoded frame stack. Pixels are 8-bit, stored row-major as (t, y, x, c).
// Conversion to normalized reals happens only at the network input.
struct VideoClip {
  int frames = 0;
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;
  double fps = 30.0;
  std::string source_id;

  VideoClip() = default;
  VideoClip(int t, int h, int w, int c, std::string id = {});

  std::size_t frame_size() const {
    return static_cast<std::size_t>(height) * width * channels;
  }
  std::size_t index(int t, int y, int x, int c) const {
    return ((static_cast<std::size_t>(t) * height + y) * width + x) * channels + c;
  }
  std::uint8_t at(int t, int y, int x, int c) const { return pixels[index(t, y, x, c)]; }
  std::uint8_t& at(int t, int y, int x, int c) { return pixels[index(t, y, x, c)]; }

  std::span<const std::uint8_t> frame(int t) const {
    return {pixels.data() + static_cast<std::size_t>(t) * frame_size(), frame_size()};
  }
  std::span<std::uint8_t> frame(int t) {
    return {pixels.data() + static_cast<std::size_t>(t) * frame_size(), frame_size()};
  }

  // Throws ContractError if dimensions and payload disagree.
  void validate() const;
};

// Raw interchange format (extension .fvc):
//   8 bytes  magic "FRGQCLP1"
//   4 x u32  T, H, W, C          (little endian)
//   f64      fps                 (little endian IEEE-754)
//   T*H*W*C  u8 payload, row-major (t, y, x, c)
void save_clip(const std::filesystem::path& path, const VideoClip& clip);

// Decodes a .fvc raw clip or a YUV4MPEG2 (.y4m, 8-bit 4:2:0 / 4:4:4 / mono)
// stream converted to RGB. source_id is the file stem.
VideoClip load_clip(const std::filesystem::path& path);

// Frame indices round(k * (src - 1) / (count - 1)), k = 0..count-1, with
// ties rounded up. Repeats indices when src < count.
std::vector<int> frame_indices(int source_frames, int count);

VideoClip select_frames(const VideoClip& clip, int count);

}  // namespace fragq
