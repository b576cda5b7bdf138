#include "fragq/media.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <fstream>
#include <sstream>

#include "fragq/errors.hpp"

namespace fragq {
namespace {

constexpr std::array<char, 8> kClipMagic = {'F', 'R', 'G', 'Q', 'C', 'L', 'P', '1'};

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

bool get_u32(std::istream& is, std::uint32_t& v) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) return false;
  v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return true;
}

bool get_f64(std::istream& is, double& v) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) return false;
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  std::memcpy(&v, &bits, sizeof v);
  return true;
}

VideoClip load_raw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DecodeError("cannot open clip " + path.string());
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kClipMagic)
    throw DecodeError("bad magic in " + path.string());
  std::uint32_t t = 0, h = 0, w = 0, c = 0;
  double fps = 0;
  if (!get_u32(in, t) || !get_u32(in, h) || !get_u32(in, w) || !get_u32(in, c) || !get_f64(in, fps))
    throw DecodeError("truncated header in " + path.string());
  if (t == 0) throw EmptyClipError("clip has zero frames: " + path.string());
  if (h == 0 || w == 0 || c == 0 || c > 4)
    throw DecodeError("invalid dimensions in " + path.string());
  VideoClip clip(static_cast<int>(t), static_cast<int>(h), static_cast<int>(w),
                 static_cast<int>(c), path.stem().string());
  clip.fps = fps;
  if (!in.read(reinterpret_cast<char*>(clip.pixels.data()),
               static_cast<std::streamsize>(clip.pixels.size())))
    throw DecodeError("truncated payload in " + path.string());
  return clip;
}

std::uint8_t clamp_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(v + 0.5, 0.0, 255.0));
}

// YUV4MPEG2 reader: 8-bit, progressive, chroma 420*/444/mono.
VideoClip load_y4m(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DecodeError("cannot open clip " + path.string());
  std::string header;
  if (!std::getline(in, header) || header.rfind("YUV4MPEG2", 0) != 0)
    throw DecodeError("missing YUV4MPEG2 signature in " + path.string());

  int width = 0, height = 0;
  double fps = 30.0;
  std::string chroma = "420jpeg";
  std::istringstream tokens(header.substr(9));
  std::string tok;
  while (tokens >> tok) {
    switch (tok[0]) {
      case 'W': width = std::stoi(tok.substr(1)); break;
      case 'H': height = std::stoi(tok.substr(1)); break;
      case 'F': {
        const auto colon = tok.find(':');
        if (colon != std::string::npos) {
          const double num = std::stod(tok.substr(1, colon - 1));
          const double den = std::stod(tok.substr(colon + 1));
          if (den > 0) fps = num / den;
        }
        break;
      }
      case 'C': chroma = tok.substr(1); break;
      default: break;
    }
  }
  if (width <= 0 || height <= 0) throw DecodeError("missing W/H in y4m header of " + path.string());

  int cw = 0, ch = 0;
  if (chroma.rfind("420", 0) == 0) {
    cw = (width + 1) / 2;
    ch = (height + 1) / 2;
  } else if (chroma == "444") {
    cw = width;
    ch = height;
  } else if (chroma != "mono") {
    throw DecodeError("unsupported y4m chroma '" + chroma + "' in " + path.string());
  }

  const std::size_t luma = static_cast<std::size_t>(width) * height;
  const std::size_t plane = static_cast<std::size_t>(cw) * ch;
  std::vector<std::uint8_t> buf(luma + 2 * plane);
  std::vector<std::vector<std::uint8_t>> frames;
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("FRAME", 0) != 0) throw DecodeError("bad frame marker in " + path.string());
    if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
      throw DecodeError("truncated frame in " + path.string());
    std::vector<std::uint8_t> rgb(luma * 3);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const double Y = buf[static_cast<std::size_t>(y) * width + x];
        double U = 128, V = 128;
        if (cw > 0) {
          const std::size_t ci = static_cast<std::size_t>(y * ch / height) * cw + x * cw / width;
          U = buf[luma + ci];
          V = buf[luma + plane + ci];
        }
        // BT.601 full-range.
        const std::size_t o = (static_cast<std::size_t>(y) * width + x) * 3;
        rgb[o + 0] = clamp_u8(Y + 1.402 * (V - 128));
        rgb[o + 1] = clamp_u8(Y - 0.344136 * (U - 128) - 0.714136 * (V - 128));
        rgb[o + 2] = clamp_u8(Y + 1.772 * (U - 128));
      }
    }
    frames.push_back(std::move(rgb));
  }
  if (frames.empty()) throw EmptyClipError("clip has zero frames: " + path.string());

  VideoClip clip(static_cast<int>(frames.size()), height, width, 3, path.stem().string());
  clip.fps = fps;
  for (std::size_t t = 0; t < frames.size(); ++t)
    std::copy(frames[t].begin(), frames[t].end(), clip.frame(static_cast<int>(t)).begin());
  return clip;
}

}  // namespace

VideoClip::VideoClip(int t, int h, int w, int c, std::string id)
    : frames(t), height(h), width(w), channels(c),
      pixels(static_cast<std::size_t>(t) * h * w * c), source_id(std::move(id)) {}

void VideoClip::validate() const {
  if (frames < 1 || height < 1 || width < 1 || channels < 1)
    throw ContractError("clip '" + source_id + "' has non-positive dimensions");
  if (pixels.size() != static_cast<std::size_t>(frames) * frame_size())
    throw ContractError("clip '" + source_id + "' payload size does not match its dimensions");
}

void save_clip(const std::filesystem::path& path, const VideoClip& clip) {
  clip.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write clip " + path.string());
  out.write(kClipMagic.data(), kClipMagic.size());
  put_u32(out, static_cast<std::uint32_t>(clip.frames));
  put_u32(out, static_cast<std::uint32_t>(clip.height));
  put_u32(out, static_cast<std::uint32_t>(clip.width));
  put_u32(out, static_cast<std::uint32_t>(clip.channels));
  put_f64(out, clip.fps);
  out.write(reinterpret_cast<const char*>(clip.pixels.data()),
            static_cast<std::streamsize>(clip.pixels.size()));
  if (!out) throw IoError("short write to " + path.string());
}

VideoClip load_clip(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DecodeError("no such file: " + path.string());
  if (path.extension() == ".y4m") return load_y4m(path);
  return load_raw(path);
}

std::vector<int> frame_indices(int source_frames, int count) {
  if (count < 1) throw ContractError("frame count must be >= 1");
  if (source_frames < 1) throw EmptyClipError("cannot select frames from an empty clip");
  std::vector<int> idx(static_cast<std::size_t>(count), 0);
  if (count == 1) return idx;
  const long long span = source_frames - 1;
  const long long den = count - 1;
  for (int k = 0; k < count; ++k) {
    // round(k * span / den), ties up, in exact integer arithmetic.
    idx[static_cast<std::size_t>(k)] = static_cast<int>((2 * k * span + den) / (2 * den));
  }
  return idx;
}

VideoClip select_frames(const VideoClip& clip, int count) {
  clip.validate();
  const auto idx = frame_indices(clip.frames, count);
  VideoClip out(count, clip.height, clip.width, clip.channels, clip.source_id);
  out.fps = clip.fps;
  for (int k = 0; k < count; ++k) {
    const auto src = clip.frame(idx[static_cast<std::size_t>(k)]);
    std::copy(src.begin(), src.end(), out.frame(k).begin());
  }
  return out;
}

}  // namespace fragq
