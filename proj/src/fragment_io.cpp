#include <array>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "fragq/errors.hpp"
#include "fragq/sampling.hpp"

namespace fragq {
namespace {

constexpr std::array<char, 8> kMagic = {'F', 'R', 'G', 'Q', 'F', 'R', 'G', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& os, T v) {
  using U = std::make_unsigned_t<T>;
  const U u = static_cast<U>(v);
  unsigned char b[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  using U = std::make_unsigned_t<T>;
  unsigned char b[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(b), sizeof(T)))
    throw DecodeError("truncated fragment batch");
  U u = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<U>(static_cast<U>(b[i]) << (8 * i));
  return static_cast<T>(u);
}

std::uint32_t get_count(std::istream& is, std::uint32_t limit) {
  const auto n = get<std::uint32_t>(is);
  if (n > limit) throw DecodeError("implausible table size in fragment batch");
  return n;
}

}  // namespace

void write_fragments(std::ostream& os, const FragmentBatch& b) {
  const SamplingPlan& p = b.plan;
  os.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(os, kVersion);
  put<std::uint8_t>(os, static_cast<std::uint8_t>(b.variant));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(b.frames));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(p.grids));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(p.patch));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(b.channels));
  put<std::uint64_t>(os, p.seed);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(b.side));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(p.frame_height));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(p.frame_width));
  put<std::uint8_t>(os, p.temporally_aligned ? 1 : 0);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(p.grid_bounds.size()));
  for (const Rect& r : p.grid_bounds) {
    put<std::int32_t>(os, r.row0);
    put<std::int32_t>(os, r.row1);
    put<std::int32_t>(os, r.col0);
    put<std::int32_t>(os, r.col1);
  }
  put<std::uint32_t>(os, static_cast<std::uint32_t>(p.offsets.size()));
  for (const Offset& o : p.offsets) {
    put<std::int32_t>(os, o.row);
    put<std::int32_t>(os, o.col);
  }
  put<std::uint32_t>(os, static_cast<std::uint32_t>(p.splice_order.size()));
  for (int s : p.splice_order) put<std::int32_t>(os, s);
  os.write(reinterpret_cast<const char*>(b.data.data()), static_cast<std::streamsize>(b.data.size()));
  if (!os) throw IoError("failed to write fragment batch");
}

FragmentBatch read_fragments(std::istream& is) {
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) throw DecodeError("not a fragment batch");
  if (get<std::uint32_t>(is) != kVersion) throw DecodeError("unsupported fragment batch version");
  FragmentBatch b;
  const auto variant = get<std::uint8_t>(is);
  if (variant > static_cast<std::uint8_t>(Variant::crop)) throw DecodeError("unknown variant tag");
  b.variant = static_cast<Variant>(variant);
  b.frames = static_cast<int>(get<std::uint32_t>(is));
  b.plan.grids = static_cast<int>(get<std::uint32_t>(is));
  b.plan.patch = static_cast<int>(get<std::uint32_t>(is));
  b.channels = static_cast<int>(get<std::uint32_t>(is));
  b.plan.seed = get<std::uint64_t>(is);
  b.side = static_cast<int>(get<std::uint32_t>(is));
  b.plan.frame_height = static_cast<int>(get<std::uint32_t>(is));
  b.plan.frame_width = static_cast<int>(get<std::uint32_t>(is));
  b.plan.temporally_aligned = get<std::uint8_t>(is) != 0;
  constexpr std::uint32_t kLimit = 1u << 24;
  b.plan.grid_bounds.resize(get_count(is, kLimit));
  for (Rect& r : b.plan.grid_bounds) {
    r.row0 = get<std::int32_t>(is);
    r.row1 = get<std::int32_t>(is);
    r.col0 = get<std::int32_t>(is);
    r.col1 = get<std::int32_t>(is);
  }
  b.plan.offsets.resize(get_count(is, kLimit));
  for (Offset& o : b.plan.offsets) {
    o.row = get<std::int32_t>(is);
    o.col = get<std::int32_t>(is);
  }
  b.plan.splice_order.resize(get_count(is, kLimit));
  for (int& s : b.plan.splice_order) s = get<std::int32_t>(is);
  if (b.frames < 0 || b.side < 0 || b.channels < 0 || b.channels > 4)
    throw DecodeError("invalid fragment batch dimensions");
  b.data.resize(static_cast<std::size_t>(b.frames) * b.side * b.side * b.channels);
  if (!is.read(reinterpret_cast<char*>(b.data.data()), static_cast<std::streamsize>(b.data.size())))
    throw DecodeError("truncated fragment payload");
  return b;
}

void save_fragments(const std::string& path, const FragmentBatch& batch) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  write_fragments(out, batch);
}

FragmentBatch load_fragments(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DecodeError("cannot open " + path);
  return read_fragments(in);
}

}  // namespace fragq
