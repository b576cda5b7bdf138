#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fragq/media.hpp"

namespace fragq {

// Fragment geometry: `grids` x `grids` cells, one `patch` x `patch`
// mini-patch per cell, `frames` temporal samples.
struct GridSpec {
  int grids = 7;
  int patch = 32;
  int frames = 32;

  int side() const { return grids * patch; }
  void validate() const;  // ConfigError unless all fields >= 1
};

// Half-open pixel rectangle [row0, row1) x [col0, col1).
struct Rect {
  int row0 = 0, row1 = 0, col0 = 0, col1 = 0;

  int height() const { return row1 - row0; }
  int width() const { return col1 - col0; }
  bool operator==(const Rect&) const = default;
};

struct Offset {
  int row = 0, col = 0;
  bool operator==(const Offset&) const = default;
};

enum class Variant { gms, random_minipatch, shuffled, unaligned, resize, crop };

std::string_view variant_name(Variant v);
Variant parse_variant(std::string_view name);  // ConfigError on unknown names
std::vector<Variant> all_variants();

// Realization of the sampling operator. Slot k (row-major over
// `grids` x `grids`) reads the `patch` x `patch` region
//   grid_bounds[k] shifted by offsets[f * grids^2 + k]
// where f = 0 for temporally aligned plans and f = t otherwise. Splice
// position p holds the patch of slot splice_order[p].
struct SamplingPlan {
  int grids = 0;
  int patch = 0;
  int frame_height = 0;
  int frame_width = 0;
  bool temporally_aligned = true;
  std::uint64_t seed = 0;
  std::vector<Rect> grid_bounds;
  std::vector<Offset> offsets;
  std::vector<int> splice_order;

  bool empty() const { return grids == 0; }
  int slots() const { return grids * grids; }
  const Offset& offset(int frame, int slot) const;
  Rect source_rect(int frame, int slot) const;
  // Source rectangle of the patch spliced at position p.
  Rect spliced_source_rect(int frame, int position) const;

  bool operator==(const SamplingPlan&) const = default;
};

struct FragmentBatch {
  Variant variant = Variant::gms;
  int frames = 0;
  int side = 0;
  int channels = 0;
  std::vector<std::uint8_t> data;  // (t, y, x, c)
  SamplingPlan plan;

  std::size_t index(int t, int y, int x, int c) const {
    return ((static_cast<std::size_t>(t) * side + y) * side + x) * channels + c;
  }
  std::uint8_t at(int t, int y, int x, int c) const { return data[index(t, y, x, c)]; }

  bool operator==(const FragmentBatch&) const = default;
};

// Uniform grid partition with floored endpoints:
//   rect(i, j) = [floor(i H / G), floor((i+1) H / G)) x [floor(j W / G), floor((j+1) W / G)).
// PartitionError if G < 1 or G > min(H, W).
std::vector<Rect> partition_grids(int height, int width, int grids);

// One uniform offset per grid, drawn in row-major grid order from Rng(seed).
// InfeasibleError naming the first grid smaller than patch x patch.
SamplingPlan make_plan(const std::vector<Rect>& rects, int grids, int patch, std::uint64_t seed);

// Splices the plan's patches of every frame into a (T, G*S, G*S, C) mosaic.
// ContractError when the plan does not match the spec or the clip.
FragmentBatch extract_fragments(const VideoClip& clip, const SamplingPlan& plan, const GridSpec& spec);

struct SamplerOptions {
  // When a grid is smaller than the mini-patch, bilinearly enlarge the frame
  // (aspect preserved) until every grid admits one, instead of failing.
  bool pre_upscale = false;
};

// Smallest frame (height, width) for which every grid admits a mini-patch.
std::pair<int, int> minimum_resolution(const GridSpec& spec);

// Grid Mini-patch Sampling: partition + aligned plan + splice.
FragmentBatch sample_gms(const VideoClip& clip, const GridSpec& spec, std::uint64_t seed,
                         SamplerOptions options = {});

// Ablations.
FragmentBatch variant_unaligned(const VideoClip& clip, const GridSpec& spec, std::uint64_t seed,
                                SamplerOptions options = {});
FragmentBatch variant_random_minipatches(const VideoClip& clip, const GridSpec& spec, std::uint64_t seed);
FragmentBatch variant_shuffled(const VideoClip& clip, const GridSpec& spec, std::uint64_t seed,
                               SamplerOptions options = {});
FragmentBatch variant_resize(const VideoClip& clip, int target_side);
FragmentBatch variant_crop(const VideoClip& clip, int target_side, std::uint64_t seed);

// Re-splices a GMS batch so that position p holds the patch previously at
// position permutation[p].
FragmentBatch shuffle_fragments(const FragmentBatch& gms, const std::vector<int>& permutation);

// Seeded permutation of 0..n-1 (Fisher-Yates over Rng).
std::vector<int> seeded_permutation(int n, std::uint64_t seed);

// Dispatches on `variant`; resize and crop use target side spec.side().
FragmentBatch sample(const VideoClip& clip, const GridSpec& spec, Variant variant, std::uint64_t seed,
                     SamplerOptions options = {});

// FragmentBatch binary format (little endian):
//   magic "FRGQFRG1", u32 version(1), u8 variant, u32 T, u32 G, u32 S, u32 C,
//   u64 seed, u32 side, u32 frame_h, u32 frame_w, u8 aligned,
//   u32 n_bounds, n_bounds x 4 x i32 (row0,row1,col0,col1),
//   u32 n_offsets, n_offsets x 2 x i32 (row,col),
//   u32 n_splice, n_splice x i32,
//   T*side*side*C u8 payload.
void write_fragments(std::ostream& os, const FragmentBatch& batch);
FragmentBatch read_fragments(std::istream& is);
void save_fragments(const std::string& path, const FragmentBatch& batch);
FragmentBatch load_fragments(const std::string& path);

}  // namespace fragq
