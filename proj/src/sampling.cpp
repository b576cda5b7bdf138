#include "fragq/sampling.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "fragq/errors.hpp"
#include "fragq/image_ops.hpp"
#include "fragq/rng.hpp"

namespace fragq {
namespace {

constexpr std::array<std::pair<Variant, std::string_view>, 6> kVariantNames = {{
    {Variant::gms, "gms"},
    {Variant::random_minipatch, "random_minipatch"},
    {Variant::shuffled, "shuffled"},
    {Variant::unaligned, "unaligned"},
    {Variant::resize, "resize"},
    {Variant::crop, "crop"},
}};

std::string dims(int h, int w) { return std::to_string(h) + "x" + std::to_string(w); }

VideoClip upscale_clip(const VideoClip& clip, int out_h, int out_w) {
  VideoClip out(clip.frames, out_h, out_w, clip.channels, clip.source_id);
  out.fps = clip.fps;
  for (int t = 0; t < clip.frames; ++t) {
    const auto frame = resize_bilinear(clip.frame(t), clip.height, clip.width, clip.channels, out_h, out_w);
    std::copy(frame.begin(), frame.end(), out.frame(t).begin());
  }
  return out;
}

// Returns the clip to sample from: the input itself, or an enlarged copy when
// pre-upscaling is enabled and needed. Throws InfeasibleError otherwise.
const VideoClip& feasible_clip(const VideoClip& clip, const GridSpec& spec, SamplerOptions options,
                               std::optional<VideoClip>& storage) {
  const auto [min_h, min_w] = minimum_resolution(spec);
  if (clip.height >= min_h && clip.width >= min_w) return clip;
  if (!options.pre_upscale) {
    throw InfeasibleError("clip " + dims(clip.height, clip.width) + " is too small for " +
                          std::to_string(spec.grids) + "x" + std::to_string(spec.grids) + " grids of " +
                          std::to_string(spec.patch) + "px mini-patches; required minimum resolution " +
                          dims(min_h, min_w) + " (or enable pre-upscaling)");
  }
  const double scale = std::max(static_cast<double>(min_h) / clip.height,
                                static_cast<double>(min_w) / clip.width);
  const int h = std::max(min_h, static_cast<int>(std::ceil(clip.height * scale)));
  const int w = std::max(min_w, static_cast<int>(std::ceil(clip.width * scale)));
  storage = upscale_clip(clip, h, w);
  return *storage;
}

void check_clip_matches(const VideoClip& clip, const GridSpec& spec) {
  clip.validate();
  spec.validate();
  if (clip.frames != spec.frames)
    throw ContractError("clip has " + std::to_string(clip.frames) + " frames but the grid spec expects " +
                        std::to_string(spec.frames));
}

FragmentBatch splice(const VideoClip& clip, const SamplingPlan& plan, Variant variant) {
  FragmentBatch out;
  out.variant = variant;
  out.frames = clip.frames;
  out.side = plan.grids * plan.patch;
  out.channels = clip.channels;
  out.plan = plan;
  out.data.resize(static_cast<std::size_t>(out.frames) * out.side * out.side * out.channels);
  const std::size_t row_bytes = static_cast<std::size_t>(plan.patch) * clip.channels;
  for (int t = 0; t < clip.frames; ++t) {
    for (int p = 0; p < plan.slots(); ++p) {
      const Rect src = plan.spliced_source_rect(t, p);
      const int dst_row = (p / plan.grids) * plan.patch;
      const int dst_col = (p % plan.grids) * plan.patch;
      for (int y = 0; y < plan.patch; ++y)
        std::copy_n(&clip.pixels[clip.index(t, src.row0 + y, src.col0, 0)], row_bytes,
                    &out.data[out.index(t, dst_row + y, dst_col, 0)]);
    }
  }
  return out;
}

}  // namespace

void GridSpec::validate() const {
  if (grids < 1 || patch < 1 || frames < 1)
    throw ConfigError("grid spec needs grids, patch and frames >= 1 (got G=" + std::to_string(grids) +
                      ", S=" + std::to_string(patch) + ", T=" + std::to_string(frames) + ")");
}

std::string_view variant_name(Variant v) {
  for (const auto& [k, name] : kVariantNames)
    if (k == v) return name;
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  for (const auto& [k, n] : kVariantNames)
    if (n == name) return k;
  throw ConfigError("unknown sampler variant '" + std::string(name) +
                    "' (expected gms, random_minipatch, shuffled, unaligned, resize or crop)");
}

std::vector<Variant> all_variants() {
  std::vector<Variant> v;
  for (const auto& [k, name] : kVariantNames) v.push_back(k);
  return v;
}

const Offset& SamplingPlan::offset(int frame, int slot) const {
  const std::size_t f = temporally_aligned ? 0 : static_cast<std::size_t>(frame);
  return offsets.at(f * static_cast<std::size_t>(slots()) + static_cast<std::size_t>(slot));
}

Rect SamplingPlan::source_rect(int frame, int slot) const {
  const Rect& g = grid_bounds.at(static_cast<std::size_t>(slot));
  const Offset& o = offset(frame, slot);
  return {g.row0 + o.row, g.row0 + o.row + patch, g.col0 + o.col, g.col0 + o.col + patch};
}

Rect SamplingPlan::spliced_source_rect(int frame, int position) const {
  const int slot = splice_order.empty() ? position : splice_order.at(static_cast<std::size_t>(position));
  return source_rect(frame, slot);
}

std::vector<Rect> partition_grids(int height, int width, int grids) {
  if (grids < 1 || grids > std::min(height, width))
    throw PartitionError("cannot partition a " + dims(height, width) + " frame into " +
                         std::to_string(grids) + "x" + std::to_string(grids) + " grids");
  std::vector<Rect> rects;
  rects.reserve(static_cast<std::size_t>(grids) * grids);
  auto edge = [grids](int extent, int i) {
    return static_cast<int>(static_cast<long long>(i) * extent / grids);
  };
  for (int i = 0; i < grids; ++i)
    for (int j = 0; j < grids; ++j)
      rects.push_back({edge(height, i), edge(height, i + 1), edge(width, j), edge(width, j + 1)});
  return rects;
}

SamplingPlan make_plan(const std::vector<Rect>& rects, int grids, int patch, std::uint64_t seed) {
  if (grids < 1 || patch < 1 || rects.size() != static_cast<std::size_t>(grids) * grids)
    throw ContractError("make_plan: expected " + std::to_string(grids * grids) + " rectangles");
  for (std::size_t k = 0; k < rects.size(); ++k) {
    if (rects[k].height() < patch || rects[k].width() < patch)
      throw InfeasibleError("grid (" + std::to_string(k / grids) + "," + std::to_string(k % grids) +
                            ") is " + dims(rects[k].height(), rects[k].width()) + ", smaller than the " +
                            std::to_string(patch) + "x" + std::to_string(patch) + " mini-patch");
  }
  SamplingPlan plan;
  plan.grids = grids;
  plan.patch = patch;
  plan.frame_height = rects.back().row1;
  plan.frame_width = rects.back().col1;
  plan.seed = seed;
  plan.grid_bounds = rects;
  plan.splice_order.resize(rects.size());
  std::iota(plan.splice_order.begin(), plan.splice_order.end(), 0);
  Rng rng(seed);
  for (const Rect& r : rects) {
    const int row = static_cast<int>(rng.uniform_int(0, r.height() - patch));
    const int col = static_cast<int>(rng.uniform_int(0, r.width() - patch));
    plan.offsets.push_back({row, col});
  }
  return plan;
}

FragmentBatch extract_fragments(const VideoClip& clip, const SamplingPlan& plan, const GridSpec& spec) {
  check_clip_matches(clip, spec);
  if (plan.grids != spec.grids || plan.patch != spec.patch)
    throw ContractError("plan (G=" + std::to_string(plan.grids) + ", S=" + std::to_string(plan.patch) +
                        ") does not match grid spec (G=" + std::to_string(spec.grids) +
                        ", S=" + std::to_string(spec.patch) + ")");
  if (plan.frame_height != clip.height || plan.frame_width != clip.width)
    throw ContractError("plan was drawn for a " + dims(plan.frame_height, plan.frame_width) +
                        " frame, clip is " + dims(clip.height, clip.width));
  const std::size_t per_frame = static_cast<std::size_t>(plan.slots());
  if (plan.grid_bounds.size() != per_frame ||
      plan.offsets.size() != per_frame * (plan.temporally_aligned ? 1u : static_cast<std::size_t>(clip.frames)))
    throw ContractError("plan offset table does not match its grid count");
  for (int t = 0; t < (plan.temporally_aligned ? 1 : clip.frames); ++t)
    for (int k = 0; k < plan.slots(); ++k) {
      const Rect r = plan.source_rect(t, k);
      if (r.row0 < 0 || r.col0 < 0 || r.row1 > clip.height || r.col1 > clip.width)
        throw ContractError("plan patch " + std::to_string(k) + " leaves the frame");
    }
  return splice(clip, plan, Variant::gms);
}

std::pair<int, int> minimum_resolution(const GridSpec& spec) {
  spec.validate();
  return {spec.grids * spec.patch, spec.grids * spec.patch};
}

FragmentBatch sample_gms(const VideoClip& clip, const GridSpec& spec, std::uint64_t seed,
                         SamplerOptions options) {
  check_clip_matches(clip, spec);
  std::optional<VideoClip> storage;
  const VideoClip& src = feasible_clip(clip, spec, options, storage);
  const auto rects = partition_grids(src.height, src.width, spec.grids);
  return extract_fragments(src, make_plan(rects, spec.grids, spec.patch, seed), spec);
}

FragmentBatch variant_unaligned(const VideoClip& clip, const GridSpec& spec, std::uint64_t seed,
                                SamplerOptions options) {
  check_clip_matches(clip, spec);
  std::optional<VideoClip> storage;
  const VideoClip& src = feasible_clip(clip, spec, options, storage);
  SamplingPlan plan = make_plan(partition_grids(src.height, src.width, spec.grids), spec.grids, spec.patch, seed);
  // Frame 0 keeps the aligned draw; later frames continue the same stream.
  Rng rng(seed);
  plan.offsets.clear();
  plan.temporally_aligned = false;
  for (int t = 0; t < src.frames; ++t)
    for (const Rect& r : plan.grid_bounds) {
      const int row = static_cast<int>(rng.uniform_int(0, r.height() - spec.patch));
      const int col = static_cast<int>(rng.uniform_int(0, r.width() - spec.patch));
      plan.offsets.push_back({row, col});
    }
  return splice(src, plan, Variant::unaligned);
}

FragmentBatch variant_random_minipatches(const VideoClip& clip, const GridSpec& spec, std::uint64_t seed) {
  check_clip_matches(clip, spec);
  if (clip.height < spec.patch || clip.width < spec.patch)
    throw InfeasibleError("clip " + dims(clip.height, clip.width) + " is smaller than one " +
                          std::to_string(spec.patch) + "px mini-patch");
  SamplingPlan plan;
  plan.grids = spec.grids;
  plan.patch = spec.patch;
  plan.frame_height = clip.height;
  plan.frame_width = clip.width;
  plan.seed = seed;
  plan.grid_bounds.assign(static_cast<std::size_t>(plan.slots()), Rect{0, clip.height, 0, clip.width});
  plan.splice_order.resize(static_cast<std::size_t>(plan.slots()));
  std::iota(plan.splice_order.begin(), plan.splice_order.end(), 0);
  Rng rng(seed);
  for (int k = 0; k < plan.slots(); ++k) {
    const int row = static_cast<int>(rng.uniform_int(0, clip.height - spec.patch));
    const int col = static_cast<int>(rng.uniform_int(0, clip.width - spec.patch));
    plan.offsets.push_back({row, col});
  }
  return splice(clip, plan, Variant::random_minipatch);
}

std::vector<int> seeded_permutation(int n, std::uint64_t seed) {
  std::vector<int> perm(static_cast<std::size_t>(std::max(n, 0)));
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  for (int i = n - 1; i > 0; --i)
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(rng.uniform_int(0, i))]);
  return perm;
}

FragmentBatch shuffle_fragments(const FragmentBatch& gms, const std::vector<int>& permutation) {
  const SamplingPlan& plan = gms.plan;
  if (plan.empty() || permutation.size() != static_cast<std::size_t>(plan.slots()))
    throw ContractError("shuffle_fragments: permutation size must equal the slot count");
  std::vector<int> seen(permutation.size(), 0);
  for (int p : permutation) {
    if (p < 0 || p >= plan.slots() || seen[static_cast<std::size_t>(p)]++)
      throw ContractError("shuffle_fragments: not a permutation");
  }
  FragmentBatch out = gms;
  out.variant = Variant::shuffled;
  for (std::size_t p = 0; p < permutation.size(); ++p)
    out.plan.splice_order[p] = gms.plan.splice_order[static_cast<std::size_t>(permutation[p])];
  const std::size_t row_bytes = static_cast<std::size_t>(plan.patch) * gms.channels;
  for (int t = 0; t < gms.frames; ++t)
    for (int p = 0; p < plan.slots(); ++p) {
      const int q = permutation[static_cast<std::size_t>(p)];
      for (int y = 0; y < plan.patch; ++y)
        std::copy_n(&gms.data[gms.index(t, (q / plan.grids) * plan.patch + y, (q % plan.grids) * plan.patch, 0)],
                    row_bytes,
                    &out.data[out.index(t, (p / plan.grids) * plan.patch + y, (p % plan.grids) * plan.patch, 0)]);
    }
  return out;
}

FragmentBatch variant_shuffled(const VideoClip& clip, const GridSpec& spec, std::uint64_t seed,
                               SamplerOptions options) {
  const FragmentBatch gms = sample_gms(clip, spec, seed, options);
  return shuffle_fragments(gms, seeded_permutation(spec.grids * spec.grids, mix_seed(seed, 0x5bu)));
}

FragmentBatch variant_resize(const VideoClip& clip, int target_side) {
  clip.validate();
  if (target_side < 1) throw ConfigError("resize target side must be >= 1");
  FragmentBatch out;
  out.variant = Variant::resize;
  out.frames = clip.frames;
  out.side = target_side;
  out.channels = clip.channels;
  out.data.reserve(static_cast<std::size_t>(clip.frames) * target_side * target_side * clip.channels);
  for (int t = 0; t < clip.frames; ++t) {
    const auto f = resize_bilinear(clip.frame(t), clip.height, clip.width, clip.channels, target_side, target_side);
    out.data.insert(out.data.end(), f.begin(), f.end());
  }
  return out;
}

FragmentBatch variant_crop(const VideoClip& clip, int target_side, std::uint64_t seed) {
  clip.validate();
  if (target_side < 1) throw ConfigError("crop side must be >= 1");
  if (clip.height < target_side || clip.width < target_side)
    throw InfeasibleError("clip " + dims(clip.height, clip.width) + " is smaller than the " +
                          dims(target_side, target_side) + " crop");
  SamplingPlan plan;
  plan.grids = 1;
  plan.patch = target_side;
  plan.frame_height = clip.height;
  plan.frame_width = clip.width;
  plan.seed = seed;
  plan.grid_bounds = {Rect{0, clip.height, 0, clip.width}};
  plan.splice_order = {0};
  Rng rng(seed);
  const int row = static_cast<int>(rng.uniform_int(0, clip.height - target_side));
  const int col = static_cast<int>(rng.uniform_int(0, clip.width - target_side));
  plan.offsets = {{row, col}};
  return splice(clip, plan, Variant::crop);
}

FragmentBatch sample(const VideoClip& clip, const GridSpec& spec, Variant variant, std::uint64_t seed,
                     SamplerOptions options) {
  switch (variant) {
    case Variant::gms: return sample_gms(clip, spec, seed, options);
    case Variant::unaligned: return variant_unaligned(clip, spec, seed, options);
    case Variant::random_minipatch: return variant_random_minipatches(clip, spec, seed);
    case Variant::shuffled: return variant_shuffled(clip, spec, seed, options);
    case Variant::resize:
      check_clip_matches(clip, spec);
      return variant_resize(clip, spec.side());
    case Variant::crop:
      check_clip_matches(clip, spec);
      return variant_crop(clip, spec.side(), seed);
  }
  throw ContractError("unhandled sampler variant");
}

}  // namespace fragq
