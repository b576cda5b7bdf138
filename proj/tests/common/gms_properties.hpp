#pragma once

// Structural checks of a GMS fragment batch against its source clip. Each
// returns an empty string on success, otherwise the first violation found.

#include <string>
#include <vector>

#include "fragq/sampling.hpp"

namespace fragq::test {

// Grid rectangles tile the frame: pairwise disjoint and covering every pixel.
inline std::string check_tiling(const std::vector<Rect>& rects, int h, int w) {
  std::vector<int> hits(static_cast<std::size_t>(h) * w, 0);
  for (const Rect& r : rects)
    for (int y = r.row0; y < r.row1; ++y)
      for (int x = r.col0; x < r.col1; ++x) {
        if (y < 0 || x < 0 || y >= h || x >= w) return "grid rect leaves the frame";
        ++hits[static_cast<std::size_t>(y) * w + x];
      }
  for (int c : hits)
    if (c != 1) return c == 0 ? "pixel not covered by any grid" : "grids overlap";
  return {};
}

inline std::string check_gms(const VideoClip& clip, const GridSpec& spec, const FragmentBatch& b) {
  const SamplingPlan& plan = b.plan;
  if (b.side != spec.side() || b.frames != clip.frames || b.channels != clip.channels) return "batch shape";
  if (!plan.temporally_aligned || plan.offsets.size() != static_cast<std::size_t>(plan.slots()))
    return "plan is not temporally aligned";
  if (auto e = check_tiling(plan.grid_bounds, clip.height, clip.width); !e.empty()) return e;
  for (int k = 0; k < plan.slots(); ++k) {
    // One patch per grid, fully inside it.
    const Rect g = plan.grid_bounds[static_cast<std::size_t>(k)];
    for (int t = 0; t < clip.frames; ++t) {
      const Rect s = plan.source_rect(t, k);
      if (s.row0 < g.row0 || s.col0 < g.col0 || s.row1 > g.row1 || s.col1 > g.col1) return "patch leaves its grid";
      if (s != plan.source_rect(0, k)) return "offsets differ between frames";
    }
    if (plan.splice_order[static_cast<std::size_t>(k)] != k) return "splice order is not grid order";
    // Bit-exact block copy at splice position k for every frame.
    const int r0 = (k / spec.grids) * spec.patch, c0 = (k % spec.grids) * spec.patch;
    const Rect s = plan.source_rect(0, k);
    for (int t = 0; t < clip.frames; ++t)
      for (int y = 0; y < spec.patch; ++y)
        for (int x = 0; x < spec.patch; ++x)
          for (int c = 0; c < clip.channels; ++c)
            if (b.at(t, r0 + y, c0 + x, c) != clip.at(t, s.row0 + y, s.col0 + x, c)) return "block copy mismatch";
  }
  return {};
}

}  // namespace fragq::test
