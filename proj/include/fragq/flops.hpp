#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fragq/fanet.hpp"
#include "json.hpp"

namespace fragq {

inline constexpr const char* kFlopsSchema = "fragq.flops/1";

// Convention: one multiply-accumulate = one unit. Layer norms count one unit
// per element; activations, softmax and residual additions are not counted.
struct FlopsReport {
  std::vector<std::pair<std::string, std::int64_t>> layers;  // forward order
  std::int64_t total = 0;                                     // sum of layers
  int frames = 0, height = 0, width = 0, channels = 0;        // network input

  // Everything except the regression head.
  std::int64_t backbone() const;
  double giga() const { return static_cast<double>(total) * 1e-9; }
};

// Analytic count of one forward pass on a (frames, height, width, channels)
// input. Arbitrary sizes are handled the way windowed video backbones do:
// the input is padded to the patch stride, each stage's tokens are padded to
// a multiple of the (clipped) window for attention, and odd extents are
// padded before 2x2 merging. For inputs the model accepts without padding the
// per-layer entries equal those recorded by an instrumented forward pass.
FlopsReport flops_count(const FanetConfig& cfg, int frames, int height, int width, int channels = 3);

// Fragment input fixed by the sampler; the source resolution does not enter.
FlopsReport fragment_flops(const FanetConfig& cfg, const GridSpec& spec, int source_height, int source_width);

std::int64_t parameter_count(const FanetConfig& cfg);

nlohmann::json to_json(const FlopsReport& r);

}  // namespace fragq
