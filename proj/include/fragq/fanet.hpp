#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fragq/attention.hpp"
#include "fragq/nn.hpp"
#include "fragq/sampling.hpp"

namespace fragq {

inline constexpr int kStages = 4;

struct FanetConfig {
  std::string preset = "custom";
  int in_channels = 3;
  int embed_dim = 96;
  std::array<int, kStages> depths{2, 2, 6, 2};
  std::array<int, kStages> heads{3, 6, 12, 24};
  Dims3 window{8, 7, 7};
  Dims3 patch_stride{2, 4, 4};
  int mlp_ratio = 4;
  // Side of one fragment mini-patch in input pixels (S_f).
  int fragment_patch = 32;
  // Per-stage switch between gated biases and a single shared table.
  std::array<bool, kStages> grpb_stages{true, true, true, true};
  // Hidden width of the regression head; 0 means "last-stage channels".
  int head_hidden = 0;
  // LayerNorm after the patch projection.
  bool patch_norm = true;
  // LayerNorm on the last-stage features before the head.
  bool final_norm = true;
  // Weight init: "trunc_normal" (std 0.02) or "fan_in" (std 1/sqrt(fan in)).
  std::string init = "trunc_normal";
  // Patch projection start: "random" (as `init`) or "dct", a separable DCT
  // basis over (frame, row, column) times a luma/opponent colour basis,
  // lowest frequencies first, with the flat luma column zeroed. Columns
  // beyond the basis size stay random.
  std::string patch_init = "random";

  int channels(int stage) const { return embed_dim << stage; }
  int head_width() const { return head_hidden > 0 ? head_hidden : channels(kStages - 1); }
  // Cumulative spatial stride of a stage relative to the input.
  int spatial_stride(int stage) const { return patch_stride.h << stage; }
  // Mini-patch side in stage feature pixels: fragment_patch / spatial_stride.
  int minipatch_feature_side(int stage) const { return fragment_patch / spatial_stride(stage); }

  void validate() const;  // ConfigError on inconsistent fields

  bool operator==(const FanetConfig&) const = default;
};

// Windowed-attention backbone geometry of the standard fragment model
// (32 frames, 7x7 grids of 32 px): 4 stages, depths 2-2-6-2, window (8,7,7).
FanetConfig standard_preset();
// Lower-density variant: 16 frames, 4x4 grids, window (4,4,4).
FanetConfig mobile_preset();
// Desk-scale model for (8, 64, 64) fragments with G=2, S=32:
// embed 32, depths 1-1-1-1, heads 1-2-2-4, window (2,4,4).
FanetConfig tiny_preset();
// "standard", "mobile" or "tiny"; ConfigError otherwise.
FanetConfig preset_by_name(const std::string& name);

// Per-stage token grids for an input of `frames` x `side` x `side`.
// ConfigError listing every failing divisibility.
std::array<Dims3, kStages> stage_grids(const FanetConfig& cfg, int frames, int side);

struct QualityOutput {
  double score = 0;
  // (map_t, map_h, map_w) per-mini-patch scores, row-major.
  int map_t = 0, map_h = 0, map_w = 0;
  std::vector<double> quality_map;
  // Position-wise regressed values on the last-stage token grid.
  Dims3 regressed_grid;
  std::vector<double> regressed;
  // Geometry of the fragments that produced the map (may be empty).
  SamplingPlan plan;
  int temporal_stride = 1;  // input frames per map_t step
};

// Mean summed in ascending order, so any permutation of the input gives the
// identical result. The head's pooling uses this routine at both levels.
double pooled_mean(std::span<const double> values);

// Position-wise non-linear regression followed by pooling:
//   r = fc2(gelu(fc1(f)))  for every token,
//   map(cell) = mean of r over the tokens of the cell,
//   score = mean(map).
class QualityHead {
 public:
  struct Cache {
    nn::Mat x, pre, act;
    Dims3 grid;
    int minipatch_side = 1;
  };

  QualityHead() = default;
  QualityHead(const std::string& name, int in_channels, int hidden);

  // ContractError when the token grid is not divisible into mini-patch cells.
  QualityOutput forward(const nn::Mat& features, Dims3 grid, int minipatch_side, Cache* cache,
                        nn::MacTally* t = nullptr) const;
  // Accumulates grads; returns d loss / d features.
  nn::Mat backward(double dscore, const Cache& cache);
  void collect(std::vector<nn::Param*>& out);

  nn::Linear fc1;
  nn::Linear fc2;
};

// Functional form of the head used by tests and bindings.
QualityOutput ip_nlr_head(const QualityHead& head, const nn::Mat& features, Dims3 grid, int minipatch_side);

class SwinBlock {
 public:
  struct Cache {
    nn::LayerNorm::Cache n1, n2;
    WindowAttention::Cache attn;
    nn::Mat ln1, ln2, hidden_pre, hidden_act;
  };

  SwinBlock() = default;
  SwinBlock(const std::string& name, int dim, int heads, Dims3 window, int mlp_ratio);

  nn::Mat forward(const nn::Mat& x, const WindowGeometry& geo, bool gated, Cache* cache, nn::MacTally* t) const;
  nn::Mat backward(const nn::Mat& dy, const WindowGeometry& geo, bool gated, const Cache& cache);
  void collect(std::vector<nn::Param*>& out);

  nn::LayerNorm norm1;
  WindowAttention attn;
  nn::LayerNorm norm2;
  nn::Linear fc1;
  nn::Linear fc2;
};

// 2x2 spatial token merge -> LayerNorm(4C) -> Linear(4C, 2C, no bias).
class PatchMerging {
 public:
  struct Cache {
    nn::Mat gathered;
    nn::LayerNorm::Cache norm;
    nn::Mat normed;
    Dims3 grid;
  };

  PatchMerging() = default;
  PatchMerging(const std::string& name, int dim);

  nn::Mat forward(const nn::Mat& x, Dims3 grid, Cache* cache, nn::MacTally* t) const;
  nn::Mat backward(const nn::Mat& dy, const Cache& cache);
  void collect(std::vector<nn::Param*>& out);

  nn::LayerNorm norm;
  nn::Linear reduction;
};

// Non-overlapping (s_t, s_h, s_w) patches -> Linear -> LayerNorm.
class PatchEmbed {
 public:
  struct Cache {
    nn::Mat patches;
    nn::Mat projected;
    nn::LayerNorm::Cache norm;
  };

  PatchEmbed() = default;
  PatchEmbed(const std::string& name, int in_channels, int dim, Dims3 stride, bool use_norm = true);

  nn::Mat forward(const FragmentBatch& batch, Cache* cache, nn::MacTally* t) const;
  void backward(const nn::Mat& dy, const Cache& cache);
  void collect(std::vector<nn::Param*>& out);

  nn::Linear proj;
  nn::LayerNorm norm;
  bool use_norm = true;

 private:
  Dims3 stride_;
};

// Converts 8-bit pixels to per-channel normalized reals.
double normalize_pixel(std::uint8_t value, int channel, int channels);

struct ForwardTrace {
  PatchEmbed::Cache embed;
  std::array<PatchMerging::Cache, kStages> merges;
  std::array<std::vector<SwinBlock::Cache>, kStages> blocks;
  std::array<std::vector<WindowGeometry>, kStages> geometry;
  nn::LayerNorm::Cache final_norm;
  QualityHead::Cache head;
};

class Fanet {
 public:
  Fanet(const FanetConfig& cfg, std::uint64_t init_seed);

  const FanetConfig& config() const { return cfg_; }

  // Deterministic; fills `trace` for a later backward() when given.
  QualityOutput forward(const FragmentBatch& batch, ForwardTrace* trace = nullptr,
                        nn::MacTally* tally = nullptr) const;
  // Accumulates parameter gradients of (dscore * score).
  void backward(const ForwardTrace& trace, double dscore);

  std::vector<nn::Param*> parameters();
  std::vector<const nn::Param*> parameters() const;
  nn::Param* find(const std::string& name);
  void zero_grad();
  std::int64_t parameter_count() const;

 private:
  FanetConfig cfg_;
  PatchEmbed embed_;
  std::array<PatchMerging, kStages> merges_;  // merges_[0] unused
  std::array<std::vector<SwinBlock>, kStages> stages_;
  nn::LayerNorm final_norm_;
  QualityHead head_;
};

}  // namespace fragq
