#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fragq/nn.hpp"

namespace fragq {

// (temporal, height, width) triple used for feature-map extents, window
// sizes, strides and coordinates.
struct Dims3 {
  int t = 1, h = 1, w = 1;

  std::int64_t volume() const { return static_cast<std::int64_t>(t) * h * w; }
  bool operator==(const Dims3&) const = default;
};

// Intra-patch gate over the flattened positions of one attention window:
// entry (i, j) is true iff positions i and j lie in the same fragment
// mini-patch. Membership is purely spatial.
struct GateMask {
  int size = 0;
  std::vector<std::uint8_t> bits;  // size x size, row-major

  bool operator()(int i, int j) const {
    return bits[static_cast<std::size_t>(i) * static_cast<std::size_t>(size) + static_cast<std::size_t>(j)] != 0;
  }
  bool all_true() const;
  bool all_false_off_diagonal() const;
};

// Gate from the absolute feature coordinates of each window position:
// same mini-patch iff (floor(h / side), floor(w / side)) agree.
GateMask gate_from_coords(std::span<const Dims3> coords, int minipatch_side);

// Gate for an unshifted window whose first position sits at `origin`.
GateMask build_gate_mask(Dims3 origin, Dims3 window, int minipatch_side);

// Rows of a relative-position bias table for windows up to `table_window`.
int bias_table_rows(Dims3 table_window);

// FRP index for every (i, j) pair of a `window` (row-major positions), into a
// table sized for `table_window` (componentwise >= window).
std::vector<int> relative_position_index(Dims3 window, Dims3 table_window);

// Learnable bias tables of one attention layer. Rows are relative positions,
// columns heads. `real` biases intra-patch pairs, `pseudo` cross-patch pairs.
struct BiasTables {
  nn::Mat real;
  nn::Mat pseudo;
  std::vector<int> index;  // positions x positions
  int positions = 0;
};

// B(i, j) = gate(i, j) ? real[FRP(i, j), head] : pseudo[FRP(i, j), head].
nn::Mat gated_bias(const nn::Mat& real, const nn::Mat& pseudo, std::span<const int> index, int positions,
                   int head, const GateMask& gate);

// out = row_softmax(q k^T * scale + bias) v. Optionally returns the
// probabilities for the backward pass.
nn::Mat attend(const nn::Mat& q, const nn::Mat& k, const nn::Mat& v, const nn::Mat& bias, double scale,
               nn::Mat* probs = nullptr);

struct AttendGrads {
  nn::Mat dq, dk, dv;
  nn::Mat dscores;  // gradient w.r.t. the pre-softmax scores (= w.r.t. the bias)
};
AttendGrads attend_backward(const nn::Mat& q, const nn::Mat& k, const nn::Mat& v, const nn::Mat& probs,
                            const nn::Mat& dout, double scale);

// Single-head gated relative-position-bias attention over one window:
//   softmax(q k^T / sqrt(d) + G * B_in + (1 - G) * B_cr) v.
nn::Mat grpb_attention(const nn::Mat& q, const nn::Mat& k, const nn::Mat& v, const BiasTables& tables,
                       int head, const GateMask& gate);

// Window layout of one attention block over a (t, h, w) token grid.
struct WindowGeometry {
  Dims3 grid;
  Dims3 window;  // effective (clipped to the grid)
  Dims3 shift;   // effective cyclic shift, 0 where the window spans the grid
  int minipatch_side = 1;
  std::vector<std::vector<int>> tokens;  // per window: token indices, window-position order
  std::vector<GateMask> gates;
  std::vector<nn::Mat> shift_masks;      // per window; empty when no shift
  std::vector<int> rel_index;            // shared by all windows

  int positions() const { return static_cast<int>(window.volume()); }
};

// Window clipping follows the video windowed-attention convention: where the
// grid extent is <= the configured window, the window spans the whole extent
// and that axis is not shifted. Shifted blocks use configured_window / 2.
// ConfigError when a grid extent is not divisible by its effective window.
WindowGeometry make_window_geometry(Dims3 grid, Dims3 configured_window, bool shifted, int minipatch_side,
                                    const std::string& where = {});

Dims3 effective_window(Dims3 grid, Dims3 configured_window);

// Multi-head window self-attention with gated relative position biases.
// With `gated` false it reduces to standard relative-position-bias attention
// using the real table for every pair.
class WindowAttention {
 public:
  struct Cache {
    nn::Mat x;
    nn::Mat qkv;
    nn::Mat context;
    std::vector<nn::Mat> probs;  // window-major, then head
  };

  WindowAttention() = default;
  WindowAttention(const std::string& name, int dim, int heads, Dims3 table_window);

  nn::Mat forward(const nn::Mat& x, const WindowGeometry& geo, bool gated, Cache* cache,
                  nn::MacTally* t = nullptr) const;
  nn::Mat backward(const nn::Mat& dy, const WindowGeometry& geo, bool gated, const Cache& cache);
  void collect(std::vector<nn::Param*>& out);

  int dim() const { return dim_; }
  int heads() const { return heads_; }

  nn::Linear qkv;
  nn::Linear proj;
  nn::Param real_table;
  nn::Param pseudo_table;

 private:
  std::string name_;
  int dim_ = 0;
  int heads_ = 1;
};

}  // namespace fragq
