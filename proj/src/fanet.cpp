#include "fragq/fanet.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "fragq/errors.hpp"

namespace fragq {

using nn::Mat;

namespace {

std::string stage_name(int s) { return "stages." + std::to_string(s); }

}  // namespace

void FanetConfig::validate() const {
  std::string bad;
  auto fail = [&](const std::string& m) { bad += (bad.empty() ? "" : "; ") + m; };
  if (in_channels < 1 || in_channels > 4) fail("in_channels must be 1..4");
  if (embed_dim < 1) fail("embed_dim must be >= 1");
  if (mlp_ratio < 1) fail("mlp_ratio must be >= 1");
  if (window.t < 1 || window.h < 1 || window.w < 1) fail("window extents must be >= 1");
  if (patch_stride.t < 1 || patch_stride.h < 1 || patch_stride.w < 1) fail("patch strides must be >= 1");
  if (patch_stride.h != patch_stride.w) fail("spatial patch stride must be square");
  for (int s = 0; s < kStages; ++s) {
    if (depths[static_cast<std::size_t>(s)] < 1) fail("stage " + std::to_string(s) + " depth must be >= 1");
    const int h = heads[static_cast<std::size_t>(s)];
    if (h < 1 || channels(s) % h != 0)
      fail("stage " + std::to_string(s) + " channels " + std::to_string(channels(s)) +
           " not divisible by heads " + std::to_string(h));
  }
  if (fragment_patch < 1 || fragment_patch % spatial_stride(kStages - 1) != 0)
    fail("fragment patch " + std::to_string(fragment_patch) + " must be a multiple of the last-stage stride " +
         std::to_string(spatial_stride(kStages - 1)));
  if (init != "trunc_normal" && init != "fan_in") fail("init must be trunc_normal or fan_in, got '" + init + "'");
  if (patch_init != "random" && patch_init != "dct") fail("patch_init must be random or dct, got '" + patch_init + "'");
  if (!bad.empty()) throw ConfigError("invalid model config: " + bad);
}

FanetConfig standard_preset() {
  FanetConfig c;
  c.preset = "standard";
  return c;
}

FanetConfig mobile_preset() {
  FanetConfig c;
  c.preset = "mobile";
  c.window = {4, 4, 4};
  return c;
}

FanetConfig tiny_preset() {
  FanetConfig c;
  c.preset = "tiny";
  c.embed_dim = 32;
  c.depths = {1, 1, 1, 1};
  c.heads = {1, 2, 2, 4};
  c.window = {2, 4, 4};
  c.patch_norm = false;
  c.final_norm = false;
  c.init = "fan_in";
  c.patch_init = "dct";
  return c;
}

FanetConfig preset_by_name(const std::string& name) {
  if (name == "standard") return standard_preset();
  if (name == "mobile") return mobile_preset();
  if (name == "tiny") return tiny_preset();
  throw ConfigError("unknown model preset '" + name + "' (expected standard, mobile or tiny)");
}

std::array<Dims3, kStages> stage_grids(const FanetConfig& cfg, int frames, int side) {
  cfg.validate();
  std::string bad;
  auto fail = [&](const std::string& m) { bad += (bad.empty() ? "" : "; ") + m; };
  if (frames % cfg.patch_stride.t != 0)
    fail("frames " + std::to_string(frames) + " not divisible by temporal stride " +
         std::to_string(cfg.patch_stride.t));
  if (side % cfg.patch_stride.h != 0)
    fail("side " + std::to_string(side) + " not divisible by spatial stride " + std::to_string(cfg.patch_stride.h));
  std::array<Dims3, kStages> grids{};
  if (bad.empty()) {
    grids[0] = {frames / cfg.patch_stride.t, side / cfg.patch_stride.h, side / cfg.patch_stride.w};
    for (int s = 1; s < kStages; ++s) {
      const Dims3 prev = grids[static_cast<std::size_t>(s - 1)];
      if (prev.h % 2 != 0 || prev.w % 2 != 0)
        fail("stage " + std::to_string(s - 1) + " grid " + std::to_string(prev.h) + "x" + std::to_string(prev.w) +
             " cannot be 2x2-merged");
      grids[static_cast<std::size_t>(s)] = {prev.t, std::max(prev.h / 2, 1), std::max(prev.w / 2, 1)};
    }
    for (int s = 0; s < kStages && bad.empty(); ++s) {
      const Dims3 g = grids[static_cast<std::size_t>(s)];
      const Dims3 w = effective_window(g, cfg.window);
      if (g.t % w.t != 0 || g.h % w.h != 0 || g.w % w.w != 0)
        fail("stage " + std::to_string(s) + " grid (" + std::to_string(g.t) + "," + std::to_string(g.h) + "," +
             std::to_string(g.w) + ") not divisible by window (" + std::to_string(w.t) + "," +
             std::to_string(w.h) + "," + std::to_string(w.w) + ")");
    }
    const Dims3 last = grids[kStages - 1];
    const int mp = cfg.minipatch_feature_side(kStages - 1);
    if (bad.empty() && (last.h % mp != 0 || last.w % mp != 0))
      fail("last-stage grid " + std::to_string(last.h) + "x" + std::to_string(last.w) +
           " not divisible into mini-patch cells of " + std::to_string(mp));
  }
  if (!bad.empty()) throw ConfigError("input (" + std::to_string(frames) + "," + std::to_string(side) + "," +
                                      std::to_string(side) + ") incompatible with model: " + bad);
  return grids;
}

double pooled_mean(std::span<const double> values) {
  // Summing in sorted order makes the result independent of cell order.
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  double s = 0;
  for (double v : sorted) s += v;
  return s / static_cast<double>(sorted.size());
}

// ---------------------------------------------------------------------------
// QualityHead

QualityHead::QualityHead(const std::string& name, int in_channels, int hidden)
    : fc1(name + ".fc1", in_channels, hidden), fc2(name + ".fc2", hidden, 1) {}

QualityOutput QualityHead::forward(const Mat& features, Dims3 grid, int mp, Cache* cache, nn::MacTally* t) const {
  if (mp < 1 || grid.h % mp != 0 || grid.w % mp != 0)
    throw ContractError("quality head: grid " + std::to_string(grid.h) + "x" + std::to_string(grid.w) +
                        " not divisible into " + std::to_string(mp) + "-token mini-patch cells");
  if (features.rows() != grid.volume()) throw ContractError("quality head: feature rows do not match grid");
  const Mat pre = fc1.forward(features, t);
  const Mat act = nn::gelu(pre);
  const Mat r = fc2.forward(act, t);

  QualityOutput out;
  out.regressed_grid = grid;
  out.regressed.assign(r.data(), r.data() + r.size());
  out.map_t = grid.t;
  out.map_h = grid.h / mp;
  out.map_w = grid.w / mp;
  out.quality_map.resize(static_cast<std::size_t>(out.map_t) * out.map_h * out.map_w);
  std::vector<double> cell(static_cast<std::size_t>(mp) * mp);
  for (int ct = 0; ct < out.map_t; ++ct)
    for (int ci = 0; ci < out.map_h; ++ci)
      for (int cj = 0; cj < out.map_w; ++cj) {
        std::size_t k = 0;
        for (int y = 0; y < mp; ++y)
          for (int x = 0; x < mp; ++x)
            cell[k++] = out.regressed[static_cast<std::size_t>((ct * grid.h + ci * mp + y) * grid.w + cj * mp + x)];
        out.quality_map[static_cast<std::size_t>((ct * out.map_h + ci) * out.map_w + cj)] = pooled_mean(cell);
      }
  out.score = pooled_mean(out.quality_map);
  if (cache != nullptr) {
    cache->x = features;
    cache->pre = pre;
    cache->act = act;
    cache->grid = grid;
    cache->minipatch_side = mp;
  }
  return out;
}

Mat QualityHead::backward(double dscore, const Cache& cache) {
  const Dims3 g = cache.grid;
  const int mp = cache.minipatch_side;
  const double cells = static_cast<double>(g.t) * (g.h / mp) * (g.w / mp);
  // Every token belongs to exactly one equally sized cell.
  const double per_token = dscore / cells / static_cast<double>(mp * mp);
  const Mat dr = Mat::Constant(cache.x.rows(), 1, per_token);
  const Mat dact = fc2.backward(cache.act, dr);
  const Mat dpre = nn::gelu_backward(cache.pre, dact);
  return fc1.backward(cache.x, dpre);
}

void QualityHead::collect(std::vector<nn::Param*>& out) {
  fc1.collect(out);
  fc2.collect(out);
}

QualityOutput ip_nlr_head(const QualityHead& head, const Mat& features, Dims3 grid, int minipatch_side) {
  return head.forward(features, grid, minipatch_side, nullptr);
}

// ---------------------------------------------------------------------------
// SwinBlock

SwinBlock::SwinBlock(const std::string& name, int dim, int heads, Dims3 window, int mlp_ratio)
    : norm1(name + ".norm1", dim),
      attn(name + ".attn", dim, heads, window),
      norm2(name + ".norm2", dim),
      fc1(name + ".mlp.fc1", dim, dim * mlp_ratio),
      fc2(name + ".mlp.fc2", dim * mlp_ratio, dim) {}

Mat SwinBlock::forward(const Mat& x, const WindowGeometry& geo, bool gated, Cache* cache, nn::MacTally* t) const {
  nn::LayerNorm::Cache n1, n2;
  Mat ln1 = norm1.forward(x, cache ? &n1 : nullptr, t);
  Mat y = x + attn.forward(ln1, geo, gated, cache ? &cache->attn : nullptr, t);
  Mat ln2 = norm2.forward(y, cache ? &n2 : nullptr, t);
  Mat pre = fc1.forward(ln2, t);
  Mat act = nn::gelu(pre);
  y += fc2.forward(act, t);
  if (cache != nullptr) {
    cache->n1 = std::move(n1);
    cache->n2 = std::move(n2);
    cache->ln1 = std::move(ln1);
    cache->ln2 = std::move(ln2);
    cache->hidden_pre = std::move(pre);
    cache->hidden_act = std::move(act);
  }
  return y;
}

Mat SwinBlock::backward(const Mat& dy, const WindowGeometry& geo, bool gated, const Cache& c) {
  const Mat dact = fc2.backward(c.hidden_act, dy);
  const Mat dpre = nn::gelu_backward(c.hidden_pre, dact);
  const Mat dln2 = fc1.backward(c.ln2, dpre);
  Mat dmid = dy + norm2.backward(dln2, c.n2);
  const Mat dln1 = attn.backward(dmid, geo, gated, c.attn);
  dmid += norm1.backward(dln1, c.n1);
  return dmid;
}

void SwinBlock::collect(std::vector<nn::Param*>& out) {
  norm1.collect(out);
  attn.collect(out);
  norm2.collect(out);
  fc1.collect(out);
  fc2.collect(out);
}

// ---------------------------------------------------------------------------
// PatchMerging

PatchMerging::PatchMerging(const std::string& name, int dim)
    : norm(name + ".norm", 4 * dim), reduction(name + ".reduction", 4 * dim, 2 * dim, false) {}

Mat PatchMerging::forward(const Mat& x, Dims3 grid, Cache* cache, nn::MacTally* t) const {
  const int C = static_cast<int>(x.cols());
  const Dims3 out_grid{grid.t, grid.h / 2, grid.w / 2};
  Mat gathered(out_grid.volume(), 4 * C);
  // Quadrant order (0,0), (1,0), (0,1), (1,1).
  constexpr int dy[4] = {0, 1, 0, 1};
  constexpr int dx[4] = {0, 0, 1, 1};
  for (int tt = 0; tt < out_grid.t; ++tt)
    for (int i = 0; i < out_grid.h; ++i)
      for (int j = 0; j < out_grid.w; ++j) {
        const Eigen::Index row = (tt * out_grid.h + i) * out_grid.w + j;
        for (int q = 0; q < 4; ++q)
          gathered.row(row).segment(q * C, C) = x.row((tt * grid.h + 2 * i + dy[q]) * grid.w + 2 * j + dx[q]);
      }
  nn::LayerNorm::Cache nc;
  Mat normed = norm.forward(gathered, cache ? &nc : nullptr, t);
  Mat y = reduction.forward(normed, t);
  if (cache != nullptr) {
    cache->gathered = std::move(gathered);
    cache->norm = std::move(nc);
    cache->normed = std::move(normed);
    cache->grid = grid;
  }
  return y;
}

Mat PatchMerging::backward(const Mat& dy, const Cache& c) {
  const Mat dnormed = reduction.backward(c.normed, dy);
  const Mat dg = norm.backward(dnormed, c.norm);
  const int C = static_cast<int>(dg.cols() / 4);
  const Dims3 grid = c.grid;
  const Dims3 out_grid{grid.t, grid.h / 2, grid.w / 2};
  Mat dx = Mat::Zero(grid.volume(), C);
  constexpr int oy[4] = {0, 1, 0, 1};
  constexpr int ox[4] = {0, 0, 1, 1};
  for (int tt = 0; tt < out_grid.t; ++tt)
    for (int i = 0; i < out_grid.h; ++i)
      for (int j = 0; j < out_grid.w; ++j) {
        const Eigen::Index row = (tt * out_grid.h + i) * out_grid.w + j;
        for (int q = 0; q < 4; ++q)
          dx.row((tt * grid.h + 2 * i + oy[q]) * grid.w + 2 * j + ox[q]) = dg.row(row).segment(q * C, C);
      }
  return dx;
}

void PatchMerging::collect(std::vector<nn::Param*>& out) {
  norm.collect(out);
  reduction.collect(out);
}

// ---------------------------------------------------------------------------
// PatchEmbed

double normalize_pixel(std::uint8_t value, int channel, int channels) {
  static constexpr double kMean[3] = {0.485, 0.456, 0.406};
  static constexpr double kStd[3] = {0.229, 0.224, 0.225};
  const double v = value / 255.0;
  if (channels == 3) return (v - kMean[channel]) / kStd[channel];
  return (v - 0.5) / 0.25;
}

PatchEmbed::PatchEmbed(const std::string& name, int in_channels, int dim, Dims3 stride, bool use_norm)
    : proj(name + ".proj", static_cast<int>(stride.volume()) * in_channels, dim),
      norm(name + ".norm", dim),
      use_norm(use_norm),
      stride_(stride) {}

Mat PatchEmbed::forward(const FragmentBatch& b, Cache* cache, nn::MacTally* t) const {
  const Dims3 grid{b.frames / stride_.t, b.side / stride_.h, b.side / stride_.w};
  const int C = b.channels;
  Mat patches(grid.volume(), stride_.volume() * C);
  for (int gt = 0; gt < grid.t; ++gt)
    for (int gy = 0; gy < grid.h; ++gy)
      for (int gx = 0; gx < grid.w; ++gx) {
        const Eigen::Index row = (gt * grid.h + gy) * grid.w + gx;
        Eigen::Index col = 0;
        for (int dt = 0; dt < stride_.t; ++dt)
          for (int dy = 0; dy < stride_.h; ++dy)
            for (int dx = 0; dx < stride_.w; ++dx)
              for (int c = 0; c < C; ++c)
                patches(row, col++) = normalize_pixel(
                    b.at(gt * stride_.t + dt, gy * stride_.h + dy, gx * stride_.w + dx, c), c, C);
      }
  Mat projected = proj.forward(patches, t);
  nn::LayerNorm::Cache nc;
  Mat y = use_norm ? norm.forward(projected, cache ? &nc : nullptr, t) : projected;
  if (cache != nullptr) {
    cache->patches = std::move(patches);
    cache->projected = std::move(projected);
    cache->norm = std::move(nc);
  }
  return y;
}

void PatchEmbed::backward(const Mat& dy, const Cache& c) {
  proj.backward(c.patches, use_norm ? norm.backward(dy, c.norm) : dy);
}

void PatchEmbed::collect(std::vector<nn::Param*>& out) {
  proj.collect(out);
  if (use_norm) norm.collect(out);
}

// ---------------------------------------------------------------------------
// Fanet

namespace {

// Orthonormal DCT-II vector k of length n.
double dct(int n, int k, int i) {
  const double a = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
  return a * std::cos(std::numbers::pi * (i + 0.5) * k / n);
}

double colour(int channels, int k, int c) {
  if (channels != 3) return k == c ? 1.0 : 0.0;
  static const double basis[3][3] = {{1 / std::sqrt(3.0), 1 / std::sqrt(3.0), 1 / std::sqrt(3.0)},
                                     {1 / std::sqrt(2.0), -1 / std::sqrt(2.0), 0},
                                     {1 / std::sqrt(6.0), 1 / std::sqrt(6.0), -2 / std::sqrt(6.0)}};
  return basis[k][c];
}

// Overwrites the leading columns of a (patch volume * channels) x dim weight
// with basis vectors ordered by colour (luma first), then total frequency.
// The flat luma vector starts at zero: patch brightness would otherwise set
// the token scale that every merge LayerNorm divides by, and distortion
// energy would reach the head divided by scene brightness.
void fill_dct_basis(Mat& w, Dims3 stride, int channels) {
  struct Fn {
    int c, kt, ky, kx;
  };
  std::vector<Fn> fns;
  for (int c = 0; c < channels; ++c)
    for (int kt = 0; kt < stride.t; ++kt)
      for (int ky = 0; ky < stride.h; ++ky)
        for (int kx = 0; kx < stride.w; ++kx) fns.push_back({c, kt, ky, kx});
  std::stable_sort(fns.begin(), fns.end(), [](const Fn& a, const Fn& b) {
    if ((a.c > 0) != (b.c > 0)) return a.c == 0;
    return a.kt + a.ky + a.kx < b.kt + b.ky + b.kx;
  });
  const auto n = std::min<std::size_t>(fns.size(), static_cast<std::size_t>(w.cols()));
  for (std::size_t j = 0; j < n; ++j) {
    const Fn& f = fns[j];
    if (j == 0) {
      w.col(0).setZero();
      continue;
    }
    Eigen::Index row = 0;
    for (int t = 0; t < stride.t; ++t)
      for (int y = 0; y < stride.h; ++y)
        for (int x = 0; x < stride.w; ++x)
          for (int c = 0; c < channels; ++c)
            w(row++, static_cast<Eigen::Index>(j)) =
                dct(stride.t, f.kt, t) * dct(stride.h, f.ky, y) * dct(stride.w, f.kx, x) * colour(channels, f.c, c);
  }
}

}  // namespace

Fanet::Fanet(const FanetConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
  cfg_.validate();
  embed_ = PatchEmbed("patch_embed", cfg_.in_channels, cfg_.embed_dim, cfg_.patch_stride, cfg_.patch_norm);
  for (int s = 0; s < kStages; ++s) {
    const std::string sn = stage_name(s);
    if (s > 0) merges_[static_cast<std::size_t>(s)] = PatchMerging(sn + ".merge", cfg_.channels(s - 1));
    for (int b = 0; b < cfg_.depths[static_cast<std::size_t>(s)]; ++b)
      stages_[static_cast<std::size_t>(s)].emplace_back(sn + ".blocks." + std::to_string(b), cfg_.channels(s),
                                                        cfg_.heads[static_cast<std::size_t>(s)], cfg_.window,
                                                        cfg_.mlp_ratio);
  }
  final_norm_ = nn::LayerNorm("norm", cfg_.channels(kStages - 1));
  head_ = QualityHead("head", cfg_.channels(kStages - 1), cfg_.head_width());

  Rng rng(init_seed);
  for (nn::Param* p : parameters())
    if (p->decay)
      nn::fill_truncated_normal(p->value, cfg_.init == "fan_in" ? 1.0 / std::sqrt(static_cast<double>(p->value.rows())) : 0.02,
                                rng);
  if (cfg_.patch_init == "dct") fill_dct_basis(embed_.proj.weight.value, cfg_.patch_stride, cfg_.in_channels);
}

QualityOutput Fanet::forward(const FragmentBatch& batch, ForwardTrace* trace, nn::MacTally* t) const {
  if (batch.channels != cfg_.in_channels)
    throw ConfigError("fragments have " + std::to_string(batch.channels) + " channels, model expects " +
                      std::to_string(cfg_.in_channels));
  if (batch.data.size() != static_cast<std::size_t>(batch.frames) * batch.side * batch.side * batch.channels)
    throw ContractError("fragment payload does not match its dimensions");
  const auto grids = stage_grids(cfg_, batch.frames, batch.side);

  Mat x = embed_.forward(batch, trace ? &trace->embed : nullptr, t);
  for (int s = 0; s < kStages; ++s) {
    const auto su = static_cast<std::size_t>(s);
    if (s > 0) x = merges_[su].forward(x, grids[su - 1], trace ? &trace->merges[su] : nullptr, t);
    std::vector<WindowGeometry> geos;
    const int depth = cfg_.depths[su];
    for (int parity = 0; parity < std::min(depth, 2); ++parity)
      geos.push_back(make_window_geometry(grids[su], cfg_.window, parity == 1, cfg_.minipatch_feature_side(s),
                                          stage_name(s)));
    if (trace != nullptr) trace->blocks[su].assign(static_cast<std::size_t>(depth), {});
    for (int b = 0; b < depth; ++b)
      x = stages_[su][static_cast<std::size_t>(b)].forward(x, geos[static_cast<std::size_t>(b % 2)],
                                                            cfg_.grpb_stages[su],
                                                            trace ? &trace->blocks[su][static_cast<std::size_t>(b)] : nullptr,
                                                            t);
    if (trace != nullptr) trace->geometry[su] = std::move(geos);
  }
  if (cfg_.final_norm) x = final_norm_.forward(x, trace ? &trace->final_norm : nullptr, t);
  QualityOutput out = head_.forward(x, grids[kStages - 1], cfg_.minipatch_feature_side(kStages - 1),
                                    trace ? &trace->head : nullptr, t);
  out.plan = batch.plan;
  out.temporal_stride = cfg_.patch_stride.t;
  return out;
}

void Fanet::backward(const ForwardTrace& trace, double dscore) {
  Mat dx = head_.backward(dscore, trace.head);
  if (cfg_.final_norm) dx = final_norm_.backward(dx, trace.final_norm);
  for (int s = kStages - 1; s >= 0; --s) {
    const auto su = static_cast<std::size_t>(s);
    for (int b = cfg_.depths[su] - 1; b >= 0; --b)
      dx = stages_[su][static_cast<std::size_t>(b)].backward(dx, trace.geometry[su][static_cast<std::size_t>(b % 2)],
                                                             cfg_.grpb_stages[su],
                                                             trace.blocks[su][static_cast<std::size_t>(b)]);
    if (s > 0) dx = merges_[su].backward(dx, trace.merges[su]);
  }
  embed_.backward(dx, trace.embed);
}

std::vector<nn::Param*> Fanet::parameters() {
  std::vector<nn::Param*> out;
  embed_.collect(out);
  for (int s = 0; s < kStages; ++s) {
    const auto su = static_cast<std::size_t>(s);
    if (s > 0) merges_[su].collect(out);
    for (auto& b : stages_[su]) b.collect(out);
  }
  if (cfg_.final_norm) final_norm_.collect(out);
  head_.collect(out);
  return out;
}

std::vector<const nn::Param*> Fanet::parameters() const {
  auto mutable_params = const_cast<Fanet*>(this)->parameters();
  return {mutable_params.begin(), mutable_params.end()};
}

nn::Param* Fanet::find(const std::string& name) {
  for (nn::Param* p : parameters())
    if (p->name == name) return p;
  return nullptr;
}

void Fanet::zero_grad() {
  for (nn::Param* p : parameters()) p->zero_grad();
}

std::int64_t Fanet::parameter_count() const {
  std::int64_t n = 0;
  for (const nn::Param* p : parameters()) n += p->value.size();
  return n;
}

}  // namespace fragq
