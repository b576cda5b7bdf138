#include "fragq/flops.hpp"

#include <algorithm>

namespace fragq {

namespace {

int ceil_to(int v, int m) { return (v + m - 1) / m * m; }

class Counter {
 public:
  explicit Counter(FlopsReport& r) : r_(r) {}
  void add(const std::string& name, std::int64_t macs) {
    r_.layers.emplace_back(name, macs);
    r_.total += macs;
  }
  void linear(const std::string& name, std::int64_t rows, std::int64_t in, std::int64_t out) {
    add(name, rows * in * out);
  }

 private:
  FlopsReport& r_;
};

}  // namespace

std::int64_t FlopsReport::backbone() const {
  std::int64_t s = 0;
  for (const auto& [name, macs] : layers)
    if (name.rfind("head.", 0) != 0) s += macs;
  return s;
}

FlopsReport flops_count(const FanetConfig& cfg, int frames, int height, int width, int channels) {
  cfg.validate();
  FlopsReport r;
  r.frames = frames;
  r.height = height;
  r.width = width;
  r.channels = channels;
  Counter c(r);

  const Dims3 st = cfg.patch_stride;
  Dims3 grid{ceil_to(frames, st.t) / st.t, ceil_to(height, st.h) / st.h, ceil_to(width, st.w) / st.w};
  const std::int64_t c0 = cfg.embed_dim;
  c.linear("patch_embed.proj", grid.volume(), st.volume() * channels, c0);
  if (cfg.patch_norm) c.add("patch_embed.norm", grid.volume() * c0);

  for (int s = 0; s < kStages; ++s) {
    const std::string sn = "stages." + std::to_string(s);
    if (s > 0) {
      const std::int64_t cin = cfg.channels(s - 1);
      const Dims3 merged{grid.t, (grid.h + 1) / 2, (grid.w + 1) / 2};
      c.add(sn + ".merge.norm", merged.volume() * 4 * cin);
      c.linear(sn + ".merge.reduction", merged.volume(), 4 * cin, 2 * cin);
      grid = merged;
    }
    const std::int64_t C = cfg.channels(s);
    const std::int64_t heads = cfg.heads[static_cast<std::size_t>(s)];
    const std::int64_t d = C / heads;
    const Dims3 win = effective_window(grid, cfg.window);
    const Dims3 padded{ceil_to(grid.t, win.t), ceil_to(grid.h, win.h), ceil_to(grid.w, win.w)};
    const std::int64_t n = win.volume();
    const std::int64_t windows = padded.volume() / n;
    const std::int64_t tokens = grid.volume();
    for (int b = 0; b < cfg.depths[static_cast<std::size_t>(s)]; ++b) {
      const std::string bn = sn + ".blocks." + std::to_string(b);
      c.add(bn + ".norm1", tokens * C);
      c.linear(bn + ".attn.qkv", padded.volume(), C, 3 * C);
      c.add(bn + ".attn.qk", windows * heads * n * n * d);
      c.add(bn + ".attn.bias", windows * heads * n * n);
      c.add(bn + ".attn.av", windows * heads * n * n * d);
      c.linear(bn + ".attn.proj", padded.volume(), C, C);
      c.add(bn + ".norm2", tokens * C);
      c.linear(bn + ".mlp.fc1", tokens, C, C * cfg.mlp_ratio);
      c.linear(bn + ".mlp.fc2", tokens, C * cfg.mlp_ratio, C);
    }
  }
  const std::int64_t last = cfg.channels(kStages - 1);
  if (cfg.final_norm) c.add("norm", grid.volume() * last);
  c.linear("head.fc1", grid.volume(), last, cfg.head_width());
  c.linear("head.fc2", grid.volume(), cfg.head_width(), 1);
  return r;
}

FlopsReport fragment_flops(const FanetConfig& cfg, const GridSpec& spec, int /*source_height*/,
                           int /*source_width*/) {
  spec.validate();
  return flops_count(cfg, spec.frames, spec.side(), spec.side(), cfg.in_channels);
}

std::int64_t parameter_count(const FanetConfig& cfg) {
  cfg.validate();
  auto linear = [](std::int64_t in, std::int64_t out, bool bias) { return in * out + (bias ? out : 0); };
  auto norm = [](std::int64_t dim) { return 2 * dim; };
  std::int64_t n = linear(cfg.patch_stride.volume() * cfg.in_channels, cfg.embed_dim, true) +
                   (cfg.patch_norm ? norm(cfg.embed_dim) : 0);
  const Dims3 w = cfg.window;
  const std::int64_t table_rows = static_cast<std::int64_t>(2 * w.t - 1) * (2 * w.h - 1) * (2 * w.w - 1);
  for (int s = 0; s < kStages; ++s) {
    const std::int64_t C = cfg.channels(s);
    if (s > 0) n += norm(2 * C) + linear(2 * C, C, false);
    const std::int64_t block = norm(C) + linear(C, 3 * C, true) + linear(C, C, true) +
                               2 * table_rows * cfg.heads[static_cast<std::size_t>(s)] + norm(C) +
                               linear(C, C * cfg.mlp_ratio, true) + linear(C * cfg.mlp_ratio, C, true);
    n += block * cfg.depths[static_cast<std::size_t>(s)];
  }
  const std::int64_t last = cfg.channels(kStages - 1);
  n += (cfg.final_norm ? norm(last) : 0) + linear(last, cfg.head_width(), true) + linear(cfg.head_width(), 1, true);
  return n;
}

nlohmann::json to_json(const FlopsReport& r) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& [name, macs] : r.layers) layers.push_back({{"layer", name}, {"macs", macs}});
  return {{"schema", kFlopsSchema},
          {"convention", "multiply-accumulate = 1 unit; layer norm = 1 unit per element"},
          {"input_shape", {r.frames, r.height, r.width, r.channels}},
          {"total", r.total},
          {"total_g", r.giga()},
          {"backbone", r.backbone()},
          {"layers", layers}};
}

}  // namespace fragq
