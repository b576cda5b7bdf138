#include "fragq/attention.hpp"

#include <algorithm>
#include <cmath>

#include "fragq/errors.hpp"

namespace fragq {

using nn::Mat;

bool GateMask::all_true() const {
  return std::all_of(bits.begin(), bits.end(), [](std::uint8_t b) { return b != 0; });
}

bool GateMask::all_false_off_diagonal() const {
  for (int i = 0; i < size; ++i)
    for (int j = 0; j < size; ++j)
      if (i != j && (*this)(i, j)) return false;
  return true;
}

GateMask gate_from_coords(std::span<const Dims3> coords, int minipatch_side) {
  if (minipatch_side < 1) throw ContractError("mini-patch side must be >= 1");
  GateMask g;
  g.size = static_cast<int>(coords.size());
  g.bits.assign(coords.size() * coords.size(), 0);
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const int hi = coords[i].h / minipatch_side, wi = coords[i].w / minipatch_side;
    for (std::size_t j = 0; j < coords.size(); ++j)
      g.bits[i * coords.size() + j] =
          (hi == coords[j].h / minipatch_side && wi == coords[j].w / minipatch_side) ? 1 : 0;
  }
  return g;
}

GateMask build_gate_mask(Dims3 origin, Dims3 window, int minipatch_side) {
  std::vector<Dims3> coords;
  coords.reserve(static_cast<std::size_t>(window.volume()));
  for (int t = 0; t < window.t; ++t)
    for (int h = 0; h < window.h; ++h)
      for (int w = 0; w < window.w; ++w) coords.push_back({origin.t + t, origin.h + h, origin.w + w});
  return gate_from_coords(coords, minipatch_side);
}

int bias_table_rows(Dims3 tw) { return (2 * tw.t - 1) * (2 * tw.h - 1) * (2 * tw.w - 1); }

std::vector<int> relative_position_index(Dims3 window, Dims3 tw) {
  if (window.t > tw.t || window.h > tw.h || window.w > tw.w)
    throw ContractError("window exceeds the bias table extent");
  const int n = static_cast<int>(window.volume());
  std::vector<Dims3> pos;
  pos.reserve(static_cast<std::size_t>(n));
  for (int t = 0; t < window.t; ++t)
    for (int h = 0; h < window.h; ++h)
      for (int w = 0; w < window.w; ++w) pos.push_back({t, h, w});
  std::vector<int> index(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const Dims3& a = pos[static_cast<std::size_t>(i)];
      const Dims3& b = pos[static_cast<std::size_t>(j)];
      index[static_cast<std::size_t>(i * n + j)] =
          ((a.t - b.t + tw.t - 1) * (2 * tw.h - 1) + (a.h - b.h + tw.h - 1)) * (2 * tw.w - 1) +
          (a.w - b.w + tw.w - 1);
    }
  return index;
}

Mat gated_bias(const Mat& real, const Mat& pseudo, std::span<const int> index, int positions, int head,
               const GateMask& gate) {
  if (gate.size != positions || index.size() != static_cast<std::size_t>(positions) * positions)
    throw ContractError("gate / index size does not match the window");
  Mat b(positions, positions);
  for (int i = 0; i < positions; ++i)
    for (int j = 0; j < positions; ++j) {
      const int r = index[static_cast<std::size_t>(i * positions + j)];
      b(i, j) = gate(i, j) ? real(r, head) : pseudo(r, head);
    }
  return b;
}

Mat attend(const Mat& q, const Mat& k, const Mat& v, const Mat& bias, double scale, Mat* probs) {
  Mat s = (q * k.transpose()) * scale + bias;
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const double m = s.row(i).maxCoeff();
    s.row(i) = (s.row(i).array() - m).exp();
    s.row(i) /= s.row(i).sum();
  }
  Mat out = s * v;
  if (probs != nullptr) *probs = std::move(s);
  return out;
}

AttendGrads attend_backward(const Mat& q, const Mat& k, const Mat& v, const Mat& probs, const Mat& dout,
                            double scale) {
  AttendGrads g;
  const Mat dp = dout * v.transpose();
  g.dv = probs.transpose() * dout;
  const Eigen::VectorXd row_dot = (dp.array() * probs.array()).rowwise().sum();
  g.dscores = (probs.array() * (dp.array().colwise() - row_dot.array())).matrix();
  g.dq = (g.dscores * k) * scale;
  g.dk = (g.dscores.transpose() * q) * scale;
  return g;
}

Mat grpb_attention(const Mat& q, const Mat& k, const Mat& v, const BiasTables& tables, int head,
                   const GateMask& gate) {
  if (q.rows() != tables.positions || k.rows() != q.rows() || v.rows() != q.rows() || q.cols() != k.cols())
    throw ContractError("grpb_attention: q/k/v shapes do not match the window");
  const Mat bias = gated_bias(tables.real, tables.pseudo, tables.index, tables.positions, head, gate);
  return attend(q, k, v, bias, 1.0 / std::sqrt(static_cast<double>(q.cols())));
}

Dims3 effective_window(Dims3 grid, Dims3 w) {
  return {std::min(grid.t, w.t), std::min(grid.h, w.h), std::min(grid.w, w.w)};
}

WindowGeometry make_window_geometry(Dims3 grid, Dims3 configured, bool shifted, int minipatch_side,
                                    const std::string& where) {
  WindowGeometry g;
  g.grid = grid;
  g.window = effective_window(grid, configured);
  g.minipatch_side = minipatch_side;
  auto axis_shift = [&](int extent, int cfg) { return (shifted && extent > cfg) ? cfg / 2 : 0; };
  g.shift = {axis_shift(grid.t, configured.t), axis_shift(grid.h, configured.h), axis_shift(grid.w, configured.w)};

  std::string bad;
  auto check = [&](const char* axis, int extent, int win) {
    if (extent % win != 0)
      bad += std::string(bad.empty() ? "" : "; ") + axis + " extent " + std::to_string(extent) +
             " is not divisible by window " + std::to_string(win);
  };
  check("t", grid.t, g.window.t);
  check("h", grid.h, g.window.h);
  check("w", grid.w, g.window.w);
  if (!bad.empty()) throw ConfigError((where.empty() ? "" : where + ": ") + bad);

  const Dims3 nwin = {grid.t / g.window.t, grid.h / g.window.h, grid.w / g.window.w};
  const bool any_shift = g.shift.t > 0 || g.shift.h > 0 || g.shift.w > 0;
  auto region = [](int p, int extent, int win, int shift) {
    if (shift == 0) return 0;
    if (p < extent - win) return 0;
    return p < extent - shift ? 1 : 2;
  };
  const int n = g.positions();
  std::vector<Dims3> coords(static_cast<std::size_t>(n));
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (int bt = 0; bt < nwin.t; ++bt)
    for (int bh = 0; bh < nwin.h; ++bh)
      for (int bw = 0; bw < nwin.w; ++bw) {
        std::vector<int> toks;
        toks.reserve(static_cast<std::size_t>(n));
        int k = 0;
        for (int it = 0; it < g.window.t; ++it)
          for (int ih = 0; ih < g.window.h; ++ih)
            for (int iw = 0; iw < g.window.w; ++iw, ++k) {
              // Position in the cyclically shifted frame, then back to the original grid.
              const int pt = bt * g.window.t + it, ph = bh * g.window.h + ih, pw = bw * g.window.w + iw;
              const int ot = (pt + g.shift.t) % grid.t;
              const int oh = (ph + g.shift.h) % grid.h;
              const int ow = (pw + g.shift.w) % grid.w;
              toks.push_back((ot * grid.h + oh) * grid.w + ow);
              coords[static_cast<std::size_t>(k)] = {ot, oh, ow};
              labels[static_cast<std::size_t>(k)] = region(pt, grid.t, g.window.t, g.shift.t) * 9 +
                                                    region(ph, grid.h, g.window.h, g.shift.h) * 3 +
                                                    region(pw, grid.w, g.window.w, g.shift.w);
            }
        g.tokens.push_back(std::move(toks));
        g.gates.push_back(gate_from_coords(coords, minipatch_side));
        if (any_shift) {
          Mat m = Mat::Zero(n, n);
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
              if (labels[static_cast<std::size_t>(i)] != labels[static_cast<std::size_t>(j)]) m(i, j) = -100.0;
          g.shift_masks.push_back(std::move(m));
        }
      }
  g.rel_index = relative_position_index(g.window, configured);
  return g;
}

WindowAttention::WindowAttention(const std::string& name, int dim, int heads, Dims3 table_window)
    : qkv(name + ".qkv", dim, 3 * dim), proj(name + ".proj", dim, dim), name_(name), dim_(dim), heads_(heads) {
  if (heads < 1 || dim % heads != 0)
    throw ConfigError(name + ": channels " + std::to_string(dim) + " not divisible by " + std::to_string(heads) +
                      " heads");
  const int rows = bias_table_rows(table_window);
  real_table.name = name + ".real_table";
  real_table.value = Mat::Zero(rows, heads);
  real_table.zero_grad();
  pseudo_table.name = name + ".pseudo_table";
  pseudo_table.value = Mat::Zero(rows, heads);
  pseudo_table.zero_grad();
}

Mat WindowAttention::forward(const Mat& x, const WindowGeometry& geo, bool gated, Cache* cache,
                             nn::MacTally* t) const {
  const int n = geo.positions();
  const int d = dim_ / heads_;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  Mat qkv_out = qkv.forward(x, t);
  Mat context = Mat::Zero(x.rows(), dim_);
  const std::int64_t windows = static_cast<std::int64_t>(geo.tokens.size());
  nn::tally(t, name_ + ".qk", windows * heads_ * n * n * d);
  nn::tally(t, name_ + ".bias", windows * heads_ * n * n);
  nn::tally(t, name_ + ".av", windows * heads_ * n * n * d);
  if (cache != nullptr) cache->probs.clear();

  Mat q(n, d), k(n, d), v(n, d);
  for (std::size_t w = 0; w < geo.tokens.size(); ++w) {
    const auto& toks = geo.tokens[w];
    const GateMask& gate = geo.gates[w];
    for (int h = 0; h < heads_; ++h) {
      for (int i = 0; i < n; ++i) {
        const auto row = qkv_out.row(toks[static_cast<std::size_t>(i)]);
        q.row(i) = row.segment(h * d, d);
        k.row(i) = row.segment(dim_ + h * d, d);
        v.row(i) = row.segment(2 * dim_ + h * d, d);
      }
      Mat bias = gated ? gated_bias(real_table.value, pseudo_table.value, geo.rel_index, n, h, gate)
                       : gated_bias(real_table.value, real_table.value, geo.rel_index, n, h, gate);
      if (!geo.shift_masks.empty()) bias += geo.shift_masks[w];
      Mat probs;
      const Mat out = attend(q, k, v, bias, scale, cache != nullptr ? &probs : nullptr);
      for (int i = 0; i < n; ++i) context.row(toks[static_cast<std::size_t>(i)]).segment(h * d, d) = out.row(i);
      if (cache != nullptr) cache->probs.push_back(std::move(probs));
    }
  }
  Mat y = proj.forward(context, t);
  if (cache != nullptr) {
    cache->x = x;
    cache->qkv = std::move(qkv_out);
    cache->context = std::move(context);
  }
  return y;
}

Mat WindowAttention::backward(const Mat& dy, const WindowGeometry& geo, bool gated, const Cache& cache) {
  const int n = geo.positions();
  const int d = dim_ / heads_;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  const Mat dcontext = proj.backward(cache.context, dy);
  Mat dqkv = Mat::Zero(cache.qkv.rows(), cache.qkv.cols());

  Mat q(n, d), k(n, d), v(n, d), dout(n, d);
  std::size_t pi = 0;
  for (std::size_t w = 0; w < geo.tokens.size(); ++w) {
    const auto& toks = geo.tokens[w];
    const GateMask& gate = geo.gates[w];
    for (int h = 0; h < heads_; ++h, ++pi) {
      for (int i = 0; i < n; ++i) {
        const auto tok = toks[static_cast<std::size_t>(i)];
        const auto row = cache.qkv.row(tok);
        q.row(i) = row.segment(h * d, d);
        k.row(i) = row.segment(dim_ + h * d, d);
        v.row(i) = row.segment(2 * dim_ + h * d, d);
        dout.row(i) = dcontext.row(tok).segment(h * d, d);
      }
      const AttendGrads g = attend_backward(q, k, v, cache.probs[pi], dout, scale);
      for (int i = 0; i < n; ++i) {
        const auto tok = toks[static_cast<std::size_t>(i)];
        dqkv.row(tok).segment(h * d, d) += g.dq.row(i);
        dqkv.row(tok).segment(dim_ + h * d, d) += g.dk.row(i);
        dqkv.row(tok).segment(2 * dim_ + h * d, d) += g.dv.row(i);
      }
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          const int r = geo.rel_index[static_cast<std::size_t>(i * n + j)];
          if (!gated || gate(i, j))
            real_table.grad(r, h) += g.dscores(i, j);
          else
            pseudo_table.grad(r, h) += g.dscores(i, j);
        }
    }
  }
  return qkv.backward(cache.x, dqkv);
}

void WindowAttention::collect(std::vector<nn::Param*>& out) {
  qkv.collect(out);
  proj.collect(out);
  out.push_back(&real_table);
  out.push_back(&pseudo_table);
}

}  // namespace fragq
