#include "fragq/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>

#include "fragq/errors.hpp"

namespace fragq {
namespace {

void check_pair(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size())
    throw ContractError(std::string(what) + ": series lengths differ (" + std::to_string(a.size()) +
                        " vs " + std::to_string(b.size()) + ")");
  if (a.size() < 2) throw ContractError(std::string(what) + ": need at least 2 points");
  auto finite = [](double v) { return std::isfinite(v); };
  if (!std::all_of(a.begin(), a.end(), finite) || !std::all_of(b.begin(), b.end(), finite))
    throw ContractError(std::string(what) + ": non-finite entry");
}

bool is_constant(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

double mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double pearson(std::span<const double> a, std::span<const double> b, const char* what) {
  if (is_constant(a) || is_constant(b))
    throw DegenerateError(std::string(what) + ": constant series has zero variance");
  const double ma = mean(a), mb = mean(b);
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

// Sum over groups of equal adjacent values of size*(size-1)/2.
template <typename Eq>
std::int64_t tied_pairs(std::size_t n, Eq&& equal_to_prev) {
  std::int64_t total = 0, run = 1;
  for (std::size_t i = 1; i < n; ++i) {
    if (equal_to_prev(i)) {
      ++run;
    } else {
      total += run * (run - 1) / 2;
      run = 1;
    }
  }
  return total + run * (run - 1) / 2;
}

// Stable bottom-up merge sort of v, returning the number of inversions.
std::int64_t count_swaps(std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<double> buf(n);
  std::int64_t swaps = 0;
  for (std::size_t width = 1; width < n; width *= 2) {
    for (std::size_t lo = 0; lo < n; lo += 2 * width) {
      const std::size_t mid = std::min(lo + width, n), hi = std::min(lo + 2 * width, n);
      std::size_t i = lo, j = mid, k = lo;
      while (i < mid && j < hi) {
        if (v[j] < v[i]) {
          swaps += static_cast<std::int64_t>(mid - i);
          buf[k++] = v[j++];
        } else {
          buf[k++] = v[i++];
        }
      }
      while (i < mid) buf[k++] = v[i++];
      while (j < hi) buf[k++] = v[j++];
    }
    std::swap(v, buf);
  }
  return swaps;
}

}  // namespace

double plcc(std::span<const double> a, std::span<const double> b) {
  check_pair(a, b, "plcc");
  return pearson(a, b, "plcc");
}

std::vector<double> midranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
  std::vector<double> ranks(n);
  for (std::size_t start = 0; start < n;) {
    std::size_t end = start + 1;
    while (end < n && values[order[end]] == values[order[start]]) ++end;
    const double r = 0.5 * static_cast<double>(start + 1 + end);  // mean of start+1 .. end
    for (std::size_t k = start; k < end; ++k) ranks[order[k]] = r;
    start = end;
  }
  return ranks;
}

double srcc(std::span<const double> a, std::span<const double> b) {
  check_pair(a, b, "srcc");
  const auto ra = midranks(a), rb = midranks(b);
  return pearson(ra, rb, "srcc");
}

double krcc(std::span<const double> a, std::span<const double> b) {
  check_pair(a, b, "krcc");
  const std::size_t n = a.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return a[i] != a[j] ? a[i] < a[j] : b[i] < b[j];
  });
  std::vector<double> sa(n), sb(n);
  for (std::size_t k = 0; k < n; ++k) {
    sa[k] = a[order[k]];
    sb[k] = b[order[k]];
  }
  const std::int64_t ties_a = tied_pairs(n, [&](std::size_t i) { return sa[i] == sa[i - 1]; });
  const std::int64_t ties_ab =
      tied_pairs(n, [&](std::size_t i) { return sa[i] == sa[i - 1] && sb[i] == sb[i - 1]; });
  const std::int64_t swaps = count_swaps(sb);  // sb is now sorted
  const std::int64_t ties_b = tied_pairs(n, [&](std::size_t i) { return sb[i] == sb[i - 1]; });
  const std::int64_t total = static_cast<std::int64_t>(n) * static_cast<std::int64_t>(n - 1) / 2;
  if (ties_a == total || ties_b == total)
    throw DegenerateError("krcc: constant series has no untied pairs");
  const std::int64_t s = total - ties_a - ties_b + ties_ab - 2 * swaps;
  const double denom = std::sqrt(static_cast<double>(total - ties_a)) *
                       std::sqrt(static_cast<double>(total - ties_b));
  return std::clamp(static_cast<double>(s) / denom, -1.0, 1.0);
}

PlccLoss plcc_loss(std::span<const double> pred, std::span<const double> gt, double eps) {
  check_pair(pred, gt, "plcc_loss");
  if (is_constant(gt)) throw DegenerateError("plcc_loss: ground-truth batch is constant");
  const std::size_t n = pred.size();
  const double mp = mean(pred), mg = mean(gt);
  std::vector<double> dp(n), dg(n);
  double cov = 0, vp = 0, vg = 0;
  for (std::size_t i = 0; i < n; ++i) {
    dp[i] = pred[i] - mp;
    dg[i] = gt[i] - mg;
    cov += dp[i] * dg[i];
    vp += dp[i] * dp[i];
    vg += dg[i] * dg[i];
  }
  const double sp = std::sqrt(vp + eps), sg = std::sqrt(vg + eps);
  const double r = cov / (sp * sg);
  PlccLoss out;
  out.loss = 0.5 * (1.0 - r);
  out.grad.resize(n);
  // dr/dp_i = dg_i / (sp sg) - cov dp_i / (sp^3 sg); centring terms vanish
  // because the centred vectors sum to zero.
  for (std::size_t i = 0; i < n; ++i)
    out.grad[i] = -0.5 * (dg[i] / (sp * sg) - cov * dp[i] / (sp * sp * sp * sg));
  return out;
}

}  // namespace fragq
