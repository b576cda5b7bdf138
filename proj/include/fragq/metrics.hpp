#pragma once

#include <span>
#include <vector>

namespace fragq {

// Correlation metrics. All require equal lengths >= 2 and finite entries
// (ContractError otherwise) and throw DegenerateError when a series (or its
// rank vector) is constant. All three are symmetric in their arguments.

double plcc(std::span<const double> a, std::span<const double> b);

// Pearson correlation of midranks.
double srcc(std::span<const double> a, std::span<const double> b);

// Kendall tau-b, O(n log n) (Knight's merge-sort method).
double krcc(std::span<const double> a, std::span<const double> b);

// 1-based ranks; tied values share the mean of the ranks they span.
std::vector<double> midranks(std::span<const double> values);

inline constexpr double kPlccLossEpsilon = 1e-8;

struct PlccLoss {
  double loss = 0;
  std::vector<double> grad;  // d loss / d pred
};

// l = (1 - r) / 2 with r = cov / (sqrt(var_p + eps) * sqrt(var_g + eps)),
// where cov and var are centred sums (not means). eps keeps the gradient
// finite when the predictions are constant. gt must not be constant.
PlccLoss plcc_loss(std::span<const double> pred, std::span<const double> gt,
                   double eps = kPlccLossEpsilon);

}  // namespace fragq
