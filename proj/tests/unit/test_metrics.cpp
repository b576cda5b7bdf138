#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "fragq/errors.hpp"
#include "fragq/metrics.hpp"
#include "fragq/rng.hpp"

using namespace fragq;

namespace {

// Brute-force references: textbook formulas, no shared code with the library.
double ref_pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ma += a[i] / n, mb += b[i] / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

std::vector<double> ref_ranks(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0, equal = 0;
    for (double w : v) less += w < v[i], equal += w == v[i];
    r[i] = less + (equal + 1) / 2;
  }
  return r;
}

// Tau-b over all pairs.
double ref_kendall(const std::vector<double>& a, const std::vector<double>& b) {
  double conc = 0, disc = 0, ta = 0, tb = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      const double da = a[i] - a[j], db = b[i] - b[j];
      if (da == 0 && db == 0) continue;
      if (da == 0) ta += 1;
      else if (db == 0) tb += 1;
      else if (da * db > 0) conc += 1;
      else disc += 1;
    }
  return (conc - disc) / std::sqrt((conc + disc + ta) * (conc + disc + tb));
}

std::vector<double> draw(Rng& rng, int n, bool ties) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = ties ? static_cast<double>(rng.uniform_int(0, 4)) : rng.normal();
  return v;
}

}  // namespace

TEST(Metrics, HandExample) {
  const std::vector<double> a{1, 2, 3}, b{1, 3, 2};
  EXPECT_NEAR(plcc(a, b), 0.5, 1e-15);
  EXPECT_NEAR(srcc(a, b), 0.5, 1e-15);
  EXPECT_NEAR(krcc(a, b), 1.0 / 3.0, 1e-15);
}

TEST(Metrics, MatchBruteForceWithAndWithoutTies) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = static_cast<int>(rng.uniform_int(3, 40));
    const bool ties = trial % 2 == 1;
    auto a = draw(rng, n, ties), b = draw(rng, n, ties);
    if (std::all_of(a.begin(), a.end(), [&](double x) { return x == a[0]; }) ||
        std::all_of(b.begin(), b.end(), [&](double x) { return x == b[0]; }))
      continue;
    EXPECT_NEAR(plcc(a, b), ref_pearson(a, b), 1e-12);
    EXPECT_NEAR(srcc(a, b), ref_pearson(ref_ranks(a), ref_ranks(b)), 1e-12);
    EXPECT_NEAR(krcc(a, b), ref_kendall(a, b), 1e-12);
  }
}

TEST(Metrics, MidranksAverageTies) {
  const std::vector<double> v{3, 1, 3, 2};
  EXPECT_EQ(midranks(v), (std::vector<double>{3.5, 1, 3.5, 2}));
}

TEST(Metrics, InvariantUnderMonotoneTransform) {
  Rng rng(5);
  auto a = draw(rng, 30, false), b = draw(rng, 30, false);
  std::vector<double> e(a.size());
  std::transform(a.begin(), a.end(), e.begin(), [](double x) { return std::exp(3 * x); });
  EXPECT_NEAR(srcc(a, b), srcc(e, b), 1e-14);
  EXPECT_NEAR(krcc(a, b), krcc(e, b), 1e-14);
}

TEST(Metrics, ErrorsOnBadInput) {
  const std::vector<double> c{2, 2, 2}, x{1, 2, 3};
  EXPECT_THROW(plcc(c, x), DegenerateError);
  EXPECT_THROW(srcc(x, c), DegenerateError);
  EXPECT_THROW(krcc(c, x), DegenerateError);
  EXPECT_THROW(plcc(std::vector<double>{1, 2}, x), ContractError);
  EXPECT_THROW(plcc(std::vector<double>{1}, std::vector<double>{1}), ContractError);
  EXPECT_THROW(plcc(std::vector<double>{1, NAN, 3}, x), ContractError);
}

TEST(PlccLoss, ValueAndFiniteDifferenceGradient) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    auto p = draw(rng, 8, false), g = draw(rng, 8, false);
    const PlccLoss l = plcc_loss(p, g, 0.0);
    EXPECT_NEAR(l.loss, (1 - ref_pearson(p, g)) / 2, 1e-12);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double h = 1e-6;
      auto hi = p, lo = p;
      hi[i] += h, lo[i] -= h;
      const double num = (plcc_loss(hi, g, 0.0).loss - plcc_loss(lo, g, 0.0).loss) / (2 * h);
      EXPECT_NEAR(l.grad[i], num, 1e-8 + 1e-6 * std::abs(num));
    }
  }
}

TEST(PlccLoss, ConstantPredictionsStayFinite) {
  const std::vector<double> p{1, 1, 1, 1}, g{1, 2, 3, 4};
  const PlccLoss l = plcc_loss(p, g);
  EXPECT_TRUE(std::isfinite(l.loss));
  for (double d : l.grad) EXPECT_TRUE(std::isfinite(d));
  EXPECT_THROW(plcc_loss(g, p), DegenerateError);
}
