#pragma once

// One-way ANOVA and the F-distribution survival function.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "linkring/error.hpp"

namespace linkring {

namespace detail {

// Continued fraction for I_x(a, b) by the modified Lentz method.
inline double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIterations = 10000;
  constexpr double kEps = 1e-15;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) return h;
  }
  return h;
}

}  // namespace detail

// Regularized incomplete beta I_x(a, b), a, b > 0, x in [0, 1].
inline double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw Error(ErrorKind::InvalidDf, "incomplete beta needs a, b > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  // The fraction converges fast for x below the mean; use symmetry otherwise.
  if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * detail::beta_continued_fraction(b, a, 1.0 - x) / b;
}

// P(X > f) for X ~ F(df1, df2).
inline double f_sf(double f, double df1, double df2) {
  if (!(df1 >= 1.0) || !(df2 >= 1.0))
    throw Error(ErrorKind::InvalidDf, "degrees of freedom must be >= 1 (got " + std::to_string(df1) + ", " +
                                          std::to_string(df2) + ")");
  if (std::isnan(f) || f < 0.0) throw Error(ErrorKind::OutOfRange, "F statistic must be >= 0");
  if (f == 0.0) return 1.0;
  if (std::isinf(f)) return 0.0;
  const double x = df2 / (df2 + df1 * f);
  // Complementary form keeps precision in the far tail.
  const double p = incomplete_beta(df2 / 2.0, df1 / 2.0, x);
  return std::clamp(p, 0.0, 1.0);
}

struct AnovaResult {
  double f = 0.0;
  int df1 = 0;
  int df2 = 0;
  double p = 1.0;
  double ss_between = 0.0;
  double ss_within = 0.0;
  std::vector<double> group_means;
};

inline AnovaResult anova_one_way(const std::vector<std::vector<double>>& groups) {
  const auto k = groups.size();
  if (k < 2) throw Error(ErrorKind::InsufficientData, "ANOVA needs at least two groups");
  std::size_t n = 0;
  double total = 0.0;
  for (const auto& g : groups) {
    if (g.empty()) throw Error(ErrorKind::InsufficientData, "ANOVA group without observations");
    n += g.size();
    total += std::accumulate(g.begin(), g.end(), 0.0);
  }
  if (n <= k) throw Error(ErrorKind::InsufficientData, "ANOVA needs more observations than groups");

  AnovaResult r;
  const double grand = total / static_cast<double>(n);
  for (const auto& g : groups) {
    const double mean = std::accumulate(g.begin(), g.end(), 0.0) / static_cast<double>(g.size());
    r.group_means.push_back(mean);
    r.ss_between += static_cast<double>(g.size()) * (mean - grand) * (mean - grand);
    for (double v : g) r.ss_within += (v - mean) * (v - mean);
  }
  r.df1 = static_cast<int>(k) - 1;
  r.df2 = static_cast<int>(n - k);
  double spread = 0.0;
  for (const auto& g : groups)
    for (double v : g) spread += (v - grand) * (v - grand);
  if (spread == 0.0) throw Error(ErrorKind::DegenerateData, "all observations are identical");
  // Relative test so an affine rescaling cannot flip this case.
  if (r.ss_within <= 1e-15 * spread) {
    r.ss_within = 0.0;
    r.f = std::numeric_limits<double>::infinity();
    r.p = 0.0;
    return r;
  }
  const double msb = r.ss_between / r.df1;
  const double msw = r.ss_within / r.df2;
  r.f = msb / msw;
  r.p = f_sf(r.f, r.df1, r.df2);
  return r;
}

}  // namespace linkring
