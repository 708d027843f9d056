#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace bvcqr::stats {

/// Empirical quantile by linear interpolation of order statistics
/// (the "type 7" rule): h = (n-1)p, x[floor h] + frac(h)(x[floor h + 1] - x[floor h]).
/// `sorted` must be ascending and non-empty.
double quantile_sorted(std::span<const double> sorted, double p);

/// Convenience wrapper that copies and sorts.
double quantile(std::span<const double> values, double p);

double mean(std::span<const double> values);

/// Sample variance with n-1 denominator; 0 for fewer than two values.
double sample_variance(std::span<const double> values);
double sample_sd(std::span<const double> values);

/// Standard normal CDF.
double normal_cdf(double x);

/// Asymptotic Kolmogorov survival function P(K > lambda).
double kolmogorov_survival(double lambda);

/// One-sample KS test against a continuous CDF. Returns the p-value
/// (with the Stephens small-sample correction of the statistic).
template <typename Cdf>
double ks_test(std::vector<double> values, Cdf cdf);

/// 64-bit mixing step used to derive independent seeds.
std::uint64_t splitmix64(std::uint64_t x);

/// FNV-1a hash of a byte range.
std::uint64_t fnv1a(std::span<const char> bytes);

}  // namespace bvcqr::stats

#include <algorithm>
#include <cmath>

namespace bvcqr::stats {

template <typename Cdf>
double ks_test(std::vector<double> values, Cdf cdf) {
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  double d = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double f = cdf(values[i]);
    d = std::max(d, std::max(f - i / n, (i + 1) / n - f));
  }
  const double root_n = std::sqrt(n);
  return kolmogorov_survival((root_n + 0.12 + 0.11 / root_n) * d);
}

}  // namespace bvcqr::stats
