#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <boost/math/distributions/binomial.hpp>

#include "hina/error.hpp"

namespace hina {

// Largest trial count handled by exact summation of the PMF. Larger n goes
// through the regularized incomplete beta function.
inline constexpr std::int64_t kExactQuantileLimit = 10'000'000;

namespace detail {

inline void check_binomial_args(std::int64_t n, double rho, double p) {
  if (n < 0) fail("InvalidTrials", "trial count must be non-negative, got " + std::to_string(n));
  if (!(rho >= 0.0 && rho <= 1.0)) fail("InvalidProbability", "success probability must lie in [0, 1]");
  if (!(p > 0.0 && p < 1.0)) fail("InvalidProbability", "quantile level must lie in (0, 1)");
}

// PMF terms are generated outward from the mode by the ratio recurrence
// f(k+1)/f(k) = (n-k)/(k+1) * rho/(1-rho), relative to f(mode) = 1, so nothing
// underflows near the mode. Terms smaller than `cutoff` (relative to the mode)
// are dropped; the CDF is the running sum divided by the window total.
inline std::int64_t quantile_by_summation(std::int64_t n, double rho, double p) {
  using real = long double;
  const real odds = static_cast<real>(rho) / (1.0L - static_cast<real>(rho));
  const std::int64_t mode = std::clamp<std::int64_t>(
      static_cast<std::int64_t>(std::floor(static_cast<real>(n + 1) * rho)), 0, n);
  const real cutoff = std::max<real>(static_cast<real>(p) * 1e-25L, 1e-4000L);

  std::vector<real> below;  // f(mode-1), f(mode-2), ...
  for (std::int64_t k = mode; k > 0;) {
    real prev = below.empty() ? 1.0L : below.back();
    // f(k-1) = f(k) * k / ((n-k+1) * odds)
    real t = prev * static_cast<real>(k) / (static_cast<real>(n - k + 1) * odds);
    --k;
    if (t < cutoff) break;
    below.push_back(t);
  }
  std::vector<real> above;  // f(mode+1), f(mode+2), ...
  for (std::int64_t k = mode; k < n;) {
    real prev = above.empty() ? 1.0L : above.back();
    real t = prev * static_cast<real>(n - k) / static_cast<real>(k + 1) * odds;
    ++k;
    if (t < cutoff) break;
    above.push_back(t);
  }

  real total = 0.0L;
  for (auto it = below.begin(); it != below.end(); ++it) total += *it;
  total += 1.0L;
  for (auto t : above) total += t;

  const real target = static_cast<real>(p);
  real acc = 0.0L;
  for (std::size_t r = below.size(); r-- > 0;) {
    acc += below[r];
    if (acc / total >= target) return mode - static_cast<std::int64_t>(r) - 1;
  }
  acc += 1.0L;
  if (acc / total >= target) return mode;
  for (std::size_t r = 0; r < above.size(); ++r) {
    acc += above[r];
    if (acc / total >= target) return mode + static_cast<std::int64_t>(r) + 1;
  }
  return mode + static_cast<std::int64_t>(above.size());
}

inline std::int64_t quantile_by_incomplete_beta(std::int64_t n, double rho, double p) {
  boost::math::binomial_distribution<double> dist(static_cast<double>(n), rho);
  // Smallest k with cdf(k) >= p; the CDF is monotone in k.
  std::int64_t lo = 0, hi = n;
  while (lo < hi) {
    std::int64_t mid = lo + (hi - lo) / 2;
    if (boost::math::cdf(dist, static_cast<double>(mid)) >= p)
      hi = mid;
    else
      lo = mid + 1;
  }
  return lo;
}

}  // namespace detail

// Smallest k in [0, n] with P(X <= k) >= p for X ~ Binomial(n, rho).
inline std::int64_t binomial_quantile(std::int64_t n, double rho, double p) {
  detail::check_binomial_args(n, rho, p);
  if (n == 0 || rho == 0.0) return 0;
  if (rho == 1.0) return n;
  if (n <= kExactQuantileLimit) return detail::quantile_by_summation(n, rho, p);
  return detail::quantile_by_incomplete_beta(n, rho, p);
}

}  // namespace hina
