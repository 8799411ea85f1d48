#pragma once

// Shared generators and independent oracles for the test suites. Nothing here
// calls into the code paths it is used to check.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "hina/hin.hpp"

namespace hina::oracle {

// Hin with the given per-cell weights (row-major n1 x n2, zeros omitted) and
// labels s0.., t0...
inline Hin hin_from_matrix(std::size_t n1, std::size_t n2, const std::vector<Weight>& cells) {
  std::vector<Node> s1, s2;
  for (std::size_t i = 0; i < n1; ++i) s1.push_back({NodeLabel("s" + std::to_string(i)), {}});
  for (std::size_t j = 0; j < n2; ++j) s2.push_back({NodeLabel("t" + std::to_string(j)), {}});
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t j = 0; j < n2; ++j)
      if (auto w = cells[i * n2 + j]) edges.push_back({i, j, w});
  return Hin(std::move(s1), std::move(s2), std::move(edges));
}

// Throws W unit weights into cells with a random skew; every Set1 node gets
// at least one unit so W >= n1.
inline Hin random_hin(std::mt19937_64& rng, std::size_t max_n1, std::size_t max_n2, Weight max_w) {
  std::uniform_int_distribution<std::size_t> d1(1, max_n1), d2(1, max_n2);
  const std::size_t n1 = d1(rng), n2 = d2(rng);
  std::uniform_int_distribution<Weight> dw(static_cast<Weight>(n1), std::max<Weight>(max_w, n1));
  const Weight w = dw(rng);
  std::vector<double> propensity(n1 * n2);
  std::gamma_distribution<double> skew(0.5, 1.0);
  for (auto& p : propensity) p = skew(rng) + 1e-9;
  std::discrete_distribution<std::size_t> cell(propensity.begin(), propensity.end());
  std::vector<Weight> cells(n1 * n2, 0);
  for (std::size_t i = 0; i < n1; ++i) {
    std::uniform_int_distribution<std::size_t> j(0, n2 - 1);
    ++cells[i * n2 + j(rng)];
  }
  for (Weight u = static_cast<Weight>(n1); u < w; ++u) ++cells[cell(rng)];
  return hin_from_matrix(n1, n2, cells);
}

// P(X <= k) for X ~ Binomial(n, rho), each PMF term evaluated directly from
// log-gamma and summed from k = 0.
inline std::int64_t brute_force_quantile(std::int64_t n, double rho, double p) {
  if (rho == 0.0) return 0;
  if (rho == 1.0) return n;
  const long double lr = std::log(static_cast<long double>(rho));
  const long double lq = std::log1p(-static_cast<long double>(rho));
  long double cdf = 0.0L;
  for (std::int64_t k = 0; k <= n; ++k) {
    long double log_term = std::lgamma(static_cast<long double>(n) + 1.0L) -
                           std::lgamma(static_cast<long double>(k) + 1.0L) -
                           std::lgamma(static_cast<long double>(n - k) + 1.0L) + k * lr + (n - k) * lq;
    cdf += std::exp(log_term);
    if (cdf >= static_cast<long double>(p)) return k;
  }
  return n;
}

inline long double brute_force_cdf(std::int64_t n, double rho, std::int64_t upto) {
  if (rho == 0.0) return upto >= 0 ? 1.0L : 0.0L;
  if (rho == 1.0) return upto >= n ? 1.0L : 0.0L;
  const long double lr = std::log(static_cast<long double>(rho));
  const long double lq = std::log1p(-static_cast<long double>(rho));
  long double cdf = 0.0L;
  for (std::int64_t k = 0; k <= upto && k <= n; ++k)
    cdf += std::exp(std::lgamma(static_cast<long double>(n) + 1.0L) - std::lgamma(static_cast<long double>(k) + 1.0L) -
                    std::lgamma(static_cast<long double>(n - k) + 1.0L) + k * lr + (n - k) * lq);
  return cdf;
}

using BigInt = boost::multiprecision::cpp_int;

inline BigInt big_factorial(std::int64_t n) {
  BigInt r = 1;
  for (std::int64_t k = 2; k <= n; ++k) r *= k;
  return r;
}

inline BigInt big_binom(std::int64_t n, std::int64_t k) {
  if (k < 0 || k > n) return 0;
  return big_factorial(n) / (big_factorial(k) * big_factorial(n - k));
}

inline double big_log2(const BigInt& x) {
  const auto msb = static_cast<long>(boost::multiprecision::msb(x));
  const long shift = std::max(0L, msb - 62);
  const BigInt top = x >> shift;
  return static_cast<double>(std::log2(static_cast<long double>(top.convert_to<std::uint64_t>())) + shift);
}

// Description length as the log of one exact integer: the number of codewords
// N1 * C(N1-1, B-1) * N1!/prod n_r! * C(B N2 + W - 1, W) * prod C(n_r + w_rj - 1, w_rj).
inline double exact_description_length(const Hin& hin, const std::vector<std::size_t>& labels) {
  std::size_t b = 0;
  for (auto l : labels) b = std::max(b, l + 1);
  std::vector<std::int64_t> sizes(b, 0);
  for (auto l : labels) ++sizes[l];
  std::vector<std::vector<std::int64_t>> block(b, std::vector<std::int64_t>(hin.n2(), 0));
  for (const auto& e : hin.edges()) block[labels[e.i]][e.j] += e.w;

  const auto n1 = static_cast<std::int64_t>(hin.n1());
  const auto n2 = static_cast<std::int64_t>(hin.n2());
  const auto w = hin.total_weight();
  BigInt count = n1;
  count *= big_binom(n1 - 1, static_cast<std::int64_t>(b) - 1);
  BigInt multinomial = big_factorial(n1);
  for (auto s : sizes) multinomial /= big_factorial(s);
  count *= multinomial;
  count *= big_binom(static_cast<std::int64_t>(b) * n2 + w - 1, w);
  for (std::size_t r = 0; r < b; ++r)
    for (auto x : block[r]) count *= big_binom(sizes[r] + x - 1, x);
  return big_log2(count);
}

inline std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace hina::oracle
