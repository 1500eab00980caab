#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <vector>

#include "traceneat/core.hpp"

namespace traceneat {

struct MannWhitneyResult {
  double u = 0;        // U of the first sample
  double p_value = 1;  // two-sided
  double z = 0;        // normal-approximation statistic (0 for the exact path)
  bool exact = false;
};

namespace detail {

/// Midranks (1-based) of the pooled sample.
inline std::vector<double> midranks(const std::vector<double>& pooled) {
  std::vector<std::size_t> order(pooled.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pooled[a] < pooled[b]; });
  std::vector<double> ranks(pooled.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && pooled[order[j + 1]] == pooled[order[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

inline double u_statistic(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> pooled(x);
  pooled.insert(pooled.end(), y.begin(), y.end());
  const auto ranks = midranks(pooled);
  double r1 = 0;
  for (std::size_t i = 0; i < x.size(); ++i) r1 += ranks[i];
  const double n = static_cast<double>(x.size());
  return r1 - n * (n + 1) / 2.0;
}

inline void check_samples(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.empty() || y.empty()) throw ValidationError("mann_whitney_u: both samples must be non-empty");
  for (double v : x)
    if (std::isnan(v)) throw ValidationError("mann_whitney_u: NaN in sample");
  for (double v : y)
    if (std::isnan(v)) throw ValidationError("mann_whitney_u: NaN in sample");
}

}  // namespace detail

/// Normal approximation with tie correction and continuity correction.
inline MannWhitneyResult mann_whitney_normal(const std::vector<double>& x, const std::vector<double>& y) {
  detail::check_samples(x, y);
  const double n = static_cast<double>(x.size());
  const double m = static_cast<double>(y.size());
  MannWhitneyResult r;
  r.u = detail::u_statistic(x, y);
  std::vector<double> pooled(x);
  pooled.insert(pooled.end(), y.begin(), y.end());
  std::sort(pooled.begin(), pooled.end());
  double ties = 0;
  for (std::size_t i = 0; i < pooled.size();) {
    std::size_t j = i;
    while (j < pooled.size() && pooled[j] == pooled[i]) ++j;
    const double t = static_cast<double>(j - i);
    ties += t * t * t - t;
    i = j;
  }
  const double N = n + m;
  const double var = n * m / 12.0 * ((N + 1) - ties / (N * (N - 1)));
  if (var <= 0) return r;  // all values tied
  const double diff = std::abs(r.u - n * m / 2.0);
  r.z = std::max(0.0, diff - 0.5) / std::sqrt(var);
  r.p_value = std::min(1.0, std::erfc(r.z / std::sqrt(2.0)));
  return r;
}

/// Exact two-sided p by enumerating every split of the pooled midranks.
/// Cost is C(n+m, n); intended for small samples.
inline MannWhitneyResult mann_whitney_exact(const std::vector<double>& x, const std::vector<double>& y) {
  detail::check_samples(x, y);
  if (x.size() + y.size() > 30) throw ValidationError("mann_whitney_exact: samples too large to enumerate");
  std::vector<double> pooled(x);
  pooled.insert(pooled.end(), y.begin(), y.end());
  const auto ranks = detail::midranks(pooled);
  const std::size_t n = x.size();
  const std::size_t total = pooled.size();
  const double nd = static_cast<double>(n);
  const double center = nd * static_cast<double>(y.size()) / 2.0;

  MannWhitneyResult r;
  r.exact = true;
  r.u = detail::u_statistic(x, y);
  const double observed = std::abs(r.u - center);

  // walk all n-subsets of positions with a combination index vector
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::uint64_t count = 0, extreme = 0;
  while (true) {
    double rs = 0;
    for (auto i : idx) rs += ranks[i];
    const double u = rs - nd * (nd + 1) / 2.0;
    ++count;
    if (std::abs(u - center) >= observed - 1e-9) ++extreme;
    std::size_t k = n;
    while (k > 0 && idx[k - 1] == total - n + (k - 1)) --k;
    if (k == 0) break;
    ++idx[k - 1];
    for (std::size_t j = k; j < n; ++j) idx[j] = idx[j - 1] + 1;
  }
  r.p_value = static_cast<double>(extreme) / static_cast<double>(count);
  return r;
}

/// Two-sided test; exact when both samples have at most 8 values.
inline MannWhitneyResult mann_whitney_u(const std::vector<double>& x, const std::vector<double>& y) {
  detail::check_samples(x, y);
  if (x.size() <= 8 && y.size() <= 8) return mann_whitney_exact(x, y);
  return mann_whitney_normal(x, y);
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw ValidationError("median: empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : (v[h - 1] + v[h]) / 2.0;
}

inline double mean(const std::vector<double>& v) {
  if (v.empty()) throw ValidationError("mean: empty sample");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace traceneat
