#include "kdseg/stats.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <numeric>
#include <vector>

#include "kdseg/errors.hpp"

namespace kdseg {

namespace {

constexpr std::size_t kExactLimit = 8;

struct Ranked {
  std::vector<double> ranks;  // midranks of the pooled sample, a first then b
  double tie_term = 0.0;      // sum over tie groups of t^3 - t
};

Ranked midranks(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size() + b.size();
  std::vector<double> pooled;
  pooled.reserve(n);
  pooled.insert(pooled.end(), a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return pooled[i] < pooled[j]; });
  Ranked r;
  r.ranks.assign(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && pooled[order[j + 1]] == pooled[order[i]]) ++j;
    const double rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) r.ranks[order[k]] = rank;
    const double t = static_cast<double>(j - i + 1);
    r.tie_term += t * t * t - t;
    i = j + 1;
  }
  return r;
}

// Exact two-sided p-value for the rank sum of `chosen` ranks drawn from the
// pooled set. Ranks are doubled so midranks become integers.
double exact_p_value(const std::vector<double>& ranks, std::size_t chosen, double observed_sum) {
  std::vector<long> doubled(ranks.size());
  for (std::size_t i = 0; i < ranks.size(); ++i) doubled[i] = std::lround(2.0 * ranks[i]);
  std::vector<long> largest = doubled;
  std::sort(largest.begin(), largest.end(), std::greater<>());
  const long max_sum = std::accumulate(largest.begin(), largest.begin() + static_cast<std::ptrdiff_t>(chosen), 0L);
  // ways[k][s]: subsets of size k with doubled rank sum s
  std::vector<std::vector<double>> ways(chosen + 1, std::vector<double>(max_sum + 1, 0.0));
  ways[0][0] = 1.0;
  long reach = 0;
  for (long r : doubled) {
    reach = std::min(max_sum, reach + r);
    for (std::size_t k = chosen; k >= 1; --k) {
      auto& dst = ways[k];
      const auto& src = ways[k - 1];
      for (long s = reach; s >= r; --s) dst[s] += src[s - r];
    }
  }
  const long obs = std::lround(2.0 * observed_sum);
  double total = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  for (long s = 0; s <= max_sum; ++s) {
    const double w = ways[chosen][s];
    total += w;
    if (s <= obs) lower += w;
    if (s >= obs) upper += w;
  }
  return std::min(1.0, 2.0 * std::min(lower, upper) / total);
}

}  // namespace

std::string significance_label(double p) {
  if (p <= 0.001) return "***";
  if (p <= 0.01) return "**";
  if (p <= 0.05) return "*";
  return "ns";
}

MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw StatisticsError("mann_whitney_u needs two non-empty samples");
  for (auto s : {a, b}) {
    if (std::any_of(s.begin(), s.end(), [](double v) { return std::isnan(v); })) {
      throw StatisticsError("mann_whitney_u: sample contains NaN");
    }
  }
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const Ranked ranked = midranks(a, b);
  const double rank_sum_a = std::accumulate(ranked.ranks.begin(), ranked.ranks.begin() + a.size(), 0.0);

  MannWhitneyResult res;
  res.u_a = rank_sum_a - na * (na + 1.0) / 2.0;
  res.u_b = na * nb - res.u_a;

  if (std::min(a.size(), b.size()) <= kExactLimit) {
    res.exact = true;
    if (a.size() <= b.size()) {
      res.p_value = exact_p_value(ranked.ranks, a.size(), rank_sum_a);
    } else {
      const double rank_sum_b = std::accumulate(ranked.ranks.begin() + a.size(), ranked.ranks.end(), 0.0);
      std::vector<double> reordered(ranked.ranks.begin() + a.size(), ranked.ranks.end());
      reordered.insert(reordered.end(), ranked.ranks.begin(), ranked.ranks.begin() + a.size());
      res.p_value = exact_p_value(reordered, b.size(), rank_sum_b);
    }
  } else {
    const double n = na + nb;
    const double mean = na * nb / 2.0;
    const double var = na * nb / 12.0 * ((n + 1.0) - ranked.tie_term / (n * (n - 1.0)));
    if (var <= 0.0) {
      res.p_value = 1.0;
    } else {
      const double dev = std::max(0.0, std::abs(res.u_a - mean) - 0.5);
      res.z = dev / std::sqrt(var);
      res.p_value = std::min(1.0, std::erfc(res.z / std::numbers::sqrt2));
    }
  }
  res.label = significance_label(res.p_value);
  return res;
}

}  // namespace kdseg
