#pragma once

#include <span>
#include <string>

namespace kdseg {

struct MannWhitneyResult {
  double u_a = 0.0;  // U statistic of sample a
  double u_b = 0.0;  // n_a * n_b - u_a
  double p_value = 1.0;
  bool exact = false;
  double z = 0.0;  // normal-approximation score; 0 for exact results
  std::string label;
};

/// "***" for p <= 0.001, "**" for p <= 0.01, "*" for p <= 0.05, else "ns".
std::string significance_label(double p);

/// Two-sided Mann-Whitney U test with midranks for ties.
///
/// When either sample has at most 8 values the p-value is exact: the null
/// distribution of the rank sum is enumerated over every assignment of the
/// pooled midranks, and p = min(1, 2 * min(P(U <= u), P(U >= u))).
/// Otherwise the normal approximation with tie-corrected variance and a
/// continuity correction of 0.5 is used.
///
/// Throws StatisticsError if either sample is empty or holds a NaN.
MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b);

}  // namespace kdseg
