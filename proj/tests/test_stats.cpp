#include <doctest.h>

#include <cmath>

#include "kdseg/errors.hpp"
#include "kdseg/stats.hpp"
#include "support.hpp"

using namespace kdseg;

TEST_CASE("star labels") {
  CHECK(significance_label(0.0005) == "***");
  CHECK(significance_label(0.001) == "***");
  CHECK(significance_label(0.0011) == "**");
  CHECK(significance_label(0.01) == "**");
  CHECK(significance_label(0.03) == "*");
  CHECK(significance_label(0.05) == "*");
  CHECK(significance_label(0.051) == "ns");
  CHECK(significance_label(0.3) == "ns");
}

TEST_CASE("exact small-sample values") {
  const std::vector<double> a = {1, 2, 3};
  const std::vector<double> b = {4, 5, 6};
  const auto r = mann_whitney_u(a, b);
  CHECK(r.exact);
  CHECK(r.u_a == 0.0);
  CHECK(r.u_b == 9.0);
  CHECK(r.p_value == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(r.label == "ns");

  // Reference values from scipy.stats.mannwhitneyu(method="exact").
  const auto r2 = mann_whitney_u(std::vector<double>{1.5, 2.5, 7}, std::vector<double>{3, 4, 9, 10});
  CHECK(r2.u_a == 2.0);
  CHECK(r2.p_value == doctest::Approx(0.22857142857142856).epsilon(1e-12));
  std::vector<double> c(8);
  std::vector<double> d(10);
  for (int i = 0; i < 8; ++i) c[i] = i + 1;
  for (int i = 0; i < 10; ++i) d[i] = i + 9;
  const auto r3 = mann_whitney_u(c, d);
  CHECK(r3.exact);
  CHECK(r3.p_value == doctest::Approx(4.570592805886923e-05).epsilon(1e-9));
  CHECK(r3.label == "***");
}

TEST_CASE("identical samples are not significant") {
  const std::vector<double> a = {0.7, 0.8, 0.75, 0.9, 0.6};
  const auto r = mann_whitney_u(a, a);
  CHECK(r.p_value == doctest::Approx(1.0));
  CHECK(r.label == "ns");
  std::vector<double> big(30);
  for (int i = 0; i < 30; ++i) big[i] = std::sin(i);
  const auto r2 = mann_whitney_u(big, big);
  CHECK_FALSE(r2.exact);
  CHECK(r2.p_value == doctest::Approx(1.0));
}

TEST_CASE("exact p-values agree with subset enumeration, ties included") {
  Rng rng(41);
  for (int trial = 0; trial < 60; ++trial) {
    const int na = 1 + static_cast<int>(uniform_index(rng, 6));
    const int nb = 1 + static_cast<int>(uniform_index(rng, 6));
    std::vector<double> a(na);
    std::vector<double> b(nb);
    for (auto& v : a) v = static_cast<double>(uniform_index(rng, 5));
    for (auto& v : b) v = static_cast<double>(uniform_index(rng, 5));
    const auto [u, p] = kdseg::testing::enumerate_mann_whitney(a, b);
    const auto r = mann_whitney_u(a, b);
    CHECK(r.u_a == doctest::Approx(u));
    CHECK(r.p_value == doctest::Approx(p).epsilon(1e-12));
  }
}

TEST_CASE("rank test ignores strictly monotone transforms") {
  Rng rng(43);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> a(12);
    std::vector<double> b(15);
    for (auto& v : a) v = uniform(rng, 0.1, 2.0);
    for (auto& v : b) v = uniform(rng, 0.3, 2.5);
    std::vector<double> ta;
    std::vector<double> tb;
    for (double v : a) ta.push_back(std::log(v) * 3.0 + 1.0);
    for (double v : b) tb.push_back(std::log(v) * 3.0 + 1.0);
    const auto r = mann_whitney_u(a, b);
    const auto t = mann_whitney_u(ta, tb);
    CHECK(r.u_a == t.u_a);
    CHECK(r.p_value == t.p_value);
  }
}

TEST_CASE("normal approximation against scipy") {
  // scipy.stats.mannwhitneyu(method="asymptotic", use_continuity=True)
  std::vector<double> a(20);
  std::vector<double> b(20);
  for (int i = 0; i < 20; ++i) {
    a[i] = i + 1;
    b[i] = i + 21;
  }
  const auto sep = mann_whitney_u(a, b);
  CHECK_FALSE(sep.exact);
  CHECK(sep.u_a == 0.0);
  CHECK(sep.p_value == doctest::Approx(6.795615128173358e-08).epsilon(1e-9));
  CHECK(sep.label == "***");

  const std::vector<double> ta = {4, 2, 0, 4, 3, 3, 0, 1, 3, 4, 2, 4, 4, 1, 4, 1, 1, 3, 3, 0};
  const std::vector<double> tb = {5, 1, 5, 1, 4, 4, 4, 4, 3, 4, 2, 4, 3, 3, 3, 3, 1, 1, 2, 1};
  const auto tied = mann_whitney_u(ta, tb);
  CHECK(tied.u_a == 159.5);
  CHECK(tied.p_value == doctest::Approx(0.26569615150932135).epsilon(1e-9));
}

TEST_CASE("invalid samples") {
  const std::vector<double> empty;
  const std::vector<double> one = {1.0};
  CHECK_THROWS_AS(mann_whitney_u(empty, one), StatisticsError);
  CHECK_THROWS_AS(mann_whitney_u(one, empty), StatisticsError);
  CHECK_THROWS_AS(mann_whitney_u(std::vector<double>{std::nan("")}, one), StatisticsError);
}
