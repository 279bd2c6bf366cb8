#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "kdseg/errors.hpp"
#include "kdseg/losses.hpp"
#include "support.hpp"

using namespace kdseg;
using kdseg::testing::finite_difference;
using kdseg::testing::max_relative_error;

namespace {

std::vector<double> random_probs(Rng& rng, std::size_t n) {
  std::vector<double> p(n);
  for (auto& v : p) v = uniform(rng, 0.02, 0.98);
  return p;
}

std::vector<double> random_target(Rng& rng, std::size_t n) {
  std::vector<double> t(n);
  for (auto& v : t) v = uniform01(rng) < 0.4 ? 1.0 : 0.0;
  return t;
}

}  // namespace

TEST_CASE("bce matches hand values") {
  const LossConfig cfg;
  const std::vector<double> t2 = {1.0, 0.0};
  CHECK(bce_loss(t2, std::vector<double>{0.5, 0.5}, cfg) == doctest::Approx(std::numbers::ln2).epsilon(1e-12));
  CHECK(bce_loss(std::vector<double>{1.0}, std::vector<double>{0.25}, cfg) ==
        doctest::Approx(-std::log(0.25)).epsilon(1e-12));
  double previous = 1.0;
  for (double eps : {1e-2, 1e-3, 1e-4, 1e-5}) {
    const double loss = bce_loss(t2, std::vector<double>{1.0 - eps, eps}, cfg);
    CHECK(loss < previous);
    previous = loss;
  }
  CHECK(previous < 2e-5);
}

TEST_CASE("bce clips before the logs") {
  const LossConfig cfg;
  const double loss = bce_loss(std::vector<double>{1.0}, std::vector<double>{0.0}, cfg);
  CHECK(std::isfinite(loss));
  CHECK(loss == doctest::Approx(-std::log(cfg.prob_clip_eps)));
  std::vector<double> grad(1);
  bce_loss(std::vector<double>{1.0}, std::vector<double>{0.0}, cfg, grad);
  CHECK(grad[0] == 0.0);
}

TEST_CASE("tversky hard counts") {
  LossConfig cfg;
  cfg.smooth_eps = 1e-12;
  // TP=2, FP=1, FN=1
  const std::vector<double> target = {1, 1, 1, 0};
  const std::vector<double> pred = {1, 1, 0, 1};
  const SoftCounts c = soft_counts(target, pred);
  CHECK(c.tp == 2.0);
  CHECK(c.fp == 1.0);
  CHECK(c.fn == 1.0);
  CHECK(tversky_index(c, 0.2, 0.8, 0.0) == doctest::Approx(2.0 / 3.0));
  CHECK(tversky_loss(target, pred, cfg) == doctest::Approx(1.0 / 3.0));
  // alpha = beta = 0.5 gives the Dice value of these counts.
  CHECK(tversky_index(c, 0.5, 0.5, 0.0) == doctest::Approx(2.0 * 2 / (2.0 * 2 + 1 + 1)));
  // alpha = beta = 1 gives IoU.
  CHECK(tversky_index(c, 1.0, 1.0, 0.0) == doctest::Approx(2.0 / 4.0));
}

TEST_CASE("tversky perfect and empty cases") {
  const LossConfig cfg;
  const std::vector<double> t = {1, 0, 1, 0};
  CHECK(tversky_loss(t, t, cfg) == doctest::Approx(0.0).epsilon(1e-9));
  const std::vector<double> zeros(4, 0.0);
  CHECK(tversky_loss(zeros, zeros, cfg) == 0.0);
}

TEST_CASE("larger beta strictly increases the tversky loss when FN > 0") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const auto t = random_target(rng, 32);
    const auto p = random_probs(rng, 32);
    LossConfig lo;
    LossConfig hi;
    lo.beta = uniform(rng, 0.1, 0.9);
    hi.beta = lo.beta + 0.1;
    if (soft_counts(t, p).fn <= 0.0) continue;
    CHECK(tversky_loss(t, p, hi) > tversky_loss(t, p, lo));
  }
}

TEST_CASE("compound loss composes its terms") {
  LossConfig cfg;
  const std::vector<double> t = {1.0, 0.0};
  const std::vector<double> p = {0.5, 0.5};
  const double hand = 0.4 * std::numbers::ln2 + 0.6 * (1.0 - 0.5 / (0.5 + 0.2 * 0.5 + 0.8 * 0.5));
  CHECK(compound_loss(t, p, cfg) == doctest::Approx(hand).epsilon(1e-6));

  cfg.w_bce = 1.0;
  cfg.w_tversky = 0.0;
  CHECK(compound_loss(t, p, cfg) == bce_loss(t, p, cfg));
}

TEST_CASE("compound loss is linear in its weights") {
  Rng rng(3);
  const auto t = random_target(rng, 20);
  const auto p = random_probs(rng, 20);
  LossConfig a;
  a.w_bce = 0.3;
  a.w_tversky = 0.9;
  LossConfig b = a;
  b.w_bce = 0.7;
  b.w_tversky = 0.1;
  LossConfig sum = a;
  sum.w_bce = a.w_bce + b.w_bce;
  sum.w_tversky = a.w_tversky + b.w_tversky;
  CHECK(compound_loss(t, p, sum) == doctest::Approx(compound_loss(t, p, a) + compound_loss(t, p, b)).epsilon(1e-12));
}

TEST_CASE("losses are non-negative on random inputs") {
  Rng rng(5);
  const LossConfig cfg;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + uniform_index(rng, 64);
    const auto t = random_target(rng, n);
    std::vector<double> p(n);
    for (auto& v : p) v = uniform01(rng);
    CHECK(bce_loss(t, p, cfg) >= 0.0);
    const double tv = tversky_loss(t, p, cfg);
    CHECK(tv >= 0.0);
    CHECK(tv <= 1.0);
    CHECK(compound_loss(t, p, cfg) >= 0.0);
  }
}

TEST_CASE("consistency loss hand values") {
  CHECK(consistency_loss(std::vector<double>{1, 0}, std::vector<double>{0, 1}) == 1.0);
  CHECK(consistency_loss(std::vector<double>{0.5}, std::vector<double>{0.0}) == 0.25);
  const std::vector<double> same = {0.1, 0.7, 0.3};
  CHECK(consistency_loss(same, same) == 0.0);
}

TEST_CASE("analytic gradients match finite differences") {
  Rng rng(17);
  LossConfig cfg;
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 1 + uniform_index(rng, 64);
    const auto t = random_target(rng, n);
    const auto p = random_probs(rng, n);
    std::vector<double> grad(n);

    bce_loss(t, p, cfg, grad);
    auto fd = finite_difference([&](std::span<const double> x) { return bce_loss(t, x, cfg); }, p, 1e-6);
    CHECK(max_relative_error(grad, fd) < 1e-4);

    tversky_loss(t, p, cfg, grad);
    fd = finite_difference([&](std::span<const double> x) { return tversky_loss(t, x, cfg); }, p, 1e-6);
    CHECK(max_relative_error(grad, fd) < 1e-4);

    compound_loss(t, p, cfg, grad);
    fd = finite_difference([&](std::span<const double> x) { return compound_loss(t, x, cfg); }, p, 1e-6);
    CHECK(max_relative_error(grad, fd) < 1e-4);

    const auto q = random_probs(rng, n);
    std::vector<double> ga(n);
    std::vector<double> gb(n);
    consistency_loss(p, q, ga, gb);
    fd = finite_difference([&](std::span<const double> x) { return consistency_loss(x, q); }, p, 1e-6);
    CHECK(max_relative_error(ga, fd) < 1e-4);
    fd = finite_difference([&](std::span<const double> x) { return consistency_loss(p, x); }, q, 1e-6);
    CHECK(max_relative_error(gb, fd) < 1e-4);
  }
}

TEST_CASE("mask overloads check shapes") {
  const LossConfig cfg;
  BinaryMask m("a", 2, 3);
  ProbMap p("a", 3, 2);
  CHECK_THROWS_AS(bce_loss(m, p, cfg), DimensionError);
  CHECK_THROWS_AS(tversky_loss(m, p, cfg), DimensionError);
  CHECK_THROWS_AS(compound_loss(m, p, cfg), DimensionError);
  CHECK_THROWS_AS(consistency_loss(ProbMap("a", 2, 2), ProbMap("b", 1, 4)), DimensionError);
  ProbMap ok("a", 2, 3);
  ok.values = {1, 1, 1, 0, 0, 0};
  m.pixels = {1, 1, 1, 0, 0, 0};
  CHECK(compound_loss(m, ok, cfg) == doctest::Approx(0.0).epsilon(1e-5));
}

TEST_CASE("loss config validation") {
  LossConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.prob_clip_eps = 0.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = LossConfig{};
  cfg.smooth_eps = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = LossConfig{};
  cfg.alpha = -0.1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = LossConfig{};
  cfg.w_tversky = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
