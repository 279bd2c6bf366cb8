#include <doctest.h>

#include <cmath>

#include "kdseg/errors.hpp"
#include "kdseg/losses.hpp"
#include "kdseg/metrics.hpp"
#include "support.hpp"

using namespace kdseg;

namespace {

BinaryMask mask_of(int h, int w, std::vector<std::uint8_t> px) {
  BinaryMask m("m", h, w);
  m.pixels = std::move(px);
  return m;
}

BinaryMask dots(int h, int w, std::initializer_list<std::pair<int, int>> pts) {
  BinaryMask m("m", h, w);
  for (auto [y, x] : pts) m.at(y, x) = 1;
  return m;
}

}  // namespace

TEST_CASE("confusion counts") {
  const auto c = confusion(mask_of(1, 4, {1, 1, 0, 0}), mask_of(1, 4, {1, 0, 1, 0}));
  CHECK(c == ConfusionCounts{1, 1, 1, 1});
  BinaryMask ones("o", 3, 3);
  std::fill(ones.pixels.begin(), ones.pixels.end(), 1);
  CHECK(confusion(ones, ones) == ConfusionCounts{9, 0, 0, 0});
  BinaryMask zeros("z", 3, 3);
  const auto opposite = confusion(zeros, ones);
  CHECK(opposite.tp == 0);
  CHECK(opposite.tn == 0);
  CHECK_THROWS_AS(confusion(BinaryMask("a", 2, 3), BinaryMask("b", 3, 2)), DimensionError);
}

TEST_CASE("metric hand values") {
  const ConfusionCounts c{1, 1, 1, 1};
  CHECK(dice(c) == 0.5);
  CHECK(iou(c) == doctest::Approx(1.0 / 3.0));
  CHECK(tpr(c) == 0.5);
  CHECK(fpr(c) == 0.5);
  CHECK(f1(c) == doctest::Approx(0.5));
  const ConfusionCounts perfect{5, 0, 0, 11};
  CHECK(dice(perfect) == 1.0);
  CHECK(iou(perfect) == 1.0);
  CHECK(tpr(perfect) == 1.0);
  CHECK(f1(perfect) == 1.0);
  CHECK(fpr(perfect) == 0.0);
}

TEST_CASE("degenerate denominators") {
  const ConfusionCounts empty{0, 0, 0, 9};
  CHECK(dice(empty) == 1.0);
  CHECK(iou(empty) == 1.0);
  CHECK(f1(empty) == 1.0);
  CHECK(tpr(empty) == 1.0);
  const ConfusionCounts missed{0, 0, 4, 5};
  CHECK(dice(missed) == 0.0);
  CHECK(iou(missed) == 0.0);
  CHECK(f1(missed) == 0.0);
  const ConfusionCounts spurious{0, 3, 0, 6};
  CHECK(dice(spurious) == 0.0);
  CHECK(f1(spurious) == 0.0);
  CHECK(tpr(spurious) == 1.0);
  const ConfusionCounts all_fg{4, 0, 0, 0};
  CHECK(fpr(all_fg) == 0.0);
}

TEST_CASE("dice, iou, f1 and tversky identities on random counts") {
  Rng rng(31);
  for (int trial = 0; trial < 500; ++trial) {
    ConfusionCounts c{uniform_index(rng, 50), uniform_index(rng, 50), uniform_index(rng, 50), uniform_index(rng, 50)};
    if (c.tp + c.fp + c.fn == 0) continue;
    const double i = iou(c);
    CHECK(dice(c) == doctest::Approx(2.0 * i / (1.0 + i)).epsilon(1e-12));
    CHECK(f1(c) == doctest::Approx(dice(c)).epsilon(1e-12));
    const SoftCounts s{double(c.tp), double(c.fp), double(c.fn)};
    CHECK(tversky_index(s, 0.5, 0.5, 0.0) == doctest::Approx(dice(c)).epsilon(1e-12));
    CHECK(tversky_index(s, 1.0, 1.0, 0.0) == doctest::Approx(i).epsilon(1e-12));
  }
}

TEST_CASE("boundary uses 4-neighbours and the image border") {
  BinaryMask block("b", 5, 5);
  for (int y = 1; y <= 3; ++y) {
    for (int x = 1; x <= 3; ++x) block.at(y, x) = 1;
  }
  const BinaryMask b = boundary(block);
  CHECK(b.foreground() == 8);
  CHECK(b.at(2, 2) == 0);
  BinaryMask full("f", 3, 3);
  std::fill(full.pixels.begin(), full.pixels.end(), 1);
  CHECK(boundary(full).foreground() == 8);
}

TEST_CASE("distance transform matches brute force") {
  Rng rng(13);
  for (int trial = 0; trial < 40; ++trial) {
    const int h = 1 + static_cast<int>(uniform_index(rng, 14));
    const int w = 1 + static_cast<int>(uniform_index(rng, 14));
    const BinaryMask sites = kdseg::testing::random_mask(rng, h, w, 0.1);
    const auto dt = squared_distance_transform(sites);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double best = std::numeric_limits<double>::infinity();
        for (int yy = 0; yy < h; ++yy) {
          for (int xx = 0; xx < w; ++xx) {
            if (sites.at(yy, xx)) best = std::min(best, double((y - yy) * (y - yy) + (x - xx) * (x - xx)));
          }
        }
        CHECK(dt[static_cast<std::size_t>(y) * w + x] == best);
      }
    }
  }
}

TEST_CASE("hausdorff examples") {
  CHECK(hausdorff(dots(6, 6, {{0, 0}}), dots(6, 6, {{3, 4}})).distance == 5.0);
  const BinaryMask truth = dots(10, 10, {{2, 2}});
  CHECK(hausdorff(dots(10, 10, {{2, 2}, {2, 9}}), truth).distance == 7.0);
  CHECK(hausdorff(truth, truth).distance == 0.0);
  CHECK_FALSE(hausdorff(truth, truth).empty_mask);
}

TEST_CASE("hausdorff empty-mask conventions") {
  const BinaryMask none("e", 6, 8);
  const auto one_empty = hausdorff(none, dots(6, 8, {{1, 1}}));
  CHECK(one_empty.empty_mask);
  CHECK(one_empty.distance == 10.0);
  const auto both = hausdorff(none, none);
  CHECK(both.empty_mask);
  CHECK(both.distance == 0.0);
}

TEST_CASE("hausdorff agrees with the brute-force oracle and is symmetric") {
  Rng rng(23);
  for (int trial = 0; trial < 60; ++trial) {
    const BinaryMask a = kdseg::testing::random_mask(rng, 12, 12, uniform(rng, 0.05, 0.6));
    const BinaryMask b = kdseg::testing::random_mask(rng, 12, 12, uniform(rng, 0.05, 0.6));
    if (a.foreground() == 0 || b.foreground() == 0) continue;
    const double d = hausdorff(a, b).distance;
    CHECK(d == doctest::Approx(kdseg::testing::brute_force_hausdorff(a, b)).epsilon(1e-12));
    CHECK(d == hausdorff(b, a).distance);
  }
}

TEST_CASE("hausdorff grows as a spurious blob moves away") {
  const BinaryMask truth = dots(20, 20, {{5, 5}});
  double previous = 0.0;
  for (int x = 6; x < 20; ++x) {
    const double d = hausdorff(dots(20, 20, {{5, 5}, {5, x}}), truth).distance;
    CHECK(d > previous);
    previous = d;
  }
}

TEST_CASE("measure fills a record") {
  const auto r = measure("img", mask_of(1, 4, {1, 1, 0, 0}), mask_of(1, 4, {1, 0, 1, 0}));
  CHECK(r.image_id == "img");
  CHECK(r.dice == 0.5);
  CHECK(metric_value(r, "iou") == doctest::Approx(1.0 / 3.0));
  CHECK(metric_names().size() == 6);
  CHECK_THROWS_AS(metric_value(r, "bogus"), EvaluationError);
}
