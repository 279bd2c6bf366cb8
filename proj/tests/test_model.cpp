#include <doctest.h>

#include <cmath>

#include "kdseg/errors.hpp"
#include "kdseg/nn.hpp"
#include "kdseg/unet.hpp"
#include "support.hpp"

using namespace kdseg;
using nn::Tensor;

namespace {

Tensor random_tensor(Rng& rng, int n, int c, int h, int w) {
  Tensor t(n, c, h, w);
  for (auto& v : t.data) v = static_cast<float>(uniform(rng, -1.0, 1.0));
  return t;
}

// Direct zero-padded convolution.
Tensor direct_conv(const nn::Conv2d& conv, const Tensor& x) {
  const int k = conv.kernel();
  const int r = k / 2;
  Tensor y(x.n, conv.out_channels(), x.h, x.w);
  const auto& wt = conv.weight().value;
  const auto& b = conv.bias().value;
  for (int i = 0; i < x.n; ++i) {
    for (int o = 0; o < conv.out_channels(); ++o) {
      for (int yy = 0; yy < x.h; ++yy) {
        for (int xx = 0; xx < x.w; ++xx) {
          double s = b[o];
          for (int c = 0; c < conv.in_channels(); ++c) {
            for (int ky = 0; ky < k; ++ky) {
              for (int kx = 0; kx < k; ++kx) {
                const int sy = yy + ky - r;
                const int sx = xx + kx - r;
                if (sy < 0 || sx < 0 || sy >= x.h || sx >= x.w) continue;
                s += wt[((o * conv.in_channels() + c) * k + ky) * k + kx] * x.at(i, c, sy, sx);
              }
            }
          }
          y.at(i, o, yy, xx) = static_cast<float>(s);
        }
      }
    }
  }
  return y;
}

double weighted_sum(const std::vector<double>& p, const std::vector<double>& r) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += p[i] * r[i];
  return s;
}

}  // namespace

TEST_CASE("convolution matches a direct implementation") {
  Rng rng(4);
  for (int k : {1, 3, 5}) {
    nn::Conv2d conv("c", 3, 4, k);
    conv.initialize(rng);
    for (auto& b : conv.bias().value) b = static_cast<float>(uniform(rng, -0.5, 0.5));
    const Tensor x = random_tensor(rng, 2, 3, 7, 6);
    const Tensor fast = conv.forward(x);
    const Tensor slow = direct_conv(conv, x);
    REQUIRE(fast.same_shape(slow));
    for (std::size_t i = 0; i < fast.size(); ++i) CHECK(fast.data[i] == doctest::Approx(slow.data[i]).epsilon(1e-4));
  }
  CHECK_THROWS_AS(nn::Conv2d("even", 1, 1, 2), ConfigError);
}

TEST_CASE("convolution backward matches a directional finite difference") {
  Rng rng(8);
  nn::Conv2d conv("c", 2, 3, 3);
  conv.initialize(rng);
  const Tensor x = random_tensor(rng, 1, 2, 5, 4);
  const Tensor r = random_tensor(rng, 1, 3, 5, 4);
  auto loss = [&](const nn::Conv2d& c, const Tensor& in) {
    const Tensor y = direct_conv(c, in);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += static_cast<double>(y.data[i]) * r.data[i];
    return s;
  };
  const Tensor dx = conv.backward(x, r);

  // Input gradient: loss is linear in x, so the difference quotient is exact up to rounding.
  Tensor dir = random_tensor(rng, 1, 2, 5, 4);
  double analytic = 0.0;
  for (std::size_t i = 0; i < dx.size(); ++i) analytic += static_cast<double>(dx.data[i]) * dir.data[i];
  Tensor xp = x;
  Tensor xm = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xp.data[i] += 0.01f * dir.data[i];
    xm.data[i] -= 0.01f * dir.data[i];
  }
  CHECK(analytic == doctest::Approx((loss(conv, xp) - loss(conv, xm)) / 0.02).epsilon(1e-3));

  // Weight gradient along a random direction.
  double wa = 0.0;
  std::vector<float> wdir(conv.weight().value.size());
  for (std::size_t i = 0; i < wdir.size(); ++i) {
    wdir[i] = static_cast<float>(uniform(rng, -1.0, 1.0));
    wa += static_cast<double>(conv.weight().grad[i]) * wdir[i];
  }
  nn::Conv2d plus = conv;
  nn::Conv2d minus = conv;
  for (std::size_t i = 0; i < wdir.size(); ++i) {
    plus.weight().value[i] += 0.01f * wdir[i];
    minus.weight().value[i] -= 0.01f * wdir[i];
  }
  CHECK(wa == doctest::Approx((loss(plus, x) - loss(minus, x)) / 0.02).epsilon(1e-3));

  double bias_total = 0.0;
  for (float v : r.data) bias_total += v;
  double bias_grad = 0.0;
  for (float g : conv.bias().grad) bias_grad += g;
  CHECK(bias_grad == doctest::Approx(bias_total).epsilon(1e-4));
}

TEST_CASE("pooling, upsampling, padding and concat are consistent") {
  Rng rng(2);
  const Tensor x = random_tensor(rng, 2, 3, 4, 6);
  std::vector<std::uint32_t> argmax;
  const Tensor p = nn::maxpool2x2(x, argmax);
  CHECK(p.h == 2);
  CHECK(p.w == 3);
  for (int c = 0; c < 3; ++c) {
    CHECK(p.at(1, c, 1, 2) == std::max({x.at(1, c, 2, 4), x.at(1, c, 2, 5), x.at(1, c, 3, 4), x.at(1, c, 3, 5)}));
  }
  const Tensor back = nn::maxpool2x2_backward(p, argmax, x);
  double routed = 0.0;
  for (float v : back.data) routed += v;
  double pooled = 0.0;
  for (float v : p.data) pooled += v;
  CHECK(routed == doctest::Approx(pooled));

  const Tensor up = nn::upsample2x(p);
  CHECK(up.at(0, 1, 3, 5) == p.at(0, 1, 1, 2));
  const Tensor down = nn::upsample2x_backward(up);
  CHECK(down.at(0, 1, 1, 2) == doctest::Approx(4.0f * p.at(0, 1, 1, 2)));

  const Tensor padded = nn::pad_to(x, 8, 8);
  CHECK(padded.at(0, 0, 7, 7) == 0.0f);
  CHECK(nn::crop_to(padded, 4, 6).data == x.data);

  const Tensor y = random_tensor(rng, 2, 5, 4, 6);
  const Tensor cat = nn::concat_channels(x, y);
  CHECK(cat.c == 8);
  Tensor a;
  Tensor b;
  nn::split_channels(cat, 3, a, b);
  CHECK(a.data == x.data);
  CHECK(b.data == y.data);
}

TEST_CASE("dropout zeroes about rate of the units and rescales the rest") {
  Rng rng(6);
  Tensor x(1, 1, 100, 100);
  std::fill(x.data.begin(), x.data.end(), 1.0f);
  std::vector<float> mask;
  nn::dropout_inplace(x, 0.3, rng, mask);
  int zeros = 0;
  for (float v : x.data) {
    if (v == 0.0f) {
      ++zeros;
    } else {
      CHECK(v == doctest::Approx(1.0 / 0.7));
    }
  }
  CHECK(zeros > 2700);
  CHECK(zeros < 3300);
}

TEST_CASE("dropout schedule") {
  CHECK(dropout_schedule(4) == std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.5, 0.4, 0.3, 0.2, 0.1});
  CHECK(dropout_schedule(1) == std::vector<double>{0.1, 0.2, 0.1});
  CHECK(dropout_schedule(8).at(8) == doctest::Approx(0.9));
  CHECK_THROWS_AS(dropout_schedule(9), ConfigError);
  CHECK_THROWS_AS(dropout_schedule(0), ConfigError);

  UNetSpec deep;
  deep.depth = 9;
  CHECK_THROWS_AS(deep.validate(), ConfigError);
  deep.dropout_rates.assign(19, 0.95);
  CHECK_THROWS_AS(deep.validate(), ConfigError);
  deep.allow_high_dropout = true;
  CHECK_NOTHROW(deep.validate());
}

TEST_CASE("default student layout") {
  const StudentModel model(UNetSpec{}, 1);
  CHECK(model.conv_count(3) == 18);
  CHECK(model.conv_count(1) == 1);
  CHECK(model.spec().expected_conv3x3() == 18);
  CHECK(model.spec().channels_at(4) == 256);
  const auto params = model.parameters();
  CHECK(params.front()->name == "enc0.conv0.weight");
  CHECK(params.back()->name == "head.bias");
}

TEST_CASE("forward keeps spatial shape and probabilities in range") {
  UNetSpec spec;
  spec.depth = 3;
  spec.base_channels = 4;
  StudentModel model(spec, 3);
  Rng rng(3);
  for (auto [h, w] : std::vector<std::pair<int, int>>{{8, 8}, {13, 9}, {17, 24}, {1, 1}}) {
    const Tensor x = random_tensor(rng, 2, 3, h, w);
    const auto p = model.forward(x);
    CHECK(p.size() == static_cast<std::size_t>(2 * h * w));
    CHECK(std::all_of(p.begin(), p.end(), [](double v) { return v >= 0.0 && v <= 1.0; }));
  }
  CHECK_THROWS_AS(model.forward(random_tensor(rng, 1, 1, 8, 8)), DimensionError);
}

TEST_CASE("eval mode is deterministic and training mode is stochastic") {
  UNetSpec spec;
  spec.depth = 2;
  spec.base_channels = 4;
  StudentModel model(spec, 5);
  Rng rng(5);
  const Tensor x = random_tensor(rng, 1, 3, 16, 16);
  CHECK(model.forward(x) == model.forward(x));
  model.set_training(true);
  CHECK(model.forward(x) != model.forward(x));
}

TEST_CASE("same seed builds the same network") {
  UNetSpec spec;
  spec.depth = 2;
  spec.base_channels = 4;
  const StudentModel a = build_student(spec, 42);
  const StudentModel b = build_student(spec, 42);
  const StudentModel c = build_student(spec, 43);
  CHECK(a.parameters()[0]->value == b.parameters()[0]->value);
  CHECK(a.parameters()[0]->value != c.parameters()[0]->value);
}

TEST_CASE("model backward matches a directional finite difference") {
  UNetSpec spec;
  spec.depth = 2;
  spec.base_channels = 3;
  spec.dropout_rates.assign(5, 0.0);
  StudentModel model(spec, 12);
  Rng rng(12);
  const Tensor x = random_tensor(rng, 2, 3, 9, 10);
  std::vector<double> r(2 * 9 * 10);
  for (auto& v : r) v = uniform(rng, -1.0, 1.0);

  model.zero_grad();
  model.forward(x, true);
  model.backward(r);

  auto params = model.parameters();
  std::vector<std::vector<float>> dir;
  double analytic = 0.0;
  for (auto* p : params) {
    std::vector<float> d(p->value.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
      d[i] = static_cast<float>(uniform(rng, -1.0, 1.0));
      analytic += static_cast<double>(p->grad[i]) * d[i];
    }
    dir.push_back(std::move(d));
  }
  auto shifted = [&](double h) {
    for (std::size_t k = 0; k < params.size(); ++k) {
      for (std::size_t i = 0; i < dir[k].size(); ++i) params[k]->value[i] += static_cast<float>(h) * dir[k][i];
    }
    const double v = weighted_sum(model.forward(x), r);
    for (std::size_t k = 0; k < params.size(); ++k) {
      for (std::size_t i = 0; i < dir[k].size(); ++i) params[k]->value[i] -= static_cast<float>(h) * dir[k][i];
    }
    return v;
  };
  const double h = 1e-3;
  const double numeric = (shifted(h) - shifted(-h)) / (2.0 * h);
  CHECK(analytic == doctest::Approx(numeric).epsilon(2e-2));
}

TEST_CASE("backward without a recorded forward is an error") {
  UNetSpec spec;
  spec.depth = 1;
  spec.base_channels = 2;
  StudentModel model(spec, 1);
  std::vector<double> g(4);
  CHECK_THROWS_AS(model.backward(g), TrainingError);
}

TEST_CASE("predict returns one map per patch") {
  UNetSpec spec;
  spec.depth = 2;
  spec.base_channels = 4;
  StudentModel model(spec, 9);
  Rng rng(9);
  std::vector<ImagePatch> batch = {kdseg::testing::random_patch(rng, 12, 10, 3),
                                   kdseg::testing::random_patch(rng, 12, 10, 3)};
  batch[1].id = "second";
  const auto maps = model.predict(batch);
  REQUIRE(maps.size() == 2);
  CHECK(maps[1].id == "second");
  CHECK(maps[1].values == model.predict(batch[1]).values);
  batch.push_back(kdseg::testing::random_patch(rng, 8, 8, 3));
  CHECK_THROWS_AS(model.predict(batch), DimensionError);
}
