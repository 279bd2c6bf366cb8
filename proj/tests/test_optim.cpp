#include <doctest.h>

#include <cmath>
#include <limits>

#include "kdseg/checkpoint.hpp"
#include "kdseg/errors.hpp"
#include "kdseg/rmsprop.hpp"
#include "support.hpp"

using namespace kdseg;

TEST_CASE("scalar rmsprop example") {
  std::vector<double> w = {1.0};
  std::vector<double> v = {0.0};
  const std::vector<double> g = {1.0};
  rmsprop_step<double>(w, g, v, OptimizerConfig{});
  CHECK(std::abs(v[0] - 0.1) < 1e-12);
  CHECK(std::abs(w[0] - (1.0 - 0.001 / (std::sqrt(0.1) + 1e-7))) < 1e-12);
  CHECK(w[0] == doctest::Approx(0.9968).epsilon(1e-4));
}

TEST_CASE("zero gradient leaves weights and decays the state") {
  std::vector<double> w = {0.5, -2.0};
  std::vector<double> v = {0.3, 0.7};
  const std::vector<double> g = {0.0, 0.0};
  rmsprop_step<double>(w, g, v, OptimizerConfig{});
  CHECK(w == std::vector<double>{0.5, -2.0});
  CHECK(v[0] == doctest::Approx(0.27));
  CHECK(v[1] == doctest::Approx(0.63));
}

TEST_CASE("non-finite gradient names the parameter and changes nothing") {
  std::vector<float> w = {1.0f, 2.0f};
  std::vector<float> v = {0.0f, 0.0f};
  const std::vector<float> g = {0.5f, std::numeric_limits<float>::quiet_NaN()};
  try {
    rmsprop_step<float>(w, g, v, OptimizerConfig{}, 1.0, "enc0.conv0.weight");
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    CHECK(std::string(e.what()).find("enc0.conv0.weight") != std::string::npos);
  }
  CHECK(w == std::vector<float>{1.0f, 2.0f});
  CHECK(v == std::vector<float>{0.0f, 0.0f});
}

TEST_CASE("optimizer config validation and decay") {
  OptimizerConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.learning_rate_at(10) == cfg.learning_rate);
  cfg.decay = 0.5;
  CHECK(cfg.learning_rate_at(2) == doctest::Approx(0.00025));
  for (auto bad : {OptimizerConfig{0.0}, OptimizerConfig{1e-3, 1.0}, OptimizerConfig{1e-3, 0.9, 0.0},
                   OptimizerConfig{1e-3, 0.9, 1e-7, 1.5}, OptimizerConfig{1e-3, 0.9, 1e-7, 0.0}}) {
    CHECK_THROWS_AS(bad.validate(), ConfigError);
  }
}

TEST_CASE("RmsProp class updates every parameter and keeps state by name") {
  nn::Parameter a{"a", {2}, {1.0f, 1.0f}, {1.0f, -1.0f}};
  nn::Parameter b{"b", {1}, {0.0f}, {0.5f}};
  std::vector<nn::Parameter*> params = {&a, &b};
  RmsProp opt(OptimizerConfig{});
  opt.step(params);
  opt.step(params);
  CHECK(opt.steps() == 2);
  REQUIRE(opt.slots().size() == 2);
  CHECK(opt.slots()[0].name == "a");
  // reference: two updates with the same gradient
  double w = 1.0;
  double v = 0.0;
  for (int i = 0; i < 2; ++i) {
    v = 0.9 * v + 0.1;
    w -= 1e-3 / (std::sqrt(v) + 1e-7);
  }
  CHECK(a.value[0] == doctest::Approx(w).epsilon(1e-6));

  b.grad[0] = std::numeric_limits<float>::infinity();
  const float before = a.value[0];
  CHECK_THROWS_AS(opt.step(params), TrainingError);
  CHECK(a.value[0] == before);
}

TEST_CASE("checkpoint round trip reproduces eval forward bitwise") {
  UNetSpec spec;
  spec.depth = 2;
  spec.base_channels = 4;
  StudentModel model(spec, 77);
  RmsProp opt(OptimizerConfig{});
  Rng rng(77);
  for (auto* p : model.parameters()) {
    for (auto& g : p->grad) g = static_cast<float>(uniform(rng, -1, 1));
  }
  auto params = model.parameters();
  opt.step(params);

  kdseg::testing::TempDir dir("ckpt");
  save_checkpoint(capture(model, &opt, 3), dir / "m.ckpt");
  const Checkpoint loaded = load_checkpoint(dir / "m.ckpt");
  CHECK(loaded.epoch == 3);
  CHECK(loaded.optimizer_steps == 1);
  CHECK(loaded.spec == spec);
  StudentModel copy = model_from(loaded);
  const ImagePatch img = kdseg::testing::random_patch(rng, 20, 20, 3);
  CHECK(copy.predict(img).values == model.predict(img).values);

  RmsProp restored = restore_optimizer(loaded);
  CHECK(restored.steps() == 1);
  REQUIRE(restored.slots().size() == opt.slots().size());
  CHECK(restored.slots()[5].mean_square == opt.slots()[5].mean_square);
}

TEST_CASE("checkpoint errors") {
  kdseg::testing::TempDir dir("ckpt_bad");
  {
    std::ofstream out(dir / "junk.ckpt", std::ios::binary);
    out << "not a checkpoint";
  }
  CHECK_THROWS_AS(load_checkpoint(dir / "junk.ckpt"), FormatError);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), IoError);

  UNetSpec a;
  a.depth = 1;
  a.base_channels = 2;
  UNetSpec b = a;
  b.base_channels = 3;
  StudentModel small(a, 1);
  StudentModel other(b, 1);
  CHECK_THROWS_AS(restore(other, capture(small)), FormatError);
}
