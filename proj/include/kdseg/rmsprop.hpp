#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kdseg/errors.hpp"
#include "kdseg/nn.hpp"

namespace kdseg {

/// RMSProp hyperparameters. `decay` multiplies the learning rate once per
/// epoch; 1.0 keeps it constant.
struct OptimizerConfig {
  double learning_rate = 1e-3;
  double rho = 0.9;
  double epsilon = 1e-7;
  double decay = 1.0;

  void validate() const;
  double learning_rate_at(int epoch) const { return learning_rate * std::pow(decay, epoch); }
};

/// One RMSProp update, elementwise:
///   v <- rho * v + (1 - rho) * g^2
///   w <- w - lr * g / (sqrt(v) + epsilon)
/// with lr = cfg.learning_rate * lr_scale. Arithmetic is carried out in
/// double. A non-finite gradient raises TrainingError naming `name` before
/// anything is modified.
template <typename T>
void rmsprop_step(std::span<T> params, std::span<const T> grads, std::span<T> state, const OptimizerConfig& cfg,
                  double lr_scale = 1.0, std::string_view name = "parameter") {
  if (params.size() != grads.size() || params.size() != state.size()) {
    throw DimensionError("rmsprop_step: size mismatch for " + std::string(name));
  }
  for (const T g : grads) {
    if (!std::isfinite(static_cast<double>(g))) {
      throw TrainingError("non-finite gradient in " + std::string(name));
    }
  }
  const double lr = cfg.learning_rate * lr_scale;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = static_cast<double>(grads[i]);
    const double v = cfg.rho * static_cast<double>(state[i]) + (1.0 - cfg.rho) * g * g;
    state[i] = static_cast<T>(v);
    params[i] = static_cast<T>(static_cast<double>(params[i]) - lr * g / (std::sqrt(v) + cfg.epsilon));
  }
}

/// Per-parameter RMSProp state over a fixed parameter list.
class RmsProp {
 public:
  explicit RmsProp(OptimizerConfig cfg);

  const OptimizerConfig& config() const { return cfg_; }

  /// Updates every parameter from its accumulated gradient. State is created
  /// lazily (zeros) the first time a parameter name is seen.
  void step(std::span<nn::Parameter* const> params, double lr_scale = 1.0);

  std::size_t steps() const { return steps_; }

  /// Squared-gradient averages keyed by parameter name, in first-seen order.
  struct Slot {
    std::string name;
    std::vector<float> mean_square;
  };
  const std::vector<Slot>& slots() const { return slots_; }
  void restore(std::vector<Slot> slots, std::size_t steps);

 private:
  Slot& slot_for(const nn::Parameter& p);

  OptimizerConfig cfg_;
  std::vector<Slot> slots_;
  std::size_t steps_ = 0;
};

}  // namespace kdseg
