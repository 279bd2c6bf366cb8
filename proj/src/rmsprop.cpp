#include "kdseg/rmsprop.hpp"

#include <algorithm>

namespace kdseg {

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("rho must lie in (0,1)");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (!(decay > 0.0 && decay <= 1.0)) throw ConfigError("decay must lie in (0,1]");
}

RmsProp::RmsProp(OptimizerConfig cfg) : cfg_(cfg) { cfg_.validate(); }

RmsProp::Slot& RmsProp::slot_for(const nn::Parameter& p) {
  auto it = std::find_if(slots_.begin(), slots_.end(), [&](const Slot& s) { return s.name == p.name; });
  if (it != slots_.end()) {
    if (it->mean_square.size() != p.value.size()) {
      throw DimensionError("optimizer state for " + p.name + " has the wrong size");
    }
    return *it;
  }
  slots_.push_back(Slot{p.name, std::vector<float>(p.value.size(), 0.0f)});
  return slots_.back();
}

void RmsProp::step(std::span<nn::Parameter* const> params, double lr_scale) {
  // Validate every gradient first so a failure leaves all parameters intact.
  for (const auto* p : params) {
    for (float g : p->grad) {
      if (!std::isfinite(g)) throw TrainingError("non-finite gradient in " + p->name);
    }
  }
  for (auto* p : params) {
    Slot& slot = slot_for(*p);
    rmsprop_step<float>(p->value, p->grad, slot.mean_square, cfg_, lr_scale, p->name);
  }
  ++steps_;
}

void RmsProp::restore(std::vector<Slot> slots, std::size_t steps) {
  slots_ = std::move(slots);
  steps_ = steps;
}

}  // namespace kdseg
