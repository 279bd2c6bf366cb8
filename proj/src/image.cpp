#include "kdseg/image.hpp"

#include <algorithm>

namespace kdseg {

std::size_t BinaryMask::foreground() const {
  return static_cast<std::size_t>(std::count(pixels.begin(), pixels.end(), std::uint8_t{1}));
}

std::vector<std::int32_t> InstanceMap::instance_labels() const {
  std::vector<std::int32_t> out;
  for (auto v : labels) {
    if (v != 0) out.push_back(v);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

BinaryMask binarize(const InstanceMap& instances) {
  BinaryMask mask(instances.id, instances.height, instances.width);
  for (std::size_t i = 0; i < instances.labels.size(); ++i) {
    mask.pixels[i] = instances.labels[i] != 0 ? 1 : 0;
  }
  return mask;
}

BinaryMask threshold(const ProbMap& probs, double threshold) {
  BinaryMask mask(probs.id, probs.height, probs.width);
  for (std::size_t i = 0; i < probs.values.size(); ++i) {
    mask.pixels[i] = probs.values[i] >= threshold ? 1 : 0;
  }
  return mask;
}

std::vector<double> as_target(const BinaryMask& mask) {
  return {mask.pixels.begin(), mask.pixels.end()};
}

}  // namespace kdseg
