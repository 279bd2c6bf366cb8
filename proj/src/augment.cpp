#include "kdseg/augment.hpp"

#include <array>
#include <string>

namespace kdseg {

namespace {

template <typename Image, typename Buffer>
Image apply_single(SplitFlipTransform t, const Image& img, Buffer Image::*buffer, int planes) {
  Image out = img;
  using T = typename Buffer::value_type;
  apply_planar<T>(t, std::span<const T>(img.*buffer), std::span<T>(out.*buffer), planes, img.height, img.width);
  return out;
}

}  // namespace

std::string_view to_string(SplitAxis axis) {
  return axis == SplitAxis::horizontal_split ? "horizontal_split" : "vertical_split";
}

SplitAxis parse_split_axis(std::string_view text) {
  if (text == "horizontal_split") return SplitAxis::horizontal_split;
  if (text == "vertical_split") return SplitAxis::vertical_split;
  throw ConfigError("unknown split-flip transform '" + std::string(text) + "'");
}

ImagePatch apply(SplitFlipTransform t, const ImagePatch& img) {
  return apply_single(t, img, &ImagePatch::pixels, img.channels);
}

BinaryMask apply(SplitFlipTransform t, const BinaryMask& mask) {
  return apply_single(t, mask, &BinaryMask::pixels, 1);
}

ProbMap apply(SplitFlipTransform t, const ProbMap& probs) { return apply_single(t, probs, &ProbMap::values, 1); }

InstanceMap apply(SplitFlipTransform t, const InstanceMap& map) {
  return apply_single(t, map, &InstanceMap::labels, 1);
}

void AugmentConfig::validate() const {
  if (!(p_identity >= 0.0 && p_identity <= 1.0)) throw ConfigError("p_identity must lie in [0,1]");
  if (enabled.empty() && p_identity < 1.0) {
    throw ConfigError("no split-flip transform enabled while p_identity < 1");
  }
}

Augmentation sample_transform(Rng& rng, double p_identity, std::span<const SplitAxis> enabled) {
  static constexpr std::array<SplitAxis, 2> kAll = {SplitAxis::horizontal_split, SplitAxis::vertical_split};
  if (enabled.empty()) enabled = kAll;
  if (uniform01(rng) < p_identity) return std::nullopt;
  return SplitFlipTransform{enabled[uniform_index(rng, enabled.size())]};
}

}  // namespace kdseg
