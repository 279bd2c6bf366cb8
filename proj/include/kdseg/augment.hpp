#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "kdseg/errors.hpp"
#include "kdseg/image.hpp"
#include "kdseg/rng.hpp"

namespace kdseg {

/// horizontal_split cuts along the vertical midline into left/right halves;
/// vertical_split cuts along the horizontal midline into top/bottom halves.
/// The cut sits at floor(size / 2) and each half is mirrored in place along
/// the split axis, so the transform is a self-inverse pixel permutation.
enum class SplitAxis { horizontal_split, vertical_split };

struct SplitFlipTransform {
  SplitAxis axis = SplitAxis::horizontal_split;
  bool operator==(const SplitFlipTransform&) const = default;
};

/// std::nullopt is the identity.
using Augmentation = std::optional<SplitFlipTransform>;

std::string_view to_string(SplitAxis axis);
SplitAxis parse_split_axis(std::string_view text);

/// Source coordinate of output position `i` along an axis of length `size`.
constexpr int split_flip_index(int i, int size) {
  const int mid = size / 2;
  return i < mid ? mid - 1 - i : mid + (size - 1 - i);
}

/// Applies `t` to `planes` stacked h x w planes from `src` into `dst`.
template <typename T>
void apply_planar(SplitFlipTransform t, std::span<const T> src, std::span<T> dst, int planes, int h, int w) {
  if (t.axis == SplitAxis::horizontal_split && w < 2) {
    throw TransformError("horizontal_split needs width >= 2");
  }
  if (t.axis == SplitAxis::vertical_split && h < 2) throw TransformError("vertical_split needs height >= 2");
  if (src.size() != static_cast<std::size_t>(planes) * h * w || dst.size() != src.size()) {
    throw DimensionError("apply_planar: buffer size does not match the plane shape");
  }
  for (int p = 0; p < planes; ++p) {
    const std::size_t base = static_cast<std::size_t>(p) * h * w;
    for (int y = 0; y < h; ++y) {
      const int sy = t.axis == SplitAxis::vertical_split ? split_flip_index(y, h) : y;
      for (int x = 0; x < w; ++x) {
        const int sx = t.axis == SplitAxis::horizontal_split ? split_flip_index(x, w) : x;
        dst[base + static_cast<std::size_t>(y) * w + x] = src[base + static_cast<std::size_t>(sy) * w + sx];
      }
    }
  }
}

ImagePatch apply(SplitFlipTransform t, const ImagePatch& img);
BinaryMask apply(SplitFlipTransform t, const BinaryMask& mask);
ProbMap apply(SplitFlipTransform t, const ProbMap& probs);
InstanceMap apply(SplitFlipTransform t, const InstanceMap& map);

template <typename Image>
Image apply(const Augmentation& t, const Image& img) {
  return t ? apply(*t, img) : img;
}

/// Augmentation sampling settings.
struct AugmentConfig {
  std::vector<SplitAxis> enabled = {SplitAxis::horizontal_split, SplitAxis::vertical_split};
  double p_identity = 0.5;

  void validate() const;
};

/// Identity with probability p_identity, otherwise a uniform pick among the
/// enabled transforms (both by default).
Augmentation sample_transform(Rng& rng, double p_identity,
                              std::span<const SplitAxis> enabled = std::span<const SplitAxis>{});

inline Augmentation sample_transform(Rng& rng, const AugmentConfig& cfg) {
  return sample_transform(rng, cfg.p_identity, cfg.enabled);
}

}  // namespace kdseg
