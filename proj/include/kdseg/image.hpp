#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace kdseg {

/// Image patch with intensities normalized to [0,1].
///
/// Pixels are stored planar (channel-major, then row-major): the value of
/// channel c at row y, column x lives at `(c * height + y) * width + x`.
/// RGB patches keep R, G, B channel order.
struct ImagePatch {
  std::string id;
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> pixels;

  ImagePatch() = default;
  ImagePatch(std::string id_, int h, int w, int c)
      : id(std::move(id_)), height(h), width(w), channels(c),
        pixels(static_cast<std::size_t>(h) * w * c, 0.0f) {}

  float& at(int c, int y, int x) { return pixels[(static_cast<std::size_t>(c) * height + y) * width + x]; }
  float at(int c, int y, int x) const { return pixels[(static_cast<std::size_t>(c) * height + y) * width + x]; }
  std::size_t plane_size() const { return static_cast<std::size_t>(height) * width; }
};

/// Foreground mask with values strictly in {0,1}.
struct BinaryMask {
  std::string id;
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;

  BinaryMask() = default;
  BinaryMask(std::string id_, int h, int w)
      : id(std::move(id_)), height(h), width(w), pixels(static_cast<std::size_t>(h) * w, 0) {}

  std::uint8_t& at(int y, int x) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int y, int x) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::size_t foreground() const;
};

/// Integer instance labels; 0 is background, labels need not be contiguous.
struct InstanceMap {
  std::string id;
  int height = 0;
  int width = 0;
  std::vector<std::int32_t> labels;

  InstanceMap() = default;
  InstanceMap(std::string id_, int h, int w)
      : id(std::move(id_)), height(h), width(w), labels(static_cast<std::size_t>(h) * w, 0) {}

  std::int32_t& at(int y, int x) { return labels[static_cast<std::size_t>(y) * width + x]; }
  std::int32_t at(int y, int x) const { return labels[static_cast<std::size_t>(y) * width + x]; }

  /// Sorted distinct nonzero labels.
  std::vector<std::int32_t> instance_labels() const;
  std::size_t instance_count() const { return instance_labels().size(); }
};

/// Per-pixel foreground probability in [0,1].
struct ProbMap {
  std::string id;
  int height = 0;
  int width = 0;
  std::vector<double> values;

  ProbMap() = default;
  ProbMap(std::string id_, int h, int w)
      : id(std::move(id_)), height(h), width(w), values(static_cast<std::size_t>(h) * w, 0.0) {}

  double& at(int y, int x) { return values[static_cast<std::size_t>(y) * width + x]; }
  double at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

/// Any nonzero instance pixel becomes foreground.
BinaryMask binarize(const InstanceMap& instances);

/// Pixels with probability >= threshold become foreground.
BinaryMask threshold(const ProbMap& probs, double threshold);

/// Mask as 0.0/1.0 values, the target representation used by the losses.
std::vector<double> as_target(const BinaryMask& mask);

}  // namespace kdseg
