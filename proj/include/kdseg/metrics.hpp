#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "kdseg/image.hpp"

namespace kdseg {

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const { return tp + fp + fn + tn; }
  bool operator==(const ConfusionCounts&) const = default;
};

/// Pixel counts of pred against truth. Throws DimensionError on shape mismatch.
ConfusionCounts confusion(const BinaryMask& pred, const BinaryMask& truth);

// Degenerate denominators: dice, iou and f1 are 1 when both masks are empty
// and 0 when exactly one is; tpr is 1 without true foreground; fpr is 0
// without true background; precision is 1 without predicted foreground.

double dice(const ConfusionCounts& c);
double iou(const ConfusionCounts& c);
double tpr(const ConfusionCounts& c);
double fpr(const ConfusionCounts& c);
double precision(const ConfusionCounts& c);
/// Harmonic mean of precision and recall.
double f1(const ConfusionCounts& c);

/// Foreground pixels with at least one 4-neighbour in the background; the
/// image border counts as background.
BinaryMask boundary(const BinaryMask& mask);

/// Squared Euclidean distance from every pixel to the nearest foreground
/// pixel of `sites` (exact, separable lower-envelope transform). Pixels are
/// +inf when `sites` is empty.
std::vector<double> squared_distance_transform(const BinaryMask& sites);

struct HausdorffResult {
  double distance = 0.0;
  /// Set when either mask had no foreground; distance is then the image
  /// diagonal, or 0 when both masks are empty.
  bool empty_mask = false;
};

/// Symmetric Hausdorff distance between the 4-connected boundaries of the
/// two masks, in pixels.
HausdorffResult hausdorff(const BinaryMask& pred, const BinaryMask& truth);

/// Per-image metrics.
struct MetricsRecord {
  std::string image_id;
  double dice = 0.0;
  double iou = 0.0;
  double tpr = 0.0;
  double fpr = 0.0;
  double f1 = 0.0;
  double hd = 0.0;
  bool hd_empty = false;
};

MetricsRecord measure(const std::string& image_id, const BinaryMask& pred, const BinaryMask& truth);

/// Names in report column order: dice, iou, tpr, fpr, f1, hd.
const std::vector<std::string>& metric_names();
double metric_value(const MetricsRecord& r, const std::string& name);

}  // namespace kdseg
