#include "kdseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kdseg/errors.hpp"

namespace kdseg {

namespace {

double ratio(double num, double den, double when_empty) { return den > 0.0 ? num / den : when_empty; }

// 1-D squared distance transform of a sampled function (lower envelope of
// parabolas). f and d have length n.
void distance_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v, std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  constexpr double kInf = std::numeric_limits<double>::infinity();
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    while (k >= 0) {
      const int p = v[k];
      const double s = ((f[q] + q * static_cast<double>(q)) - (f[p] + p * static_cast<double>(p))) / (2.0 * (q - p));
      if (s <= z[k]) {
        --k;
      } else {
        break;
      }
    }
    ++k;
    v[k] = q;
    z[k] = k == 0 ? -kInf : ((f[q] + q * static_cast<double>(q)) - (f[v[k - 1]] + v[k - 1] * static_cast<double>(v[k - 1]))) /
                                (2.0 * (q - v[k - 1]));
    z[k + 1] = kInf;
  }
  if (k < 0) {
    std::fill(d.begin(), d.end(), kInf);
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q) ++j;
    const double diff = q - v[j];
    d[q] = diff * diff + f[v[j]];
  }
}

}  // namespace

ConfusionCounts confusion(const BinaryMask& pred, const BinaryMask& truth) {
  if (pred.height != truth.height || pred.width != truth.width) {
    throw DimensionError("confusion: prediction " + std::to_string(pred.height) + "x" + std::to_string(pred.width) +
                         " vs truth " + std::to_string(truth.height) + "x" + std::to_string(truth.width));
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < pred.pixels.size(); ++i) {
    const bool p = pred.pixels[i] != 0;
    const bool t = truth.pixels[i] != 0;
    if (p && t) {
      ++c.tp;
    } else if (p) {
      ++c.fp;
    } else if (t) {
      ++c.fn;
    } else {
      ++c.tn;
    }
  }
  return c;
}

double dice(const ConfusionCounts& c) {
  return ratio(2.0 * static_cast<double>(c.tp), 2.0 * static_cast<double>(c.tp) + c.fp + c.fn, 1.0);
}

double iou(const ConfusionCounts& c) {
  return ratio(static_cast<double>(c.tp), static_cast<double>(c.tp) + c.fp + c.fn, 1.0);
}

double tpr(const ConfusionCounts& c) { return ratio(static_cast<double>(c.tp), static_cast<double>(c.tp) + c.fn, 1.0); }

double fpr(const ConfusionCounts& c) { return ratio(static_cast<double>(c.fp), static_cast<double>(c.fp) + c.tn, 0.0); }

double precision(const ConfusionCounts& c) {
  return ratio(static_cast<double>(c.tp), static_cast<double>(c.tp) + c.fp, 1.0);
}

double f1(const ConfusionCounts& c) {
  const bool pred_empty = c.tp + c.fp == 0;
  const bool truth_empty = c.tp + c.fn == 0;
  if (pred_empty && truth_empty) return 1.0;
  if (pred_empty || truth_empty || c.tp == 0) return 0.0;
  const double p = precision(c);
  const double r = tpr(c);
  return 2.0 * p * r / (p + r);
}

BinaryMask boundary(const BinaryMask& mask) {
  BinaryMask out(mask.id, mask.height, mask.width);
  auto bg = [&](int y, int x) {
    return y < 0 || x < 0 || y >= mask.height || x >= mask.width || mask.at(y, x) == 0;
  };
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (mask.at(y, x) == 0) continue;
      if (bg(y - 1, x) || bg(y + 1, x) || bg(y, x - 1) || bg(y, x + 1)) out.at(y, x) = 1;
    }
  }
  return out;
}

std::vector<double> squared_distance_transform(const BinaryMask& sites) {
  const int h = sites.height;
  const int w = sites.width;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> grid(static_cast<std::size_t>(h) * w);
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = sites.pixels[i] ? 0.0 : kInf;

  const int n = std::max(h, w);
  std::vector<double> f(n), d(n), z(n + 1);
  std::vector<int> v(n);
  // columns
  f.resize(h);
  d.resize(h);
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) f[y] = grid[static_cast<std::size_t>(y) * w + x];
    distance_1d(f, d, v, z);
    for (int y = 0; y < h; ++y) grid[static_cast<std::size_t>(y) * w + x] = d[y];
  }
  // rows
  f.resize(w);
  d.resize(w);
  for (int y = 0; y < h; ++y) {
    std::copy_n(grid.begin() + static_cast<std::ptrdiff_t>(y) * w, w, f.begin());
    distance_1d(f, d, v, z);
    std::copy_n(d.begin(), w, grid.begin() + static_cast<std::ptrdiff_t>(y) * w);
  }
  return grid;
}

HausdorffResult hausdorff(const BinaryMask& pred, const BinaryMask& truth) {
  if (pred.height != truth.height || pred.width != truth.width) throw DimensionError("hausdorff: shape mismatch");
  const bool pred_empty = pred.foreground() == 0;
  const bool truth_empty = truth.foreground() == 0;
  if (pred_empty && truth_empty) return {0.0, true};
  if (pred_empty || truth_empty) {
    return {std::hypot(static_cast<double>(pred.height), static_cast<double>(pred.width)), true};
  }
  const BinaryMask bp = boundary(pred);
  const BinaryMask bt = boundary(truth);
  const auto dt_pred = squared_distance_transform(bp);
  const auto dt_truth = squared_distance_transform(bt);
  double worst = 0.0;
  for (std::size_t i = 0; i < bp.pixels.size(); ++i) {
    if (bp.pixels[i]) worst = std::max(worst, dt_truth[i]);
    if (bt.pixels[i]) worst = std::max(worst, dt_pred[i]);
  }
  return {std::sqrt(worst), false};
}

MetricsRecord measure(const std::string& image_id, const BinaryMask& pred, const BinaryMask& truth) {
  const ConfusionCounts c = confusion(pred, truth);
  const HausdorffResult hd = hausdorff(pred, truth);
  MetricsRecord r;
  r.image_id = image_id;
  r.dice = dice(c);
  r.iou = iou(c);
  r.tpr = tpr(c);
  r.fpr = fpr(c);
  r.f1 = f1(c);
  r.hd = hd.distance;
  r.hd_empty = hd.empty_mask;
  return r;
}

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names = {"dice", "iou", "tpr", "fpr", "f1", "hd"};
  return names;
}

double metric_value(const MetricsRecord& r, const std::string& name) {
  if (name == "dice") return r.dice;
  if (name == "iou") return r.iou;
  if (name == "tpr") return r.tpr;
  if (name == "fpr") return r.fpr;
  if (name == "f1") return r.f1;
  if (name == "hd") return r.hd;
  throw EvaluationError("unknown metric '" + name + "'");
}

}  // namespace kdseg
