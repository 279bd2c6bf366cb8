#include "kdseg/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "kdseg/errors.hpp"

namespace kdseg {

namespace {

void require_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw DimensionError(std::string(what) + ": size mismatch (" + std::to_string(a) + " vs " +
                         std::to_string(b) + ")");
  }
  if (a == 0) throw DimensionError(std::string(what) + ": empty input");
}

void require_grad_size(std::span<double> grad, std::size_t n, const char* what) {
  if (!grad.empty() && grad.size() != n) throw DimensionError(std::string(what) + ": gradient size mismatch");
}

void require_same_shape(int h1, int w1, int h2, int w2, const char* what) {
  if (h1 != h2 || w1 != w2) {
    throw DimensionError(std::string(what) + ": shape " + std::to_string(h1) + "x" + std::to_string(w1) +
                         " vs " + std::to_string(h2) + "x" + std::to_string(w2));
  }
}

}  // namespace

void LossConfig::validate() const {
  if (!(w_bce >= 0.0) || !(w_tversky >= 0.0)) throw ConfigError("loss weights must be non-negative");
  if (!(alpha >= 0.0) || !(beta >= 0.0)) throw ConfigError("tversky alpha and beta must be non-negative");
  if (!(smooth_eps > 0.0)) throw ConfigError("smooth_eps must be positive");
  if (!(prob_clip_eps > 0.0 && prob_clip_eps < 0.5)) throw ConfigError("prob_clip_eps must lie in (0, 0.5)");
  if (!(lambda_consistency >= 0.0)) throw ConfigError("lambda_consistency must be non-negative");
}

SoftCounts soft_counts(std::span<const double> target, std::span<const double> pred) {
  require_same_size(target.size(), pred.size(), "soft_counts");
  SoftCounts c;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double x = target[i];
    const double p = pred[i];
    c.tp += x * p;
    c.fp += (1.0 - x) * p;
    c.fn += x * (1.0 - p);
  }
  return c;
}

double tversky_index(const SoftCounts& c, double alpha, double beta, double smooth_eps) {
  return (c.tp + smooth_eps) / (c.tp + alpha * c.fp + beta * c.fn + smooth_eps);
}

double bce_loss(std::span<const double> target, std::span<const double> pred, const LossConfig& cfg,
                std::span<double> grad) {
  require_same_size(target.size(), pred.size(), "bce_loss");
  require_grad_size(grad, pred.size(), "bce_loss");
  const double lo = cfg.prob_clip_eps;
  const double hi = 1.0 - cfg.prob_clip_eps;
  const double n = static_cast<double>(pred.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double x = target[i];
    const double p = std::clamp(pred[i], lo, hi);
    sum += x * std::log(p) + (1.0 - x) * std::log(1.0 - p);
    if (!grad.empty()) {
      // The clip is flat outside [lo, hi].
      const bool inside = pred[i] > lo && pred[i] < hi;
      grad[i] = inside ? (-x / p + (1.0 - x) / (1.0 - p)) / n : 0.0;
    }
  }
  return -sum / n;
}

double tversky_loss(std::span<const double> target, std::span<const double> pred, const LossConfig& cfg,
                    std::span<double> grad) {
  require_grad_size(grad, pred.size(), "tversky_loss");
  const SoftCounts c = soft_counts(target, pred);
  const double num = c.tp + cfg.smooth_eps;
  const double den = c.tp + cfg.alpha * c.fp + cfg.beta * c.fn + cfg.smooth_eps;
  if (!grad.empty()) {
    const double inv_den2 = 1.0 / (den * den);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const double x = target[i];
      const double d_den = x + cfg.alpha * (1.0 - x) - cfg.beta * x;
      grad[i] = -(x * den - num * d_den) * inv_den2;
    }
  }
  return 1.0 - num / den;
}

double compound_loss(std::span<const double> target, std::span<const double> pred, const LossConfig& cfg,
                     std::span<double> grad) {
  require_grad_size(grad, pred.size(), "compound_loss");
  if (grad.empty()) {
    return cfg.w_bce * bce_loss(target, pred, cfg) + cfg.w_tversky * tversky_loss(target, pred, cfg);
  }
  std::vector<double> g_tv(pred.size());
  const double bce = bce_loss(target, pred, cfg, grad);
  const double tv = tversky_loss(target, pred, cfg, g_tv);
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = cfg.w_bce * grad[i] + cfg.w_tversky * g_tv[i];
  return cfg.w_bce * bce + cfg.w_tversky * tv;
}

double consistency_loss(std::span<const double> a, std::span<const double> b, std::span<double> grad_a,
                        std::span<double> grad_b) {
  require_same_size(a.size(), b.size(), "consistency_loss");
  require_grad_size(grad_a, a.size(), "consistency_loss");
  require_grad_size(grad_b, b.size(), "consistency_loss");
  const double n = static_cast<double>(a.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
    if (!grad_a.empty()) grad_a[i] = 2.0 * d / n;
    if (!grad_b.empty()) grad_b[i] = -2.0 * d / n;
  }
  return sum / n;
}

double bce_loss(const BinaryMask& target, const ProbMap& pred, const LossConfig& cfg) {
  require_same_shape(target.height, target.width, pred.height, pred.width, "bce_loss");
  return bce_loss(as_target(target), pred.values, cfg);
}

double tversky_loss(const BinaryMask& target, const ProbMap& pred, const LossConfig& cfg) {
  require_same_shape(target.height, target.width, pred.height, pred.width, "tversky_loss");
  return tversky_loss(as_target(target), pred.values, cfg);
}

double compound_loss(const BinaryMask& target, const ProbMap& pred, const LossConfig& cfg) {
  require_same_shape(target.height, target.width, pred.height, pred.width, "compound_loss");
  return compound_loss(as_target(target), pred.values, cfg);
}

double consistency_loss(const ProbMap& a, const ProbMap& b) {
  require_same_shape(a.height, a.width, b.height, b.width, "consistency_loss");
  return consistency_loss(a.values, b.values);
}

}  // namespace kdseg
