#pragma once

#include <span>

#include "kdseg/image.hpp"

namespace kdseg {

/// Weights and constants of the compound segmentation loss.
struct LossConfig {
  double w_bce = 0.4;
  double w_tversky = 0.6;
  double alpha = 0.2;  // false-positive weight
  double beta = 0.8;   // false-negative weight
  double smooth_eps = 1e-6;
  double lambda_consistency = 0.1;
  double prob_clip_eps = 1e-7;

  /// Throws ConfigError when an invariant is violated.
  void validate() const;
};

/// Soft confusion counts TP = sum x*p, FP = sum (1-x)*p, FN = sum x*(1-p).
struct SoftCounts {
  double tp = 0.0;
  double fp = 0.0;
  double fn = 0.0;
};

SoftCounts soft_counts(std::span<const double> target, std::span<const double> pred);

/// (TP + smooth) / (TP + alpha FP + beta FN + smooth).
double tversky_index(const SoftCounts& counts, double alpha, double beta, double smooth_eps);

// The span overloads take targets in {0,1} (soft targets also work) and
// probabilities in [0,1]. When `grad` is non-empty it receives dLoss/dpred,
// overwriting its contents. Shape mismatches throw DimensionError.

/// Mean binary cross-entropy with predictions clipped to
/// [prob_clip_eps, 1 - prob_clip_eps] before the logs.
double bce_loss(std::span<const double> target, std::span<const double> pred, const LossConfig& cfg,
                std::span<double> grad = {});

/// 1 - soft Tversky index.
double tversky_loss(std::span<const double> target, std::span<const double> pred, const LossConfig& cfg,
                    std::span<double> grad = {});

/// w_bce * BCE + w_tversky * Tversky loss.
double compound_loss(std::span<const double> target, std::span<const double> pred, const LossConfig& cfg,
                     std::span<double> grad = {});

/// Mean squared difference between the prediction on a transformed input and
/// the transformed prediction on the original input. Gradients are taken with
/// respect to both arguments.
double consistency_loss(std::span<const double> pred_of_transformed, std::span<const double> transformed_pred,
                        std::span<double> grad_a = {}, std::span<double> grad_b = {});

double bce_loss(const BinaryMask& target, const ProbMap& pred, const LossConfig& cfg);
double tversky_loss(const BinaryMask& target, const ProbMap& pred, const LossConfig& cfg);
double compound_loss(const BinaryMask& target, const ProbMap& pred, const LossConfig& cfg);
double consistency_loss(const ProbMap& pred_of_transformed, const ProbMap& transformed_pred);

}  // namespace kdseg
