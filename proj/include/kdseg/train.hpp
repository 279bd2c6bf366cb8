#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "kdseg/augment.hpp"
#include "kdseg/checkpoint.hpp"
#include "kdseg/image.hpp"
#include "kdseg/losses.hpp"
#include "kdseg/manifest.hpp"
#include "kdseg/rmsprop.hpp"
#include "kdseg/unet.hpp"

namespace kdseg {

struct Sample {
  std::string id;
  ImagePatch image;
  BinaryMask mask;
};

struct TrainingData {
  std::vector<Sample> train;
  std::vector<Sample> val;
};

struct TrainConfig {
  int epochs = 25;
  int steps_per_epoch = 4;
  /// steps_per_epoch = ceil(train size / batch_size) instead of the fixed count.
  bool full_pass = false;
  int batch_size = 8;
  LossConfig loss;
  bool augment_enabled = true;
  AugmentConfig augment;
  OptimizerConfig optimizer;
  std::uint64_t seed = 0;
  /// Empty: keep checkpoints in memory only.
  std::filesystem::path checkpoint_dir;
  int validation_interval = 1;
  double val_threshold = 0.5;

  void validate() const;
  int steps_for(std::size_t train_size) const;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  /// Absent for epochs without validation.
  std::optional<double> val_loss;
  std::optional<double> val_dice;
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  /// -1 until a validation has run.
  int best_epoch = -1;
  double best_val_dice = 0.0;
  std::vector<double> step_losses;
  std::size_t optimizer_steps = 0;

  /// Wall-clock fields are left out unless `include_timing`, so reports of
  /// identical runs compare equal byte for byte.
  nlohmann::json to_json(bool include_timing = true) const;
};

struct FitResult {
  TrainReport report;
  /// Weights of the best validation epoch; the final weights when the
  /// validation split is empty.
  Checkpoint best;
};

/// Loss terms of one minibatch.
struct BatchLoss {
  double total = 0.0;
  double supervised = 0.0;   // mean compound loss
  double consistency = 0.0;  // mean squared equivariance gap, unweighted
};

/// Forward and backward pass for one minibatch; gradients are accumulated
/// into the model (call zero_grad first). Samples of equal shape share one
/// forward pass. When loss.lambda_consistency > 0, `consistency` supplies one
/// transform per sample and the objective gains
/// lambda * mean_i MSE(f(c_i(x_i)), c_i(f(x_i))).
BatchLoss accumulate_batch_gradients(StudentModel& model, std::span<const Sample> batch,
                                     std::span<const SplitFlipTransform> consistency, const LossConfig& loss);

/// Mean compound loss and mean per-image Dice at `threshold`, dropout off.
struct ValidationResult {
  double loss = 0.0;
  double dice = 0.0;
};
ValidationResult validate_model(StudentModel& model, std::span<const Sample> samples, const LossConfig& loss,
                                double threshold);

/// Trains `model` in place with RMSProp. Each step draws batch_size samples
/// from a seeded cyclic shuffle, applies a sampled split-flip augmentation to
/// image and mask, and takes one optimizer step on the batch objective.
/// Validation runs every validation_interval epochs and after the final one;
/// best.ckpt is written whenever validation Dice improves and last.ckpt at
/// the end. A non-finite loss or gradient writes last_good.ckpt and throws
/// TrainingError.
FitResult fit(StudentModel& model, const TrainingData& data, const TrainConfig& cfg);

using RecordLoader = std::function<Sample(const DatasetManifest&, const ManifestRecord&)>;

/// Reads the image and label of `record`; instance labels are binarized.
Sample load_sample(const DatasetManifest& manifest, const ManifestRecord& record);

/// Loads the train and val records only. Train records without a label are a
/// ManifestError; an empty train split is a ConfigError.
TrainingData load_training_data(const DatasetManifest& manifest, const RecordLoader& loader = load_sample);

FitResult fit(StudentModel& model, const DatasetManifest& manifest, const TrainConfig& cfg,
              const RecordLoader& loader = load_sample);

}  // namespace kdseg
