#include "kdseg/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <utility>
#include <variant>

#include "kdseg/errors.hpp"
#include "kdseg/metrics.hpp"
#include "kdseg/raster_io.hpp"
#include "kdseg/rng.hpp"

namespace kdseg {
namespace fs = std::filesystem;
using nn::Tensor;

namespace {

constexpr std::uint64_t kDropoutStream = 1;
constexpr std::uint64_t kAugmentStream = 2;
constexpr std::uint64_t kSamplerStream = 3;

// Cycles through a fresh seeded permutation of [0, n) each pass.
class CyclicSampler {
 public:
  CyclicSampler(std::size_t n, std::uint64_t seed) : order_(n), rng_(seed) { refill(); }

  std::size_t next() {
    if (cursor_ == order_.size()) refill();
    return order_[cursor_++];
  }

 private:
  void refill() {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    shuffle(order_, rng_);
    cursor_ = 0;
  }

  std::vector<std::size_t> order_;
  Rng rng_;
  std::size_t cursor_ = 0;
};

template <typename T>
std::span<const T> plane_of(const std::vector<T>& v, std::size_t index, std::size_t plane) {
  return std::span<const T>(v).subspan(index * plane, plane);
}

void check_sample(const Sample& s, const UNetSpec& spec) {
  if (s.image.channels != spec.in_channels) {
    throw DimensionError("sample '" + s.id + "' has " + std::to_string(s.image.channels) + " channels, model expects " +
                         std::to_string(spec.in_channels));
  }
  if (s.mask.height != s.image.height || s.mask.width != s.image.width) {
    throw DimensionError("sample '" + s.id + "': mask shape differs from image shape");
  }
}

void write_checkpoint(const fs::path& dir, const std::string& name, const Checkpoint& ckpt) {
  if (dir.empty()) return;
  save_checkpoint(ckpt, dir / name);
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (steps_per_epoch < 1) throw ConfigError("steps_per_epoch must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (validation_interval < 1) throw ConfigError("validation_interval must be >= 1");
  if (!(val_threshold >= 0.0 && val_threshold <= 1.0)) throw ConfigError("val_threshold must lie in [0,1]");
  loss.validate();
  if (augment_enabled) augment.validate();
  optimizer.validate();
}

int TrainConfig::steps_for(std::size_t train_size) const {
  if (!full_pass) return steps_per_epoch;
  const auto b = static_cast<std::size_t>(batch_size);
  return static_cast<int>(std::max<std::size_t>(1, (train_size + b - 1) / b));
}

nlohmann::json TrainReport::to_json(bool include_timing) const {
  nlohmann::json epochs_json = nlohmann::json::array();
  for (const auto& e : epochs) {
    nlohmann::json j = {{"epoch", e.epoch}, {"train_loss", e.train_loss}};
    j["val_loss"] = e.val_loss ? nlohmann::json(*e.val_loss) : nlohmann::json(nullptr);
    j["val_dice"] = e.val_dice ? nlohmann::json(*e.val_dice) : nlohmann::json(nullptr);
    if (include_timing) j["seconds"] = e.seconds;
    epochs_json.push_back(std::move(j));
  }
  return {{"epochs", std::move(epochs_json)},
          {"best_epoch", best_epoch},
          {"best_val_dice", best_val_dice},
          {"optimizer_steps", optimizer_steps},
          {"step_losses", step_losses}};
}

BatchLoss accumulate_batch_gradients(StudentModel& model, std::span<const Sample> batch,
                                     std::span<const SplitFlipTransform> consistency, const LossConfig& loss) {
  if (batch.empty()) throw DimensionError("empty minibatch");
  const double lambda = loss.lambda_consistency;
  const bool with_consistency = lambda > 0.0;
  if (with_consistency && consistency.size() != batch.size()) {
    throw DimensionError("one consistency transform per sample is required");
  }
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  // Group equal shapes so each group is one forward/backward pass.
  std::map<std::pair<int, int>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    check_sample(batch[i], model.spec());
    groups[{batch[i].image.height, batch[i].image.width}].push_back(i);
  }

  BatchLoss out;
  for (const auto& [shape, members] : groups) {
    const auto [h, w] = shape;
    const int m = static_cast<int>(members.size());
    const int c = model.spec().in_channels;
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    // Rows 0..m-1 hold x_i; rows m..2m-1 hold c_i(x_i).
    Tensor input(with_consistency ? 2 * m : m, c, h, w);
    for (int j = 0; j < m; ++j) {
      const Sample& s = batch[members[j]];
      std::copy(s.image.pixels.begin(), s.image.pixels.end(), input.sample(j));
      if (with_consistency) {
        apply_planar<float>(consistency[members[j]], s.image.pixels,
                            std::span<float>(input.sample(m + j), s.image.pixels.size()), c, h, w);
      }
    }
    const std::vector<double> probs = model.forward(input, true);
    std::vector<double> dprob(probs.size(), 0.0);
    std::vector<double> grad(plane);
    for (int j = 0; j < m; ++j) {
      const Sample& s = batch[members[j]];
      const std::vector<double> target = as_target(s.mask);
      const auto p = plane_of(probs, j, plane);
      const double value = compound_loss(target, p, loss, grad);
      out.supervised += value * inv_b;
      for (std::size_t k = 0; k < plane; ++k) dprob[j * plane + k] += grad[k] * inv_b;
      if (!with_consistency) continue;

      const SplitFlipTransform t = consistency[members[j]];
      std::vector<double> transformed_pred(plane);
      apply_planar<double>(t, p, transformed_pred, 1, h, w);
      std::vector<double> grad_q(plane);
      std::vector<double> grad_tp(plane);
      const double gap = consistency_loss(plane_of(probs, m + j, plane), transformed_pred, grad_q, grad_tp);
      out.consistency += gap * inv_b;
      for (std::size_t k = 0; k < plane; ++k) dprob[(m + j) * plane + k] += lambda * inv_b * grad_q[k];
      // The transform is a self-inverse permutation, so it maps the gradient
      // with respect to c(p) back onto p.
      std::vector<double> back(plane);
      apply_planar<double>(t, grad_tp, back, 1, h, w);
      for (std::size_t k = 0; k < plane; ++k) dprob[j * plane + k] += lambda * inv_b * back[k];
    }
    model.backward(dprob);
  }
  out.total = out.supervised + lambda * out.consistency;
  return out;
}

ValidationResult validate_model(StudentModel& model, std::span<const Sample> samples, const LossConfig& loss,
                                double threshold) {
  ValidationResult res;
  if (samples.empty()) return res;
  const bool was_training = model.training();
  model.set_training(false);
  for (const Sample& s : samples) {
    check_sample(s, model.spec());
    const ProbMap probs = model.predict(s.image);
    res.loss += compound_loss(as_target(s.mask), probs.values, loss);
    res.dice += dice(confusion(kdseg::threshold(probs, threshold), s.mask));
  }
  model.set_training(was_training);
  res.loss /= static_cast<double>(samples.size());
  res.dice /= static_cast<double>(samples.size());
  return res;
}

FitResult fit(StudentModel& model, const TrainingData& data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.train.empty()) throw ConfigError("the train split is empty");
  for (const auto& s : data.train) check_sample(s, model.spec());
  for (const auto& s : data.val) check_sample(s, model.spec());
  if (!cfg.checkpoint_dir.empty()) fs::create_directories(cfg.checkpoint_dir);

  model.reseed_dropout(mix_seed(cfg.seed, kDropoutStream));
  Rng augment_rng(mix_seed(cfg.seed, kAugmentStream));
  CyclicSampler sampler(data.train.size(), mix_seed(cfg.seed, kSamplerStream));
  RmsProp optimizer(cfg.optimizer);

  std::vector<SplitAxis> axes = cfg.augment.enabled;
  const bool augmenting = cfg.augment_enabled && !axes.empty();
  if (axes.empty()) axes = {SplitAxis::horizontal_split, SplitAxis::vertical_split};
  const bool with_consistency = cfg.loss.lambda_consistency > 0.0;
  const int steps = cfg.steps_for(data.train.size());

  FitResult result;
  TrainReport& report = result.report;
  double best_dice = -std::numeric_limits<double>::infinity();
  auto params = model.parameters();

  auto abort_with_last_good = [&](int epoch, const std::string& why) {
    write_checkpoint(cfg.checkpoint_dir, "last_good.ckpt", capture(model, &optimizer, epoch));
    throw TrainingError(why + " at optimizer step " + std::to_string(optimizer.steps()) +
                        (cfg.checkpoint_dir.empty() ? std::string() : "; last good state saved to last_good.ckpt"));
  };

  std::vector<Sample> batch(static_cast<std::size_t>(cfg.batch_size));
  std::vector<SplitFlipTransform> transforms(batch.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    const double lr_scale = std::pow(cfg.optimizer.decay, epoch);
    model.set_training(true);
    double epoch_loss = 0.0;
    for (int step = 0; step < steps; ++step) {
      for (std::size_t b = 0; b < batch.size(); ++b) {
        const Sample& src = data.train[sampler.next()];
        const Augmentation aug = augmenting ? sample_transform(augment_rng, cfg.augment.p_identity, axes) : Augmentation{};
        batch[b].id = src.id;
        batch[b].image = apply(aug, src.image);
        batch[b].mask = apply(aug, src.mask);
        if (with_consistency) transforms[b] = SplitFlipTransform{axes[uniform_index(augment_rng, axes.size())]};
      }
      model.zero_grad();
      const BatchLoss loss = accumulate_batch_gradients(model, batch, transforms, cfg.loss);
      if (!std::isfinite(loss.total)) abort_with_last_good(epoch, "non-finite training loss");
      try {
        optimizer.step(params, lr_scale);
      } catch (const TrainingError& e) {
        abort_with_last_good(epoch, e.what());
      }
      report.step_losses.push_back(loss.total);
      epoch_loss += loss.total;
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = epoch_loss / steps;
    const bool last = epoch + 1 == cfg.epochs;
    if (!data.val.empty() && ((epoch + 1) % cfg.validation_interval == 0 || last)) {
      const ValidationResult v = validate_model(model, data.val, cfg.loss, cfg.val_threshold);
      stats.val_loss = v.loss;
      stats.val_dice = v.dice;
      if (v.dice > best_dice) {
        best_dice = v.dice;
        report.best_epoch = epoch;
        report.best_val_dice = v.dice;
        result.best = capture(model, &optimizer, epoch);
        write_checkpoint(cfg.checkpoint_dir, "best.ckpt", result.best);
      }
    }
    stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    report.epochs.push_back(stats);
  }
  report.optimizer_steps = optimizer.steps();
  model.set_training(false);

  const Checkpoint final_state = capture(model, &optimizer, cfg.epochs - 1);
  if (data.val.empty()) result.best = final_state;
  write_checkpoint(cfg.checkpoint_dir, "last.ckpt", final_state);
  return result;
}

Sample load_sample(const DatasetManifest& manifest, const ManifestRecord& record) {
  Sample s;
  s.id = record.id();
  s.image = load_patch(manifest.resolve(record.image_path));
  s.image.id = s.id;
  if (record.label_kind == LabelKind::none || record.label_path.empty()) {
    throw ManifestError("record '" + s.id + "' has no label");
  }
  const fs::path label = manifest.resolve(record.label_path);
  auto loaded = load_mask(label, detect_mask_kind(label));
  if (auto* inst = std::get_if<InstanceMap>(&loaded)) {
    s.mask = binarize(*inst);
  } else {
    s.mask = std::get<BinaryMask>(std::move(loaded));
  }
  s.mask.id = s.id;
  if (s.mask.height != s.image.height || s.mask.width != s.image.width) {
    throw DimensionError("label of '" + s.id + "' is " + std::to_string(s.mask.height) + "x" +
                         std::to_string(s.mask.width) + ", image is " + std::to_string(s.image.height) + "x" +
                         std::to_string(s.image.width));
  }
  return s;
}

TrainingData load_training_data(const DatasetManifest& manifest, const RecordLoader& loader) {
  TrainingData data;
  std::vector<std::string> unlabeled;
  for (const auto& rec : manifest.records) {
    if (rec.split == Split::test) continue;
    if (rec.label_kind == LabelKind::none) {
      unlabeled.push_back(rec.id());
      continue;
    }
    (rec.split == Split::train ? data.train : data.val).push_back(loader(manifest, rec));
  }
  if (!unlabeled.empty()) {
    std::string names;
    for (const auto& id : unlabeled) names += (names.empty() ? "" : ", ") + id;
    throw ManifestError("train/val records without labels: " + names);
  }
  if (data.train.empty()) throw ConfigError("the train split is empty");
  return data;
}

FitResult fit(StudentModel& model, const DatasetManifest& manifest, const TrainConfig& cfg,
              const RecordLoader& loader) {
  cfg.validate();
  return fit(model, load_training_data(manifest, loader), cfg);
}

}  // namespace kdseg
