#include "kdseg/distill.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "kdseg/errors.hpp"
#include "kdseg/raster_io.hpp"
#include "kdseg/rng.hpp"

namespace kdseg {
namespace fs = std::filesystem;

std::optional<fs::path> find_raster(const fs::path& dir, const std::string& id) {
  for (const char* ext : {".png", ".tif", ".tiff"}) {
    fs::path candidate = dir / (id + ext);
    if (fs::is_regular_file(candidate)) return candidate;
  }
  return std::nullopt;
}

FileTeacher::FileTeacher(fs::path dir, std::optional<double> probability_threshold)
    : dir_(std::move(dir)), probability_threshold_(probability_threshold) {
  if (probability_threshold_ && !(*probability_threshold_ >= 0.0 && *probability_threshold_ <= 1.0)) {
    throw ConfigError("teacher probability_threshold must lie in [0,1]");
  }
}

InstanceMap FileTeacher::instances_for(const std::string& image_id) const {
  const auto path = find_raster(dir_, image_id);
  if (!path) throw DistillationError("teacher has no output for image id '" + image_id + "' in " + dir_.string());
  if (!probability_threshold_) return load_instance_map(*path);
  const ProbMap probs = load_prob_map(*path);
  InstanceMap map(image_id, probs.height, probs.width);
  for (std::size_t i = 0; i < probs.values.size(); ++i) map.labels[i] = probs.values[i] >= *probability_threshold_ ? 1 : 0;
  return map;
}

std::string FileTeacher::describe() const { return "file_based(" + dir_.string() + ")"; }

SyntheticCorruptor::SyntheticCorruptor(fs::path truth_dir, double drop_fraction, std::uint64_t seed)
    : truth_dir_(std::move(truth_dir)), drop_fraction_(drop_fraction), seed_(seed) {
  if (!(drop_fraction >= 0.0 && drop_fraction <= 1.0)) throw ConfigError("drop_fraction must lie in [0,1]");
}

InstanceMap SyntheticCorruptor::instances_for(const std::string& image_id) const {
  const auto path = find_raster(truth_dir_, image_id);
  if (!path) {
    throw DistillationError("synthetic teacher has no truth map for image id '" + image_id + "' in " +
                            truth_dir_.string());
  }
  return corrupt_instances(load_instance_map(*path), drop_fraction_, mix_seed(seed_, stable_hash(image_id)));
}

std::string SyntheticCorruptor::describe() const {
  return "synthetic_corruptor(" + truth_dir_.string() + ", drop_fraction=" + std::to_string(drop_fraction_) + ")";
}

InstanceMap corrupt_instances(const InstanceMap& truth, double p, std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("drop fraction must lie in [0,1]");
  auto labels = truth.instance_labels();
  const auto drop = static_cast<std::size_t>(std::lround(p * static_cast<double>(labels.size())));
  Rng rng(seed);
  shuffle(labels, rng);
  const std::set<std::int32_t> removed(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(drop));
  InstanceMap out = truth;
  for (auto& v : out.labels) {
    if (v != 0 && removed.contains(v)) v = 0;
  }
  return out;
}

DatasetManifest generate_pseudo_labels(const TeacherAdapter& teacher, const DatasetManifest& manifest,
                                       const fs::path& out_dir, PseudoLabelCounts* counts) {
  DatasetManifest updated = manifest;
  PseudoLabelCounts local;
  const fs::path label_dir = out_dir / "labels_pseudo";
  for (auto& rec : updated.records) {
    if (rec.split == Split::test || rec.label_kind == LabelKind::ground_truth) continue;
    const std::string id = rec.id();
    const InstanceMap instances = teacher.instances_for(id);
    BinaryMask mask = binarize(instances);
    mask.id = id;
    const fs::path target = label_dir / (id + ".png");
    save_mask(mask, target);
    const fs::path abs_target = fs::absolute(target);
    const fs::path rel = fs::relative(abs_target, fs::absolute(updated.root));
    rec.label_path = (rel.empty() ? abs_target : rel).generic_string();
    rec.label_kind = LabelKind::pseudo_label;
    (rec.split == Split::train ? local.train : local.val) += 1;
  }
  if (counts != nullptr) *counts = local;
  return updated;
}

}  // namespace kdseg
