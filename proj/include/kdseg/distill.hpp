#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "kdseg/image.hpp"
#include "kdseg/manifest.hpp"

namespace kdseg {

/// Source of teacher instance maps, looked up by image id.
class TeacherAdapter {
 public:
  virtual ~TeacherAdapter() = default;
  /// Throws DistillationError naming the id when the teacher has no output for it.
  virtual InstanceMap instances_for(const std::string& image_id) const = 0;
  virtual std::string describe() const = 0;
};

/// Reads precomputed instance maps `<dir>/<id>.(png|tif|tiff)` produced by
/// an external segmentation tool. With `probability_threshold` set, the files
/// are read as probability maps instead and pixels >= threshold become a
/// single instance.
class FileTeacher final : public TeacherAdapter {
 public:
  explicit FileTeacher(std::filesystem::path dir, std::optional<double> probability_threshold = std::nullopt);
  InstanceMap instances_for(const std::string& image_id) const override;
  std::string describe() const override;

 private:
  std::filesystem::path dir_;
  std::optional<double> probability_threshold_;
};

/// Test oracle teacher: reads true instance maps and removes
/// round(drop_fraction * K) of the K instances, chosen per image from a
/// stream seeded by (seed, image id).
class SyntheticCorruptor final : public TeacherAdapter {
 public:
  SyntheticCorruptor(std::filesystem::path truth_dir, double drop_fraction, std::uint64_t seed);
  InstanceMap instances_for(const std::string& image_id) const override;
  std::string describe() const override;

 private:
  std::filesystem::path truth_dir_;
  double drop_fraction_;
  std::uint64_t seed_;
};

/// `<dir>/<id>` with the first raster extension that exists.
std::optional<std::filesystem::path> find_raster(const std::filesystem::path& dir, const std::string& id);

/// Zeroes the pixels of round(p * instance_count) instances picked uniformly
/// at random; the other labels are left untouched.
InstanceMap corrupt_instances(const InstanceMap& truth, double p, std::uint64_t seed);

struct PseudoLabelCounts {
  std::size_t train = 0;
  std::size_t val = 0;
};

/// Writes `<out_dir>/labels_pseudo/<id>.png` for every train/val record that
/// is not ground truth, marks those records pseudo_label and returns the
/// updated manifest. Ground-truth and test records are left as they are.
/// Re-running with the same teacher rewrites identical files.
DatasetManifest generate_pseudo_labels(const TeacherAdapter& teacher, const DatasetManifest& manifest,
                                       const std::filesystem::path& out_dir, PseudoLabelCounts* counts = nullptr);

}  // namespace kdseg
