#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace kdseg {

enum class LabelKind { ground_truth, pseudo_label, none };
enum class Split { train, val, test };

std::string_view to_string(LabelKind kind);
std::string_view to_string(Split split);
LabelKind parse_label_kind(std::string_view text);
Split parse_split(std::string_view text);

/// One (image, label) pair. Relative paths resolve against the manifest root.
struct ManifestRecord {
  std::string image_path;
  std::string label_path;  // empty when label_kind == none
  LabelKind label_kind = LabelKind::none;
  Split split = Split::train;

  /// Image basename without extension; pairs images, labels and predictions.
  std::string id() const;
};

struct DatasetManifest {
  std::filesystem::path root;
  std::vector<ManifestRecord> records;

  std::filesystem::path resolve(const std::string& relative) const;
  std::vector<ManifestRecord> in_split(Split split) const;
  std::size_t count(Split split) const;
  const ManifestRecord* find(std::string_view id) const;

  /// Every referenced path exists and no image appears twice.
  /// Throws ManifestError naming the offenders.
  void validate() const;
};

struct SplitSizes {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;

  bool operator==(const SplitSizes&) const = default;
};

/// How records are distributed across splits.
struct SplitSpec {
  enum class Mode { fractions, test_list, counts };

  Mode mode = Mode::fractions;
  double train = 1.0;
  double val = 0.0;
  double test = 0.0;
  /// test_list mode: ids forced into the test split. The (train, val)
  /// fractions then apply to the remaining pool.
  std::vector<std::string> test_ids;
  /// counts mode: exact split sizes.
  SplitSizes counts;

  static SplitSpec fractions_of(double train, double val, double test);
  static SplitSpec with_test_list(double train, double val, std::vector<std::string> ids);
  static SplitSpec exact(SplitSizes sizes);
};

/// Floor-based sizes for n items. When the fractions sum to 1 the remainder
/// goes to train and the sizes sum to n; otherwise every split is floored and
/// the leftover items are left out.
SplitSizes split_sizes(std::size_t n, double train, double val, double test);

/// Scans `root/images` and `root/labels` (PNG/TIFF, matched by basename),
/// shuffles with a seeded RNG and assigns splits. Records come back sorted by
/// image path. When `require_labels` is set, any image without a label is a
/// ManifestError listing every offender; otherwise it is recorded with
/// label_kind none.
DatasetManifest build_manifest(const std::filesystem::path& root, const SplitSpec& spec, std::uint64_t seed,
                               bool require_labels = true);

/// The root is written relative to the manifest file's directory.
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Relative roots resolve against the manifest file's directory. The loaded
/// manifest is validated.
DatasetManifest load_manifest(const std::filesystem::path& path);

}  // namespace kdseg
