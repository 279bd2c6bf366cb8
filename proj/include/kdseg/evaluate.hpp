#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "kdseg/image.hpp"
#include "kdseg/manifest.hpp"
#include "kdseg/metrics.hpp"
#include "kdseg/stats.hpp"

namespace kdseg {

/// How files in a prediction directory are read.
enum class PredictionKind {
  probability,  // 16-bit or 8-bit maps rescaled to [0,1], then thresholded
  mask,         // any nonzero pixel is foreground
};

std::string_view to_string(PredictionKind kind);
PredictionKind parse_prediction_kind(std::string_view text);

struct MetricSummary {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation; 0 for a single record
};

struct EvaluationSummary {
  std::size_t count = 0;
  std::size_t hd_empty = 0;  // records whose Hausdorff distance is the empty-mask sentinel
  std::map<std::string, MetricSummary> metrics;
};

struct Evaluation {
  std::vector<MetricsRecord> records;  // sorted by image id
  EvaluationSummary summary;
};

EvaluationSummary summarize(const std::vector<MetricsRecord>& records);

/// Scores `<pred_dir>/<id>.(png|tif|tiff)` against the label of every record
/// in `split`. A missing prediction or label is an EvaluationError naming the
/// id.
Evaluation evaluate_set(const std::filesystem::path& pred_dir, const DatasetManifest& truth, double threshold = 0.5,
                        PredictionKind kind = PredictionKind::probability, Split split = Split::test);

/// One row per record: image_id,dice,iou,tpr,fpr,f1,hd,hd_empty.
void write_records_csv(const std::vector<MetricsRecord>& records, const std::filesystem::path& path);
nlohmann::json summary_json(const EvaluationSummary& summary);
void write_summary_json(const EvaluationSummary& summary, const std::filesystem::path& path);

/// Wide table for box plots of one metric: image_id followed by one column
/// per method. Ids missing from a method leave the cell empty.
void write_boxplot_csv(const std::map<std::string, std::vector<MetricsRecord>>& methods, const std::string& metric,
                       const std::filesystem::path& path);

struct PairComparison {
  std::string metric;
  std::string method_a;
  std::string method_b;
  std::size_t n_a = 0;
  std::size_t n_b = 0;
  MannWhitneyResult test;
};

/// Mann-Whitney U for every metric and every unordered pair of methods
/// (method names in sorted order). Needs at least two methods.
std::vector<PairComparison> compare_methods(const std::map<std::string, std::vector<MetricsRecord>>& methods);
void write_comparison_csv(const std::vector<PairComparison>& rows, const std::filesystem::path& path);

/// RGB rendering of `image` with the truth boundary in green, the predicted
/// boundary in red and shared boundary pixels in yellow.
ImagePatch boundary_overlay(const ImagePatch& image, const BinaryMask& pred, const BinaryMask& truth);

/// Fixed-precision decimal text shared by every report writer.
std::string format_number(double value);

}  // namespace kdseg
