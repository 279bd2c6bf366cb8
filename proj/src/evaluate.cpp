#include "kdseg/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <variant>

#include "kdseg/distill.hpp"
#include "kdseg/errors.hpp"
#include "kdseg/raster_io.hpp"

namespace kdseg {
namespace fs = std::filesystem;

namespace {

std::ofstream open_report(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

BinaryMask load_truth(const DatasetManifest& manifest, const ManifestRecord& rec) {
  if (rec.label_kind == LabelKind::none || rec.label_path.empty()) {
    throw EvaluationError("record '" + rec.id() + "' has no label to evaluate against");
  }
  const fs::path path = manifest.resolve(rec.label_path);
  auto loaded = load_mask(path, detect_mask_kind(path));
  if (auto* inst = std::get_if<InstanceMap>(&loaded)) return binarize(*inst);
  return std::get<BinaryMask>(std::move(loaded));
}

}  // namespace

std::string_view to_string(PredictionKind kind) {
  return kind == PredictionKind::probability ? "probability" : "mask";
}

PredictionKind parse_prediction_kind(std::string_view text) {
  if (text == "probability") return PredictionKind::probability;
  if (text == "mask") return PredictionKind::mask;
  throw ConfigError("unknown prediction kind '" + std::string(text) + "' (expected probability or mask)");
}

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9f", value);
  return buf;
}

EvaluationSummary summarize(const std::vector<MetricsRecord>& records) {
  EvaluationSummary s;
  s.count = records.size();
  for (const auto& r : records) s.hd_empty += r.hd_empty ? 1 : 0;
  for (const auto& name : metric_names()) {
    MetricSummary m;
    if (!records.empty()) {
      // Deviations are taken from the first value, so constant inputs give
      // exactly that mean and a zero spread.
      const double origin = metric_value(records.front(), name);
      double shift = 0.0;
      for (const auto& r : records) shift += metric_value(r, name) - origin;
      shift /= static_cast<double>(records.size());
      m.mean = origin + shift;
      if (records.size() > 1) {
        double sq = 0.0;
        for (const auto& r : records) {
          const double d = (metric_value(r, name) - origin) - shift;
          sq += d * d;
        }
        m.stddev = std::sqrt(sq / static_cast<double>(records.size() - 1));
      }
    }
    s.metrics[name] = m;
  }
  return s;
}

Evaluation evaluate_set(const fs::path& pred_dir, const DatasetManifest& truth, double threshold,
                        PredictionKind kind, Split split) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("threshold must lie in [0,1]");
  Evaluation ev;
  for (const auto& rec : truth.in_split(split)) {
    const std::string id = rec.id();
    const auto pred_path = find_raster(pred_dir, id);
    if (!pred_path) throw EvaluationError("missing prediction for image id '" + id + "' in " + pred_dir.string());
    const BinaryMask gt = load_truth(truth, rec);
    const BinaryMask pred =
        kind == PredictionKind::probability ? kdseg::threshold(load_prob_map(*pred_path), threshold) : load_binary_mask(*pred_path);
    if (pred.height != gt.height || pred.width != gt.width) {
      throw EvaluationError("prediction for '" + id + "' is " + std::to_string(pred.height) + "x" +
                            std::to_string(pred.width) + ", label is " + std::to_string(gt.height) + "x" +
                            std::to_string(gt.width));
    }
    ev.records.push_back(measure(id, pred, gt));
  }
  std::sort(ev.records.begin(), ev.records.end(),
            [](const MetricsRecord& a, const MetricsRecord& b) { return a.image_id < b.image_id; });
  ev.summary = summarize(ev.records);
  return ev;
}

void write_records_csv(const std::vector<MetricsRecord>& records, const fs::path& path) {
  auto out = open_report(path);
  out << "image_id";
  for (const auto& name : metric_names()) out << ',' << name;
  out << ",hd_empty\n";
  for (const auto& r : records) {
    out << r.image_id;
    for (const auto& name : metric_names()) out << ',' << format_number(metric_value(r, name));
    out << ',' << (r.hd_empty ? 1 : 0) << '\n';
  }
}

nlohmann::json summary_json(const EvaluationSummary& summary) {
  nlohmann::json metrics = nlohmann::json::object();
  for (const auto& [name, m] : summary.metrics) {
    metrics[name] = {{"mean", m.mean}, {"std", m.stddev}};
  }
  return {{"count", summary.count},
          {"hd_empty", summary.hd_empty},
          {"metrics", std::move(metrics)},
          {"fpr_scale", "unscaled"}};
}

void write_summary_json(const EvaluationSummary& summary, const fs::path& path) {
  auto out = open_report(path);
  out << summary_json(summary).dump(2) << '\n';
}

void write_boxplot_csv(const std::map<std::string, std::vector<MetricsRecord>>& methods, const std::string& metric,
                       const fs::path& path) {
  std::set<std::string> ids;
  std::map<std::string, std::map<std::string, double>> values;
  for (const auto& [method, records] : methods) {
    for (const auto& r : records) {
      ids.insert(r.image_id);
      values[method][r.image_id] = metric_value(r, metric);
    }
  }
  auto out = open_report(path);
  out << "image_id";
  for (const auto& [method, records] : methods) out << ',' << method;
  out << '\n';
  for (const auto& id : ids) {
    out << id;
    for (const auto& [method, records] : methods) {
      out << ',';
      const auto& col = values[method];
      if (auto it = col.find(id); it != col.end()) out << format_number(it->second);
    }
    out << '\n';
  }
}

std::vector<PairComparison> compare_methods(const std::map<std::string, std::vector<MetricsRecord>>& methods) {
  if (methods.size() < 2) throw EvaluationError("comparison needs at least two methods");
  std::vector<PairComparison> rows;
  for (const auto& metric : metric_names()) {
    for (auto a = methods.begin(); a != methods.end(); ++a) {
      for (auto b = std::next(a); b != methods.end(); ++b) {
        if (a->second.empty() || b->second.empty()) {
          throw EvaluationError("method '" + (a->second.empty() ? a->first : b->first) + "' has no records");
        }
        std::vector<double> va;
        std::vector<double> vb;
        for (const auto& r : a->second) va.push_back(metric_value(r, metric));
        for (const auto& r : b->second) vb.push_back(metric_value(r, metric));
        rows.push_back({metric, a->first, b->first, va.size(), vb.size(), mann_whitney_u(va, vb)});
      }
    }
  }
  return rows;
}

void write_comparison_csv(const std::vector<PairComparison>& rows, const fs::path& path) {
  auto out = open_report(path);
  out << "metric,method_a,method_b,n_a,n_b,u_a,u_b,p_value,method,significance\n";
  for (const auto& r : rows) {
    out << r.metric << ',' << r.method_a << ',' << r.method_b << ',' << r.n_a << ',' << r.n_b << ','
        << format_number(r.test.u_a) << ',' << format_number(r.test.u_b) << ',' << format_number(r.test.p_value) << ','
        << (r.test.exact ? "exact" : "normal") << ',' << r.test.label << '\n';
  }
}

ImagePatch boundary_overlay(const ImagePatch& image, const BinaryMask& pred, const BinaryMask& truth) {
  if (pred.height != image.height || pred.width != image.width || truth.height != image.height ||
      truth.width != image.width) {
    throw DimensionError("boundary_overlay: image, prediction and label shapes differ");
  }
  ImagePatch out(image.id, image.height, image.width, 3);
  for (int c = 0; c < 3; ++c) {
    const int src = image.channels == 3 ? c : 0;
    for (int y = 0; y < image.height; ++y) {
      for (int x = 0; x < image.width; ++x) out.at(c, y, x) = image.at(src, y, x);
    }
  }
  const BinaryMask bp = boundary(pred);
  const BinaryMask bt = boundary(truth);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const bool p = bp.at(y, x) != 0;
      const bool t = bt.at(y, x) != 0;
      if (!p && !t) continue;
      out.at(0, y, x) = p ? 1.0f : 0.0f;
      out.at(1, y, x) = t ? 1.0f : 0.0f;
      out.at(2, y, x) = 0.0f;
    }
  }
  return out;
}

}  // namespace kdseg
