#include "kdseg/commands.hpp"

#include <fstream>
#include <memory>

#include "kdseg/checkpoint.hpp"
#include "kdseg/distill.hpp"
#include "kdseg/errors.hpp"
#include "kdseg/evaluate.hpp"
#include "kdseg/manifest.hpp"
#include "kdseg/raster_io.hpp"
#include "kdseg/synth.hpp"
#include "kdseg/train.hpp"

namespace kdseg {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Context {
  json doc;
  fs::path root;
  std::uint64_t seed = 0;
  fs::path out;
};

Context make_context(const RunConfig& run) {
  if (run.output_dir.empty()) throw ConfigError("--output is required");
  Context ctx;
  ctx.doc = load_config_document(run);
  ctx.root = data_root(ctx.doc, run);
  ctx.seed = config_seed(ctx.doc);
  ctx.out = run.output_dir;
  return ctx;
}

fs::path resolve(const Context& ctx, const fs::path& p) { return p.is_relative() ? ctx.root / p : p; }

// String-valued key of a section; ConfigError when missing and no fallback.
std::string text(const json& sec, const std::string& where, const std::string& key,
                 const std::optional<std::string>& fallback = std::nullopt) {
  if (!sec.contains(key) || sec[key].is_null()) {
    if (fallback) return *fallback;
    throw ConfigError(where + "." + key + " is required");
  }
  if (!sec[key].is_string()) throw ConfigError(where + "." + key + " must be a string");
  return sec[key].get<std::string>();
}

double number(const json& sec, const std::string& where, const std::string& key, double fallback) {
  if (!sec.contains(key) || sec[key].is_null()) return fallback;
  if (!sec[key].is_number()) throw ConfigError(where + "." + key + " must be a number");
  return sec[key].get<double>();
}

bool flag(const json& sec, const std::string& where, const std::string& key, bool fallback) {
  if (!sec.contains(key) || sec[key].is_null()) return fallback;
  if (!sec[key].is_boolean()) throw ConfigError(where + "." + key + " must be true or false");
  return sec[key].get<bool>();
}

void only_keys(const json& sec, const std::string& where, std::initializer_list<const char*> keys) {
  for (const auto& [key, value] : sec.items()) {
    bool known = false;
    for (const char* k : keys) known = known || key == k;
    if (!known) throw ConfigError("unknown config key " + where + "." + key);
  }
}

Split split_of(const json& sec, const std::string& where) {
  try {
    return parse_split(text(sec, where, "split", "test"));
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(where + ".split: " + e.what());
  }
}

PredictionKind kind_of(const json& sec, const std::string& where) {
  return parse_prediction_kind(text(sec, where, "kind", "probability"));
}

double threshold_of(const json& sec, const std::string& where) {
  const double t = number(sec, where, "threshold", 0.5);
  if (!(t >= 0.0 && t <= 1.0)) throw ConfigError(where + ".threshold must lie in [0,1]");
  return t;
}

std::unique_ptr<TeacherAdapter> make_teacher(const Context& ctx, const json& sec) {
  if (!sec.is_object()) throw ConfigError("pseudolabel.teacher must be an object");
  const std::string kind = text(sec, "pseudolabel.teacher", "kind", "file");
  if (kind == "file") {
    only_keys(sec, "pseudolabel.teacher", {"kind", "dir", "probability_threshold"});
    std::optional<double> t;
    if (sec.contains("probability_threshold") && !sec["probability_threshold"].is_null()) {
      t = number(sec, "pseudolabel.teacher", "probability_threshold", 0.5);
    }
    return std::make_unique<FileTeacher>(resolve(ctx, text(sec, "pseudolabel.teacher", "dir")), t);
  }
  if (kind == "synthetic") {
    only_keys(sec, "pseudolabel.teacher", {"kind", "truth_dir", "drop_fraction"});
    return std::make_unique<SyntheticCorruptor>(resolve(ctx, text(sec, "pseudolabel.teacher", "truth_dir", "labels")),
                                                number(sec, "pseudolabel.teacher", "drop_fraction", 0.3), ctx.seed);
  }
  throw ConfigError("pseudolabel.teacher.kind must be file or synthetic");
}

void write_text(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
}

std::map<std::string, std::vector<MetricsRecord>> evaluate_methods(const Context& ctx, const json& sec,
                                                                   const DatasetManifest& manifest) {
  if (!sec.contains("methods") || !sec["methods"].is_object() || sec["methods"].size() < 2) {
    throw ConfigError("compare.methods must map at least two method names to prediction directories");
  }
  const double t = threshold_of(sec, "compare");
  const PredictionKind kind = kind_of(sec, "compare");
  const Split split = split_of(sec, "compare");
  std::map<std::string, fs::path> dirs;
  for (const auto& [name, dir] : sec["methods"].items()) {
    if (!dir.is_string()) throw ConfigError("compare.methods." + name + " must be a directory path");
    if (name.empty() || name.find_first_of(",\n\"/") != std::string::npos) {
      throw ConfigError("compare method name '" + name + "' may not contain commas, quotes, slashes or newlines");
    }
    dirs[name] = resolve(ctx, dir.get<std::string>());
  }
  std::map<std::string, std::vector<MetricsRecord>> methods;
  for (const auto& [name, dir] : dirs) methods[name] = evaluate_set(dir, manifest, t, kind, split).records;
  return methods;
}

}  // namespace

void cmd_synth(const RunConfig& run, std::ostream& log) {
  const Context ctx = make_context(run);
  const SynthConfig cfg = parse_synth(section(ctx.doc, "synth"));
  const DatasetManifest m = write_synthetic_dataset(cfg, ctx.seed, ctx.out);
  log << "synthetic dataset: " << m.records.size() << " patches (train=" << m.count(Split::train)
      << " val=" << m.count(Split::val) << " test=" << m.count(Split::test) << ") in " << ctx.out.string() << '\n';
}

void cmd_pseudolabel(const RunConfig& run, std::ostream& log) {
  const Context ctx = make_context(run);
  const json sec = section(ctx.doc, "pseudolabel");
  only_keys(sec, "pseudolabel", {"manifest", "teacher"});
  const fs::path manifest_path = resolve(ctx, text(sec, "pseudolabel", "manifest", "manifest.json"));
  const auto teacher = make_teacher(ctx, sec.contains("teacher") ? sec["teacher"] : json::object());
  const DatasetManifest manifest = load_manifest(manifest_path);

  PseudoLabelCounts counts;
  const DatasetManifest updated = generate_pseudo_labels(*teacher, manifest, ctx.out, &counts);
  save_manifest(updated, ctx.out / "manifest.json");
  log << "pseudo-labels from " << teacher->describe() << ": train=" << counts.train << " val=" << counts.val << '\n';
}

void cmd_train(const RunConfig& run, std::ostream& log) {
  const Context ctx = make_context(run);
  const json sec = section(ctx.doc, "train");
  const UNetSpec spec = parse_model(section(ctx.doc, "model"));
  TrainConfig cfg = parse_train(sec, ctx.seed);
  cfg.checkpoint_dir = ctx.out / "checkpoints";
  const bool timing = flag(sec, "train", "report_timing", false);
  const DatasetManifest manifest = load_manifest(resolve(ctx, text(sec, "train", "manifest", "manifest.json")));

  StudentModel model(spec, ctx.seed);
  const FitResult result = fit(model, manifest, cfg);
  write_text(ctx.out / "train_report.json", result.report.to_json(timing).dump(2) + "\n");
  log << "trained " << result.report.optimizer_steps << " steps; best epoch " << result.report.best_epoch
      << " (val dice " << format_number(result.report.best_val_dice) << ")\n";
}

void cmd_predict(const RunConfig& run, std::ostream& log) {
  const Context ctx = make_context(run);
  const json sec = section(ctx.doc, "predict");
  only_keys(sec, "predict", {"manifest", "checkpoint", "split"});
  const Split split = split_of(sec, "predict");
  const DatasetManifest manifest = load_manifest(resolve(ctx, text(sec, "predict", "manifest", "manifest.json")));
  StudentModel model = model_from(load_checkpoint(resolve(ctx, text(sec, "predict", "checkpoint"))));
  model.set_training(false);

  std::size_t written = 0;
  for (const auto& rec : manifest.in_split(split)) {
    ImagePatch patch = load_patch(manifest.resolve(rec.image_path));
    patch.id = rec.id();
    save_prob_map(model.predict(patch), ctx.out / "predictions" / (rec.id() + ".png"));
    ++written;
  }
  log << "wrote " << written << " probability maps to " << (ctx.out / "predictions").string() << '\n';
}

void cmd_evaluate(const RunConfig& run, std::ostream& log) {
  const Context ctx = make_context(run);
  const json sec = section(ctx.doc, "evaluate");
  only_keys(sec, "evaluate", {"manifest", "predictions", "threshold", "kind", "split", "overlays"});
  const double t = threshold_of(sec, "evaluate");
  const PredictionKind kind = kind_of(sec, "evaluate");
  const Split split = split_of(sec, "evaluate");
  const bool overlays = flag(sec, "evaluate", "overlays", false);
  const fs::path pred_dir = resolve(ctx, text(sec, "evaluate", "predictions"));
  const DatasetManifest manifest = load_manifest(resolve(ctx, text(sec, "evaluate", "manifest", "manifest.json")));

  const Evaluation ev = evaluate_set(pred_dir, manifest, t, kind, split);
  write_records_csv(ev.records, ctx.out / "metrics.csv");
  write_summary_json(ev.summary, ctx.out / "summary.json");
  if (overlays) {
    for (const auto& rec : manifest.in_split(split)) {
      const auto pred_path = find_raster(pred_dir, rec.id());
      const BinaryMask pred =
          kind == PredictionKind::probability ? threshold(load_prob_map(*pred_path), t) : load_binary_mask(*pred_path);
      const fs::path label = manifest.resolve(rec.label_path);
      auto loaded = load_mask(label, detect_mask_kind(label));
      const BinaryMask truth = std::holds_alternative<InstanceMap>(loaded) ? binarize(std::get<InstanceMap>(loaded))
                                                                           : std::get<BinaryMask>(loaded);
      save_patch(boundary_overlay(load_patch(manifest.resolve(rec.image_path)), pred, truth),
                 ctx.out / "overlays" / (rec.id() + ".png"));
    }
  }
  log << "evaluated " << ev.summary.count << " images: dice " << format_number(ev.summary.metrics.at("dice").mean)
      << ", tpr " << format_number(ev.summary.metrics.at("tpr").mean) << '\n';
}

void cmd_compare(const RunConfig& run, std::ostream& log) {
  const Context ctx = make_context(run);
  const json sec = section(ctx.doc, "compare");
  only_keys(sec, "compare", {"manifest", "methods", "threshold", "kind", "split"});
  const DatasetManifest manifest = load_manifest(resolve(ctx, text(sec, "compare", "manifest", "manifest.json")));
  const auto methods = evaluate_methods(ctx, sec, manifest);

  for (const auto& [name, records] : methods) {
    write_records_csv(records, ctx.out / "methods" / name / "metrics.csv");
    write_summary_json(summarize(records), ctx.out / "methods" / name / "summary.json");
  }
  for (const auto& metric : metric_names()) write_boxplot_csv(methods, metric, ctx.out / ("boxplot_" + metric + ".csv"));
  const auto rows = compare_methods(methods);
  write_comparison_csv(rows, ctx.out / "comparison.csv");
  for (const auto& r : rows) {
    log << r.metric << ": " << r.method_a << " vs " << r.method_b << " p=" << format_number(r.test.p_value) << ' '
        << r.test.label << '\n';
  }
}

int run_command(const RunConfig& run, std::ostream& log, std::ostream& err) {
  try {
    if (run.command == "synth") {
      cmd_synth(run, log);
    } else if (run.command == "pseudolabel") {
      cmd_pseudolabel(run, log);
    } else if (run.command == "train") {
      cmd_train(run, log);
    } else if (run.command == "predict") {
      cmd_predict(run, log);
    } else if (run.command == "evaluate") {
      cmd_evaluate(run, log);
    } else if (run.command == "compare") {
      cmd_compare(run, log);
    } else {
      throw ConfigError("unknown command '" + run.command + "'");
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace kdseg
