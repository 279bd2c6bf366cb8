#include "kdseg/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include "kdseg/errors.hpp"

namespace kdseg {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::set<std::string> kTopLevelKeys = {"data_root", "seed",    "synth",    "pseudolabel", "model",
                                             "train",     "predict", "evaluate", "compare"};

// Typed access to one config object that remembers which keys were read, so
// leftovers can be reported as unknown.
class Reader {
 public:
  Reader(const json& obj, std::string where) : obj_(obj), where_(std::move(where)) {
    if (!obj_.is_object()) throw ConfigError(where_ + " must be an object");
  }

  template <typename T>
  T get(const std::string& key, T fallback) {
    seen_.insert(key);
    auto it = obj_.find(key);
    if (it == obj_.end() || it->is_null()) return fallback;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw ConfigError("");
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer()) throw ConfigError("");
        if constexpr (std::is_unsigned_v<T>) {
          if (it->is_number_integer() && !it->is_number_unsigned() && it->get<long long>() < 0) throw ConfigError("");
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw ConfigError("");
      }
      return it->get<T>();
    } catch (const std::exception&) {
      throw ConfigError(where_ + "." + key + " has the wrong type: " + it->dump());
    }
  }

  json child(const std::string& key) {
    seen_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() || it->is_null() ? json::object() : *it;
  }

  bool has(const std::string& key) const { return obj_.contains(key) && !obj_.at(key).is_null(); }

  void finish() const {
    for (const auto& [key, value] : obj_.items()) {
      if (!seen_.contains(key)) throw ConfigError("unknown config key " + where_ + "." + key);
    }
  }

 private:
  const json& obj_;
  std::string where_;
  std::set<std::string> seen_;
};

json parse_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    return text;
  }
}

}  // namespace

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
    if (!node->is_object()) throw ConfigError("override '" + key + "' descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[part] = parse_value(assignment.substr(eq + 1));
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

json load_config_document(const RunConfig& run) {
  json doc = json::object();
  if (!run.config_path.empty()) {
    std::ifstream in(run.config_path);
    if (!in) throw ConfigError("cannot read config file " + run.config_path.string());
    try {
      doc = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError("config file " + run.config_path.string() + " is not valid JSON: " + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config file must hold a JSON object");
  }
  for (const auto& o : run.overrides) apply_override(doc, o);
  if (run.seed) doc["seed"] = *run.seed;
  for (const auto& [key, value] : doc.items()) {
    if (!kTopLevelKeys.contains(key)) throw ConfigError("unknown config section '" + key + "'");
  }
  return doc;
}

fs::path data_root(const json& doc, const RunConfig& run) {
  if (doc.contains("data_root")) {
    if (!doc["data_root"].is_string()) throw ConfigError("data_root must be a string");
    fs::path p = doc["data_root"].get<std::string>();
    if (p.is_relative() && !run.config_path.empty()) p = run.config_path.parent_path() / p;
    return p;
  }
  if (const char* env = std::getenv(kDataRootEnv); env != nullptr && *env != '\0') return env;
  if (!run.config_path.empty()) return run.config_path.parent_path().empty() ? fs::path(".") : run.config_path.parent_path();
  return fs::current_path();
}

std::uint64_t config_seed(const json& doc) {
  if (!doc.contains("seed")) return 0;
  const auto& s = doc["seed"];
  if (!s.is_number_unsigned()) throw ConfigError("seed must be a non-negative integer");
  return s.get<std::uint64_t>();
}

json section(const json& doc, const std::string& name) {
  if (!doc.contains(name) || doc[name].is_null()) return json::object();
  if (!doc[name].is_object()) throw ConfigError("config section '" + name + "' must be an object");
  return doc[name];
}

UNetSpec parse_model(const json& obj) {
  Reader r(obj, "model");
  UNetSpec spec;
  spec.depth = r.get("depth", spec.depth);
  spec.base_channels = r.get("base_channels", spec.base_channels);
  spec.in_channels = r.get("in_channels", spec.in_channels);
  spec.out_channels = r.get("out_channels", spec.out_channels);
  spec.dropout_rates = r.get("dropout_rates", spec.dropout_rates);
  spec.allow_high_dropout = r.get("allow_high_dropout", spec.allow_high_dropout);
  r.finish();
  spec.validate();
  return spec;
}

LossConfig parse_loss(const json& obj) {
  Reader r(obj, "train.loss");
  LossConfig c;
  c.w_bce = r.get("w_bce", c.w_bce);
  c.w_tversky = r.get("w_tversky", c.w_tversky);
  c.alpha = r.get("alpha", c.alpha);
  c.beta = r.get("beta", c.beta);
  c.smooth_eps = r.get("smooth_eps", c.smooth_eps);
  c.lambda_consistency = r.get("lambda_consistency", c.lambda_consistency);
  c.prob_clip_eps = r.get("prob_clip_eps", c.prob_clip_eps);
  r.finish();
  c.validate();
  return c;
}

OptimizerConfig parse_optimizer(const json& obj) {
  Reader r(obj, "train.optimizer");
  OptimizerConfig c;
  c.learning_rate = r.get("learning_rate", c.learning_rate);
  c.rho = r.get("rho", c.rho);
  c.epsilon = r.get("epsilon", c.epsilon);
  c.decay = r.get("decay", c.decay);
  r.finish();
  c.validate();
  return c;
}

AugmentConfig parse_augment(const json& obj, bool* enabled) {
  Reader r(obj, "train.augment");
  AugmentConfig c;
  const bool on = r.get("enabled", true);
  if (enabled != nullptr) *enabled = on;
  if (r.has("transforms")) {
    c.enabled.clear();
    for (const auto& name : r.get("transforms", std::vector<std::string>{})) {
      try {
        c.enabled.push_back(parse_split_axis(name));
      } catch (const Error& e) {
        throw ConfigError(std::string("train.augment.transforms: ") + e.what());
      }
    }
  } else {
    r.get("transforms", std::vector<std::string>{});
  }
  c.p_identity = r.get("p_identity", c.p_identity);
  r.finish();
  if (on) c.validate();
  return c;
}

TrainConfig parse_train(const json& obj, std::uint64_t seed) {
  Reader r(obj, "train");
  TrainConfig c;
  c.seed = seed;
  c.epochs = r.get("epochs", c.epochs);
  c.steps_per_epoch = r.get("steps_per_epoch", c.steps_per_epoch);
  c.full_pass = r.get("full_pass", c.full_pass);
  c.batch_size = r.get("batch_size", c.batch_size);
  c.validation_interval = r.get("validation_interval", c.validation_interval);
  c.val_threshold = r.get("val_threshold", c.val_threshold);
  c.loss = parse_loss(r.child("loss"));
  c.optimizer = parse_optimizer(r.child("optimizer"));
  c.augment = parse_augment(r.child("augment"), &c.augment_enabled);
  // Keys owned by the command layer.
  r.get("manifest", std::string{});
  r.get("report_timing", false);
  r.finish();
  c.validate();
  return c;
}

SplitSpec parse_split_spec(const json& obj) {
  Reader r(obj, "split");
  SplitSpec s;
  const auto mode = r.get("mode", std::string("fractions"));
  const double train = r.get("train", 0.6);
  const double val = r.get("val", 0.2);
  const double test = r.get("test", 0.2);
  if (mode == "fractions") {
    s = SplitSpec::fractions_of(train, val, test);
  } else if (mode == "test_list") {
    s = SplitSpec::with_test_list(train, val, r.get("test_ids", std::vector<std::string>{}));
  } else if (mode == "counts") {
    s = SplitSpec::exact({r.get("train_count", std::size_t{0}), r.get("val_count", std::size_t{0}),
                          r.get("test_count", std::size_t{0})});
  } else {
    throw ConfigError("split.mode must be fractions, test_list or counts");
  }
  r.get("test_ids", std::vector<std::string>{});
  r.get("train_count", std::size_t{0});
  r.get("val_count", std::size_t{0});
  r.get("test_count", std::size_t{0});
  r.finish();
  return s;
}

SynthConfig parse_synth(const json& obj) {
  Reader r(obj, "synth");
  SynthConfig c;
  c.count = r.get("count", c.count);
  c.size = r.get("size", c.size);
  c.min_nuclei = r.get("min_nuclei", c.min_nuclei);
  c.max_nuclei = r.get("max_nuclei", c.max_nuclei);
  c.min_radius = r.get("min_radius", c.min_radius);
  c.max_radius = r.get("max_radius", c.max_radius);
  c.noise = r.get("noise", c.noise);
  if (r.has("split")) c.split = parse_split_spec(r.child("split"));
  r.child("split");
  r.finish();
  c.validate();
  return c;
}

}  // namespace kdseg
