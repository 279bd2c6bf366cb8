#include "kdseg/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

#include "kdseg/errors.hpp"
#include "kdseg/raster_io.hpp"
#include "kdseg/rng.hpp"

namespace kdseg {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kManifestVersion = 1;
constexpr std::string_view kManifestFormat = "kdseg-manifest";

std::size_t floor_fraction(std::size_t n, double fraction) {
  // The epsilon guards products such as 10 * 0.7 = 6.9999999.
  return static_cast<std::size_t>(std::floor(static_cast<double>(n) * fraction + 1e-9));
}

void check_fraction(double f, const char* name) {
  if (!(f >= 0.0 && f <= 1.0)) throw ConfigError(std::string("split fraction ") + name + " must lie in [0,1]");
}

std::map<std::string, fs::path> scan_rasters(const fs::path& dir, bool required) {
  std::map<std::string, fs::path> out;
  if (!fs::is_directory(dir)) {
    if (required) throw ManifestError("missing directory: " + dir.string());
    return out;
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_raster_file(entry.path())) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    auto [it, inserted] = out.emplace(f.stem().string(), f);
    if (!inserted) {
      throw ManifestError("duplicate basename '" + f.stem().string() + "' in " + dir.string());
    }
  }
  return out;
}

}  // namespace

std::string_view to_string(LabelKind kind) {
  switch (kind) {
    case LabelKind::ground_truth: return "ground_truth";
    case LabelKind::pseudo_label: return "pseudo_label";
    case LabelKind::none: return "none";
  }
  return "none";
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "train";
}

LabelKind parse_label_kind(std::string_view text) {
  if (text == "ground_truth") return LabelKind::ground_truth;
  if (text == "pseudo_label") return LabelKind::pseudo_label;
  if (text == "none") return LabelKind::none;
  throw ManifestError("unknown label_kind '" + std::string(text) + "'");
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::train;
  if (text == "val") return Split::val;
  if (text == "test") return Split::test;
  throw ManifestError("unknown split '" + std::string(text) + "'");
}

std::string ManifestRecord::id() const { return fs::path(image_path).stem().string(); }

fs::path DatasetManifest::resolve(const std::string& relative) const {
  fs::path p(relative);
  return p.is_absolute() ? p : root / p;
}

std::vector<ManifestRecord> DatasetManifest::in_split(Split split) const {
  std::vector<ManifestRecord> out;
  for (const auto& r : records) {
    if (r.split == split) out.push_back(r);
  }
  return out;
}

std::size_t DatasetManifest::count(Split split) const {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [&](const auto& r) { return r.split == split; }));
}

const ManifestRecord* DatasetManifest::find(std::string_view id) const {
  for (const auto& r : records) {
    if (r.id() == id) return &r;
  }
  return nullptr;
}

void DatasetManifest::validate() const {
  std::vector<std::string> missing;
  std::set<std::string> seen;
  std::vector<std::string> duplicates;
  for (const auto& r : records) {
    if (!fs::exists(resolve(r.image_path))) missing.push_back(r.image_path);
    if (r.label_kind != LabelKind::none) {
      if (r.label_path.empty()) {
        missing.push_back("<label of " + r.image_path + ">");
      } else if (!fs::exists(resolve(r.label_path))) {
        missing.push_back(r.label_path);
      }
    }
    if (!seen.insert(r.id()).second) duplicates.push_back(r.id());
  }
  std::string msg;
  if (!missing.empty()) {
    msg += "missing files:";
    for (const auto& m : missing) msg += " " + m;
  }
  if (!duplicates.empty()) {
    if (!msg.empty()) msg += "; ";
    msg += "records listed more than once:";
    for (const auto& d : duplicates) msg += " " + d;
  }
  if (!msg.empty()) throw ManifestError(msg);
}

SplitSpec SplitSpec::fractions_of(double train, double val, double test) {
  SplitSpec s;
  s.mode = Mode::fractions;
  s.train = train;
  s.val = val;
  s.test = test;
  return s;
}

SplitSpec SplitSpec::with_test_list(double train, double val, std::vector<std::string> ids) {
  SplitSpec s;
  s.mode = Mode::test_list;
  s.train = train;
  s.val = val;
  s.test = 0.0;
  s.test_ids = std::move(ids);
  return s;
}

SplitSpec SplitSpec::exact(SplitSizes sizes) {
  SplitSpec s;
  s.mode = Mode::counts;
  s.counts = sizes;
  return s;
}

SplitSizes split_sizes(std::size_t n, double train, double val, double test) {
  check_fraction(train, "train");
  check_fraction(val, "val");
  check_fraction(test, "test");
  const double total = train + val + test;
  if (total > 1.0 + 1e-9) throw ConfigError("split fractions sum to more than 1");
  SplitSizes s;
  s.val = floor_fraction(n, val);
  s.test = floor_fraction(n, test);
  if (std::abs(total - 1.0) <= 1e-9) {
    s.train = n - s.val - s.test;
  } else {
    s.train = floor_fraction(n, train);
  }
  return s;
}

DatasetManifest build_manifest(const fs::path& root, const SplitSpec& spec, std::uint64_t seed,
                               bool require_labels) {
  const auto images = scan_rasters(root / "images", true);
  const auto labels = scan_rasters(root / "labels", require_labels);

  std::vector<std::string> offenders;
  for (const auto& [stem, path] : images) {
    if (require_labels && !labels.contains(stem)) offenders.push_back(path.filename().string());
  }
  if (!offenders.empty()) {
    std::string msg = "images without a matching label:";
    for (const auto& o : offenders) msg += " " + o;
    throw ManifestError(msg);
  }

  std::vector<std::string> ids;
  ids.reserve(images.size());
  for (const auto& [stem, path] : images) ids.push_back(stem);

  std::map<std::string, Split> assignment;
  std::vector<std::string> pool;
  SplitSizes sizes;
  if (spec.mode == SplitSpec::Mode::test_list) {
    std::set<std::string> forced(spec.test_ids.begin(), spec.test_ids.end());
    std::vector<std::string> unknown;
    for (const auto& t : forced) {
      if (!images.contains(t)) unknown.push_back(t);
    }
    if (!unknown.empty()) {
      std::string msg = "test ids not present under images/:";
      for (const auto& u : unknown) msg += " " + u;
      throw ManifestError(msg);
    }
    for (const auto& id : ids) {
      if (forced.contains(id)) {
        assignment[id] = Split::test;
      } else {
        pool.push_back(id);
      }
    }
    const double denom = spec.train + spec.val;
    if (denom <= 0.0) throw ConfigError("train and val fractions are both zero");
    sizes = split_sizes(pool.size(), spec.train / denom, spec.val / denom, 0.0);
  } else {
    pool = ids;
    if (spec.mode == SplitSpec::Mode::counts) {
      sizes = spec.counts;
      if (sizes.train + sizes.val + sizes.test > pool.size()) {
        throw ConfigError("split counts exceed the " + std::to_string(pool.size()) + " available images");
      }
    } else {
      sizes = split_sizes(pool.size(), spec.train, spec.val, spec.test);
    }
  }

  Rng rng(seed);
  shuffle(pool, rng);
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < sizes.train; ++i) assignment[pool[cursor++]] = Split::train;
  for (std::size_t i = 0; i < sizes.val; ++i) assignment[pool[cursor++]] = Split::val;
  for (std::size_t i = 0; i < sizes.test; ++i) assignment[pool[cursor++]] = Split::test;

  DatasetManifest manifest;
  manifest.root = root;
  for (const auto& [stem, path] : images) {
    auto it = assignment.find(stem);
    if (it == assignment.end()) continue;
    ManifestRecord rec;
    rec.image_path = fs::relative(path, root).generic_string();
    rec.split = it->second;
    if (auto lab = labels.find(stem); lab != labels.end()) {
      rec.label_path = fs::relative(lab->second, root).generic_string();
      rec.label_kind = LabelKind::ground_truth;
    }
    manifest.records.push_back(std::move(rec));
  }
  return manifest;
}

void save_manifest(const DatasetManifest& manifest, const fs::path& path) {
  json doc;
  doc["format"] = kManifestFormat;
  doc["version"] = kManifestVersion;
  // The root is stored relative to the manifest file so the dataset can move.
  const fs::path base = fs::weakly_canonical(fs::absolute(path)).parent_path();
  const fs::path rel = fs::weakly_canonical(fs::absolute(manifest.root)).lexically_relative(base);
  doc["root"] = (rel.empty() ? fs::absolute(manifest.root) : rel).generic_string();
  doc["records"] = json::array();
  for (const auto& r : manifest.records) {
    doc["records"].push_back({{"image_path", r.image_path},
                              {"label_path", r.label_path},
                              {"label_kind", to_string(r.label_kind)},
                              {"split", to_string(r.split)}});
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest: " + path.string());
  out << doc.dump(2) << '\n';
}

DatasetManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read manifest: " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ManifestError("malformed manifest " + path.string() + ": " + e.what());
  }
  DatasetManifest manifest;
  try {
    if (doc.at("format").get<std::string>() != kManifestFormat) throw ManifestError("not a kdseg manifest");
    if (doc.at("version").get<int>() != kManifestVersion) {
      throw ManifestError("unsupported manifest version in " + path.string());
    }
    fs::path root = doc.at("root").get<std::string>();
    manifest.root = root.is_absolute() ? root : path.parent_path() / root;
    for (const auto& r : doc.at("records")) {
      ManifestRecord rec;
      rec.image_path = r.at("image_path").get<std::string>();
      rec.label_path = r.value("label_path", std::string{});
      rec.label_kind = parse_label_kind(r.at("label_kind").get<std::string>());
      rec.split = parse_split(r.at("split").get<std::string>());
      manifest.records.push_back(std::move(rec));
    }
  } catch (const json::exception& e) {
    throw ManifestError("malformed manifest " + path.string() + ": " + e.what());
  }
  manifest.validate();
  return manifest;
}

}  // namespace kdseg
