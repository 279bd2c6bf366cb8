#include "kdseg/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "kdseg/errors.hpp"
#include "kdseg/raster_io.hpp"
#include "kdseg/rng.hpp"

namespace kdseg {
namespace fs = std::filesystem;

namespace {

constexpr int kPlacementAttempts = 400;

// Eosin-stained background and hematoxylin-stained nuclei, RGB in [0,1].
constexpr std::array<double, 3> kBackground = {0.92, 0.74, 0.84};
constexpr std::array<double, 3> kNucleus = {0.36, 0.22, 0.55};

struct Ellipse {
  double cy, cx, ry, rx, angle;

  bool contains(double y, double x) const {
    const double dy = y - cy;
    const double dx = x - cx;
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    const double u = (dx * c + dy * s) / rx;
    const double v = (-dx * s + dy * c) / ry;
    return u * u + v * v <= 1.0;
  }
};

std::string patch_id(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "synth_%04d", index);
  return buf;
}

}  // namespace

void SynthConfig::validate() const {
  if (count < 1) throw ConfigError("synth count must be >= 1");
  if (size < kMinPatchSide) throw ConfigError("synth size must be >= " + std::to_string(kMinPatchSide));
  if (min_nuclei < 1 || max_nuclei < min_nuclei) throw ConfigError("synth nuclei range must satisfy 1 <= min <= max");
  if (!(min_radius >= 1.0 && max_radius >= min_radius)) {
    throw ConfigError("synth radii must satisfy 1 <= min_radius <= max_radius");
  }
  if (2.0 * max_radius + 2.0 > size) throw ConfigError("synth max_radius does not fit the patch size");
  if (!(noise >= 0.0)) throw ConfigError("synth noise must be >= 0");
}

SynthPatch synth_patch(const SynthConfig& cfg, std::uint64_t seed, int index) {
  cfg.validate();
  const std::string id = patch_id(index);
  Rng rng(mix_seed(seed, static_cast<std::uint64_t>(index)));
  const int n = cfg.size;
  SynthPatch out{ImagePatch(id, n, n, 3), InstanceMap(id, n, n)};
  InstanceMap& labels = out.instances;

  const int wanted =
      cfg.min_nuclei + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(cfg.max_nuclei - cfg.min_nuclei + 1)));
  std::vector<double> stain(static_cast<std::size_t>(wanted) + 1, 1.0);
  for (int k = 1; k <= wanted; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
      Ellipse e;
      e.ry = uniform(rng, cfg.min_radius, cfg.max_radius);
      e.rx = uniform(rng, cfg.min_radius, cfg.max_radius);
      e.angle = uniform(rng, 0.0, std::numbers::pi);
      const double r = std::max(e.ry, e.rx);
      e.cy = uniform(rng, r, n - 1 - r);
      e.cx = uniform(rng, r, n - 1 - r);
      const int y0 = std::max(0, static_cast<int>(std::floor(e.cy - r)) - 1);
      const int y1 = std::min(n - 1, static_cast<int>(std::ceil(e.cy + r)) + 1);
      const int x0 = std::max(0, static_cast<int>(std::floor(e.cx - r)) - 1);
      const int x1 = std::min(n - 1, static_cast<int>(std::ceil(e.cx + r)) + 1);
      std::vector<std::pair<int, int>> pixels;
      bool clash = false;
      for (int y = y0; y <= y1 && !clash; ++y) {
        for (int x = x0; x <= x1; ++x) {
          if (!e.contains(y, x)) continue;
          // Keep a one-pixel gap to every other nucleus.
          for (int dy = -1; dy <= 1 && !clash; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
              const int yy = y + dy;
              const int xx = x + dx;
              if (yy >= 0 && xx >= 0 && yy < n && xx < n && labels.at(yy, xx) != 0) {
                clash = true;
                break;
              }
            }
          }
          if (clash) break;
          pixels.emplace_back(y, x);
        }
      }
      if (clash || pixels.empty()) continue;
      for (auto [y, x] : pixels) labels.at(y, x) = k;
      placed = true;
    }
    if (!placed) {
      throw ConfigError("could not place " + std::to_string(wanted) + " nuclei in a " + std::to_string(n) + "x" +
                        std::to_string(n) + " patch; lower max_nuclei or the radii");
    }
    stain[k] = uniform(rng, 0.8, 1.2);
  }

  const double shade = uniform(rng, -0.04, 0.04);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const int label = labels.at(y, x);
      for (int c = 0; c < 3; ++c) {
        double v = label == 0 ? kBackground[c] + shade : 1.0 - stain[label] * (1.0 - kNucleus[c]);
        v += cfg.noise * standard_normal(rng);
        out.image.at(c, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return out;
}

DatasetManifest write_synthetic_dataset(const SynthConfig& cfg, std::uint64_t seed, const fs::path& out_dir) {
  cfg.validate();
  for (int i = 0; i < cfg.count; ++i) {
    const SynthPatch p = synth_patch(cfg, seed, i);
    save_patch(p.image, out_dir / "images" / (p.image.id + ".png"));
    save_instance_map(p.instances, out_dir / "labels" / (p.image.id + ".png"));
  }
  DatasetManifest manifest = build_manifest(out_dir, cfg.split, seed);
  for (auto& rec : manifest.records) {
    if (rec.split == Split::test) continue;
    rec.label_path.clear();
    rec.label_kind = LabelKind::none;
  }
  save_manifest(manifest, out_dir / "manifest.json");
  return manifest;
}

}  // namespace kdseg
