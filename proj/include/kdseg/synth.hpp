#pragma once

#include <cstdint>
#include <filesystem>

#include "kdseg/image.hpp"
#include "kdseg/manifest.hpp"

namespace kdseg {

struct SynthConfig {
  int count = 12;
  int size = 64;
  int min_nuclei = 5;
  int max_nuclei = 10;
  double min_radius = 3.0;
  double max_radius = 7.0;
  /// Standard deviation of the per-pixel Gaussian texture, in [0,1] units.
  double noise = 0.04;
  SplitSpec split = SplitSpec::fractions_of(0.6, 0.2, 0.2);

  void validate() const;
};

struct SynthPatch {
  ImagePatch image;
  InstanceMap instances;
};

/// H&E-like RGB patch with non-overlapping elliptical nuclei (instance labels
/// 1..K, K within [min_nuclei, max_nuclei]). A pure function of
/// (cfg, seed, index). Throws ConfigError when the nuclei cannot be placed.
SynthPatch synth_patch(const SynthConfig& cfg, std::uint64_t seed, int index);

/// Writes images/<id>.png (8-bit RGB), labels/<id>.png (16-bit instance
/// labels) and manifest.json under `out_dir`. Train and val records carry no
/// label (they are to be pseudo-labeled); test records point at the true
/// instance maps. Returns the manifest.
DatasetManifest write_synthetic_dataset(const SynthConfig& cfg, std::uint64_t seed,
                                        const std::filesystem::path& out_dir);

}  // namespace kdseg
