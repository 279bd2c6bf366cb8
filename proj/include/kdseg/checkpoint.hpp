#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "kdseg/rmsprop.hpp"
#include "kdseg/unet.hpp"

namespace kdseg {

struct NamedArray {
  std::string name;
  std::vector<int> shape;
  std::vector<float> data;
};

/// Model weights plus optimizer state and training progress.
///
/// On disk: the 8-byte magic "KDSEGCKP", a little-endian u32 format version,
/// a u64 header length, a JSON header describing the model layout, counters and every
/// array (name, shape, section, element offset), then the float32 payload in
/// little-endian order.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  UNetSpec spec;
  int epoch = 0;
  std::size_t optimizer_steps = 0;
  OptimizerConfig optimizer;
  std::vector<NamedArray> parameters;
  std::vector<NamedArray> optimizer_state;
};

Checkpoint capture(const StudentModel& model, const RmsProp* optimizer = nullptr, int epoch = 0);

/// Copies parameters into `model`; names and shapes must match exactly.
void restore(StudentModel& model, const Checkpoint& ckpt);
/// Rebuilds optimizer state saved with capture().
RmsProp restore_optimizer(const Checkpoint& ckpt);
StudentModel model_from(const Checkpoint& ckpt);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace kdseg
