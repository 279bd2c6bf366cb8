#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kdseg/augment.hpp"
#include "kdseg/evaluate.hpp"
#include "kdseg/losses.hpp"
#include "kdseg/rmsprop.hpp"
#include "kdseg/synth.hpp"
#include "kdseg/train.hpp"
#include "kdseg/unet.hpp"

namespace kdseg {

/// Environment variable that replaces the default data root.
inline constexpr const char* kDataRootEnv = "KDSEG_DATA_ROOT";

struct RunConfig {
  std::string command;
  std::filesystem::path config_path;  // empty: built-in defaults only
  std::vector<std::string> overrides;  // "section.key=value"
  std::filesystem::path output_dir;
  std::optional<std::uint64_t> seed;
};

/// Reads the config file (or starts from an empty document), applies the
/// overrides in order and the seed flag. Override values are parsed as JSON
/// when possible and taken as strings otherwise. Throws ConfigError.
nlohmann::json load_config_document(const RunConfig& run);

/// Sets the member addressed by a dotted key, creating objects on the way.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Relative paths in the config resolve against this directory: the
/// document's "data_root" if given, else $KDSEG_DATA_ROOT, else the config
/// file's directory, else the working directory.
std::filesystem::path data_root(const nlohmann::json& doc, const RunConfig& run);

std::uint64_t config_seed(const nlohmann::json& doc);

// Section parsers. Each rejects unknown keys and runs the module's validate().
UNetSpec parse_model(const nlohmann::json& section);
LossConfig parse_loss(const nlohmann::json& section);
OptimizerConfig parse_optimizer(const nlohmann::json& section);
AugmentConfig parse_augment(const nlohmann::json& section, bool* enabled = nullptr);
TrainConfig parse_train(const nlohmann::json& section, std::uint64_t seed);
SynthConfig parse_synth(const nlohmann::json& section);
SplitSpec parse_split_spec(const nlohmann::json& section);

/// Section `name` of `doc`, or an empty object when absent.
nlohmann::json section(const nlohmann::json& doc, const std::string& name);

}  // namespace kdseg
