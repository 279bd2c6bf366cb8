#pragma once

#include <filesystem>
#include <variant>

#include "kdseg/image.hpp"

namespace kdseg {

/// Smallest patch side accepted by load_patch.
inline constexpr int kMinPatchSide = 8;

enum class MaskKind { binary, instance };

/// Loads an 8- or 16-bit grayscale or RGB raster (PNG or TIFF) and rescales
/// intensities to [0,1] by the format maximum (255 or 65535). An alpha
/// channel, if present, is dropped.
///
/// Throws IoError when the file cannot be read and FormatError for any other
/// bit depth or a patch smaller than kMinPatchSide.
ImagePatch load_patch(const std::filesystem::path& path);

/// Single-channel mask loading. Binary: any nonzero pixel becomes 1.
/// Instance: raw integer labels are kept. Multi-channel files are rejected.
std::variant<BinaryMask, InstanceMap> load_mask(const std::filesystem::path& path, MaskKind kind);
BinaryMask load_binary_mask(const std::filesystem::path& path);
InstanceMap load_instance_map(const std::filesystem::path& path);

/// 16-bit files are instance maps, 8-bit files binary masks.
MaskKind detect_mask_kind(const std::filesystem::path& path);

/// Single-channel map rescaled to [0,1]; used for stored predictions.
ProbMap load_prob_map(const std::filesystem::path& path);

/// Writers pick the format from the extension (.png, .tif, .tiff).
void save_patch(const ImagePatch& patch, const std::filesystem::path& path, int bit_depth = 8);
/// Stored as 8-bit {0,255}.
void save_mask(const BinaryMask& mask, const std::filesystem::path& path);
/// Stored as 16-bit; labels above 65535 are a FormatError.
void save_instance_map(const InstanceMap& map, const std::filesystem::path& path);
/// Stored as 16-bit, value = round(p * 65535).
void save_prob_map(const ProbMap& probs, const std::filesystem::path& path);

/// Whether `path` has an extension the raster loaders accept.
bool is_raster_file(const std::filesystem::path& path);

}  // namespace kdseg
