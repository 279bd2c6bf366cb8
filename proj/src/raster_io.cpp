#include "kdseg/raster_io.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "kdseg/errors.hpp"

namespace kdseg {
namespace fs = std::filesystem;

namespace {

std::string lower_extension(const fs::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

cv::Mat read_raw(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw IoError("cannot read raster: " + path.string());
  cv::Mat raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (raw.empty()) throw IoError("cannot decode raster: " + path.string());
  if (raw.depth() != CV_8U && raw.depth() != CV_16U) {
    throw FormatError("unsupported bit depth in " + path.string() + " (expected 8 or 16 bit)");
  }
  return raw;
}

cv::Mat read_single_channel(const fs::path& path) {
  cv::Mat raw = read_raw(path);
  if (raw.channels() != 1) {
    throw FormatError("mask must be single-channel: " + path.string() + " has " +
                      std::to_string(raw.channels()) + " channels");
  }
  return raw;
}

template <typename Fn>
void for_each_pixel(const cv::Mat& m, Fn&& fn) {
  for (int y = 0; y < m.rows; ++y) {
    for (int x = 0; x < m.cols; ++x) {
      std::uint32_t v = m.depth() == CV_8U ? m.at<std::uint8_t>(y, x) : m.at<std::uint16_t>(y, x);
      fn(y, x, v);
    }
  }
}

void write_raw(const cv::Mat& m, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::vector<int> params;
  if (lower_extension(path) == ".png") params = {cv::IMWRITE_PNG_COMPRESSION, 3};
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), m, params);
  } catch (const cv::Exception& e) {
    throw IoError("cannot write raster " + path.string() + ": " + e.what());
  }
  if (!ok) throw IoError("cannot write raster: " + path.string());
}

}  // namespace

bool is_raster_file(const fs::path& path) {
  auto ext = lower_extension(path);
  return ext == ".png" || ext == ".tif" || ext == ".tiff";
}

ImagePatch load_patch(const fs::path& path) {
  cv::Mat raw = read_raw(path);
  const int stored = raw.channels();
  // gray, gray+alpha, BGR, BGRA
  const int channels = stored <= 2 ? 1 : 3;
  if (stored > 4) throw FormatError("unsupported channel count in " + path.string());
  if (raw.rows < kMinPatchSide || raw.cols < kMinPatchSide) {
    throw FormatError("patch " + path.string() + " is smaller than " + std::to_string(kMinPatchSide) +
                      " pixels on a side");
  }
  const double scale = raw.depth() == CV_8U ? 255.0 : 65535.0;
  ImagePatch patch(path.stem().string(), raw.rows, raw.cols, channels);
  for (int y = 0; y < raw.rows; ++y) {
    for (int x = 0; x < raw.cols; ++x) {
      for (int c = 0; c < channels; ++c) {
        // OpenCV stores BGR; patches are RGB.
        const int src = channels == 3 ? 2 - c : 0;
        double v = raw.depth() == CV_8U ? raw.ptr<std::uint8_t>(y)[x * stored + src]
                                        : raw.ptr<std::uint16_t>(y)[x * stored + src];
        patch.at(c, y, x) = static_cast<float>(v / scale);
      }
    }
  }
  return patch;
}

MaskKind detect_mask_kind(const fs::path& path) {
  cv::Mat raw = read_single_channel(path);
  return raw.depth() == CV_16U ? MaskKind::instance : MaskKind::binary;
}

BinaryMask load_binary_mask(const fs::path& path) {
  cv::Mat raw = read_single_channel(path);
  BinaryMask mask(path.stem().string(), raw.rows, raw.cols);
  for_each_pixel(raw, [&](int y, int x, std::uint32_t v) { mask.at(y, x) = v != 0 ? 1 : 0; });
  return mask;
}

InstanceMap load_instance_map(const fs::path& path) {
  cv::Mat raw = read_single_channel(path);
  InstanceMap map(path.stem().string(), raw.rows, raw.cols);
  for_each_pixel(raw, [&](int y, int x, std::uint32_t v) { map.at(y, x) = static_cast<std::int32_t>(v); });
  return map;
}

std::variant<BinaryMask, InstanceMap> load_mask(const fs::path& path, MaskKind kind) {
  if (kind == MaskKind::binary) return load_binary_mask(path);
  return load_instance_map(path);
}

ProbMap load_prob_map(const fs::path& path) {
  cv::Mat raw = read_single_channel(path);
  const double scale = raw.depth() == CV_8U ? 255.0 : 65535.0;
  ProbMap probs(path.stem().string(), raw.rows, raw.cols);
  for_each_pixel(raw, [&](int y, int x, std::uint32_t v) { probs.at(y, x) = v / scale; });
  return probs;
}

void save_patch(const ImagePatch& patch, const fs::path& path, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) throw FormatError("bit depth must be 8 or 16");
  if (patch.channels != 1 && patch.channels != 3) throw FormatError("patch must have 1 or 3 channels");
  const double scale = bit_depth == 8 ? 255.0 : 65535.0;
  const int type = CV_MAKETYPE(bit_depth == 8 ? CV_8U : CV_16U, patch.channels);
  cv::Mat m(patch.height, patch.width, type);
  for (int y = 0; y < patch.height; ++y) {
    for (int x = 0; x < patch.width; ++x) {
      for (int c = 0; c < patch.channels; ++c) {
        const int dst = patch.channels == 3 ? 2 - c : 0;
        const double v = std::clamp<double>(patch.at(c, y, x), 0.0, 1.0) * scale;
        const auto q = static_cast<std::uint32_t>(std::lround(v));
        if (bit_depth == 8) {
          m.ptr<std::uint8_t>(y)[x * patch.channels + dst] = static_cast<std::uint8_t>(q);
        } else {
          m.ptr<std::uint16_t>(y)[x * patch.channels + dst] = static_cast<std::uint16_t>(q);
        }
      }
    }
  }
  write_raw(m, path);
}

void save_mask(const BinaryMask& mask, const fs::path& path) {
  cv::Mat m(mask.height, mask.width, CV_8UC1);
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) m.at<std::uint8_t>(y, x) = mask.at(y, x) ? 255 : 0;
  }
  write_raw(m, path);
}

void save_instance_map(const InstanceMap& map, const fs::path& path) {
  cv::Mat m(map.height, map.width, CV_16UC1);
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) {
      const auto v = map.at(y, x);
      if (v < 0 || v > 65535) throw FormatError("instance label out of 16-bit range in " + map.id);
      m.at<std::uint16_t>(y, x) = static_cast<std::uint16_t>(v);
    }
  }
  write_raw(m, path);
}

void save_prob_map(const ProbMap& probs, const fs::path& path) {
  cv::Mat m(probs.height, probs.width, CV_16UC1);
  for (int y = 0; y < probs.height; ++y) {
    for (int x = 0; x < probs.width; ++x) {
      const double v = std::clamp(probs.at(y, x), 0.0, 1.0);
      m.at<std::uint16_t>(y, x) = static_cast<std::uint16_t>(std::lround(v * 65535.0));
    }
  }
  write_raw(m, path);
}

}  // namespace kdseg
