#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "stereoconf/loss.hpp"
#include "stereoconf/maps.hpp"
#include "stereoconf/metrics.hpp"

namespace stereoconf::io {

using Bytes = std::vector<std::uint8_t>;

// Portable float map. Samples are stored top row first, channel-interleaved.
// A negative scale marks little-endian payloads, a positive one big-endian.
struct PfmImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 1;
  float scale = -1.0f;
  std::vector<float> samples;
};

// Disparities with magnitude above this are treated as invalid on read.
inline constexpr double kPfmInvalidMagnitude = 1e4;

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

PfmImage parse_pfm(std::span<const std::uint8_t> bytes);
// Serializes with the image's own channel count and scale sign.
Bytes encode_pfm(const PfmImage& image);

// First channel as disparity; non-finite or huge samples become invalid.
DisparityMap read_pfm(std::span<const std::uint8_t> bytes);
// "Pf", scale -1 (little-endian), invalid pixels written as +inf.
Bytes encode_pfm(const DisparityMap& map);
Bytes encode_pfm(const ConfidenceMap& map);
void write_pfm(const DisparityMap& map, const std::filesystem::path& path);
void write_pfm(const ConfidenceMap& map, const std::filesystem::path& path);

struct Gray16Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint16_t> raw;
};

// 16-bit single-channel PNG. Any other depth or channel layout is an IoError.
Gray16Image decode_png16(std::span<const std::uint8_t> bytes);
Bytes encode_png16(const Gray16Image& image);

// KITTI disparity PNG: disparity = raw / 256, raw 0 marks an invalid pixel.
DisparityMap read_kitti_disparity(std::span<const std::uint8_t> bytes);
// Valid disparities are rounded to the nearest 1/256 px and clamped to
// [1/256, 65535/256] so they never collide with the invalid marker.
Bytes encode_kitti_disparity(const DisparityMap& map);

// Confidence as 16-bit gray, raw = floor(c * 65535 + 0.5).
std::uint16_t quantize_confidence(double c);
Bytes encode_confidence_png(const ConfidenceMap& conf);
void write_confidence_png(const ConfidenceMap& conf, const std::filesystem::path& path);

// Format detected from the leading magic bytes (PFM or 16-bit PNG).
DisparityMap load_disparity(const std::filesystem::path& path);
// PFM samples or PNG raw / 65535, lifted to c_min.
ConfidenceMap load_confidence(const std::filesystem::path& path,
                              double c_min = kDefaultMinConfidence);

// "%.9g"
std::string format_number(double v);

void write_sparsification_csv(const metrics::SparsificationCurve& curve, std::ostream& os);
void write_loss_scan_csv(std::span<const loss::ScanPoint> points, std::ostream& os);

nlohmann::json to_json(const metrics::EvalReport& report);

}  // namespace stereoconf::io
