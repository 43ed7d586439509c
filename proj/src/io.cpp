#include "stereoconf/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <memory>
#include <ostream>

#include "stereoconf/errors.hpp"

namespace stereoconf::io {

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// PFM

namespace {

bool is_space(std::uint8_t c) { return c == ' ' || c == '\n' || c == '\r' || c == '\t'; }

class HeaderReader {
 public:
  explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::string token() {
    while (pos_ < bytes_.size() && is_space(bytes_[pos_])) ++pos_;
    std::string tok;
    while (pos_ < bytes_.size() && !is_space(bytes_[pos_])) tok.push_back(static_cast<char>(bytes_[pos_++]));
    if (tok.empty()) throw IoError("pfm: truncated header");
    return tok;
  }

  // The header ends with exactly one whitespace byte after the scale.
  std::size_t payload_offset() {
    if (pos_ >= bytes_.size()) throw IoError("pfm: truncated header");
    return pos_ + 1;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::size_t parse_dim(const std::string& tok) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(tok, &used);
  } catch (const std::exception&) {
    throw IoError("pfm: bad dimension '" + tok + "'");
  }
  if (used != tok.size() || v <= 0) throw IoError("pfm: bad dimension '" + tok + "'");
  return static_cast<std::size_t>(v);
}

std::uint32_t bswap32(std::uint32_t v) {
  return (v >> 24) | ((v >> 8) & 0x0000ff00u) | ((v << 8) & 0x00ff0000u) | (v << 24);
}

}  // namespace

PfmImage parse_pfm(std::span<const std::uint8_t> bytes) {
  HeaderReader hdr(bytes);
  PfmImage img;
  const std::string magic = hdr.token();
  if (magic == "Pf") {
    img.channels = 1;
  } else if (magic == "PF") {
    img.channels = 3;
  } else {
    throw IoError("pfm: bad magic '" + magic + "'");
  }
  img.width = parse_dim(hdr.token());
  img.height = parse_dim(hdr.token());
  const std::string scale_tok = hdr.token();
  try {
    img.scale = std::stof(scale_tok);
  } catch (const std::exception&) {
    throw IoError("pfm: bad scale '" + scale_tok + "'");
  }
  if (img.scale == 0.0f || !std::isfinite(img.scale)) throw IoError("pfm: zero scale");

  const std::size_t offset = hdr.payload_offset();
  const std::size_t count = img.width * img.height * img.channels;
  if (bytes.size() < offset || bytes.size() - offset < count * 4) {
    throw IoError("pfm: truncated payload");
  }

  const bool file_little = img.scale < 0.0f;
  const bool host_little = std::endian::native == std::endian::little;
  img.samples.resize(count);
  const std::size_t row = img.width * img.channels;
  for (std::size_t y = 0; y < img.height; ++y) {
    // Rows are stored bottom-to-top.
    const std::uint8_t* src = bytes.data() + offset + (img.height - 1 - y) * row * 4;
    for (std::size_t j = 0; j < row; ++j) {
      std::uint32_t bits;
      std::memcpy(&bits, src + j * 4, 4);
      if (file_little != host_little) bits = bswap32(bits);
      img.samples[y * row + j] = std::bit_cast<float>(bits);
    }
  }
  return img;
}

Bytes encode_pfm(const PfmImage& img) {
  if (img.width == 0 || img.height == 0) throw IoError("pfm: empty image");
  if (img.channels != 1 && img.channels != 3) throw IoError("pfm: channels must be 1 or 3");
  if (img.samples.size() != img.width * img.height * img.channels) {
    throw IoError("pfm: sample count does not match dimensions");
  }
  if (img.scale == 0.0f) throw IoError("pfm: zero scale");

  const bool file_little = img.scale < 0.0f;
  const bool host_little = std::endian::native == std::endian::little;
  const std::string header = std::string(img.channels == 1 ? "Pf" : "PF") + "\n" +
                             std::to_string(img.width) + " " + std::to_string(img.height) +
                             "\n" + (file_little ? "-1.0" : "1.0") + "\n";
  Bytes out(header.begin(), header.end());
  const std::size_t row = img.width * img.channels;
  out.reserve(out.size() + img.samples.size() * 4);
  for (std::size_t y = img.height; y-- > 0;) {
    for (std::size_t j = 0; j < row; ++j) {
      auto bits = std::bit_cast<std::uint32_t>(img.samples[y * row + j]);
      if (file_little != host_little) bits = bswap32(bits);
      std::uint8_t b[4];
      std::memcpy(b, &bits, 4);
      out.insert(out.end(), b, b + 4);
    }
  }
  return out;
}

DisparityMap read_pfm(std::span<const std::uint8_t> bytes) {
  const PfmImage img = parse_pfm(bytes);
  const std::size_t n = img.width * img.height;
  std::vector<double> values(n, 0.0);
  std::vector<std::uint8_t> valid(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = img.samples[i * img.channels];
    if (std::isfinite(v) && std::abs(v) <= kPfmInvalidMagnitude) {
      values[i] = v;
      valid[i] = 1;
    }
  }
  return DisparityMap(img.width, img.height, std::move(values), std::move(valid));
}

Bytes encode_pfm(const DisparityMap& map) {
  PfmImage img{map.width(), map.height(), 1, -1.0f, std::vector<float>(map.size())};
  for (std::size_t i = 0; i < map.size(); ++i) {
    img.samples[i] = map.valid(i) ? static_cast<float>(map.value(i))
                                  : std::numeric_limits<float>::infinity();
  }
  return encode_pfm(img);
}

Bytes encode_pfm(const ConfidenceMap& map) {
  PfmImage img{map.width(), map.height(), 1, -1.0f, std::vector<float>(map.size())};
  for (std::size_t i = 0; i < map.size(); ++i) img.samples[i] = static_cast<float>(map.value(i));
  return encode_pfm(img);
}

void write_pfm(const DisparityMap& map, const std::filesystem::path& path) {
  write_file(path, encode_pfm(map));
}

void write_pfm(const ConfidenceMap& map, const std::filesystem::path& path) {
  write_file(path, encode_pfm(map));
}

// ---------------------------------------------------------------------------
// 16-bit PNG
//
// libpng reports errors through longjmp. The decode/encode cores below keep
// all C++ state in a caller-owned context so nothing with a destructor lives
// in the frame that is jumped over.

namespace {

struct PngContext {
  std::span<const std::uint8_t> input;
  std::size_t pos = 0;
  Bytes output;
  Gray16Image image;
  std::vector<png_bytep> rows;
  char message[256] = {};
};

void png_error_fn(png_structp png, png_const_charp msg) {
  auto* ctx = static_cast<PngContext*>(png_get_error_ptr(png));
  std::snprintf(ctx->message, sizeof(ctx->message), "%s", msg);
  std::longjmp(png_jmpbuf(png), 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

void png_read_fn(png_structp png, png_bytep data, png_size_t length) {
  auto* ctx = static_cast<PngContext*>(png_get_io_ptr(png));
  if (ctx->input.size() - ctx->pos < length) png_error(png, "truncated data");
  std::memcpy(data, ctx->input.data() + ctx->pos, length);
  ctx->pos += length;
}

void png_write_fn(png_structp png, png_bytep data, png_size_t length) {
  auto* ctx = static_cast<PngContext*>(png_get_io_ptr(png));
  ctx->output.insert(ctx->output.end(), data, data + length);
}

void png_flush_fn(png_structp) {}

bool decode_core(PngContext* ctx) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, ctx, png_error_fn, png_warning_fn);
  if (png == nullptr) return false;
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_set_read_fn(png, ctx, png_read_fn);
  png_read_info(png, info);
  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  if (png_get_bit_depth(png, info) != 16 || png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY) {
    png_error(png, "expected a 16-bit single-channel image");
  }
  if (std::endian::native == std::endian::little) png_set_swap(png);
  png_set_interlace_handling(png);
  png_read_update_info(png, info);

  ctx->image.width = width;
  ctx->image.height = height;
  ctx->image.raw.assign(static_cast<std::size_t>(width) * height, 0);
  ctx->rows.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) {
    ctx->rows[y] = reinterpret_cast<png_bytep>(ctx->image.raw.data() + static_cast<std::size_t>(y) * width);
  }
  png_read_image(png, ctx->rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

bool encode_core(PngContext* ctx) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, ctx, png_error_fn, png_warning_fn);
  if (png == nullptr) return false;
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_set_write_fn(png, ctx, png_write_fn, png_flush_fn);
  png_set_IHDR(png, info, static_cast<png_uint_32>(ctx->image.width),
               static_cast<png_uint_32>(ctx->image.height), 16, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (std::endian::native == std::endian::little) png_set_swap(png);
  png_write_image(png, ctx->rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

}  // namespace

Gray16Image decode_png16(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw IoError("png: bad signature");
  auto ctx = std::make_unique<PngContext>();
  ctx->input = bytes;
  if (!decode_core(ctx.get())) throw IoError(std::string("png: ") + ctx->message);
  return std::move(ctx->image);
}

Bytes encode_png16(const Gray16Image& image) {
  if (image.width == 0 || image.height == 0) throw IoError("png: empty image");
  if (image.raw.size() != image.width * image.height) {
    throw IoError("png: sample count does not match dimensions");
  }
  auto ctx = std::make_unique<PngContext>();
  ctx->image = image;
  ctx->rows.resize(image.height);
  for (std::size_t y = 0; y < image.height; ++y) {
    ctx->rows[y] = reinterpret_cast<png_bytep>(ctx->image.raw.data() + y * image.width);
  }
  if (!encode_core(ctx.get())) throw IoError(std::string("png: ") + ctx->message);
  return std::move(ctx->output);
}

DisparityMap read_kitti_disparity(std::span<const std::uint8_t> bytes) {
  const Gray16Image img = decode_png16(bytes);
  std::vector<double> values(img.raw.size(), 0.0);
  std::vector<std::uint8_t> valid(img.raw.size(), 0);
  for (std::size_t i = 0; i < img.raw.size(); ++i) {
    if (img.raw[i] == 0) continue;
    values[i] = img.raw[i] / 256.0;
    valid[i] = 1;
  }
  return DisparityMap(img.width, img.height, std::move(values), std::move(valid));
}

Bytes encode_kitti_disparity(const DisparityMap& map) {
  Gray16Image img{map.width(), map.height(), std::vector<std::uint16_t>(map.size(), 0)};
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (!map.valid(i)) continue;
    const double raw = std::floor(map.value(i) * 256.0 + 0.5);
    img.raw[i] = static_cast<std::uint16_t>(std::clamp(raw, 1.0, 65535.0));
  }
  return encode_png16(img);
}

std::uint16_t quantize_confidence(double c) {
  if (!(c >= 0.0 && c <= 1.0)) throw DomainError("confidence png: value outside [0, 1]");
  return static_cast<std::uint16_t>(std::floor(c * 65535.0 + 0.5));
}

Bytes encode_confidence_png(const ConfidenceMap& conf) {
  Gray16Image img{conf.width(), conf.height(), std::vector<std::uint16_t>(conf.size())};
  for (std::size_t i = 0; i < conf.size(); ++i) img.raw[i] = quantize_confidence(conf.value(i));
  return encode_png16(img);
}

void write_confidence_png(const ConfidenceMap& conf, const std::filesystem::path& path) {
  write_file(path, encode_confidence_png(conf));
}

// ---------------------------------------------------------------------------
// Auto-detection

namespace {

bool looks_like_png(std::span<const std::uint8_t> b) {
  return b.size() >= 8 && png_sig_cmp(b.data(), 0, 8) == 0;
}

}  // namespace

DisparityMap load_disparity(const std::filesystem::path& path) {
  const Bytes bytes = read_file(path);
  try {
    return looks_like_png(bytes) ? read_kitti_disparity(bytes) : read_pfm(bytes);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

ConfidenceMap load_confidence(const std::filesystem::path& path, double c_min) {
  const Bytes bytes = read_file(path);
  try {
    if (looks_like_png(bytes)) {
      const Gray16Image img = decode_png16(bytes);
      std::vector<double> values(img.raw.size());
      for (std::size_t i = 0; i < values.size(); ++i) values[i] = img.raw[i] / 65535.0;
      return ConfidenceMap::clamped(img.width, img.height, std::move(values), c_min);
    }
    const PfmImage img = parse_pfm(bytes);
    std::vector<double> values(img.width * img.height);
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = img.samples[i * img.channels];
    return ConfidenceMap::clamped(img.width, img.height, std::move(values), c_min);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// CSV / JSON

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

void write_sparsification_csv(const metrics::SparsificationCurve& curve, std::ostream& os) {
  os << "density,error_rate\n";
  for (const auto& p : curve.points) {
    os << format_number(p.density) << ',' << format_number(p.error_rate) << '\n';
  }
}

void write_loss_scan_csv(std::span<const loss::ScanPoint> points, std::ostream& os) {
  os << "c,total\n";
  for (const auto& p : points) os << format_number(p.c) << ',' << format_number(p.total) << '\n';
}

nlohmann::json to_json(const metrics::EvalReport& report) {
  nlohmann::json j;
  j["epe"] = report.epe;
  nlohmann::json rates = nlohmann::json::object();
  for (const auto& [t, rate] : report.error_rates) rates[format_number(t)] = rate;
  j["error_rates"] = rates;
  if (report.auc) j["auc"] = *report.auc;
  if (report.auc_opt) j["auc_opt"] = *report.auc_opt;
  if (report.ratio) j["ratio"] = *report.ratio;
  j["n_valid"] = report.n_valid;
  return j;
}

}  // namespace stereoconf::io
