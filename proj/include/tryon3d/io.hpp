#pragma once

// Raster file I/O: 8/16-bit PNG for images, masks and label maps; PFM
// (float32, little-endian) for depth.

#include <png.h>

#include <bit>
#include <cctype>
#include <cstdio>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "tryon3d/image.hpp"

namespace tryon3d {

namespace detail {

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InputError("write failed: " + path.string());
}

// Decoded PNG samples, always expanded to 8 or 16 bits per sample with
// palette/low-bit-depth inputs promoted by libpng.
struct RawPng {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  int channels = 0;  // 1 gray, 2 gray+alpha, 3 rgb, 4 rgba
  int bit_depth = 0;
  std::uint8_t* pixels = nullptr;  // malloc'ed, row-major, big-endian 16-bit samples
  std::uint8_t** rows = nullptr;   // scratch row pointers, freed by decode_png
  char message[256] = {0};
};

struct PngMemReader {
  const std::uint8_t* data;
  std::size_t size;
  std::size_t offset;
};

inline void png_read_from_memory(png_structp png, png_bytep out, png_size_t len) {
  auto* src = static_cast<PngMemReader*>(png_get_io_ptr(png));
  if (src->offset + len > src->size) png_error(png, "unexpected end of file");
  std::memcpy(out, src->data + src->offset, len);
  src->offset += len;
}

inline void png_error_to_jump(png_structp png, png_const_charp msg) {
  auto* raw = static_cast<RawPng*>(png_get_error_ptr(png));
  std::snprintf(raw->message, sizeof(raw->message), "%s", msg);
  png_longjmp(png, 1);
}

inline void png_warning_ignore(png_structp, png_const_charp) {}

// libpng reports errors through longjmp, so this function keeps only
// trivially destructible locals. Returns false with raw->message set on
// failure.
inline bool decode_png(const std::uint8_t* data, std::size_t size, RawPng* raw) {
  if (size < 8 || png_sig_cmp(data, 0, 8) != 0) {
    std::snprintf(raw->message, sizeof(raw->message), "not a PNG file");
    return false;
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, raw, png_error_to_jump, png_warning_ignore);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  PngMemReader reader{data, size, 0};
  if (!info || setjmp(png_jmpbuf(png))) {
    std::free(raw->rows);
    raw->rows = nullptr;
    std::free(raw->pixels);
    raw->pixels = nullptr;
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_set_read_fn(png, &reader, png_read_from_memory);
  png_read_info(png, info);
  const int color_type = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_read_update_info(png, info);
  raw->width = png_get_image_width(png, info);
  raw->height = png_get_image_height(png, info);
  raw->channels = png_get_channels(png, info);
  raw->bit_depth = png_get_bit_depth(png, info);
  const png_size_t stride = png_get_rowbytes(png, info);
  raw->pixels = static_cast<std::uint8_t*>(std::malloc(stride * raw->height));
  raw->rows = static_cast<png_bytep*>(std::malloc(sizeof(png_bytep) * raw->height));
  if (!raw->pixels || !raw->rows) png_error(png, "out of memory");
  for (std::uint32_t y = 0; y < raw->height; ++y) raw->rows[y] = raw->pixels + y * stride;
  png_read_image(png, raw->rows);
  png_read_end(png, nullptr);
  std::free(raw->rows);
  raw->rows = nullptr;
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

struct DecodedPng {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bit_depth = 0;
  std::vector<std::uint16_t> samples;  // width*height*channels
};

inline DecodedPng read_png(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  RawPng raw;
  if (!decode_png(bytes.data(), bytes.size(), &raw))
    throw InputError("malformed PNG " + path.string() + ": " + raw.message);
  DecodedPng out;
  out.width = static_cast<int>(raw.width);
  out.height = static_cast<int>(raw.height);
  out.channels = raw.channels;
  out.bit_depth = raw.bit_depth;
  const std::size_t n = static_cast<std::size_t>(raw.width) * raw.height * raw.channels;
  out.samples.resize(n);
  if (raw.bit_depth == 8) {
    for (std::size_t i = 0; i < n; ++i) out.samples[i] = raw.pixels[i];
  } else if (raw.bit_depth == 16) {
    for (std::size_t i = 0; i < n; ++i)
      out.samples[i] = static_cast<std::uint16_t>((raw.pixels[2 * i] << 8) | raw.pixels[2 * i + 1]);
  } else {
    std::free(raw.pixels);
    throw InputError("unsupported PNG bit depth " + std::to_string(raw.bit_depth) + " in " + path.string());
  }
  std::free(raw.pixels);
  return out;
}

inline void write_png8(const std::filesystem::path& path, int width, int height, int channels,
                       const std::vector<std::uint8_t>& samples) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, samples.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw InputError("cannot write PNG " + path.string() + ": " + msg);
  }
}

inline std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace detail

/// Loads an 8- or 16-bit PNG as RGB in [0,1]. Gray inputs are replicated,
/// alpha is dropped.
inline RgbImage load_image(const std::filesystem::path& path) {
  const auto png = detail::read_png(path);
  const double scale = png.bit_depth == 16 ? 65535.0 : 255.0;
  RgbImage img(png.width, png.height);
  for (int y = 0; y < png.height; ++y)
    for (int x = 0; x < png.width; ++x) {
      const std::size_t base = (static_cast<std::size_t>(y) * png.width + x) * png.channels;
      for (int c = 0; c < 3; ++c) {
        const int src = png.channels >= 3 ? c : 0;
        img.at(x, y, c) = png.samples[base + src] / scale;
      }
    }
  return img;
}

inline void save_image(const RgbImage& img, const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes(img.values().size());
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = detail::quantize(img.values()[i]);
  detail::write_png8(path, img.width(), img.height(), 3, bytes);
}

/// Single-channel PNG read as [0,1] intensities (first channel only).
inline GrayImage load_gray(const std::filesystem::path& path) {
  const auto png = detail::read_png(path);
  const double scale = png.bit_depth == 16 ? 65535.0 : 255.0;
  GrayImage img(png.width, png.height);
  for (std::size_t i = 0; i < img.pixel_count(); ++i)
    img.values()[i] = png.samples[i * png.channels] / scale;
  return img;
}

inline void save_gray(const GrayImage& img, const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes(img.values().size());
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = detail::quantize(img.values()[i]);
  detail::write_png8(path, img.width(), img.height(), 1, bytes);
}

/// Any nonzero sample in the first channel is foreground.
inline MaskImage load_mask(const std::filesystem::path& path) {
  const auto png = detail::read_png(path);
  MaskImage m(png.width, png.height);
  for (std::size_t i = 0; i < m.pixel_count(); ++i) m.values()[i] = png.samples[i * png.channels] != 0;
  return m;
}

inline void save_mask(const MaskImage& m, const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes(m.values().size());
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = m.values()[i] ? 255 : 0;
  detail::write_png8(path, m.width(), m.height(), 1, bytes);
}

/// 8-bit single-channel PNG holding raw label values.
inline LabelMap load_labels(const std::filesystem::path& path) {
  const auto png = detail::read_png(path);
  if (png.bit_depth != 8) throw InputError("label map must be 8-bit: " + path.string());
  LabelMap s(png.width, png.height);
  for (std::size_t i = 0; i < s.pixel_count(); ++i)
    s.values()[i] = static_cast<std::uint8_t>(png.samples[i * png.channels]);
  validate_labels(s);
  return s;
}

inline void save_labels(const LabelMap& s, const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes(s.values().begin(), s.values().end());
  detail::write_png8(path, s.width(), s.height(), 1, bytes);
}

/// Reads a single-channel PFM ("Pf"). Negative scale means little-endian,
/// positive big-endian. Rows are stored bottom-to-top.
inline DepthMap load_depth(const std::filesystem::path& path) {
  const auto bytes = detail::read_file_bytes(path);
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
    std::string t;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) t.push_back(static_cast<char>(bytes[pos++]));
    return t;
  };
  const std::string magic = token();
  if (magic != "Pf") throw InputError("bad PFM magic '" + magic + "' in " + path.string());
  int width = 0, height = 0;
  double scale = 0.0;
  try {
    width = std::stoi(token());
    height = std::stoi(token());
    scale = std::stod(token());
  } catch (const std::exception&) {
    throw InputError("malformed PFM header in " + path.string());
  }
  if (width <= 0 || height <= 0 || scale == 0.0) throw InputError("malformed PFM header in " + path.string());
  ++pos;  // single whitespace byte after the scale
  const std::size_t need = static_cast<std::size_t>(width) * height * 4;
  if (pos > bytes.size() || bytes.size() - pos != need)
    throw InputError("PFM dimension mismatch in " + path.string() + ": header " + std::to_string(width) + "x" +
                     std::to_string(height) + " needs " + std::to_string(need) + " data bytes");
  const bool little = scale < 0.0;
  DepthMap d(width, height);
  for (int row = 0; row < height; ++row) {
    const int y = height - 1 - row;
    for (int x = 0; x < width; ++x) {
      const std::size_t off = pos + (static_cast<std::size_t>(row) * width + x) * 4;
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) {
        const std::uint32_t byte = bytes[off + (little ? b : 3 - b)];
        bits |= byte << (8 * b);
      }
      const float v = std::bit_cast<float>(bits);
      if (!std::isfinite(v))
        throw InputError("non-finite depth value at (" + std::to_string(x) + "," + std::to_string(y) + ") in " +
                         path.string());
      d.at(x, y) = v;
    }
  }
  return d;
}

inline void save_depth(const DepthMap& d, const std::filesystem::path& path) {
  std::string out = "Pf\n" + std::to_string(d.width()) + " " + std::to_string(d.height()) + "\n-1.0\n";
  out.reserve(out.size() + d.pixel_count() * 4);
  for (int y = d.height() - 1; y >= 0; --y)
    for (int x = 0; x < d.width(); ++x) {
      const float v = static_cast<float>(d.at(x, y));
      if (!std::isfinite(v)) throw InputError("non-finite depth value cannot be saved");
      const auto bits = std::bit_cast<std::uint32_t>(v);
      for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
    }
  detail::write_file_bytes(path, out);
}

}  // namespace tryon3d
