#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "tryon3d/error.hpp"

namespace tryon3d {

/// Row-major planar field with `Channels` interleaved values per pixel.
/// The tag keeps semantically different fields (depth vs intensity, mask vs
/// labels) from being mixed up at call sites.
template <typename T, int Channels, typename Tag>
class Grid {
 public:
  using value_type = T;
  static constexpr int kChannels = Channels;

  Grid() = default;
  Grid(int width, int height, T fill = T{}) : width_(width), height_(height) {
    if (width < 0 || height < 0) throw InputError("negative grid dimensions");
    data_.assign(static_cast<std::size_t>(width) * height * Channels, fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }
  bool empty() const { return data_.empty(); }

  T& at(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
  const T& at(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }

  // Replicate padding: coordinates are clamped to the nearest edge pixel.
  const T& clamped(int x, int y, int c = 0) const {
    return at(std::clamp(x, 0, width_ - 1), std::clamp(y, 0, height_ - 1), c);
  }

  std::array<T, Channels> pixel(int x, int y) const {
    std::array<T, Channels> p{};
    for (int c = 0; c < Channels; ++c) p[c] = at(x, y, c);
    return p;
  }
  void set_pixel(int x, int y, const std::array<T, Channels>& p) {
    for (int c = 0; c < Channels; ++c) at(x, y, c) = p[c];
  }

  bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  template <typename U, typename OtherTag>
  bool same_shape(const Grid<U, Channels, OtherTag>& other) const {
    return width_ == other.width() && height_ == other.height();
  }
  template <typename G>
  bool same_dims(const G& other) const {
    return width_ == other.width() && height_ == other.height();
  }

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.data_ == b.data_;
  }

 private:
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * Channels + c;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

struct RgbTag {};
struct GrayTag {};
struct DepthTag {};
struct MaskTag {};
struct LabelTag {};

/// Color image, channels in [0,1].
using RgbImage = Grid<double, 3, RgbTag>;
/// Scalar field; [0,1] for intensities, unbounded for gradient responses.
using GrayImage = Grid<double, 1, GrayTag>;
/// Depth in normalized world units, 0 outside the person.
using DepthMap = Grid<double, 1, DepthTag>;
/// Binary mask stored as 0/1 bytes.
using MaskImage = Grid<std::uint8_t, 1, MaskTag>;
/// Person parsing labels, see Label.
using LabelMap = Grid<std::uint8_t, 1, LabelTag>;

using Rgb = std::array<double, 3>;

enum class Label : std::uint8_t {
  kBackground = 0,
  kHair = 1,
  kFace = 2,
  kUpperClothes = 3,
  kLeftArm = 4,
  kRightArm = 5,
  kLowerBody = 6,
  kTorsoSkin = 7,
  kShoes = 8,
};
inline constexpr int kLabelCount = 9;

template <typename G>
std::string shape_string(const G& g) {
  return std::to_string(g.width()) + "x" + std::to_string(g.height());
}

template <typename A, typename B>
void require_same_dims(const A& a, const B& b, const char* what) {
  if (a.width() != b.width() || a.height() != b.height())
    throw InputError(std::string(what) + ": dimension mismatch (" + shape_string(a) + " vs " +
                     shape_string(b) + ")");
}

/// Bilinear interpolation with replicate padding. Exact at integer
/// coordinates.
template <typename T, int C, typename Tag>
std::array<double, C> bilinear_sample(const Grid<T, C, Tag>& img, double x, double y) {
  const double cx = std::clamp(x, 0.0, static_cast<double>(img.width() - 1));
  const double cy = std::clamp(y, 0.0, static_cast<double>(img.height() - 1));
  const int x0 = static_cast<int>(std::floor(cx));
  const int y0 = static_cast<int>(std::floor(cy));
  const int x1 = std::min(x0 + 1, img.width() - 1);
  const int y1 = std::min(y0 + 1, img.height() - 1);
  const double fx = cx - x0;
  const double fy = cy - y0;
  std::array<double, C> out{};
  for (int c = 0; c < C; ++c) {
    const double v00 = img.at(x0, y0, c);
    if (fx == 0.0 && fy == 0.0) {
      out[c] = v00;
      continue;
    }
    const double top = v00 + fx * (static_cast<double>(img.at(x1, y0, c)) - v00);
    const double v01 = img.at(x0, y1, c);
    const double bottom = v01 + fx * (static_cast<double>(img.at(x1, y1, c)) - v01);
    out[c] = top + fy * (bottom - top);
  }
  return out;
}

/// Index of the pixel whose footprint contains (x, y), i.e. round-half-up.
inline int nearest_index(double v) { return static_cast<int>(std::floor(v + 0.5)); }

/// Luma with Rec. 601 weights.
inline GrayImage to_gray(const RgbImage& img) {
  GrayImage out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      out.at(x, y) = 0.299 * img.at(x, y, 0) + 0.587 * img.at(x, y, 1) + 0.114 * img.at(x, y, 2);
  return out;
}

inline std::size_t count(const MaskImage& m) {
  std::size_t n = 0;
  for (auto v : m.values()) n += v != 0;
  return n;
}

/// Pixels whose label is one of `labels`.
inline MaskImage label_mask(const LabelMap& s, std::initializer_list<Label> labels) {
  MaskImage m(s.width(), s.height());
  for (int y = 0; y < s.height(); ++y)
    for (int x = 0; x < s.width(); ++x)
      for (auto l : labels)
        if (s.at(x, y) == static_cast<std::uint8_t>(l)) m.at(x, y) = 1;
  return m;
}

/// Every non-background pixel.
inline MaskImage person_mask(const LabelMap& s) {
  MaskImage m(s.width(), s.height());
  for (int y = 0; y < s.height(); ++y)
    for (int x = 0; x < s.width(); ++x) m.at(x, y) = s.at(x, y) != 0;
  return m;
}

inline void validate_labels(const LabelMap& s) {
  for (auto v : s.values())
    if (v >= kLabelCount) throw InputError("label value " + std::to_string(v) + " outside label set");
}

template <typename T, int C, typename Tag>
Grid<T, C, Tag> flip_horizontal(const Grid<T, C, Tag>& img) {
  Grid<T, C, Tag> out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < C; ++c) out.at(img.width() - 1 - x, y, c) = img.at(x, y, c);
  return out;
}

inline MaskImage mask_and(const MaskImage& a, const MaskImage& b) {
  require_same_dims(a, b, "mask_and");
  MaskImage m(a.width(), a.height());
  for (std::size_t i = 0; i < m.values().size(); ++i) m.values()[i] = a.values()[i] && b.values()[i];
  return m;
}

inline GrayImage mask_to_gray(const MaskImage& m) {
  GrayImage g(m.width(), m.height());
  for (std::size_t i = 0; i < g.values().size(); ++i) g.values()[i] = m.values()[i] ? 1.0 : 0.0;
  return g;
}

}  // namespace tryon3d
