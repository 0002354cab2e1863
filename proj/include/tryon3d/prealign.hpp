#pragma once

// Self-adaptive pre-alignment: an isotropic scale plus translation that
// moves the in-shop garment onto the person's arm-torso region and scales
// it so the garment covers that region.

#include <algorithm>
#include <limits>

#include "tryon3d/image.hpp"
#include "tryon3d/parallel.hpp"

namespace tryon3d {

/// Maps a source point p to scale * p + translate.
struct AffineParams {
  double scale = 1.0;
  double translate_x = 0.0;
  double translate_y = 0.0;

  std::array<double, 2> apply(double x, double y) const {
    return {scale * x + translate_x, scale * y + translate_y};
  }
  std::array<double, 2> invert(double x, double y) const {
    return {(x - translate_x) / scale, (y - translate_y) / scale};
  }
};

/// Tight bounding box of a mask: midpoint center and inclusive extents.
struct BBoxStats {
  double center_x = 0.0;
  double center_y = 0.0;
  double width = 0.0;
  double height = 0.0;
};

inline BBoxStats mask_stats(const MaskImage& mask) {
  int x0 = std::numeric_limits<int>::max(), y0 = x0;
  int x1 = -1, y1 = -1;
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x)
      if (mask.at(x, y)) {
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
      }
  if (x1 < 0) throw InputError("mask_stats: empty mask");
  return {0.5 * (x0 + x1), 0.5 * (y0 + y1), double(x1 - x0 + 1), double(y1 - y0 + 1)};
}

/// Height ratio when the garment is relatively wider than the region,
/// width ratio otherwise; either way the scaled garment encloses the region.
inline double rescale_factor(const BBoxStats& cloth, const BBoxStats& arm_torso) {
  if (cloth.width < 1 || cloth.height < 1 || arm_torso.width < 1 || arm_torso.height < 1)
    throw InputError("rescale_factor: extents must be >= 1");
  // w_C/h_C >= w_at/h_at, cross-multiplied to keep the boundary case exact.
  if (cloth.width * arm_torso.height >= arm_torso.width * cloth.height) return arm_torso.height / cloth.height;
  return arm_torso.width / cloth.width;
}

inline AffineParams compute_prealign(const MaskImage& cloth_mask, const MaskImage& arm_torso_mask) {
  const BBoxStats cloth = mask_stats(cloth_mask);
  const BBoxStats region = mask_stats(arm_torso_mask);
  const double r = rescale_factor(cloth, region);
  return {r, region.center_x - r * cloth.center_x, region.center_y - r * cloth.center_y};
}

/// Inverse-maps every output pixel into the source. Output pixels whose
/// preimage falls outside the source footprint are white.
inline RgbImage apply_affine(const RgbImage& image, const AffineParams& params, int out_w, int out_h) {
  if (out_w < 1 || out_h < 1) throw InputError("apply_affine: output dimensions must be >= 1");
  if (!(params.scale > 0)) throw InputError("apply_affine: scale must be positive");
  RgbImage out(out_w, out_h, 1.0);
  parallel_rows(out_h, [&](int y) {
    for (int x = 0; x < out_w; ++x) {
      const auto [sx, sy] = params.invert(x, y);
      if (!image.in_bounds(nearest_index(sx), nearest_index(sy))) continue;
      out.set_pixel(x, y, bilinear_sample(image, sx, sy));
    }
  });
  return out;
}

inline MaskImage apply_affine(const MaskImage& mask, const AffineParams& params, int out_w, int out_h) {
  if (out_w < 1 || out_h < 1) throw InputError("apply_affine: output dimensions must be >= 1");
  if (!(params.scale > 0)) throw InputError("apply_affine: scale must be positive");
  MaskImage out(out_w, out_h);
  parallel_rows(out_h, [&](int y) {
    for (int x = 0; x < out_w; ++x) {
      const auto [sx, sy] = params.invert(x, y);
      const int nx = nearest_index(sx), ny = nearest_index(sy);
      if (mask.in_bounds(nx, ny)) out.at(x, y) = mask.at(nx, ny);
    }
  });
  return out;
}

/// Labels making up the arm-torso region.
inline MaskImage arm_torso_region(const LabelMap& s) {
  return label_mask(s, {Label::kUpperClothes, Label::kLeftArm, Label::kRightArm, Label::kTorsoSkin});
}

/// Garment silhouette of an in-shop photo: pixels visibly darker than the
/// white product background.
inline MaskImage cloth_mask_from_image(const RgbImage& cloth, double white_threshold = 0.95) {
  MaskImage m(cloth.width(), cloth.height());
  for (int y = 0; y < cloth.height(); ++y)
    for (int x = 0; x < cloth.width(); ++x)
      m.at(x, y) = std::min({cloth.at(x, y, 0), cloth.at(x, y, 1), cloth.at(x, y, 2)}) < white_threshold;
  return m;
}

}  // namespace tryon3d
