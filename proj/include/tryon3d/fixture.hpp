#pragma once

// Deterministic synthetic person/garment sample used for smoke runs and
// tests. Draws a stylized front-facing person with parsing labels, pose
// keypoints, a differently shaped in-shop garment on a white background and
// inflated double depth.

#include <algorithm>
#include <cmath>
#include <string>

#include "tryon3d/fusion.hpp"
#include "tryon3d/image.hpp"
#include "tryon3d/recon.hpp"

namespace tryon3d {

struct SyntheticSample {
  RgbImage cloth;
  RgbImage image;
  LabelMap parse;
  Keypoints pose{};
  DepthMap depth_front;
  DepthMap depth_back;
  RgbImage gt_cloth;  // the worn garment on white
  MaskImage gt_mask;  // worn garment region
};

namespace detail {

inline bool in_ellipse(double x, double y, double cx, double cy, double rx, double ry) {
  const double dx = (x - cx) / rx, dy = (y - cy) / ry;
  return dx * dx + dy * dy <= 1.0;
}

// Point inside the quad with horizontal top/bottom edges spanning
// [xl0, xr0] at y0 and [xl1, xr1] at y1.
inline bool in_trapezoid(double x, double y, double y0, double xl0, double xr0, double y1, double xl1, double xr1) {
  if (y < y0 || y > y1) return false;
  const double t = (y - y0) / (y1 - y0);
  return x >= xl0 + t * (xl1 - xl0) && x <= xr0 + t * (xr1 - xr0);
}

// Distance from p to segment ab.
inline double segment_distance(double px, double py, double ax, double ay, double bx, double by) {
  const double vx = bx - ax, vy = by - ay;
  const double t = std::clamp(((px - ax) * vx + (py - ay) * vy) / (vx * vx + vy * vy), 0.0, 1.0);
  return std::hypot(px - (ax + t * vx), py - (ay + t * vy));
}

}  // namespace detail

/// Person and garment drawn in a width x height frame (defaults to the
/// 320 x 512 try-on resolution); geometry scales with the frame.
inline SyntheticSample make_synthetic_sample(int width = 320, int height = 512, double depth_base = 0.5,
                                             double depth_amplitude = 0.08) {
  using detail::in_ellipse;
  using detail::in_trapezoid;
  using detail::segment_distance;
  const double sx = width / 320.0, sy = height / 512.0;
  SyntheticSample s;
  s.image = RgbImage(width, height, 0.92);
  s.parse = LabelMap(width, height);

  const Rgb skin{0.87, 0.72, 0.60}, hair{0.22, 0.13, 0.08}, pants{0.16, 0.17, 0.24}, shoes{0.08, 0.08, 0.08};
  auto label = [&](int x, int y, Label l, const Rgb& c) {
    s.parse.at(x, y) = static_cast<std::uint8_t>(l);
    s.image.set_pixel(x, y, c);
  };

  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double px = x / sx, py = y / sy;  // canonical 320x512 coordinates
      // Paint back to front so later parts occlude earlier ones.
      if (in_trapezoid(px, py, 300, 112, 208, 452, 114, 206) && std::abs(px - 160) > 3)
        label(x, y, Label::kLowerBody, pants);
      if (py > 446 && py < 476 && ((px > 108 && px < 156) || (px > 164 && px < 212))) label(x, y, Label::kShoes, shoes);
      if (segment_distance(px, py, 102, 132, 76, 300) < 13) label(x, y, Label::kRightArm, skin);
      if (segment_distance(px, py, 218, 132, 244, 300) < 13) label(x, y, Label::kLeftArm, skin);
      if (in_trapezoid(px, py, 104, 148, 172, 128, 146, 174)) label(x, y, Label::kTorsoSkin, skin);
      if (in_trapezoid(px, py, 122, 100, 220, 306, 110, 210)) {
        const double stripe = 0.5 + 0.5 * std::sin(py * 0.35);
        label(x, y, Label::kUpperClothes, {0.18 + 0.1 * stripe, 0.30 + 0.1 * stripe, 0.68});
      }
      if (in_ellipse(px, py, 160, 66, 34, 42)) label(x, y, Label::kHair, hair);
      if (in_ellipse(px, py, 160, 78, 25, 30)) {
        const double shade = 0.04 * std::cos((px - 160) * 0.12);
        label(x, y, Label::kFace, {skin[0] - shade, skin[1] - shade, skin[2] - shade});
      }
    }

  // In-shop garment: a smaller T-shirt with sleeves, red with light bands.
  s.cloth = RgbImage(width, height, 1.0);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double px = x / sx, py = y / sy;
      const bool body = in_trapezoid(px, py, 190, 120, 200, 350, 124, 196);
      const bool sleeve_l = in_trapezoid(px, py, 192, 96, 122, 236, 84, 122);
      const bool sleeve_r = in_trapezoid(px, py, 192, 198, 224, 236, 198, 236);
      const bool collar = in_ellipse(px, py, 160, 190, 14, 8);
      if ((body || sleeve_l || sleeve_r) && !collar) {
        const double band = std::fmod(py, 24.0) < 6.0 ? 1.0 : 0.0;
        const double dots = (static_cast<int>(px) / 10 + static_cast<int>(py) / 10) % 2 ? 0.05 : 0.0;
        s.cloth.set_pixel(x, y, {0.80 - dots, 0.12 + 0.6 * band, 0.14 + 0.6 * band});
      }
    }

  s.gt_mask = label_mask(s.parse, {Label::kUpperClothes});
  s.gt_cloth = RgbImage(width, height, 1.0);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      if (s.gt_mask.at(x, y)) s.gt_cloth.set_pixel(x, y, s.image.pixel(x, y));

  // BODY_25 joints in canonical coordinates; ears are occluded.
  const double joints[kJointCount][2] = {
      {160, 80},  {160, 118}, {104, 128}, {90, 214},  {76, 300},  {216, 128}, {230, 214},
      {244, 300}, {160, 300}, {138, 300}, {136, 376}, {134, 452}, {182, 300}, {184, 376},
      {186, 452}, {150, 72},  {170, 72},  {0, 0},     {0, 0},     {200, 472}, {208, 470},
      {182, 468}, {120, 472}, {112, 470}, {138, 468}};
  for (int j = 0; j < kJointCount; ++j) {
    if (j == 17 || j == 18) continue;
    s.pose[j] = {joints[j][0] * sx, joints[j][1] * sy, 0.9, true};
  }

  const auto depth = synth_depth(person_mask(s.parse), depth_base, depth_amplitude);
  s.depth_front = depth.front;
  s.depth_back = depth.back;
  return s;
}

}  // namespace tryon3d
