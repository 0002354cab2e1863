#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "tryon3d/image.hpp"

namespace tryon3d {

namespace detail {

// 1D squared distance transform of a sampled function (lower envelope of
// parabolas).
inline void edt_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v,
                   std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  constexpr double kInf = std::numeric_limits<double>::infinity();
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    double s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) / (2.0 * q - 2.0 * v[k]);
    while (s <= z[k]) {
      --k;
      if (k < 0) break;
      s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) / (2.0 * q - 2.0 * v[k]);
    }
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  if (k < 0) {
    for (int q = 0; q < n; ++q) d[q] = kInf;
    return;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = q - v[k];
    d[q] = dq * dq + f[v[k]];
  }
}

}  // namespace detail

/// Exact Euclidean distance from every pixel to the nearest pixel where
/// `seed` is set (0 on seeds, +inf when there are no seeds).
inline GrayImage distance_to(const MaskImage& seed) {
  const int w = seed.width(), h = seed.height();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  GrayImage sq(w, h, kInf);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (seed.at(x, y)) sq.at(x, y) = 0.0;
  const int n = std::max(w, h);
  std::vector<double> f(n), d(n), z(n + 1);
  std::vector<int> v(n);
  for (int x = 0; x < w; ++x) {
    f.assign(h, 0.0);
    d.assign(h, 0.0);
    for (int y = 0; y < h; ++y) f[y] = sq.at(x, y);
    detail::edt_1d(f, d, v, z);
    for (int y = 0; y < h; ++y) sq.at(x, y) = d[y];
  }
  for (int y = 0; y < h; ++y) {
    f.assign(w, 0.0);
    d.assign(w, 0.0);
    for (int x = 0; x < w; ++x) f[x] = sq.at(x, y);
    detail::edt_1d(f, d, v, z);
    for (int x = 0; x < w; ++x) sq.at(x, y) = std::sqrt(d[x]);
  }
  return sq;
}

/// Distance from each mask pixel to the nearest pixel outside the mask;
/// pixels beyond the image border count as outside. 0 outside the mask.
inline GrayImage distance_inside(const MaskImage& mask) {
  const int w = mask.width(), h = mask.height();
  MaskImage outside(w + 2, h + 2, 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) outside.at(x + 1, y + 1) = mask.at(x, y) ? 0 : 1;
  const GrayImage padded = distance_to(outside);
  GrayImage out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out.at(x, y) = padded.at(x + 1, y + 1);
  return out;
}

/// Disk dilation: pixels within `radius` of the mask.
inline MaskImage dilate(const MaskImage& mask, double radius) {
  const GrayImage d = distance_to(mask);
  MaskImage out(mask.width(), mask.height());
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x) out.at(x, y) = d.at(x, y) <= radius;
  return out;
}

/// Sets every background pixel that is not 4-connected to the image border.
inline MaskImage fill_holes(const MaskImage& mask) {
  const int w = mask.width(), h = mask.height();
  MaskImage reached(w, h);
  std::vector<std::pair<int, int>> stack;
  auto seed = [&](int x, int y) {
    if (!mask.at(x, y) && !reached.at(x, y)) {
      reached.at(x, y) = 1;
      stack.emplace_back(x, y);
    }
  };
  for (int x = 0; x < w; ++x) {
    seed(x, 0);
    seed(x, h - 1);
  }
  for (int y = 0; y < h; ++y) {
    seed(0, y);
    seed(w - 1, y);
  }
  while (!stack.empty()) {
    auto [x, y] = stack.back();
    stack.pop_back();
    if (x > 0) seed(x - 1, y);
    if (x + 1 < w) seed(x + 1, y);
    if (y > 0) seed(x, y - 1);
    if (y + 1 < h) seed(x, y + 1);
  }
  MaskImage out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out.at(x, y) = mask.at(x, y) || !reached.at(x, y);
  return out;
}

/// Largest 4-connected component; ties go to the component found first in
/// row-major order.
inline MaskImage largest_component(const MaskImage& mask) {
  const int w = mask.width(), h = mask.height();
  std::vector<int> comp(static_cast<std::size_t>(w) * h, -1);
  std::vector<std::size_t> sizes;
  std::vector<int> stack;
  for (int start = 0; start < w * h; ++start) {
    if (!mask.values()[start] || comp[start] >= 0) continue;
    const int id = static_cast<int>(sizes.size());
    std::size_t size = 0;
    comp[start] = id;
    stack.push_back(start);
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      ++size;
      const int x = p % w, y = p / w;
      const int nbr[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
      for (auto& q : nbr) {
        if (q[0] < 0 || q[1] < 0 || q[0] >= w || q[1] >= h) continue;
        const int qi = q[1] * w + q[0];
        if (mask.values()[qi] && comp[qi] < 0) {
          comp[qi] = id;
          stack.push_back(qi);
        }
      }
    }
    sizes.push_back(size);
  }
  MaskImage out(w, h);
  if (sizes.empty()) return out;
  int best = 0;
  for (int i = 1; i < static_cast<int>(sizes.size()); ++i)
    if (sizes[i] > sizes[best]) best = i;
  for (int i = 0; i < w * h; ++i) out.values()[i] = comp[i] == best;
  return out;
}

}  // namespace tryon3d
