#pragma once

// Fast-marching inpainting. Unknown pixels are visited in ascending
// distance from the region boundary; each one becomes a weighted average of
// first-order estimates from the already known pixels within a radius,
// clamped to the range of those pixels. The weights keep the distance and
// level-set terms of Telea's method; the directional term is dropped.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <queue>
#include <tuple>
#include <vector>

#include "tryon3d/image.hpp"

namespace tryon3d {

namespace detail {

enum class FmmState : std::uint8_t { kKnown, kBand, kInside };

// Unit-speed eikonal update from one horizontal and one vertical neighbour.
inline double eikonal_pair(double a, double b) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  if (a == kInf && b == kInf) return kInf;
  if (a == kInf) return b + 1.0;
  if (b == kInf) return a + 1.0;
  const double diff = a - b;
  if (std::abs(diff) >= 1.0) return std::min(a, b) + 1.0;
  return 0.5 * (a + b + std::sqrt(2.0 - diff * diff));
}

}  // namespace detail

inline RgbImage telea_inpaint(const RgbImage& img, const MaskImage& region, int radius) {
  require_same_dims(img, region, "telea_inpaint");
  if (radius < 1) throw InputError("telea_inpaint: radius must be >= 1");
  const int w = img.width(), h = img.height();
  const std::size_t todo = count(region);
  if (todo == 0) return img;
  if (todo == img.pixel_count()) throw InputError("telea_inpaint: region covers the whole image");

  using detail::FmmState;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<FmmState> state(img.pixel_count(), FmmState::kKnown);
  std::vector<double> dist(img.pixel_count(), 0.0);
  auto idx = [w](int x, int y) { return static_cast<std::size_t>(y) * w + x; };

  using Entry = std::tuple<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (region.at(x, y)) {
        state[idx(x, y)] = FmmState::kInside;
        dist[idx(x, y)] = kInf;
      }
  static constexpr int kN4[4][2] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (region.at(x, y)) continue;
      for (auto& d : kN4) {
        const int nx = x + d[0], ny = y + d[1];
        if (region.in_bounds(nx, ny) && region.at(nx, ny)) {
          state[idx(x, y)] = FmmState::kBand;
          heap.emplace(0.0, idx(x, y));
          break;
        }
      }
    }

  auto t_at = [&](int x, int y) {
    if (x < 0 || y < 0 || x >= w || y >= h) return kInf;
    return state[idx(x, y)] == FmmState::kInside ? kInf : dist[idx(x, y)];
  };

  std::vector<std::pair<int, int>> offsets;
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx)
      if ((dx != 0 || dy != 0) && dx * dx + dy * dy <= radius * radius) offsets.emplace_back(dx, dy);

  RgbImage out = img;
  auto known = [&](int x, int y) { return x >= 0 && y >= 0 && x < w && y < h && state[idx(x, y)] != FmmState::kInside; };
  // Central difference along (sx, sy) over known pixels, one-sided when only
  // one side is known, 0 when neither is.
  auto known_diff = [&](int x, int y, int sx, int sy, int c) {
    const bool fwd = known(x + sx, y + sy), bwd = known(x - sx, y - sy);
    if (fwd && bwd) return 0.5 * (out.at(x + sx, y + sy, c) - out.at(x - sx, y - sy, c));
    if (fwd) return out.at(x + sx, y + sy, c) - out.at(x, y, c);
    if (bwd) return out.at(x, y, c) - out.at(x - sx, y - sy, c);
    return 0.0;
  };
  while (!heap.empty()) {
    const auto [t, p] = heap.top();
    heap.pop();
    if (state[p] == FmmState::kKnown) continue;
    state[p] = FmmState::kKnown;
    const int px = static_cast<int>(p % w), py = static_cast<int>(p / w);
    for (auto& d : kN4) {
      const int qx = px + d[0], qy = py + d[1];
      if (qx < 0 || qy < 0 || qx >= w || qy >= h || state[idx(qx, qy)] != FmmState::kInside) continue;
      const double lx = t_at(qx - 1, qy), rx = t_at(qx + 1, qy);
      const double uy = t_at(qx, qy - 1), dy = t_at(qx, qy + 1);
      const double tq = std::min({detail::eikonal_pair(lx, uy), detail::eikonal_pair(rx, uy),
                                  detail::eikonal_pair(lx, dy), detail::eikonal_pair(rx, dy)});

      // Weighted average written as ref + sum w (v - ref) / sum w so that a
      // constant neighbourhood reproduces its value exactly.
      Rgb ref{}, acc{}, lo{}, hi{};
      double wsum = 0;
      bool first = true;
      for (const auto& [ox, oy] : offsets) {
        const int nx = qx + ox, ny = qy + oy;
        if (nx < 0 || ny < 0 || nx >= w || ny >= h || state[idx(nx, ny)] == FmmState::kInside) continue;
        const double lev = 1.0 / (1.0 + std::abs(tq - dist[idx(nx, ny)]));
        const double dst = 1.0 / (ox * ox + oy * oy);
        const double wgt = dst * lev;
        for (int c = 0; c < 3; ++c) {
          const double v = out.at(nx, ny, c);
          if (first) {
            ref[c] = lo[c] = hi[c] = v;
          }
          // First-order extrapolation from the neighbour toward q.
          const double est = v + known_diff(nx, ny, 1, 0, c) * (-ox) + known_diff(nx, ny, 0, 1, c) * (-oy);
          acc[c] += wgt * (est - ref[c]);
          lo[c] = std::min(lo[c], v);
          hi[c] = std::max(hi[c], v);
        }
        wsum += wgt;
        first = false;
      }
      for (int c = 0; c < 3; ++c) {
        const double v = ref[c] + acc[c] / wsum;
        out.at(qx, qy, c) = std::clamp(std::clamp(v, lo[c], hi[c]), 0.0, 1.0);
      }
      dist[idx(qx, qy)] = tq;
      state[idx(qx, qy)] = FmmState::kBand;
      heap.emplace(tq, idx(qx, qy));
    }
  }
  return out;
}

}  // namespace tryon3d
