#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "tryon3d/depth.hpp"
#include "tryon3d/image.hpp"
#include "tryon3d/parallel.hpp"

namespace tryon3d {

struct SsimConfig {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

namespace detail {

inline std::vector<double> gaussian_taps(int size, double sigma) {
  std::vector<double> g(size);
  double sum = 0;
  for (int i = 0; i < size; ++i) {
    const double d = i - (size - 1) / 2.0;
    g[i] = std::exp(-d * d / (2 * sigma * sigma));
    sum += g[i];
  }
  for (auto& v : g) v /= sum;
  return g;
}

// Separable "valid" filtering: output is (w - k + 1) x (h - k + 1).
inline std::vector<double> filter_valid(const std::vector<double>& f, int w, int h, const std::vector<double>& taps) {
  const int k = static_cast<int>(taps.size());
  const int ow = w - k + 1, oh = h - k + 1;
  std::vector<double> rows(static_cast<std::size_t>(ow) * h);
  parallel_rows(h, [&](int y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0;
      for (int i = 0; i < k; ++i) s += taps[i] * f[static_cast<std::size_t>(y) * w + x + i];
      rows[static_cast<std::size_t>(y) * ow + x] = s;
    }
  });
  std::vector<double> out(static_cast<std::size_t>(ow) * oh);
  parallel_rows(oh, [&](int y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0;
      for (int i = 0; i < k; ++i) s += taps[i] * rows[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  });
  return out;
}

}  // namespace detail

/// Mean SSIM over channels and all window positions fully inside the image.
inline double ssim(const RgbImage& a, const RgbImage& b, const SsimConfig& cfg = {}) {
  require_same_dims(a, b, "ssim");
  if (a.width() < cfg.window || a.height() < cfg.window)
    throw InputError("ssim: images must be at least " + std::to_string(cfg.window) + "x" +
                     std::to_string(cfg.window) + ", got " + shape_string(a));
  const int w = a.width(), h = a.height();
  const auto taps = detail::gaussian_taps(cfg.window, cfg.sigma);
  const double c1 = (cfg.k1 * cfg.dynamic_range) * (cfg.k1 * cfg.dynamic_range);
  const double c2 = (cfg.k2 * cfg.dynamic_range) * (cfg.k2 * cfg.dynamic_range);
  double total = 0;
  std::size_t count = 0;
  for (int c = 0; c < 3; ++c) {
    std::vector<double> x(a.pixel_count()), y(a.pixel_count()), xx(a.pixel_count()), yy(a.pixel_count()),
        xy(a.pixel_count());
    for (std::size_t i = 0; i < a.pixel_count(); ++i) {
      x[i] = a.values()[i * 3 + c];
      y[i] = b.values()[i * 3 + c];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = detail::filter_valid(x, w, h, taps);
    const auto my = detail::filter_valid(y, w, h, taps);
    const auto mxx = detail::filter_valid(xx, w, h, taps);
    const auto myy = detail::filter_valid(yy, w, h, taps);
    const auto mxy = detail::filter_valid(xy, w, h, taps);
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double mu_xy = mx[i] * my[i];
      const double mu_xx = mx[i] * mx[i];
      const double mu_yy = my[i] * my[i];
      const double sxx = mxx[i] - mu_xx, syy = myy[i] - mu_yy, sxy = mxy[i] - mu_xy;
      total += ((2 * mu_xy + c1) * (2 * sxy + c2)) / ((mu_xx + mu_yy + c1) * (sxx + syy + c2));
    }
    count += mx.size();
  }
  return total / count;
}

/// |a and b| / |a or b|, 1 when both are empty.
inline double iou(const MaskImage& a, const MaskImage& b) {
  require_same_dims(a, b, "iou");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.values().size(); ++i) {
    const bool x = a.values()[i] != 0, y = b.values()[i] != 0;
    inter += x && y;
    uni += x || y;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / uni;
}

/// "key=value" with round-trippable precision.
inline std::string metric_line(const std::string& key, double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return key + "=" + buf;
}

/// Depth errors are also reported multiplied by 1e3, the convention used
/// when tabulating small normalized depth errors.
inline std::vector<std::string> depth_metric_lines(const DepthMetrics& m, const std::string& prefix = "") {
  return {metric_line(prefix + "abs", m.abs_err),        metric_line(prefix + "sq", m.sq_err),
          metric_line(prefix + "rmse", m.rmse),          metric_line(prefix + "abs_x1e3", m.abs_err * 1e3),
          metric_line(prefix + "sq_x1e3", m.sq_err * 1e3), metric_line(prefix + "rmse_x1e3", m.rmse * 1e3)};
}

}  // namespace tryon3d
