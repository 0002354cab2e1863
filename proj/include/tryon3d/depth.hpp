#pragma once

// Depth-side losses and helpers. Every loss returns its value together with
// the analytic gradient with respect to the predicted depth. Reductions run
// in row-major order so results do not depend on the worker count.

#include <array>
#include <cmath>
#include <vector>

#include "tryon3d/image.hpp"
#include "tryon3d/parallel.hpp"

namespace tryon3d {

struct GradPair {
  GrayImage gx;
  GrayImage gy;
};

struct LossResult {
  double value = 0.0;
  DepthMap gradient;
};

struct DepthMetrics {
  double abs_err = 0.0;
  double sq_err = 0.0;
  double rmse = 0.0;
};

namespace detail {

// Sobel x kernel, row-major over dy = -1..1, dx = -1..1. The y kernel is its
// transpose.
inline constexpr std::array<double, 9> kSobelX = {-1, 0, 1, -2, 0, 2, -1, 0, 1};
inline constexpr std::array<double, 9> kSobelY = {-1, -2, -1, 0, 0, 0, 1, 2, 1};

template <typename G>
GradPair sobel_field(const G& f) {
  GradPair g{GrayImage(f.width(), f.height()), GrayImage(f.width(), f.height())};
  parallel_rows(f.height(), [&](int y) {
    for (int x = 0; x < f.width(); ++x) {
      // Differences first so flat neighborhoods give exactly zero.
      auto v = [&](int dx, int dy) { return f.clamped(x + dx, y + dy); };
      g.gx.at(x, y) = (v(1, -1) - v(-1, -1)) + 2 * (v(1, 0) - v(-1, 0)) + (v(1, 1) - v(-1, 1));
      g.gy.at(x, y) = (v(-1, 1) - v(-1, -1)) + 2 * (v(0, 1) - v(0, -1)) + (v(1, 1) - v(1, -1));
    }
  });
  return g;
}

inline double sign(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

template <typename A, typename B>
void require_loss_inputs(const A& pred, const B& gt, const MaskImage& mask, const char* what) {
  require_same_dims(pred, gt, what);
  require_same_dims(pred, mask, what);
  if (count(mask) == 0) throw InputError(std::string(what) + ": empty mask");
}

}  // namespace detail

/// 3x3 Sobel responses with replicate padding, unnormalized.
inline GradPair sobel(const GrayImage& gray) { return detail::sobel_field(gray); }

/// Four stacked gradient channels: [gx(cw), gy(cw), gx(ip), gy(ip)] on luma.
inline std::array<GrayImage, 4> gradient_image(const RgbImage& cw, const RgbImage& ip) {
  require_same_dims(cw, ip, "gradient_image");
  auto a = sobel(to_gray(cw));
  auto b = sobel(to_gray(ip));
  return {std::move(a.gx), std::move(a.gy), std::move(b.gx), std::move(b.gy)};
}

/// (1/n) sum ln(|pred - gt| + 1) over the n masked pixels.
inline LossResult log_l1_loss(const DepthMap& pred, const DepthMap& gt, const MaskImage& mask) {
  detail::require_loss_inputs(pred, gt, mask, "log_l1_loss");
  const double n = static_cast<double>(count(mask));
  LossResult r{0.0, DepthMap(pred.width(), pred.height())};
  double sum = 0;
  for (int y = 0; y < pred.height(); ++y)
    for (int x = 0; x < pred.width(); ++x) {
      if (!mask.at(x, y)) continue;
      const double diff = pred.at(x, y) - gt.at(x, y);
      const double eps = std::abs(diff);
      sum += std::log1p(eps);
      r.gradient.at(x, y) = detail::sign(diff) / (n * (eps + 1.0));
    }
  r.value = sum / n;
  return r;
}

/// Depth-gradient loss: with the error field e = |pred - gt| (0 off-mask),
/// (1/n) sum over masked pixels of ln(|Sx e| + 1) + ln(|Sy e| + 1), where S
/// are the Sobel operators. The magnitude keeps the log argument >= 1.
inline LossResult depth_gradient_loss(const DepthMap& pred, const DepthMap& gt, const MaskImage& mask) {
  detail::require_loss_inputs(pred, gt, mask, "depth_gradient_loss");
  const int w = pred.width(), h = pred.height();
  const double n = static_cast<double>(count(mask));

  GrayImage err(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (mask.at(x, y)) err.at(x, y) = std::abs(pred.at(x, y) - gt.at(x, y));
  const GradPair g = detail::sobel_field(err);

  // Adjoint weights a = d(value)/d(S e) at every masked pixel.
  GrayImage ax(w, h), ay(w, h);
  double sum = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!mask.at(x, y)) continue;
      const double gx = g.gx.at(x, y), gy = g.gy.at(x, y);
      sum += std::log1p(std::abs(gx)) + std::log1p(std::abs(gy));
      ax.at(x, y) = detail::sign(gx) / (n * (std::abs(gx) + 1.0));
      ay.at(x, y) = detail::sign(gy) / (n * (std::abs(gy) + 1.0));
    }

  // Transpose of the replicate-padded Sobel: scatter each adjoint onto the
  // clamped source pixels, then chain through |.| and the mask.
  GrayImage d_err(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double wx = ax.at(x, y), wy = ay.at(x, y);
      if (wx == 0.0 && wy == 0.0) continue;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int k = (dy + 1) * 3 + (dx + 1);
          const int sx = std::clamp(x + dx, 0, w - 1), sy = std::clamp(y + dy, 0, h - 1);
          d_err.at(sx, sy) += detail::kSobelX[k] * wx + detail::kSobelY[k] * wy;
        }
    }

  LossResult r{sum / n, DepthMap(w, h)};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (mask.at(x, y)) r.gradient.at(x, y) = d_err.at(x, y) * detail::sign(pred.at(x, y) - gt.at(x, y));
  return r;
}

struct DrmWeights {
  double depth = 1.0;
  double grad = 0.5;
};

/// lambda_depth * L_depth + lambda_grad * L_grad on precomputed terms.
inline double combine_drm(double l_depth, double l_grad, const DrmWeights& weights = {}) {
  return weights.depth * l_depth + weights.grad * l_grad;
}

inline LossResult drm_loss(const DepthMap& pred, const DepthMap& gt, const MaskImage& mask,
                           const DrmWeights& weights = {}) {
  if (!(weights.depth >= 0) || !(weights.grad >= 0)) throw InputError("drm_loss: weights must be >= 0");
  const LossResult depth = log_l1_loss(pred, gt, mask);
  const LossResult grad = depth_gradient_loss(pred, gt, mask);
  LossResult r{combine_drm(depth.value, grad.value, weights), DepthMap(pred.width(), pred.height())};
  for (std::size_t i = 0; i < r.gradient.values().size(); ++i)
    r.gradient.values()[i] =
        weights.depth * depth.gradient.values()[i] + weights.grad * grad.gradient.values()[i];
  return r;
}

namespace detail {
inline double masked_mean_abs(const DepthMap& a, const DepthMap& b, const MaskImage& mask) {
  double sum = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.values().size(); ++i)
    if (mask.values()[i]) {
      sum += std::abs(a.values()[i] - b.values()[i]);
      ++n;
    }
  return sum / static_cast<double>(n);
}
}  // namespace detail

/// Masked mean L1 on the front map plus masked mean L1 on the back map.
inline double mpm_depth_loss(const DepthMap& df, const DepthMap& db, const DepthMap& df_gt, const DepthMap& db_gt,
                             const MaskImage& mask) {
  detail::require_loss_inputs(df, df_gt, mask, "mpm_depth_loss");
  detail::require_loss_inputs(db, db_gt, mask, "mpm_depth_loss");
  require_same_dims(df, db, "mpm_depth_loss");
  return detail::masked_mean_abs(df, df_gt, mask) + detail::masked_mean_abs(db, db_gt, mask);
}

inline double mpm_total_loss(double l_warp, double l_seg, double l_depth) { return l_warp + l_seg + l_depth; }

/// Unit normals n ~ (-gx/(8 step), -gy/(8 step), 1) from Sobel depth
/// gradients; zero vectors off the mask.
inline RgbImage normal_from_depth(const DepthMap& depth, const MaskImage& mask, double step) {
  if (!(step > 0)) throw InputError("normal_from_depth: step must be > 0");
  require_same_dims(depth, mask, "normal_from_depth");
  const GradPair g = detail::sobel_field(depth);
  RgbImage out(depth.width(), depth.height());
  for (int y = 0; y < depth.height(); ++y)
    for (int x = 0; x < depth.width(); ++x) {
      if (!mask.at(x, y)) continue;
      const double nx = -g.gx.at(x, y) / (8.0 * step);
      const double ny = -g.gy.at(x, y) / (8.0 * step);
      const double len = std::sqrt(nx * nx + ny * ny + 1.0);
      out.set_pixel(x, y, {nx / len, ny / len, 1.0 / len});
    }
  return out;
}

/// Masked Abs / Sq / RMSE. In relative mode each error is divided by the
/// ground-truth depth (abs-rel, sq-rel); rmse stays absolute.
inline DepthMetrics depth_metrics(const DepthMap& pred, const DepthMap& gt, const MaskImage& mask,
                                  bool relative = false) {
  detail::require_loss_inputs(pred, gt, mask, "depth_metrics");
  double abs_sum = 0, sq_sum = 0, mse_sum = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < pred.values().size(); ++i) {
    if (!mask.values()[i]) continue;
    const double ref = gt.values()[i];
    const double d = pred.values()[i] - ref;
    if (relative) {
      if (ref == 0.0) throw InputError("depth_metrics: relative mode with zero ground-truth depth");
      abs_sum += std::abs(d) / std::abs(ref);
      sq_sum += d * d / std::abs(ref);
    } else {
      abs_sum += std::abs(d);
      sq_sum += d * d;
    }
    mse_sum += d * d;
    ++n;
  }
  const double dn = static_cast<double>(n);
  return {abs_sum / dn, sq_sum / dn, std::sqrt(mse_sum / dn)};
}

}  // namespace tryon3d
