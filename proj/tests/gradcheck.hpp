#pragma once

// Central finite-difference check of an analytic loss gradient.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "tryon3d/depth.hpp"

namespace testutil {

using LossFn = std::function<tryon3d::LossResult(const tryon3d::DepthMap&, const tryon3d::DepthMap&,
                                                 const tryon3d::MaskImage&)>;

// Relative error per component is |a - f| / max(|a|, |f|, 1e-3 * max|f|), so
// components that are tiny next to the rest are held to an absolute bound.
inline double gradient_rel_error(const LossFn& loss, const tryon3d::DepthMap& pred, const tryon3d::DepthMap& gt,
                                const tryon3d::MaskImage& mask, double step = 1e-6) {
  double worst = 0;
  const auto analytic = loss(pred, gt, mask).gradient;
  tryon3d::DepthMap p = pred;
  std::vector<double> fd(pred.values().size(), 0.0);
  for (std::size_t i = 0; i < fd.size(); ++i) {
    const double keep = p.values()[i];
    p.values()[i] = keep + step;
    const double up = loss(p, gt, mask).value;
    p.values()[i] = keep - step;
    const double down = loss(p, gt, mask).value;
    p.values()[i] = keep;
    fd[i] = (up - down) / (2 * step);
  }
  double fd_max = 0;
  for (double v : fd) fd_max = std::max(fd_max, std::abs(v));
  for (std::size_t i = 0; i < fd.size(); ++i) {
    const double a = analytic.values()[i], f = fd[i];
    const double denom = std::max({std::abs(a), std::abs(f), 1e-3 * fd_max});
    if (denom > 0) worst = std::max(worst, std::abs(a - f) / denom);
  }
  return worst;
}

struct DepthSample {
  tryon3d::DepthMap pred, gt;
  tryon3d::MaskImage mask;
};

// Any masked |pred - gt| below 1e-4: the L1 kink of the error field.
inline bool near_l1_kink(const DepthSample& s) {
  for (std::size_t i = 0; i < s.mask.values().size(); ++i)
    if (s.mask.values()[i] && std::abs(s.pred.values()[i] - s.gt.values()[i]) < 1e-4) return true;
  return false;
}

// Also rejects a near-zero Sobel response of the error field, where the
// magnitude form of the gradient loss has its own kink.
inline bool near_kink(const DepthSample& s) {
  if (near_l1_kink(s)) return true;
  tryon3d::GrayImage err(s.pred.width(), s.pred.height());
  for (std::size_t i = 0; i < err.values().size(); ++i)
    if (s.mask.values()[i]) err.values()[i] = std::abs(s.pred.values()[i] - s.gt.values()[i]);
  const auto g = tryon3d::sobel(err);
  for (std::size_t i = 0; i < err.values().size(); ++i)
    if (s.mask.values()[i] && (std::abs(g.gx.values()[i]) < 1e-4 || std::abs(g.gy.values()[i]) < 1e-4)) return true;
  return false;
}

inline DepthSample random_depth_sample(std::mt19937_64& rng, int w = 16, int h = 16) {
  std::uniform_real_distribution<double> depth(0.2, 1.2), noise(-0.3, 0.3);
  std::bernoulli_distribution keep(0.75);
  DepthSample s{tryon3d::DepthMap(w, h), tryon3d::DepthMap(w, h), tryon3d::MaskImage(w, h)};
  for (std::size_t i = 0; i < s.gt.values().size(); ++i) {
    s.gt.values()[i] = depth(rng);
    s.pred.values()[i] = s.gt.values()[i] + noise(rng);
    s.mask.values()[i] = keep(rng);
  }
  s.mask.values()[0] = 1;
  return s;
}

}  // namespace testutil
