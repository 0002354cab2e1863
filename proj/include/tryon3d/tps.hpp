#pragma once

// Thin-plate-spline fitting and warping, contour-driven correspondences,
// the feature-correlation primitive and the warping loss.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "tryon3d/image.hpp"
#include "tryon3d/parallel.hpp"

namespace tryon3d {

using Point2 = std::array<double, 2>;

struct Correspondences {
  std::vector<Point2> source_points;
  std::vector<Point2> target_points;
};

/// f(p) = A p + b + sum_k w_k U(|p - c_k|), U(r) = r^2 ln r^2.
struct TpsParams {
  std::vector<Point2> control_points;
  // Row-major 2x3: [a00 a01 b0; a10 a11 b1].
  std::array<double, 6> affine{1, 0, 0, 0, 1, 0};
  std::vector<Point2> weights;
  double lambda = 0.0;

  static TpsParams identity() { return {}; }
  static TpsParams translation(double dx, double dy) {
    TpsParams p;
    p.affine = {1, 0, dx, 0, 1, dy};
    return p;
  }
};

/// U(r) expressed in r^2; U(0) = 0.
inline double tps_kernel(double r2) { return r2 > 0.0 ? r2 * std::log(r2) : 0.0; }

inline Point2 tps_apply(const TpsParams& params, const Point2& p) {
  const auto& a = params.affine;
  double fx = a[0] * p[0] + a[1] * p[1] + a[2];
  double fy = a[3] * p[0] + a[4] * p[1] + a[5];
  for (std::size_t k = 0; k < params.control_points.size(); ++k) {
    const double dx = p[0] - params.control_points[k][0];
    const double dy = p[1] - params.control_points[k][1];
    const double u = tps_kernel(dx * dx + dy * dy);
    fx += params.weights[k][0] * u;
    fy += params.weights[k][1] * u;
  }
  return {fx, fy};
}

inline std::vector<Point2> tps_apply_points(const TpsParams& params, const std::vector<Point2>& pts) {
  std::vector<Point2> out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.push_back(tps_apply(params, p));
  return out;
}

/// Solves the regularized TPS system mapping sources onto targets. The
/// solve runs on centered, unit-RMS coordinates and the result is mapped
/// back exactly to pixel units (the kernel's log-scale term is absorbed by
/// the side conditions into the affine constant).
inline TpsParams fit_tps(const Correspondences& corr, double lambda) {
  const auto& src = corr.source_points;
  const auto& dst = corr.target_points;
  if (src.size() != dst.size())
    throw InputError("fit_tps: " + std::to_string(src.size()) + " source points vs " +
                     std::to_string(dst.size()) + " target points");
  const int n = static_cast<int>(src.size());
  if (n < 3) throw InputError("fit_tps: need at least 3 control points");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InputError("fit_tps: lambda must be finite and >= 0");
  for (int i = 0; i < n; ++i)
    if (!std::isfinite(src[i][0]) || !std::isfinite(src[i][1]) || !std::isfinite(dst[i][0]) ||
        !std::isfinite(dst[i][1]))
      throw InputError("fit_tps: non-finite point");

  double mx = 0, my = 0;
  for (const auto& p : src) {
    mx += p[0];
    my += p[1];
  }
  mx /= n;
  my /= n;
  double spread = 0;
  for (const auto& p : src) spread += (p[0] - mx) * (p[0] - mx) + (p[1] - my) * (p[1] - my);
  const double s = std::sqrt(spread / n);
  if (!(s > 0)) throw NumericalError("fit_tps: singular system (all control points coincide)");

  std::vector<Point2> unit(n);
  double sxx = 0, syy = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    unit[i] = {(src[i][0] - mx) / s, (src[i][1] - my) / s};
    sxx += unit[i][0] * unit[i][0];
    syy += unit[i][1] * unit[i][1];
    sxy += unit[i][0] * unit[i][1];
  }
  // Smallest eigenvalue of the (unit-trace) scatter matrix; ~0 when collinear.
  const double tr = (sxx + syy) / n, det = (sxx * syy - sxy * sxy) / (double(n) * n);
  const double min_eig = 0.5 * tr - std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
  if (min_eig < 1e-12) throw NumericalError("fit_tps: singular system (control points are collinear)");

  const int m = n + 3;
  Eigen::MatrixXd system = Eigen::MatrixXd::Zero(m, m);
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(m, 2);
  const double unit_lambda = lambda / (s * s);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double dx = unit[i][0] - unit[j][0], dy = unit[i][1] - unit[j][1];
      system(i, j) = tps_kernel(dx * dx + dy * dy);
    }
    system(i, i) += unit_lambda;
    system(i, n) = system(n, i) = 1.0;
    system(i, n + 1) = system(n + 1, i) = unit[i][0];
    system(i, n + 2) = system(n + 2, i) = unit[i][1];
    rhs(i, 0) = dst[i][0];
    rhs(i, 1) = dst[i][1];
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(system);
  if (lu.rank() < m) throw NumericalError("fit_tps: singular system (duplicate control points?)");
  const Eigen::MatrixXd sol = lu.solve(rhs);
  if (!sol.allFinite()) throw NumericalError("fit_tps: non-finite solution");

  TpsParams out;
  out.control_points = src;
  out.lambda = lambda;
  out.weights.resize(n);
  const double inv_s2 = 1.0 / (s * s);
  const double log_s2 = std::log(s * s);
  std::array<double, 2> moment{0, 0};
  for (int k = 0; k < n; ++k) {
    const double r2 = unit[k][0] * unit[k][0] + unit[k][1] * unit[k][1];
    for (int c = 0; c < 2; ++c) {
      out.weights[k][c] = sol(k, c) * inv_s2;
      moment[c] += sol(k, c) * r2;
    }
  }
  for (int c = 0; c < 2; ++c) {
    const double a0 = sol(n, c), ax = sol(n + 1, c), ay = sol(n + 2, c);
    out.affine[3 * c + 0] = ax / s;
    out.affine[3 * c + 1] = ay / s;
    out.affine[3 * c + 2] = a0 - (ax * mx + ay * my) / s - log_s2 * moment[c];
  }
  return out;
}

/// Inverse warp: out(p) = image(f(p)), bilinear with replicate padding.
inline RgbImage tps_warp_image(const RgbImage& image, const TpsParams& params, int out_w, int out_h) {
  RgbImage out(out_w, out_h);
  parallel_rows(out_h, [&](int y) {
    for (int x = 0; x < out_w; ++x) {
      const auto q = tps_apply(params, {double(x), double(y)});
      out.set_pixel(x, y, bilinear_sample(image, q[0], q[1]));
    }
  });
  return out;
}

/// Nearest-neighbour variant for masks, replicate padding.
inline MaskImage tps_warp_image(const MaskImage& mask, const TpsParams& params, int out_w, int out_h) {
  MaskImage out(out_w, out_h);
  parallel_rows(out_h, [&](int y) {
    for (int x = 0; x < out_w; ++x) {
      const auto q = tps_apply(params, {double(x), double(y)});
      out.at(x, y) = mask.clamped(nearest_index(q[0]), nearest_index(q[1]));
    }
  });
  return out;
}

/// Outer boundary of the component holding the topmost-then-leftmost mask
/// pixel, traced clockwise (image coordinates, y down) by Moore-neighbour
/// tracing. Returns pixel positions without repeating the start.
inline std::vector<Point2> trace_outer_contour(const MaskImage& mask) {
  int sx = -1, sy = -1;
  for (int y = 0; y < mask.height() && sx < 0; ++y)
    for (int x = 0; x < mask.width(); ++x)
      if (mask.at(x, y)) {
        sx = x;
        sy = y;
        break;
      }
  if (sx < 0) throw InputError("contour: empty mask");
  static constexpr int kDx[8] = {0, 1, 1, 1, 0, -1, -1, -1};
  static constexpr int kDy[8] = {-1, -1, 0, 1, 1, 1, 0, -1};
  auto fg = [&](int x, int y) { return mask.in_bounds(x, y) && mask.at(x, y) != 0; };
  auto dir_of = [&](int fx, int fy, int tx, int ty) {
    for (int d = 0; d < 8; ++d)
      if (fx + kDx[d] == tx && fy + kDy[d] == ty) return d;
    return 0;
  };

  std::vector<Point2> contour{{double(sx), double(sy)}};
  int px = sx, py = sy;
  int bx = sx - 1, by = sy;  // west of the start is background
  int first_x = -1, first_y = -1;
  const std::size_t limit = 4 * mask.pixel_count() + 8;
  for (std::size_t step = 0; step < limit; ++step) {
    const int start = dir_of(px, py, bx, by);
    int next = -1;
    for (int k = 1; k <= 8; ++k) {
      const int d = (start + k) % 8;
      if (fg(px + kDx[d], py + kDy[d])) {
        next = d;
        break;
      }
    }
    if (next < 0) break;  // isolated pixel
    const int prev = (next + 7) % 8;
    bx = px + kDx[prev];
    by = py + kDy[prev];
    const int nx = px + kDx[next], ny = py + kDy[next];
    if (first_x < 0) {
      first_x = nx;
      first_y = ny;
    } else if (px == sx && py == sy && nx == first_x && ny == first_y) {
      contour.pop_back();  // closing return to the start
      break;
    }
    px = nx;
    py = ny;
    contour.push_back({double(px), double(py)});
  }
  return contour;
}

/// `count` points spaced evenly by arc length along a closed polygon,
/// starting at its first vertex.
inline std::vector<Point2> resample_closed(const std::vector<Point2>& poly, int count) {
  const std::size_t m = poly.size();
  std::vector<double> cumulative(m + 1, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const auto& a = poly[i];
    const auto& b = poly[(i + 1) % m];
    cumulative[i + 1] = cumulative[i] + std::hypot(b[0] - a[0], b[1] - a[1]);
  }
  const double total = cumulative[m];
  std::vector<Point2> out;
  out.reserve(count);
  std::size_t seg = 0;
  for (int k = 0; k < count; ++k) {
    const double t = total * k / count;
    while (seg + 1 < m && cumulative[seg + 1] <= t) ++seg;
    const auto& a = poly[seg];
    const auto& b = poly[(seg + 1) % m];
    const double len = cumulative[seg + 1] - cumulative[seg];
    const double f = len > 0 ? (t - cumulative[seg]) / len : 0.0;
    out.push_back({a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1])});
  }
  return out;
}

/// Pairs `count` arc-length samples of the two outer contours in order,
/// plus the pair of bounding-box centers.
inline Correspondences contour_correspondences(const MaskImage& src_mask, const MaskImage& dst_mask, int count) {
  if (count < 3) throw InputError("contour_correspondences: need at least 3 points");
  auto samples = [&](const MaskImage& m, const char* which) {
    const auto contour = trace_outer_contour(m);
    if (contour.size() < 2)
      throw InputError(std::string("contour_correspondences: degenerate contour in ") + which + " mask");
    return resample_closed(contour, count);
  };
  auto bbox_center = [](const MaskImage& m) {
    int x0 = m.width(), y0 = m.height(), x1 = -1, y1 = -1;
    for (int y = 0; y < m.height(); ++y)
      for (int x = 0; x < m.width(); ++x)
        if (m.at(x, y)) {
          x0 = std::min(x0, x);
          x1 = std::max(x1, x);
          y0 = std::min(y0, y);
          y1 = std::max(y1, y);
        }
    return Point2{0.5 * (x0 + x1), 0.5 * (y0 + y1)};
  };
  Correspondences corr;
  corr.source_points = samples(src_mask, "source");
  corr.target_points = samples(dst_mask, "target");
  corr.source_points.push_back(bbox_center(src_mask));
  corr.target_points.push_back(bbox_center(dst_mask));
  return corr;
}

/// One "sx sy tx ty" line per pair.
inline void save_correspondences(const Correspondences& corr, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  char line[160];
  for (std::size_t i = 0; i < corr.source_points.size(); ++i) {
    std::snprintf(line, sizeof(line), "%.17g %.17g %.17g %.17g\n", corr.source_points[i][0],
                  corr.source_points[i][1], corr.target_points[i][0], corr.target_points[i][1]);
    out << line;
  }
}

inline Correspondences load_correspondences(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  Correspondences corr;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    std::istringstream ss(line);
    double v[4];
    if (!(ss >> v[0] >> v[1] >> v[2] >> v[3]))
      throw InputError(path.string() + ":" + std::to_string(lineno) + ": expected 'sx sy tx ty'");
    for (double x : v)
      if (!std::isfinite(x)) throw InputError(path.string() + ":" + std::to_string(lineno) + ": non-finite value");
    corr.source_points.push_back({v[0], v[1]});
    corr.target_points.push_back({v[2], v[3]});
  }
  return corr;
}

/// h x w grid of c-dimensional feature vectors, row-major.
struct FeatureGrid {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> values;

  FeatureGrid() = default;
  FeatureGrid(int h, int w, int c) : height(h), width(w), channels(c), values(std::size_t(h) * w * c, 0.0) {}
  double& at(int i, int j, int k) { return values[(std::size_t(i) * width + j) * channels + k]; }
  double at(int i, int j, int k) const { return values[(std::size_t(i) * width + j) * channels + k]; }
};

/// Matching scores between every position of one grid and every position of
/// the other: value(i, j, k*w + l) = <fa(i,j), fb(k,l)> on unit vectors.
struct CorrelationTensor {
  int height = 0;
  int width = 0;
  std::vector<double> values;

  double at(int i, int j, int k, int l) const {
    const std::size_t hw = std::size_t(height) * width;
    return values[(std::size_t(i) * width + j) * hw + std::size_t(k) * width + l];
  }
};

inline CorrelationTensor feature_correlation(const FeatureGrid& fa, const FeatureGrid& fb) {
  if (fa.height != fb.height || fa.width != fb.width || fa.channels != fb.channels)
    throw InputError("feature_correlation: dimension mismatch");
  if (fa.channels < 1) throw InputError("feature_correlation: need at least one channel");
  const int positions = fa.height * fa.width;
  const int c = fa.channels;
  auto normalized = [&](const FeatureGrid& f) {
    std::vector<double> out(f.values);
    for (int p = 0; p < positions; ++p) {
      double norm = 0;
      for (int k = 0; k < c; ++k) norm += out[std::size_t(p) * c + k] * out[std::size_t(p) * c + k];
      norm = std::sqrt(norm);
      for (int k = 0; k < c; ++k) out[std::size_t(p) * c + k] = norm > 0 ? out[std::size_t(p) * c + k] / norm : 0.0;
    }
    return out;
  };
  const auto na = normalized(fa);
  const auto nb = normalized(fb);
  CorrelationTensor out{fa.height, fa.width, std::vector<double>(std::size_t(positions) * positions)};
  parallel_rows(positions, [&](int p) {
    for (int q = 0; q < positions; ++q) {
      double dot = 0;
      for (int k = 0; k < c; ++k) dot += na[std::size_t(p) * c + k] * nb[std::size_t(q) * c + k];
      out.values[std::size_t(p) * positions + q] = std::clamp(dot, -1.0, 1.0);
    }
  });
  return out;
}

/// Mean absolute difference over all pixels and channels.
inline double warping_loss(const RgbImage& warped, const RgbImage& target) {
  require_same_dims(warped, target, "warping_loss");
  const auto a = warped.values();
  const auto b = target.values();
  if (a.empty()) return 0.0;
  double sum = 0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(a[i] - b[i]);
  return sum / a.size();
}

}  // namespace tryon3d
