#pragma once

// Double-depth reconstruction: orthographic unprojection, a closed mesh
// built from the front and back height fields joined along the silhouette,
// the back texture, a depth renderer for round-trip checks, and a synthetic
// depth generator.
//
// World frame: x right, y up, z = depth value; one unit is half the image
// height. Pixel (u, v) sits at x = (2u - W + 1) / H, y = -(2v - H + 1) / H.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <unordered_set>
#include <vector>

#include "tryon3d/image.hpp"
#include "tryon3d/inpaint.hpp"
#include "tryon3d/morphology.hpp"
#include "tryon3d/parallel.hpp"

namespace tryon3d {

using Vec3 = std::array<double, 3>;

enum class Side : std::uint8_t { kFront, kBack };

struct PointCloud {
  std::vector<Vec3> positions;
  std::vector<Rgb> colors;
  std::vector<Side> source;
  std::size_t order_violations = 0;  // masked pixels with front depth > back depth
};

struct MeshVertex {
  Vec3 position{};
  Vec3 normal{};
  Rgb color{};
};

struct Mesh {
  std::vector<MeshVertex> vertices;
  std::vector<std::array<std::uint32_t, 3>> triangles;
};

struct OrthoProjection {
  int width;
  int height;

  double x_of(double u) const { return (2.0 * u - width + 1.0) / height; }
  double y_of(double v) const { return -(2.0 * v - height + 1.0) / height; }
  double u_of(double x) const { return (x * height + width - 1.0) / 2.0; }
  double v_of(double y) const { return (height - 1.0 - y * height) / 2.0; }
};

inline PointCloud unproject(const DepthMap& df, const DepthMap& db, const MaskImage& mask, const RgbImage& front_tex,
                            const RgbImage& back_tex) {
  require_same_dims(df, db, "unproject");
  require_same_dims(df, mask, "unproject");
  require_same_dims(df, front_tex, "unproject");
  require_same_dims(df, back_tex, "unproject");
  if (count(mask) == 0) throw InputError("unproject: empty mask");
  const OrthoProjection proj{df.width(), df.height()};
  PointCloud pc;
  for (int v = 0; v < df.height(); ++v)
    for (int u = 0; u < df.width(); ++u) {
      if (!mask.at(u, v)) continue;
      const double x = proj.x_of(u), y = proj.y_of(v);
      pc.positions.push_back({x, y, df.at(u, v)});
      pc.colors.push_back(front_tex.pixel(u, v));
      pc.source.push_back(Side::kFront);
      pc.positions.push_back({x, y, db.at(u, v)});
      pc.colors.push_back(back_tex.pixel(u, v));
      pc.source.push_back(Side::kBack);
      if (df.at(u, v) > db.at(u, v)) ++pc.order_violations;
    }
  return pc;
}

namespace detail {

// Height-field triangulation of a pixel mask: every 2x2 cell with 3 or 4
// masked corners yields triangles over its masked corners (4 corners: split
// along the diagonal toward the lower right). Corners are taken in the cell's
// cyclic order top-left, top-right, bottom-right, bottom-left, which faces
// -z in the world frame. Indices are pixel indices.
inline std::vector<std::array<std::uint32_t, 3>> grid_triangles(const MaskImage& mask) {
  std::vector<std::array<std::uint32_t, 3>> tris;
  const int w = mask.width(), h = mask.height();
  for (int y = 0; y + 1 < h; ++y)
    for (int x = 0; x + 1 < w; ++x) {
      const std::array<int, 4> cx = {x, x + 1, x + 1, x};
      const std::array<int, 4> cy = {y, y, y + 1, y + 1};
      std::array<std::uint32_t, 4> ids{};
      int present = 0, missing = -1;
      for (int k = 0; k < 4; ++k) {
        ids[k] = static_cast<std::uint32_t>(cy[k] * w + cx[k]);
        if (mask.at(cx[k], cy[k]))
          ++present;
        else
          missing = k;
      }
      if (present == 4) {
        tris.push_back({ids[0], ids[1], ids[2]});
        tris.push_back({ids[0], ids[2], ids[3]});
      } else if (present == 3) {
        std::array<std::uint32_t, 3> t{};
        int j = 0;
        for (int k = 0; k < 4; ++k)
          if (k != missing) t[j++] = ids[k];
        tris.push_back(t);
      }
    }
  return tris;
}

inline std::uint64_t edge_key(std::uint32_t a, std::uint32_t b) { return (std::uint64_t(a) << 32) | b; }

struct BoundaryInfo {
  std::vector<std::array<std::uint32_t, 2>> edges;  // directed as in their triangle
  std::vector<std::uint32_t> bad_vertices;          // more than one outgoing boundary edge
};

inline BoundaryInfo boundary_of(const std::vector<std::array<std::uint32_t, 3>>& tris, std::size_t vertex_count) {
  std::unordered_set<std::uint64_t> directed;
  directed.reserve(tris.size() * 3);
  for (const auto& t : tris)
    for (int k = 0; k < 3; ++k) directed.insert(edge_key(t[k], t[(k + 1) % 3]));
  BoundaryInfo info;
  std::vector<int> out_degree(vertex_count, 0);
  for (const auto& t : tris)
    for (int k = 0; k < 3; ++k) {
      const auto a = t[k], b = t[(k + 1) % 3];
      if (!directed.count(edge_key(b, a))) {
        info.edges.push_back({a, b});
        if (++out_degree[a] == 2) info.bad_vertices.push_back(a);
      }
    }
  return info;
}

inline std::size_t count_loops(const std::vector<std::array<std::uint32_t, 2>>& edges, std::size_t vertex_count) {
  std::vector<std::int64_t> next(vertex_count, -1);
  for (const auto& e : edges) next[e[0]] = e[1];
  std::vector<std::uint8_t> visited(vertex_count, 0);
  std::size_t loops = 0;
  for (const auto& e : edges) {
    if (visited[e[0]]) continue;
    ++loops;
    std::int64_t v = e[0];
    while (v >= 0 && !visited[v]) {
      visited[v] = 1;
      v = next[v];
    }
  }
  return loops;
}

}  // namespace detail

/// Mandatory mask cleanup before stitching: fill holes, keep the largest
/// 4-connected component, then drop pixels that no cell triangle covers and
/// pinch pixels where the triangulated sheet would touch itself, until the
/// sheet is a topological disk.
inline MaskImage cleanup_mask(const MaskImage& mask) {
  MaskImage m = largest_component(fill_holes(mask));
  for (;;) {
    const auto tris = detail::grid_triangles(m);
    if (tris.empty()) return MaskImage(m.width(), m.height());
    std::vector<std::uint8_t> used(m.pixel_count(), 0);
    for (const auto& t : tris)
      for (auto i : t) used[i] = 1;
    bool changed = false;
    for (std::size_t i = 0; i < used.size(); ++i)
      if (m.values()[i] && !used[i]) {
        m.values()[i] = 0;
        changed = true;
      }
    const auto info = detail::boundary_of(tris, m.pixel_count());
    for (auto v : info.bad_vertices) {
      m.values()[v] = 0;
      changed = true;
    }
    if (!changed) break;
    m = largest_component(fill_holes(m));
  }
  return m;
}

/// Closed, consistently oriented mesh from front/back depth maps. The front
/// sheet faces -z, the back sheet +z, and each front boundary edge is joined
/// to its back copy by a wall quad. Boundary pixels with identical front and
/// back depth share a single vertex, so the wall degenerates gracefully.
inline Mesh stitch_mesh(const DepthMap& df, const DepthMap& db, const MaskImage& mask, const RgbImage& front_tex,
                        const RgbImage& back_tex) {
  require_same_dims(df, db, "stitch_mesh");
  require_same_dims(df, mask, "stitch_mesh");
  require_same_dims(df, front_tex, "stitch_mesh");
  require_same_dims(df, back_tex, "stitch_mesh");
  if (count(mask) == 0) throw InputError("stitch_mesh: empty mask");
  const MaskImage clean = cleanup_mask(mask);
  const auto cell_tris = detail::grid_triangles(clean);
  if (cell_tris.empty()) throw InputError("stitch_mesh: mask has no interior (degenerates to a line)");
  const auto boundary = detail::boundary_of(cell_tris, clean.pixel_count());
  if (!boundary.bad_vertices.empty() || detail::count_loops(boundary.edges, clean.pixel_count()) != 1)
    throw NumericalError("stitch_mesh: cleaned mask does not triangulate to a disk");

  const int w = df.width(), h = df.height();
  const OrthoProjection proj{w, h};
  std::vector<std::uint8_t> on_boundary(clean.pixel_count(), 0);
  for (const auto& e : boundary.edges) on_boundary[e[0]] = on_boundary[e[1]] = 1;

  // Boundary pixels with zero thickness share one vertex. An interior edge
  // joining two shared vertices would then border four triangles, so one
  // endpoint of every such chord keeps separate front/back vertices.
  std::vector<std::uint8_t> merged(clean.pixel_count(), 0);
  for (std::size_t p = 0; p < merged.size(); ++p)
    merged[p] = on_boundary[p] && df.values()[p] == db.values()[p];
  {
    std::unordered_set<std::uint64_t> boundary_edges;
    for (const auto& e : boundary.edges) boundary_edges.insert(detail::edge_key(std::min(e[0], e[1]), std::max(e[0], e[1])));
    for (const auto& t : cell_tris)
      for (int k = 0; k < 3; ++k) {
        const auto a = std::min(t[k], t[(k + 1) % 3]), b = std::max(t[k], t[(k + 1) % 3]);
        if (merged[a] && merged[b] && !boundary_edges.count(detail::edge_key(a, b))) merged[b] = 0;
      }
    for (const auto& t : cell_tris)
      if (merged[t[0]] && merged[t[1]] && merged[t[2]]) merged[std::max({t[0], t[1], t[2]})] = 0;
  }

  constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::uint32_t> front_id(clean.pixel_count(), kNone), back_id(clean.pixel_count(), kNone);
  Mesh mesh;
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u)
      if (clean.at(u, v)) {
        front_id[v * w + u] = static_cast<std::uint32_t>(mesh.vertices.size());
        mesh.vertices.push_back({{proj.x_of(u), proj.y_of(v), df.at(u, v)}, {}, front_tex.pixel(u, v)});
      }
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      const std::size_t p = static_cast<std::size_t>(v) * w + u;
      if (!clean.values()[p]) continue;
      if (merged[p]) {
        back_id[p] = front_id[p];
        continue;
      }
      back_id[p] = static_cast<std::uint32_t>(mesh.vertices.size());
      mesh.vertices.push_back({{proj.x_of(u), proj.y_of(v), db.at(u, v)}, {}, back_tex.pixel(u, v)});
    }

  mesh.triangles.reserve(cell_tris.size() * 2 + boundary.edges.size() * 2);
  for (const auto& t : cell_tris) mesh.triangles.push_back({front_id[t[0]], front_id[t[1]], front_id[t[2]]});
  for (const auto& t : cell_tris) mesh.triangles.push_back({back_id[t[0]], back_id[t[2]], back_id[t[1]]});
  auto add = [&](std::uint32_t a, std::uint32_t b, std::uint32_t c) {
    if (a != b && b != c && a != c) mesh.triangles.push_back({a, b, c});
  };
  // Walk each silhouette loop so the wall strip is emitted in contour order.
  {
    std::vector<std::int64_t> next(clean.pixel_count(), -1);
    for (const auto& e : boundary.edges) next[e[0]] = e[1];
    std::vector<std::uint8_t> done(clean.pixel_count(), 0);
    for (const auto& e0 : boundary.edges) {
      std::uint32_t a = e0[0];
      while (!done[a]) {
        done[a] = 1;
        const auto b = static_cast<std::uint32_t>(next[a]);
        add(front_id[b], front_id[a], back_id[a]);
        add(front_id[b], back_id[a], back_id[b]);
        a = b;
      }
    }
  }

  std::vector<Vec3> accum(mesh.vertices.size(), Vec3{0, 0, 0});
  for (const auto& t : mesh.triangles) {
    const auto& p0 = mesh.vertices[t[0]].position;
    const auto& p1 = mesh.vertices[t[1]].position;
    const auto& p2 = mesh.vertices[t[2]].position;
    const Vec3 e1{p1[0] - p0[0], p1[1] - p0[1], p1[2] - p0[2]};
    const Vec3 e2{p2[0] - p0[0], p2[1] - p0[1], p2[2] - p0[2]};
    const Vec3 n{e1[1] * e2[2] - e1[2] * e2[1], e1[2] * e2[0] - e1[0] * e2[2], e1[0] * e2[1] - e1[1] * e2[0]};
    for (auto i : t)
      for (int c = 0; c < 3; ++c) accum[i][c] += n[c];
  }
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const auto& n = accum[i];
    const double len = std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
    mesh.vertices[i].normal = len > 0 ? Vec3{n[0] / len, n[1] / len, n[2] / len} : Vec3{0, 0, -1};
  }
  return mesh;
}

/// Fills the face with surrounding colors, then mirrors left-right.
inline RgbImage make_back_texture(const RgbImage& tryon, const LabelMap& s, int radius) {
  require_same_dims(tryon, s, "make_back_texture");
  const MaskImage face = label_mask(s, {Label::kFace});
  return flip_horizontal(telea_inpaint(tryon, face, radius));
}

/// Orthographic z-buffer under the unprojection's pixel mapping. Front keeps
/// the smallest z per pixel, back the largest; uncovered pixels are 0.
inline DepthMap render_depth(const Mesh& mesh, int width, int height, Side side) {
  DepthMap out(width, height);
  if (mesh.triangles.empty()) return out;
  const OrthoProjection proj{width, height};
  std::vector<std::uint8_t> covered(out.pixel_count(), 0);
  for (const auto& t : mesh.triangles) {
    std::array<double, 3> u{}, v{}, z{};
    for (int k = 0; k < 3; ++k) {
      const auto& p = mesh.vertices[t[k]].position;
      u[k] = proj.u_of(p[0]);
      v[k] = proj.v_of(p[1]);
      z[k] = p[2];
    }
    const double area = (u[1] - u[0]) * (v[2] - v[0]) - (u[2] - u[0]) * (v[1] - v[0]);
    if (std::abs(area) < 1e-9) continue;  // edge-on (wall) triangles
    const int x0 = std::max(0, static_cast<int>(std::ceil(std::min({u[0], u[1], u[2]}) - 1e-6)));
    const int x1 = std::min(width - 1, static_cast<int>(std::floor(std::max({u[0], u[1], u[2]}) + 1e-6)));
    const int y0 = std::max(0, static_cast<int>(std::ceil(std::min({v[0], v[1], v[2]}) - 1e-6)));
    const int y1 = std::min(height - 1, static_cast<int>(std::floor(std::max({v[0], v[1], v[2]}) + 1e-6)));
    for (int py = y0; py <= y1; ++py)
      for (int px = x0; px <= x1; ++px) {
        const double l0 = ((u[1] - px) * (v[2] - py) - (u[2] - px) * (v[1] - py)) / area;
        const double l1 = ((u[2] - px) * (v[0] - py) - (u[0] - px) * (v[2] - py)) / area;
        const double l2 = 1.0 - l0 - l1;
        if (l0 < -1e-9 || l1 < -1e-9 || l2 < -1e-9) continue;
        const double depth = l0 * z[0] + l1 * z[1] + l2 * z[2];
        const std::size_t i = static_cast<std::size_t>(py) * width + px;
        double& dst = out.values()[i];
        if (!covered[i]) {
          dst = depth;
          covered[i] = 1;
        } else if (side == Side::kFront ? depth < dst : depth > dst) {
          dst = depth;
        }
      }
  }
  return out;
}

struct DoubleDepth {
  DepthMap front;
  DepthMap back;
};

/// Inflates the silhouette into a lens: inflation amplitude * sqrt(d / d_max)
/// where d is the distance to the silhouette edge (0 on edge pixels);
/// front = base - inflation, back = base + inflation, 0 off the mask.
inline DoubleDepth synth_depth(const MaskImage& mask, double base, double amplitude) {
  if (!(amplitude > 0)) throw InputError("synth_depth: amplitude must be > 0");
  if (count(mask) == 0) throw InputError("synth_depth: empty mask");
  const GrayImage inside = distance_inside(mask);
  double max_d = 0;
  for (std::size_t i = 0; i < inside.values().size(); ++i)
    if (mask.values()[i]) max_d = std::max(max_d, inside.values()[i] - 1.0);
  DoubleDepth d{DepthMap(mask.width(), mask.height()), DepthMap(mask.width(), mask.height())};
  for (std::size_t i = 0; i < inside.values().size(); ++i) {
    if (!mask.values()[i]) continue;
    const double ratio = max_d > 0 ? std::clamp((inside.values()[i] - 1.0) / max_d, 0.0, 1.0) : 0.0;
    const double inflation = amplitude * std::sqrt(ratio);
    d.front.values()[i] = base - inflation;
    d.back.values()[i] = base + inflation;
  }
  return d;
}

}  // namespace tryon3d
