#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <span>
#include <vector>

#include "magfe/errors.hpp"
#include "magfe/mesh.hpp"
#include "magfe/small_matrix.hpp"

namespace magfe {

struct Circle {
  Vec2 center;
  double radius = 0.0;

  bool contains(const Vec2& p, double rel_tol) const { return std::abs(norm(p - center) - radius) <= rel_tol * radius; }
  Vec2 project(const Vec2& p) const { return center + (radius / norm(p - center)) * (p - center); }
};

namespace detail {

struct DelaunayTriangle {
  Triangle v;
  Vec2 center;
  double radius2;
};

inline DelaunayTriangle make_delaunay_triangle(const std::vector<Vec2>& pts, const Triangle& v) {
  const Vec2 a = pts[static_cast<std::size_t>(v[0])], b = pts[static_cast<std::size_t>(v[1])],
             c = pts[static_cast<std::size_t>(v[2])];
  const Vec2 ab = b - a, ac = c - a;
  const double d = 2.0 * cross(ab, ac);
  const double ab2 = dot(ab, ab), ac2 = dot(ac, ac);
  const Vec2 off{(ac.y * ab2 - ab.y * ac2) / d, (ab.x * ac2 - ac.x * ab2) / d};
  return {v, a + off, dot(off, off)};
}

}  // namespace detail

/// Bowyer-Watson Delaunay triangulation of a point set; returns
/// counterclockwise triangles over the convex hull. Quadratic time, intended
/// for benchmark meshes of a few thousand points.
inline std::vector<Triangle> delaunay_triangulate(const std::vector<Vec2>& points) {
  if (points.size() < 3) throw InvalidArgument("delaunay: need at least 3 points");
  Vec2 lo = points.front(), hi = points.front();
  for (const auto& p : points) {
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
  }
  const Vec2 mid = 0.5 * (lo + hi);
  const double span = std::max(hi.x - lo.x, hi.y - lo.y) * 20.0;

  std::vector<Vec2> pts = points;
  const int n = static_cast<int>(points.size());
  pts.push_back(mid + Vec2{-span, -span});
  pts.push_back(mid + Vec2{span, -span});
  pts.push_back(mid + Vec2{0.0, span});

  std::vector<detail::DelaunayTriangle> tris = {detail::make_delaunay_triangle(pts, {n, n + 1, n + 2})};
  std::vector<std::size_t> bad;
  std::map<Edge, int> edge_count;
  std::vector<Edge> directed;
  for (int i = 0; i < n; ++i) {
    const Vec2& p = pts[static_cast<std::size_t>(i)];
    bad.clear();
    for (std::size_t t = 0; t < tris.size(); ++t) {
      const Vec2 d = p - tris[t].center;
      if (dot(d, d) < tris[t].radius2 * (1.0 - 1e-12)) bad.push_back(t);
    }
    edge_count.clear();
    directed.clear();
    for (std::size_t t : bad)
      for (int e = 0; e < 3; ++e) {
        const auto ed = triangle_edge(tris[t].v, e);
        ++edge_count[sorted_edge(ed[0], ed[1])];
        directed.push_back(ed);
      }
    for (auto it = bad.rbegin(); it != bad.rend(); ++it) {
      tris[*it] = tris.back();
      tris.pop_back();
    }
    for (const auto& ed : directed)
      if (edge_count[sorted_edge(ed[0], ed[1])] == 1) tris.push_back(detail::make_delaunay_triangle(pts, {ed[0], ed[1], i}));
  }

  std::vector<Triangle> out;
  for (const auto& t : tris)
    if (t.v[0] < n && t.v[1] < n && t.v[2] < n) out.push_back(t.v);
  std::sort(out.begin(), out.end());
  return out;
}

/// Mesh from a triangle list: regions from a centroid classifier, every edge
/// of exactly one triangle becomes a boundary edge with the given tag.
template <class Classifier>
Mesh mesh_from_triangles(std::vector<Vec2> vertices, std::vector<Triangle> triangles, Classifier&& region_of,
                         int boundary_tag = 1) {
  std::vector<int> regions;
  std::map<Edge, int> count;
  for (const auto& t : triangles) {
    const Vec2 c = (1.0 / 3.0) * (vertices[static_cast<std::size_t>(t[0])] + vertices[static_cast<std::size_t>(t[1])] +
                                  vertices[static_cast<std::size_t>(t[2])]);
    regions.push_back(region_of(c));
    for (int e = 0; e < 3; ++e) {
      const auto [a, b] = triangle_edge(t, e);
      ++count[sorted_edge(a, b)];
    }
  }
  std::vector<BoundaryEdge> boundary;
  for (const auto& t : triangles)
    for (int e = 0; e < 3; ++e) {
      const auto ed = triangle_edge(t, e);
      if (count[sorted_edge(ed[0], ed[1])] == 1) boundary.push_back({ed, boundary_tag});
    }
  return Mesh(std::move(vertices), std::move(triangles), std::move(regions), std::move(boundary));
}

/// True when every pair of consecutive points is joined by a mesh edge.
inline bool has_edges(const Mesh& mesh, std::span<const std::pair<int, int>> chords) {
  std::map<Edge, int> edges;
  for (const auto& t : mesh.triangles())
    for (int e = 0; e < 3; ++e) {
      const auto [a, b] = triangle_edge(t, e);
      edges[sorted_edge(a, b)] = 1;
    }
  return std::all_of(chords.begin(), chords.end(),
                     [&](const auto& c) { return edges.contains(sorted_edge(c.first, c.second)); });
}

/// Uniform refinement followed by projection of the new midpoints of
/// boundary and region-interface edges whose endpoints lie on one of the
/// circles. Child c of element t is 4t + c, as for refine_uniform.
inline Mesh refine_with_curves(const Mesh& mesh, std::span<const Circle> circles) {
  Mesh fine = refine_uniform(mesh);
  if (circles.empty()) return fine;

  std::map<Edge, std::vector<int>> edge_regions;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t)
    for (int e = 0; e < 3; ++e) {
      const auto [a, b] = triangle_edge(mesh.triangle(t), e);
      edge_regions[sorted_edge(a, b)].push_back(mesh.region(t));
    }

  std::vector<Vec2> vertices = fine.vertices();
  constexpr double on_curve = 1e-8;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangle(t);
    // midpoints of the coarse edges (v0,v1), (v1,v2), (v2,v0) in the child layout
    const std::array<int, 3> mids = {fine.triangle(4 * t)[1], fine.triangle(4 * t + 1)[2], fine.triangle(4 * t)[2]};
    for (int e = 0; e < 3; ++e) {
      const auto [a, b] = triangle_edge(tri, e);
      const auto& regs = edge_regions.at(sorted_edge(a, b));
      const bool curved_candidate = regs.size() == 1 || regs[0] != regs[1];
      if (!curved_candidate) continue;
      for (const auto& c : circles)
        if (c.contains(mesh.vertex(a), on_curve) && c.contains(mesh.vertex(b), on_curve)) {
          auto& m = vertices[static_cast<std::size_t>(mids[static_cast<std::size_t>(e)])];
          m = c.project(m);
          break;
        }
    }
  }
  return Mesh(std::move(vertices), fine.triangles(), fine.regions(), fine.boundary_edges());
}

/// Geometry of the two-wire disc: iron disc with two round copper wires.
struct TwoWireGeometry {
  double disc_radius = 0.1;
  double wire_radius = 0.025;
  double wire_offset = 0.05;

  Circle outer() const { return {{0.0, 0.0}, disc_radius}; }
  Circle wire_plus() const { return {{0.0, wire_offset}, wire_radius}; }
  Circle wire_minus() const { return {{0.0, -wire_offset}, wire_radius}; }
  std::array<Circle, 3> circles() const { return {outer(), wire_plus(), wire_minus()}; }

  /// Region 1 iron, 2 wire at +offset, 3 wire at -offset.
  int region_of(const Vec2& x) const {
    if (norm(x - wire_plus().center) < wire_radius) return 2;
    if (norm(x - wire_minus().center) < wire_radius) return 3;
    return 1;
  }
};

/// Delaunay mesh of the two-wire disc with target spacing h. Circles are
/// resolved by inscribed polygons; every polygon side is a mesh edge.
inline Mesh generate_two_wire_disc(const TwoWireGeometry& geo = {}, double h = 0.0125) {
  if (!(h > 0.0 && h < geo.wire_radius)) throw InvalidArgument("two_wire_disc: spacing must lie in (0, wire radius)");
  std::vector<Vec2> points;
  std::vector<std::pair<int, int>> chords;
  const double layer = h * std::sqrt(3.0) / 2.0;

  const auto ring = [&](const Circle& c, double radius, double phase, bool record) {
    const int count = std::max(6, static_cast<int>(std::lround(2.0 * std::numbers::pi * radius / h)));
    const int first = static_cast<int>(points.size());
    for (int i = 0; i < count; ++i) {
      const double t = 2.0 * std::numbers::pi * (i + phase) / count;
      points.push_back(c.center + radius * Vec2{std::cos(t), std::sin(t)});
      if (record) chords.emplace_back(first + i, first + (i + 1) % count);
    }
  };
  // the curve itself plus offset layers on both sides
  ring(geo.outer(), geo.disc_radius, 0.0, true);
  ring(geo.outer(), geo.disc_radius - layer, 0.5, false);
  for (const auto& w : {geo.wire_plus(), geo.wire_minus()}) {
    ring(w, w.radius, 0.0, true);
    ring(w, w.radius - layer, 0.5, false);
    ring(w, w.radius + layer, 0.5, false);
  }

  const auto clear_of_layers = [&](const Vec2& p) {
    const double margin = layer + 0.6 * h;
    if (norm(p) > geo.disc_radius - margin) return false;
    for (const auto& w : {geo.wire_plus(), geo.wire_minus()})
      if (std::abs(norm(p - w.center) - w.radius) < margin) return false;
    return true;
  };
  // hexagonal fill
  const int steps = static_cast<int>(std::ceil(geo.disc_radius / h)) + 1;
  for (int j = -2 * steps; j <= 2 * steps; ++j)
    for (int i = -steps; i <= steps; ++i) {
      const Vec2 p{(i + 0.5 * (j & 1)) * h, j * layer};
      if (clear_of_layers(p)) points.push_back(p);
    }
  for (const auto& w : {geo.wire_plus(), geo.wire_minus()}) {
    const bool has_center = std::any_of(points.begin(), points.end(), [&](const Vec2& p) { return norm(p - w.center) < 0.5 * h; });
    if (!has_center) points.push_back(w.center);
  }

  auto mesh = mesh_from_triangles(points, delaunay_triangulate(points), [&](const Vec2& c) { return geo.region_of(c); });
  if (!has_edges(mesh, chords)) throw Error("two_wire_disc: a curve chord is missing from the triangulation");
  return mesh;
}

/// Layout of the permanent-magnet toy problem on [-w/2, w/2]^2: an n x n
/// grid (n a multiple of 8) with four magnet patches around the center.
struct PmToyGeometry {
  double width = 0.1;
  /// Remanent flux density of the magnets in tesla.
  double remanence = 1.2;

  /// Region 1 iron; 2 top, 3 right, 4 bottom, 5 left magnet.
  int region_of(const Vec2& x) const {
    const double c = width / 8.0;
    const auto in = [](double v, double lo, double hi) { return v > lo && v < hi; };
    if (in(x.x, -c, c) && in(x.y, c, 2 * c)) return 2;
    if (in(x.y, -c, c) && in(x.x, c, 2 * c)) return 3;
    if (in(x.x, -c, c) && in(x.y, -2 * c, -c)) return 4;
    if (in(x.y, -c, c) && in(x.x, -2 * c, -c)) return 5;
    return 1;
  }

  /// Alternating radial magnetization: top and bottom outward, left and right inward.
  Vec2 magnetization(int region, double nu0) const {
    const double m = nu0 * remanence;
    switch (region) {
      case 2: return {0.0, m};
      case 3: return {-m, 0.0};
      case 4: return {0.0, -m};
      case 5: return {m, 0.0};
      default: return {};
    }
  }
};

inline Mesh generate_pm_toy(const PmToyGeometry& geo = {}, int n = 8) {
  if (n < 8 || n % 8 != 0) throw InvalidArgument("pm_toy: n must be a positive multiple of 8");
  const auto square = transform_vertices(generate_unit_square(n), [&](const Vec2& p) {
    return Vec2{geo.width * (p.x - 0.5), geo.width * (p.y - 0.5)};
  });
  std::vector<int> regions;
  for (std::size_t t = 0; t < square.num_triangles(); ++t) {
    const auto& tri = square.triangle(t);
    regions.push_back(geo.region_of((1.0 / 3.0) * (square.vertex(tri[0]) + square.vertex(tri[1]) + square.vertex(tri[2]))));
  }
  return Mesh(square.vertices(), square.triangles(), std::move(regions), square.boundary_edges());
}

}  // namespace magfe
