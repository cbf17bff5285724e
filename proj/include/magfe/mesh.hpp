#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "magfe/errors.hpp"
#include "magfe/small_matrix.hpp"

namespace magfe {

using Triangle = std::array<int, 3>;
using Edge = std::array<int, 2>;

struct BoundaryEdge {
  Edge vertices;
  int tag = 1;
  friend bool operator==(const BoundaryEdge&, const BoundaryEdge&) = default;
};

/// Undirected edge key with the smaller vertex index first.
inline Edge sorted_edge(int a, int b) { return a < b ? Edge{a, b} : Edge{b, a}; }

/// Local edge e of a triangle joins local vertices e and (e+1)%3.
inline Edge triangle_edge(const Triangle& t, int e) { return {t[e], t[(e + 1) % 3]}; }

/// Conforming triangulation with material regions and tagged boundary edges.
///
/// The constructor validates orientation, index ranges and conformity; a
/// constructed Mesh is immutable.
class Mesh {
 public:
  Mesh() = default;

  Mesh(std::vector<Vec2> vertices, std::vector<Triangle> triangles, std::vector<int> regions,
       std::vector<BoundaryEdge> boundary)
      : vertices_(std::move(vertices)),
        triangles_(std::move(triangles)),
        regions_(std::move(regions)),
        boundary_(std::move(boundary)) {
    validate();
  }

  const std::vector<Vec2>& vertices() const noexcept { return vertices_; }
  const std::vector<Triangle>& triangles() const noexcept { return triangles_; }
  const std::vector<int>& regions() const noexcept { return regions_; }
  const std::vector<BoundaryEdge>& boundary_edges() const noexcept { return boundary_; }

  std::size_t num_vertices() const noexcept { return vertices_.size(); }
  std::size_t num_triangles() const noexcept { return triangles_.size(); }

  Vec2 vertex(int i) const { return vertices_[static_cast<std::size_t>(i)]; }
  const Triangle& triangle(std::size_t t) const { return triangles_[t]; }
  int region(std::size_t t) const { return regions_[t]; }

  double signed_area(std::size_t t) const {
    const auto& tri = triangles_[t];
    return 0.5 * cross(vertex(tri[1]) - vertex(tri[0]), vertex(tri[2]) - vertex(tri[0]));
  }

  /// Sum of signed areas (Neumaier-compensated).
  double total_area() const {
    double sum = 0.0, carry = 0.0;
    for (std::size_t t = 0; t < triangles_.size(); ++t) {
      const double a = signed_area(t);
      const double next = sum + a;
      carry += std::abs(sum) >= std::abs(a) ? (sum - next) + a : (a - next) + sum;
      sum = next;
    }
    return sum + carry;
  }

  double max_edge_length() const {
    double h = 0.0;
    for (const auto& tri : triangles_)
      for (int e = 0; e < 3; ++e) {
        const auto [a, b] = triangle_edge(tri, e);
        h = std::max(h, norm(vertex(b) - vertex(a)));
      }
    return h;
  }

  std::set<int> region_set() const { return {regions_.begin(), regions_.end()}; }

  std::set<int> boundary_tags() const {
    std::set<int> tags;
    for (const auto& be : boundary_) tags.insert(be.tag);
    return tags;
  }

  friend bool operator==(const Mesh&, const Mesh&) = default;

 private:
  void validate() const {
    const auto nv = static_cast<int>(vertices_.size());
    if (regions_.size() != triangles_.size())
      throw InvalidArgument("mesh: region tag count does not match triangle count");
    for (const auto& v : vertices_)
      if (!std::isfinite(v.x) || !std::isfinite(v.y)) throw InvalidArgument("mesh: non-finite vertex");

    Vec2 lo{std::numeric_limits<double>::max(), std::numeric_limits<double>::max()};
    Vec2 hi{-lo.x, -lo.y};
    for (const auto& v : vertices_) {
      lo = {std::min(lo.x, v.x), std::min(lo.y, v.y)};
      hi = {std::max(hi.x, v.x), std::max(hi.y, v.y)};
    }
    const double degenerate = 1e-14 * (vertices_.empty() ? 0.0 : (hi.x - lo.x) * (hi.y - lo.y));

    std::map<Edge, int> edge_use;
    for (std::size_t t = 0; t < triangles_.size(); ++t) {
      for (int v : triangles_[t])
        if (v < 0 || v >= nv) throw InvalidArgument("mesh: triangle " + std::to_string(t) + " has vertex index out of range");
      if (signed_area(t) <= degenerate)
        throw InvalidArgument("mesh: triangle " + std::to_string(t) + " is degenerate or clockwise");
      for (int e = 0; e < 3; ++e) {
        const auto [a, b] = triangle_edge(triangles_[t], e);
        if (++edge_use[sorted_edge(a, b)] > 2)
          throw InvalidArgument("mesh: edge shared by more than two triangles");
      }
    }

    std::set<Edge> listed;
    for (const auto& be : boundary_) {
      const auto [a, b] = be.vertices;
      if (a < 0 || a >= nv || b < 0 || b >= nv) throw InvalidArgument("mesh: boundary edge index out of range");
      const auto key = sorted_edge(a, b);
      const auto it = edge_use.find(key);
      if (it == edge_use.end() || it->second != 1)
        throw InvalidArgument("mesh: boundary edge (" + std::to_string(a) + "," + std::to_string(b) +
                              ") is not an edge of exactly one triangle");
      if (!listed.insert(key).second) throw InvalidArgument("mesh: duplicate boundary edge");
    }
    for (const auto& [edge, count] : edge_use)
      if (count == 1 && !listed.contains(edge))
        throw InvalidArgument("mesh: edge (" + std::to_string(edge[0]) + "," + std::to_string(edge[1]) +
                              ") lies on the boundary but is not tagged");
  }

  std::vector<Vec2> vertices_;
  std::vector<Triangle> triangles_;
  std::vector<int> regions_;
  std::vector<BoundaryEdge> boundary_;
};

/// Uniform n x n lattice on [0,1]^2, each cell split along the lower-left to
/// upper-right diagonal. Boundary tag 1, region 1.
inline Mesh generate_unit_square(int n) {
  if (n < 1) throw InvalidArgument("generate_unit_square: n must be positive");
  const auto id = [n](int i, int j) { return j * (n + 1) + i; };
  std::vector<Vec2> vertices;
  vertices.reserve(static_cast<std::size_t>((n + 1) * (n + 1)));
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i) vertices.push_back({static_cast<double>(i) / n, static_cast<double>(j) / n});

  std::vector<Triangle> triangles;
  triangles.reserve(static_cast<std::size_t>(2 * n * n));
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      triangles.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      triangles.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }

  std::vector<BoundaryEdge> boundary;
  for (int i = 0; i < n; ++i) boundary.push_back({{id(i, 0), id(i + 1, 0)}, 1});
  for (int j = 0; j < n; ++j) boundary.push_back({{id(n, j), id(n, j + 1)}, 1});
  for (int i = n; i > 0; --i) boundary.push_back({{id(i, n), id(i - 1, n)}, 1});
  for (int j = n; j > 0; --j) boundary.push_back({{id(0, j), id(0, j - 1)}, 1});

  std::vector<int> regions(triangles.size(), 1);
  return Mesh(std::move(vertices), std::move(triangles), std::move(regions), std::move(boundary));
}

/// Red refinement: every triangle is split into four by its edge midpoints.
///
/// Children of triangle t are stored at 4t..4t+3 (corner children at vertices
/// 0, 1, 2, then the middle child). Original vertices keep their indices;
/// midpoints follow in sorted-edge order.
inline Mesh refine_uniform(const Mesh& mesh) {
  std::map<Edge, int> midpoint;
  for (const auto& tri : mesh.triangles())
    for (int e = 0; e < 3; ++e) {
      const auto [a, b] = triangle_edge(tri, e);
      midpoint.emplace(sorted_edge(a, b), -1);
    }

  std::vector<Vec2> vertices = mesh.vertices();
  vertices.reserve(vertices.size() + midpoint.size());
  for (auto& [edge, index] : midpoint) {
    index = static_cast<int>(vertices.size());
    vertices.push_back(0.5 * (mesh.vertex(edge[0]) + mesh.vertex(edge[1])));
  }
  const auto mid = [&](int a, int b) { return midpoint.at(sorted_edge(a, b)); };

  std::vector<Triangle> triangles;
  std::vector<int> regions;
  triangles.reserve(4 * mesh.num_triangles());
  regions.reserve(4 * mesh.num_triangles());
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto [v0, v1, v2] = mesh.triangle(t);
    const int m01 = mid(v0, v1), m12 = mid(v1, v2), m20 = mid(v2, v0);
    triangles.push_back({v0, m01, m20});
    triangles.push_back({m01, v1, m12});
    triangles.push_back({m20, m12, v2});
    triangles.push_back({m01, m12, m20});
    regions.insert(regions.end(), 4, mesh.region(t));
  }

  std::vector<BoundaryEdge> boundary;
  boundary.reserve(2 * mesh.boundary_edges().size());
  for (const auto& be : mesh.boundary_edges()) {
    const auto [a, b] = be.vertices;
    const int m = mid(a, b);
    boundary.push_back({{a, m}, be.tag});
    boundary.push_back({{m, b}, be.tag});
  }
  return Mesh(std::move(vertices), std::move(triangles), std::move(regions), std::move(boundary));
}

/// Copy of mesh with every vertex moved by f; topology and tags unchanged.
template <class F>
Mesh transform_vertices(const Mesh& mesh, F&& f) {
  std::vector<Vec2> vertices;
  vertices.reserve(mesh.num_vertices());
  for (const auto& v : mesh.vertices()) vertices.push_back(f(v));
  return Mesh(std::move(vertices), mesh.triangles(), mesh.regions(), mesh.boundary_edges());
}

/// Ratio of circumradius to inradius; 2 for an equilateral triangle.
inline double radius_ratio(const Mesh& mesh, std::size_t t) {
  const auto& tri = mesh.triangle(t);
  const double a = norm(mesh.vertex(tri[1]) - mesh.vertex(tri[2]));
  const double b = norm(mesh.vertex(tri[2]) - mesh.vertex(tri[0]));
  const double c = norm(mesh.vertex(tri[0]) - mesh.vertex(tri[1]));
  const double area = mesh.signed_area(t);
  const double circum = a * b * c / (4.0 * area);
  const double in = 2.0 * area / (a + b + c);
  return circum / in;
}

// ASCII mesh format ----------------------------------------------------------

inline std::string serialize_mesh(const Mesh& mesh) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "# magfe mesh\n";
  out << "$Nodes " << mesh.num_vertices() << '\n';
  for (std::size_t i = 0; i < mesh.num_vertices(); ++i)
    out << i + 1 << ' ' << mesh.vertices()[i].x << ' ' << mesh.vertices()[i].y << '\n';
  out << "$Triangles " << mesh.num_triangles() << '\n';
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangle(t);
    out << t + 1 << ' ' << tri[0] + 1 << ' ' << tri[1] + 1 << ' ' << tri[2] + 1 << ' ' << mesh.region(t) << '\n';
  }
  out << "$BoundaryEdges " << mesh.boundary_edges().size() << '\n';
  for (std::size_t i = 0; i < mesh.boundary_edges().size(); ++i) {
    const auto& be = mesh.boundary_edges()[i];
    out << i + 1 << ' ' << be.vertices[0] + 1 << ' ' << be.vertices[1] + 1 << ' ' << be.tag << '\n';
  }
  return out.str();
}

namespace detail {

class MeshReader {
 public:
  explicit MeshReader(std::string_view text) {
    std::size_t start = 0;
    std::size_t number = 0;
    while (start <= text.size()) {
      auto end = text.find('\n', start);
      if (end == std::string_view::npos) end = text.size();
      ++number;
      std::string_view line = text.substr(start, end - start);
      if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
      if (line.find_first_not_of(" \t\r") != std::string_view::npos) lines_.push_back({number, std::string(line)});
      start = end + 1;
    }
    eof_line_ = number + 1;
  }

  std::size_t header(const std::string& name) {
    const auto [number, text] = next("header " + name);
    std::istringstream in(text);
    std::string word;
    long long count = -1;
    if (!(in >> word) || word != name) throw ParseError(number, "expected " + name);
    if (!(in >> count) || count < 0) throw ParseError(number, "missing or invalid count after " + name);
    expect_end(in, number);
    return static_cast<std::size_t>(count);
  }

  /// Next record as (line number, stream over its fields).
  std::pair<std::size_t, std::istringstream> record(const std::string& block) {
    const auto [number, text] = next(block + " record");
    if (text.find('$') != std::string::npos)
      throw ParseError(number, "block " + block + " ended early (count mismatch)");
    return {number, std::istringstream(text)};
  }

  static void expect_end(std::istringstream& in, std::size_t number) {
    std::string extra;
    if (in >> extra) throw ParseError(number, "unexpected trailing token '" + extra + "'");
  }

  void expect_exhausted() const {
    if (pos_ < lines_.size()) throw ParseError(lines_[pos_].first, "unexpected content after last block");
  }

 private:
  std::pair<std::size_t, std::string> next(const std::string& what) {
    if (pos_ >= lines_.size()) throw ParseError(eof_line_, "unexpected end of input, expected " + what);
    return lines_[pos_++];
  }

  std::vector<std::pair<std::size_t, std::string>> lines_;
  std::size_t pos_ = 0;
  std::size_t eof_line_ = 1;
};

template <class T>
T read_field(std::istringstream& in, std::size_t line, const char* what) {
  T value{};
  if (!(in >> value)) throw ParseError(line, std::string("malformed ") + what);
  return value;
}

inline void check_id(long long id, std::size_t expected, std::size_t line) {
  if (id != static_cast<long long>(expected))
    throw ParseError(line, "expected id " + std::to_string(expected) + ", found " + std::to_string(id));
}

inline int vertex_index(long long one_based, std::size_t num_vertices, std::size_t line) {
  if (one_based < 1 || one_based > static_cast<long long>(num_vertices))
    throw ParseError(line, "vertex index " + std::to_string(one_based) + " out of range 1.." +
                               std::to_string(num_vertices));
  return static_cast<int>(one_based - 1);
}

}  // namespace detail

/// Parses the line-oriented mesh format; errors carry the offending line.
inline Mesh parse_mesh(std::string_view text) {
  detail::MeshReader reader(text);

  const std::size_t nv = reader.header("$Nodes");
  std::vector<Vec2> vertices;
  vertices.reserve(nv);
  for (std::size_t i = 0; i < nv; ++i) {
    auto [line, in] = reader.record("$Nodes");
    detail::check_id(detail::read_field<long long>(in, line, "node id"), i + 1, line);
    const double x = detail::read_field<double>(in, line, "x coordinate");
    const double y = detail::read_field<double>(in, line, "y coordinate");
    detail::MeshReader::expect_end(in, line);
    vertices.push_back({x, y});
  }

  const std::size_t nt = reader.header("$Triangles");
  std::vector<Triangle> triangles;
  std::vector<int> regions;
  triangles.reserve(nt);
  regions.reserve(nt);
  for (std::size_t t = 0; t < nt; ++t) {
    auto [line, in] = reader.record("$Triangles");
    detail::check_id(detail::read_field<long long>(in, line, "triangle id"), t + 1, line);
    Triangle tri{};
    for (auto& v : tri) v = detail::vertex_index(detail::read_field<long long>(in, line, "vertex index"), nv, line);
    const int region = detail::read_field<int>(in, line, "region tag");
    detail::MeshReader::expect_end(in, line);
    triangles.push_back(tri);
    regions.push_back(region);
  }

  const std::size_t nb = reader.header("$BoundaryEdges");
  std::vector<BoundaryEdge> boundary;
  boundary.reserve(nb);
  for (std::size_t i = 0; i < nb; ++i) {
    auto [line, in] = reader.record("$BoundaryEdges");
    detail::check_id(detail::read_field<long long>(in, line, "edge id"), i + 1, line);
    const int a = detail::vertex_index(detail::read_field<long long>(in, line, "vertex index"), nv, line);
    const int b = detail::vertex_index(detail::read_field<long long>(in, line, "vertex index"), nv, line);
    const int tag = detail::read_field<int>(in, line, "boundary tag");
    detail::MeshReader::expect_end(in, line);
    boundary.push_back({{a, b}, tag});
  }
  reader.expect_exhausted();

  return Mesh(std::move(vertices), std::move(triangles), std::move(regions), std::move(boundary));
}

}  // namespace magfe
