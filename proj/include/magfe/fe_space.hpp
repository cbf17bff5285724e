#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "magfe/errors.hpp"
#include "magfe/mesh.hpp"
#include "magfe/quadrature.hpp"
#include "magfe/small_matrix.hpp"

namespace magfe {

inline constexpr int max_space_degree = 4;

/// Equispaced nodal Lagrange basis of degree p on the reference triangle.
///
/// Local ordering: the three vertices, then p-1 nodes per local edge
/// (edge e runs from vertex e to vertex (e+1)%3), then interior nodes.
class LagrangeBasis {
 public:
  explicit LagrangeBasis(int degree) : degree_(degree) {
    if (degree < 1 || degree > max_space_degree)
      throw InvalidArgument("Lagrange degree must be in 1.." + std::to_string(max_space_degree));
    const int p = degree;
    nodes_ = {{p, 0, 0}, {0, p, 0}, {0, 0, p}};
    for (int t = 1; t < p; ++t) nodes_.push_back({p - t, t, 0});
    for (int t = 1; t < p; ++t) nodes_.push_back({0, p - t, t});
    for (int t = 1; t < p; ++t) nodes_.push_back({t, 0, p - t});
    for (int k = 1; k < p; ++k)
      for (int j = 1; j + k < p; ++j) nodes_.push_back({p - j - k, j, k});
  }

  int degree() const noexcept { return degree_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  std::size_t edge_nodes() const noexcept { return static_cast<std::size_t>(degree_ - 1); }
  std::size_t interior_nodes() const noexcept { return size() - 3 - 3 * edge_nodes(); }

  Vec2 node(std::size_t i) const {
    return {static_cast<double>(nodes_[i][1]) / degree_, static_cast<double>(nodes_[i][2]) / degree_};
  }

  /// Values and reference gradients of all shape functions at xi.
  void evaluate(const Vec2& xi, std::span<double> values, std::span<Vec2> gradients) const {
    const std::array<double, 3> lambda = {1.0 - xi.x - xi.y, xi.x, xi.y};
    // factor[a][i] = prod_{m<i} (p*lambda_a - m)/(m+1), plus its lambda_a-derivative
    std::array<std::array<double, max_space_degree + 1>, 3> f{}, df{};
    for (int a = 0; a < 3; ++a) {
      f[a][0] = 1.0;
      df[a][0] = 0.0;
      for (int i = 1; i <= degree_; ++i) {
        const double g = (degree_ * lambda[a] - (i - 1)) / i;
        df[a][i] = df[a][i - 1] * g + f[a][i - 1] * degree_ / i;
        f[a][i] = f[a][i - 1] * g;
      }
    }
    for (std::size_t n = 0; n < nodes_.size(); ++n) {
      const auto [i, j, k] = nodes_[n];
      const double d0 = df[0][i] * f[1][j] * f[2][k];
      const double d1 = f[0][i] * df[1][j] * f[2][k];
      const double d2 = f[0][i] * f[1][j] * df[2][k];
      if (!values.empty()) values[n] = f[0][i] * f[1][j] * f[2][k];
      if (!gradients.empty()) gradients[n] = {d1 - d0, d2 - d0};
    }
  }

 private:
  int degree_;
  std::vector<std::array<int, 3>> nodes_;
};

/// Shape function values and reference gradients tabulated at rule points.
struct Tabulation {
  std::size_t num_points = 0;
  std::size_t num_basis = 0;
  std::vector<double> values;      // [q * num_basis + i]
  std::vector<Vec2> gradients;     // reference gradients, same layout

  double value(std::size_t q, std::size_t i) const { return values[q * num_basis + i]; }
  const Vec2& gradient(std::size_t q, std::size_t i) const { return gradients[q * num_basis + i]; }
};

inline Tabulation tabulate(const LagrangeBasis& basis, const QuadratureRule& rule) {
  Tabulation tab;
  tab.num_points = rule.size();
  tab.num_basis = basis.size();
  tab.values.resize(tab.num_points * tab.num_basis);
  tab.gradients.resize(tab.num_points * tab.num_basis);
  for (std::size_t q = 0; q < rule.size(); ++q)
    basis.evaluate(rule.points[q], std::span(tab.values).subspan(q * tab.num_basis, tab.num_basis),
                   std::span(tab.gradients).subspan(q * tab.num_basis, tab.num_basis));
  return tab;
}

/// Coefficients of a discrete vector potential over the free dofs (T*m).
struct CoefficientVector {
  std::vector<double> values;

  std::size_t size() const noexcept { return values.size(); }
};

/// H^1-conforming P_p Lagrange space with homogeneous Dirichlet constraints.
class FESpace {
 public:
  FESpace(std::shared_ptr<const Mesh> mesh, int degree, const std::set<int>& dirichlet_tags)
      : mesh_(std::move(mesh)), basis_(degree) {
    if (!mesh_) throw InvalidArgument("FESpace: null mesh");
    const auto present = mesh_->boundary_tags();
    for (int tag : dirichlet_tags)
      if (!present.contains(tag)) throw InvalidArgument("FESpace: unknown Dirichlet tag " + std::to_string(tag));
    number_dofs();
    constrain(dirichlet_tags);
    precompute_geometry();
  }

  const Mesh& mesh() const noexcept { return *mesh_; }
  std::shared_ptr<const Mesh> mesh_ptr() const noexcept { return mesh_; }
  const LagrangeBasis& basis() const noexcept { return basis_; }
  int degree() const noexcept { return basis_.degree(); }
  std::size_t local_size() const noexcept { return basis_.size(); }
  std::size_t num_elements() const noexcept { return mesh_->num_triangles(); }
  std::size_t num_dofs() const noexcept { return dof_nodes_.size(); }
  std::size_t num_free() const noexcept { return num_free_; }

  std::span<const int> element_dofs(std::size_t t) const {
    return std::span(element_dofs_).subspan(t * local_size(), local_size());
  }
  const Vec2& dof_node(std::size_t dof) const { return dof_nodes_[dof]; }
  bool is_constrained(std::size_t dof) const { return free_index_[dof] < 0; }
  /// Free index of a global dof, or -1 when constrained.
  int free_index(std::size_t dof) const { return free_index_[dof]; }

  const ElementMap& element_map(std::size_t t) const { return maps_[t]; }
  /// Inverse-transpose of the element Jacobian (maps reference to physical gradients).
  const Mat2& gradient_transform(std::size_t t) const { return inv_t_[t]; }

  void check_element(std::size_t t) const {
    if (t >= num_elements()) throw InvalidArgument("element id " + std::to_string(t) + " out of range");
  }

  /// Element coefficients gathered from a free-dof vector (constrained dofs are zero).
  void gather(std::size_t t, std::span<const double> free_values, std::span<double> local) const {
    const auto dofs = element_dofs(t);
    for (std::size_t i = 0; i < dofs.size(); ++i) {
      const int f = free_index_[static_cast<std::size_t>(dofs[i])];
      local[i] = f < 0 ? 0.0 : free_values[static_cast<std::size_t>(f)];
    }
  }

 private:
  void number_dofs() {
    const auto& mesh = *mesh_;
    const std::size_t nv = mesh.num_vertices();
    const std::size_t ne = basis_.edge_nodes();
    const std::size_t ni = basis_.interior_nodes();
    const int p = basis_.degree();

    std::map<Edge, std::size_t> edge_index;
    for (const auto& tri : mesh.triangles())
      for (int e = 0; e < 3; ++e) {
        const auto [a, b] = triangle_edge(tri, e);
        edge_index.emplace(sorted_edge(a, b), 0);
      }
    std::size_t counter = 0;
    for (auto& entry : edge_index) entry.second = counter++;

    const std::size_t edge_base = nv;
    const std::size_t interior_base = nv + edge_index.size() * ne;
    dof_nodes_.assign(interior_base + mesh.num_triangles() * ni, Vec2{});
    for (std::size_t v = 0; v < nv; ++v) dof_nodes_[v] = mesh.vertices()[v];
    for (const auto& [edge, idx] : edge_index)
      for (std::size_t t = 1; t < static_cast<std::size_t>(p); ++t) {
        const double s = static_cast<double>(t) / p;
        dof_nodes_[edge_base + idx * ne + t - 1] =
            (1.0 - s) * mesh.vertex(edge[0]) + s * mesh.vertex(edge[1]);
      }

    const std::size_t nloc = basis_.size();
    element_dofs_.resize(mesh.num_triangles() * nloc);
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
      const auto& tri = mesh.triangle(t);
      int* local = &element_dofs_[t * nloc];
      for (int v = 0; v < 3; ++v) local[v] = tri[v];
      for (int e = 0; e < 3; ++e) {
        const auto [a, b] = triangle_edge(tri, e);
        const std::size_t base = edge_base + edge_index.at(sorted_edge(a, b)) * ne;
        for (std::size_t t2 = 1; t2 <= ne; ++t2) {
          const std::size_t along = a < b ? t2 : static_cast<std::size_t>(p) - t2;
          local[3 + e * ne + t2 - 1] = static_cast<int>(base + along - 1);
        }
      }
      for (std::size_t i = 0; i < ni; ++i) local[3 + 3 * ne + i] = static_cast<int>(interior_base + t * ni + i);
      const auto map = magfe::element_map(mesh, t);
      for (std::size_t i = 3 + 3 * ne; i < nloc; ++i)
        dof_nodes_[static_cast<std::size_t>(local[i])] = map(basis_.node(i));
    }
    edge_index_ = std::move(edge_index);
  }

  void constrain(const std::set<int>& dirichlet_tags) {
    std::vector<char> constrained(num_dofs(), 0);
    const std::size_t ne = basis_.edge_nodes();
    for (const auto& be : mesh_->boundary_edges()) {
      if (!dirichlet_tags.contains(be.tag)) continue;
      const auto [a, b] = be.vertices;
      constrained[static_cast<std::size_t>(a)] = 1;
      constrained[static_cast<std::size_t>(b)] = 1;
      const std::size_t base = mesh_->num_vertices() + edge_index_.at(sorted_edge(a, b)) * ne;
      for (std::size_t i = 0; i < ne; ++i) constrained[base + i] = 1;
    }
    free_index_.assign(num_dofs(), -1);
    num_free_ = 0;
    for (std::size_t d = 0; d < num_dofs(); ++d)
      if (!constrained[d]) free_index_[d] = static_cast<int>(num_free_++);
  }

  void precompute_geometry() {
    maps_.reserve(num_elements());
    inv_t_.reserve(num_elements());
    for (std::size_t t = 0; t < num_elements(); ++t) {
      maps_.push_back(magfe::element_map(*mesh_, t));
      inv_t_.push_back(transpose(inverse(maps_.back().jacobian)));
    }
  }

  std::shared_ptr<const Mesh> mesh_;
  LagrangeBasis basis_;
  std::map<Edge, std::size_t> edge_index_;
  std::vector<int> element_dofs_;
  std::vector<Vec2> dof_nodes_;
  std::vector<int> free_index_;
  std::size_t num_free_ = 0;
  std::vector<ElementMap> maps_;
  std::vector<Mat2> inv_t_;
};

inline FESpace build_space(Mesh mesh, int degree, const std::set<int>& dirichlet_tags) {
  return FESpace(std::make_shared<const Mesh>(std::move(mesh)), degree, dirichlet_tags);
}

struct BasisValues {
  std::vector<double> values;
  std::vector<Vec2> curls;
};

/// Shape values and physical Curl vectors of all local basis functions.
inline BasisValues eval_basis(const FESpace& space, std::size_t element, const Vec2& xi) {
  space.check_element(element);
  BasisValues out;
  out.values.resize(space.local_size());
  std::vector<Vec2> grads(space.local_size());
  space.basis().evaluate(xi, out.values, grads);
  out.curls.reserve(grads.size());
  const Mat2& g = space.gradient_transform(element);
  for (const auto& gr : grads) out.curls.push_back(rotate_cw(g * gr));
  return out;
}

/// Nodal interpolant of f. Throws BoundaryCompatibilityError when f does not
/// vanish (within 1e-10, relative to max(1, max |f|)) at a constrained node.
template <class F>
CoefficientVector interpolate(const FESpace& space, F&& f) {
  std::vector<double> nodal(space.num_dofs());
  double scale = 1.0;
  for (std::size_t d = 0; d < space.num_dofs(); ++d) {
    nodal[d] = f(space.dof_node(d));
    scale = std::max(scale, std::abs(nodal[d]));
  }
  CoefficientVector out{std::vector<double>(space.num_free())};
  for (std::size_t d = 0; d < space.num_dofs(); ++d) {
    if (space.is_constrained(d)) {
      if (std::abs(nodal[d]) > 1e-10 * scale)
        throw BoundaryCompatibilityError("interpolate: function does not vanish at constrained node (" +
                                         std::to_string(space.dof_node(d).x) + ", " +
                                         std::to_string(space.dof_node(d).y) + ")");
      continue;
    }
    out.values[static_cast<std::size_t>(space.free_index(d))] = nodal[d];
  }
  return out;
}

inline void check_conforming(const FESpace& space, const CoefficientVector& coeffs) {
  if (coeffs.size() != space.num_free())
    throw InvalidArgument("coefficient vector has length " + std::to_string(coeffs.size()) + ", space has " +
                          std::to_string(space.num_free()) + " free dofs");
}

/// Curl of the discrete potential at a reference point of an element.
inline Vec2 eval_curl_field(const FESpace& space, const CoefficientVector& coeffs, std::size_t element,
                            const Vec2& xi) {
  check_conforming(space, coeffs);
  const auto basis = eval_basis(space, element, xi);
  std::vector<double> local(space.local_size());
  space.gather(element, coeffs.values, local);
  Vec2 b{};
  for (std::size_t i = 0; i < local.size(); ++i) b += local[i] * basis.curls[i];
  return b;
}

/// Value of the discrete potential at a reference point of an element.
inline double eval_field(const FESpace& space, const CoefficientVector& coeffs, std::size_t element,
                         const Vec2& xi) {
  check_conforming(space, coeffs);
  const auto basis = eval_basis(space, element, xi);
  std::vector<double> local(space.local_size());
  space.gather(element, coeffs.values, local);
  double a = 0.0;
  for (std::size_t i = 0; i < local.size(); ++i) a += local[i] * basis.values[i];
  return a;
}

}  // namespace magfe
