#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "magfe/errors.hpp"
#include "magfe/fe_space.hpp"
#include "magfe/materials.hpp"
#include "magfe/mesh.hpp"
#include "magfe/quadrature.hpp"
#include "magfe/sparse.hpp"

namespace magfe {

/// No source term; fields are driven by magnetization only.
struct NoSource {};

/// Source field h_s (A/m), paired with Curl v.
struct FluxSource {
  std::function<Vec2(const Vec2& x, int region)> field;
};

/// Out-of-plane current density j_s (A/m^2), paired with v.
struct CurrentSource {
  std::function<double(const Vec2& x, int region)> density;
};

using Source = std::variant<NoSource, FluxSource, CurrentSource>;

struct ProblemSpec {
  std::shared_ptr<const Mesh> mesh;
  /// Curl degree k; the potential lives in P_{k+1}.
  int k = 1;
  MaterialMap materials;
  Source source = NoSource{};
  std::set<int> dirichlet_tags = {1};
  /// Exactness of the rule used for every term; defaults to max(2k, 1).
  std::optional<int> rule_degree;
};

/// Discrete energy value together with the sum of magnitudes of its terms,
/// which bounds the rounding error of the value.
struct EnergyValue {
  double value = 0.0;
  double magnitude = 0.0;
};

/// Quadrature-based Galerkin problem: energy
///   W(a) = <w(Curl a), 1>_h - <h_s, Curl a>_h     (or - <j_s, a>_h),
/// its gradient over the free dofs and its Hessian.
///
/// Construction validates the material map and caches the element tables,
/// the source load vector and the sparsity pattern; a Problem is immutable.
class Problem {
 public:
  explicit Problem(ProblemSpec spec)
      : spec_(std::move(spec)),
        space_(std::make_shared<const FESpace>(checked_mesh(spec_.mesh), spec_.k + 1, spec_.dirichlet_tags)),
        rule_(&rule_for_degree(spec_.rule_degree.value_or(std::max(2 * spec_.k, 1)))),
        tab_(tabulate(space_->basis(), *rule_)) {
    const auto& mesh = space_->mesh();
    element_law_.reserve(mesh.num_triangles());
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
      const auto it = spec_.materials.find(mesh.region(t));
      if (it == spec_.materials.end() || !it->second)
        throw ConfigurationError("no material assigned to region " + std::to_string(mesh.region(t)));
      element_law_.push_back(it->second.get());
    }
    build_pattern();
    build_load();
    stiffness_ = assemble_matrix([](std::size_t, std::size_t) { return Mat2::identity(); });
  }

  const ProblemSpec& spec() const noexcept { return spec_; }
  const FESpace& space() const noexcept { return *space_; }
  std::shared_ptr<const FESpace> space_ptr() const noexcept { return space_; }
  const Mesh& mesh() const noexcept { return space_->mesh(); }
  const QuadratureRule& rule() const noexcept { return *rule_; }
  int k() const noexcept { return spec_.k; }
  std::size_t num_free() const noexcept { return space_->num_free(); }
  const MaterialLaw& law(std::size_t element) const { return *element_law_[element]; }

  /// Source pairing l_i = <h_s, Curl phi_i>_h (or <j_s, phi_i>_h).
  const std::vector<double>& load() const noexcept { return load_; }
  /// Unit-reluctivity stiffness K_ij = <Curl phi_j, Curl phi_i>_h.
  const SparseMatrix& stiffness() const noexcept { return stiffness_; }

  CoefficientVector zero() const { return {std::vector<double>(num_free(), 0.0)}; }

  /// ||Curl v||_h for a free-dof vector.
  double curl_norm(std::span<const double> v) const { return std::sqrt(std::max(stiffness_.bilinear(v, v), 0.0)); }

  /// Physical quadrature points of an element and Curl of the field there.
  void element_flux(std::size_t t, std::span<const double> coeffs, std::span<Vec2> points,
                    std::span<Vec2> flux) const {
    std::vector<double> local(space_->local_size());
    space_->gather(t, coeffs, local);
    const auto& map = space_->element_map(t);
    const Mat2& g = space_->gradient_transform(t);
    for (std::size_t q = 0; q < rule_->size(); ++q) {
      points[q] = map(rule_->points[q]);
      Vec2 grad{};
      for (std::size_t i = 0; i < local.size(); ++i) grad += local[i] * tab_.gradient(q, i);
      flux[q] = rotate_cw(g * grad);
    }
  }

  EnergyValue energy_value(const CoefficientVector& coeffs) const {
    check_conforming(*space_, coeffs);
    EnergyValue out;
    std::vector<Vec2> points(rule_->size()), flux(rule_->size());
    for (std::size_t t = 0; t < space_->num_elements(); ++t) {
      element_flux(t, coeffs.values, points, flux);
      double local = 0.0, local_mag = 0.0;
      for (std::size_t q = 0; q < rule_->size(); ++q) {
        const double w = element_law_[t]->energy(points[q], flux[q]);
        local += rule_->weights[q] * w;
        local_mag += rule_->weights[q] * std::abs(w);
      }
      const double area = space_->element_map(t).area;
      out.value += local * area;
      out.magnitude += local_mag * area;
    }
    double source = 0.0, source_mag = 0.0;
    for (std::size_t i = 0; i < load_.size(); ++i) {
      source += load_[i] * coeffs.values[i];
      source_mag += std::abs(load_[i] * coeffs.values[i]);
    }
    out.value -= source;
    out.magnitude += source_mag;
    return out;
  }

  std::vector<double> residual(const CoefficientVector& coeffs) const {
    check_conforming(*space_, coeffs);
    std::vector<double> res(num_free(), 0.0);
    const std::size_t nloc = space_->local_size();
    std::vector<double> local(nloc);
    std::vector<Vec2> points(rule_->size()), flux(rule_->size()), curls(nloc);
    for (std::size_t t = 0; t < space_->num_elements(); ++t) {
      element_flux(t, coeffs.values, points, flux);
      std::fill(local.begin(), local.end(), 0.0);
      const Mat2& g = space_->gradient_transform(t);
      for (std::size_t q = 0; q < rule_->size(); ++q) {
        const Vec2 h = element_law_[t]->evaluate(points[q], flux[q]).field;
        for (std::size_t i = 0; i < nloc; ++i) local[i] += rule_->weights[q] * dot(h, rotate_cw(g * tab_.gradient(q, i)));
      }
      const double area = space_->element_map(t).area;
      const auto dofs = space_->element_dofs(t);
      for (std::size_t i = 0; i < nloc; ++i) {
        const int f = space_->free_index(static_cast<std::size_t>(dofs[i]));
        if (f >= 0) res[static_cast<std::size_t>(f)] += local[i] * area;
      }
    }
    for (std::size_t i = 0; i < res.size(); ++i) res[i] -= load_[i];
    return res;
  }

  SparseMatrix hessian(const CoefficientVector& coeffs) const {
    check_conforming(*space_, coeffs);
    std::vector<Vec2> points(rule_->size()), flux(rule_->size());
    std::vector<Mat2> reluctivity(rule_->size());
    std::size_t current = static_cast<std::size_t>(-1);
    return assemble_matrix([&](std::size_t t, std::size_t q) {
      if (t != current) {
        element_flux(t, coeffs.values, points, flux);
        for (std::size_t p = 0; p < rule_->size(); ++p)
          reluctivity[p] = element_law_[t]->evaluate(points[p], flux[p]).reluctivity;
        current = t;
      }
      return reluctivity[q];
    });
  }

 private:
  static std::shared_ptr<const Mesh> checked_mesh(const std::shared_ptr<const Mesh>& mesh) {
    if (!mesh) throw ConfigurationError("problem: no mesh");
    return mesh;
  }

  /// Visits free (row, col) pairs of every element in assembly order.
  template <class Visit>
  void for_each_entry(Visit&& visit) const {
    const std::size_t nloc = space_->local_size();
    for (std::size_t t = 0; t < space_->num_elements(); ++t) {
      const auto dofs = space_->element_dofs(t);
      for (std::size_t i = 0; i < nloc; ++i) {
        const int fi = space_->free_index(static_cast<std::size_t>(dofs[i]));
        if (fi < 0) continue;
        for (std::size_t j = 0; j < nloc; ++j) {
          const int fj = space_->free_index(static_cast<std::size_t>(dofs[j]));
          if (fj >= 0) visit(t, i, j, static_cast<std::size_t>(fi), static_cast<std::size_t>(fj));
        }
      }
    }
  }

  void build_pattern() {
    std::vector<std::pair<std::size_t, std::size_t>> entries;
    for_each_entry([&](std::size_t, std::size_t, std::size_t, std::size_t fi, std::size_t fj) { entries.emplace_back(fi, fj); });
    pattern_ = CooPattern(num_free(), entries);
  }

  /// Assembles <N(t, q) Curl phi_j, Curl phi_i>_h for a symmetric 2x2
  /// coefficient N evaluated element by element, point by point.
  template <class Coefficient>
  SparseMatrix assemble_matrix(Coefficient&& coefficient) const {
    const std::size_t nloc = space_->local_size();
    const std::size_t nq = rule_->size();
    std::vector<double> entry_values;
    entry_values.reserve(pattern_.size());
    std::vector<double> elem(nloc * nloc);
    std::vector<Vec2> curls(nq * nloc);
    std::size_t current = static_cast<std::size_t>(-1);

    for_each_entry([&](std::size_t t, std::size_t i, std::size_t j, std::size_t, std::size_t) {
      if (t != current) {
        const Mat2& g = space_->gradient_transform(t);
        for (std::size_t q = 0; q < nq; ++q)
          for (std::size_t a = 0; a < nloc; ++a) curls[q * nloc + a] = rotate_cw(g * tab_.gradient(q, a));
        std::fill(elem.begin(), elem.end(), 0.0);
        for (std::size_t q = 0; q < nq; ++q) {
          const Mat2 n = coefficient(t, q);
          const double wq = rule_->weights[q];
          for (std::size_t b = 0; b < nloc; ++b) {
            const Vec2 nb = n * curls[q * nloc + b];
            for (std::size_t a = 0; a <= b; ++a) elem[a * nloc + b] += wq * dot(curls[q * nloc + a], nb);
          }
        }
        const double area = space_->element_map(t).area;
        for (std::size_t b = 0; b < nloc; ++b)
          for (std::size_t a = 0; a <= b; ++a) {
            elem[a * nloc + b] *= area;
            elem[b * nloc + a] = elem[a * nloc + b];
          }
        current = t;
      }
      entry_values.push_back(elem[i * nloc + j]);
    });
    return pattern_.assemble(entry_values);
  }

  void build_load() {
    load_.assign(num_free(), 0.0);
    if (std::holds_alternative<NoSource>(spec_.source)) return;
    const auto& mesh = space_->mesh();
    const std::size_t nloc = space_->local_size();
    std::vector<double> local(nloc);
    for (std::size_t t = 0; t < space_->num_elements(); ++t) {
      std::fill(local.begin(), local.end(), 0.0);
      const auto& map = space_->element_map(t);
      const Mat2& g = space_->gradient_transform(t);
      for (std::size_t q = 0; q < rule_->size(); ++q) {
        const Vec2 x = map(rule_->points[q]);
        const double wq = rule_->weights[q];
        if (const auto* hs = std::get_if<FluxSource>(&spec_.source)) {
          const Vec2 h = hs->field(x, mesh.region(t));
          for (std::size_t i = 0; i < nloc; ++i) local[i] += wq * dot(h, rotate_cw(g * tab_.gradient(q, i)));
        } else {
          const double j = std::get<CurrentSource>(spec_.source).density(x, mesh.region(t));
          for (std::size_t i = 0; i < nloc; ++i) local[i] += wq * j * tab_.value(q, i);
        }
      }
      const auto dofs = space_->element_dofs(t);
      for (std::size_t i = 0; i < nloc; ++i) {
        const int f = space_->free_index(static_cast<std::size_t>(dofs[i]));
        if (f >= 0) load_[static_cast<std::size_t>(f)] += local[i] * map.area;
      }
    }
  }

  ProblemSpec spec_;
  std::shared_ptr<const FESpace> space_;
  const QuadratureRule* rule_;
  Tabulation tab_;
  std::vector<const MaterialLaw*> element_law_;
  CooPattern pattern_;
  std::vector<double> load_;
  SparseMatrix stiffness_;
};

inline double assemble_energy(const Problem& problem, const CoefficientVector& coeffs) {
  return problem.energy_value(coeffs).value;
}

/// Component i is <dw(Curl a) - h_s, Curl phi_i>_h: the gradient of W.
inline std::vector<double> assemble_residual(const Problem& problem, const CoefficientVector& coeffs) {
  return problem.residual(coeffs);
}

inline SparseMatrix assemble_hessian(const Problem& problem, const CoefficientVector& coeffs) {
  return problem.hessian(coeffs);
}

}  // namespace magfe
