#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <type_traits>
#include <vector>

#include "magfe/errors.hpp"
#include "magfe/mesh.hpp"
#include "magfe/small_matrix.hpp"

namespace magfe {

/// Positive-weight rule on the reference triangle (0,0),(1,0),(0,1).
/// Weights sum to one, so the integral over an element T is
/// |T| * sum_j w_j f(x_j).
struct QuadratureRule {
  int degree = 0;
  std::vector<Vec2> points;
  std::vector<double> weights;

  std::size_t size() const noexcept { return points.size(); }
};

inline constexpr int max_rule_degree = 8;

namespace detail {

class RuleBuilder {
 public:
  explicit RuleBuilder(int degree) { rule_.degree = degree; }

  RuleBuilder& centroid(double w) {
    add(1.0 / 3.0, 1.0 / 3.0, w);
    return *this;
  }
  /// Orbit of barycentric (a, a, 1-2a).
  RuleBuilder& orbit3(double a, double w) {
    const double c = 1.0 - 2.0 * a;
    add(a, a, w);
    add(c, a, w);
    add(a, c, w);
    return *this;
  }
  /// Orbit of barycentric (a, b, 1-a-b).
  RuleBuilder& orbit6(double a, double b, double w) {
    const double c = 1.0 - a - b;
    add(a, b, w);
    add(b, a, w);
    add(b, c, w);
    add(c, b, w);
    add(c, a, w);
    add(a, c, w);
    return *this;
  }
  QuadratureRule build() { return std::move(rule_); }

 private:
  void add(double x, double y, double w) {
    rule_.points.push_back({x, y});
    rule_.weights.push_back(w);
  }
  QuadratureRule rule_;
};

// Symmetric rules (Dunavant tables for degrees 4..8), weights normalized to one.
inline const std::array<QuadratureRule, 6>& stored_rules() {
  static const std::array<QuadratureRule, 6> rules = {
      RuleBuilder(1).centroid(1.0).build(),
      RuleBuilder(2).orbit3(0.5, 1.0 / 3.0).build(),
      RuleBuilder(4)
          .orbit3(0.44594849091596488631832925388305, 0.22338158967801146569500700843312)
          .orbit3(0.09157621350977074345957146340220, 0.10995174365532186763832632490021)
          .build(),
      RuleBuilder(5)
          .centroid(0.225)
          .orbit3(0.47014206410511508977044120951345, 0.13239415278850618073764938783315)
          .orbit3(0.10128650732345633880098736191512, 0.12593918054482715259568394550018)
          .build(),
      RuleBuilder(6)
          .orbit3(0.24928674517091042129163855310702, 0.11678627572637936602528961138558)
          .orbit3(0.06308901449150222834033160287082, 0.05084490637020681692093680910686)
          .orbit6(0.31035245103378440541660773395655, 0.63650249912139864723014259441205,
                  0.08285107561837357519355345642044)
          .build(),
      RuleBuilder(8)
          .centroid(0.14431560767778716825109111048906)
          .orbit3(0.17056930775176020662229350149146, 0.10321737053471825028179155029212)
          .orbit3(0.05054722831703097545842355059660, 0.03245849762319808031092592834178)
          .orbit3(0.45929258829272315602881551449417, 0.09509163426728462479389610438858)
          .orbit6(0.26311282963463811342178578628464, 0.72849239295540428124100037917606,
                  0.02723031417443499426484469007390)
          .build(),
  };
  return rules;
}

}  // namespace detail

/// All stored rules in increasing degree.
inline std::span<const QuadratureRule> stored_rules() { return detail::stored_rules(); }

/// Smallest stored rule whose exactness is at least `degree`.
inline const QuadratureRule& rule_for_degree(int degree) {
  if (degree < 0) throw InvalidArgument("rule_for_degree: negative degree");
  for (const auto& rule : detail::stored_rules())
    if (rule.degree >= degree) return rule;
  throw UnsupportedDegree(degree, max_rule_degree);
}

/// Affine map of a mesh triangle: x = origin + jacobian * xi.
struct ElementMap {
  Vec2 origin;
  Mat2 jacobian;
  double area = 0.0;

  Vec2 operator()(const Vec2& xi) const { return origin + jacobian * xi; }
  Vec2 to_reference(const Vec2& x) const { return inverse(jacobian) * (x - origin); }
};

inline ElementMap element_map(const Mesh& mesh, std::size_t t) {
  const auto& tri = mesh.triangle(t);
  const Vec2 p0 = mesh.vertex(tri[0]);
  const Mat2 jac = Mat2::columns(mesh.vertex(tri[1]) - p0, mesh.vertex(tri[2]) - p0);
  return {p0, jac, 0.5 * det(jac)};
}

namespace detail {

template <class F>
decltype(auto) call_point_function(F& f, std::size_t element, const Vec2& x) {
  if constexpr (std::is_invocable_v<F&, std::size_t, const Vec2&>)
    return f(element, x);
  else
    return f(x);
}

}  // namespace detail

/// Mesh-wide discrete inner product sum_T sum_j u(x_Tj) v(x_Tj) w_j |T|.
///
/// u and v are callable as f(x) or f(element, x) and may return scalars or
/// Vec2; elements are summed in index order, points in rule order.
template <class U, class V>
double discrete_inner_product(const Mesh& mesh, const QuadratureRule& rule, U&& u, V&& v) {
  double sum = 0.0;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto map = element_map(mesh, t);
    double local = 0.0;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const Vec2 x = map(rule.points[q]);
      const auto uq = detail::call_point_function(u, t, x);
      const auto vq = detail::call_point_function(v, t, x);
      if constexpr (std::is_same_v<std::decay_t<decltype(uq)>, Vec2>)
        local += rule.weights[q] * dot(uq, vq);
      else
        local += rule.weights[q] * uq * vq;
    }
    sum += local * map.area;
  }
  return sum;
}

}  // namespace magfe
