#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <utility>

#include "magfe/errors.hpp"
#include "magfe/materials.hpp"
#include "magfe/small_matrix.hpp"

namespace magfe {

/// Smooth orientation-preserving map from the reference domain to the
/// physical domain, x' = phi(x), with Jacobian F = D phi.
struct DomainMap {
  std::string name;
  std::function<Vec2(const Vec2&)> phi;
  std::function<Mat2(const Vec2&)> jacobian;

  double det_jacobian(const Vec2& x) const { return det(jacobian(x)); }

  /// F(x) and J(x); throws OrientationError unless J > 0.
  std::pair<Mat2, double> checked_jacobian(const Vec2& x) const {
    const Mat2 f = jacobian(x);
    const double j = det(f);
    if (!(j > 0.0))
      throw OrientationError("map '" + name + "' is not orientation preserving at (" + std::to_string(x.x) + ", " +
                             std::to_string(x.y) + ")");
    return {f, j};
  }
};

inline DomainMap identity_map() {
  return {"identity", [](const Vec2& x) { return x; }, [](const Vec2&) { return Mat2::identity(); }};
}

inline DomainMap affine_map(const Mat2& matrix, const Vec2& shift) {
  return {"affine", [=](const Vec2& x) { return matrix * x + shift; }, [=](const Vec2&) { return matrix; }};
}

/// Maps the unit square onto the quarter annulus r_inner <= r <= r_outer,
/// 0 <= theta <= pi/2, with r linear in x and theta linear in y.
inline DomainMap quarter_annulus_map(double r_inner, double r_outer) {
  if (!(r_inner > 0.0 && r_outer > r_inner)) throw InvalidArgument("quarter_annulus: need 0 < r_inner < r_outer");
  const double dr = r_outer - r_inner;
  const double dtheta = 0.5 * std::numbers::pi;
  return {"quarter_annulus",
          [=](const Vec2& x) {
            const double r = r_inner + dr * x.x;
            const double t = dtheta * x.y;
            return Vec2{r * std::cos(t), r * std::sin(t)};
          },
          [=](const Vec2& x) {
            const double r = r_inner + dr * x.x;
            const double t = dtheta * x.y;
            const double c = std::cos(t), s = std::sin(t);
            return Mat2{dr * c, -r * dtheta * s, dr * s, r * dtheta * c};
          }};
}

/// Largest relative deviation between F and central differences of phi.
inline double jacobian_consistency(const DomainMap& map, std::span<const Vec2> points, double step = 1e-6) {
  double worst = 0.0;
  for (const auto& x : points) {
    const Vec2 dx = (1.0 / (2.0 * step)) * (map.phi(x + Vec2{step, 0.0}) - map.phi(x - Vec2{step, 0.0}));
    const Vec2 dy = (1.0 / (2.0 * step)) * (map.phi(x + Vec2{0.0, step}) - map.phi(x - Vec2{0.0, step}));
    const Mat2 f = map.jacobian(x);
    worst = std::max(worst, max_abs(f - Mat2::columns(dx, dy)) / std::max(max_abs(f), 1e-300));
  }
  return worst;
}

/// Piola transform of the flux density: b' = F b / J at x' = phi(x).
inline Vec2 pushforward_b(const DomainMap& map, const Vec2& x, const Vec2& b) {
  const auto [f, j] = map.checked_jacobian(x);
  return (1.0 / j) * (f * b);
}

/// Reference-domain law w(x, b) = J w'(phi(x), F b / J).
class PullbackLaw final : public MaterialLaw {
 public:
  PullbackLaw(DomainMap map, MaterialPtr physical) : map_(std::move(map)), physical_(std::move(physical)) {
    if (!physical_) throw InvalidArgument("PullbackLaw: null physical law");
  }

  MaterialResponse evaluate(const Vec2& x, const Vec2& b) const override {
    detail::check_finite(b);
    const auto [f, j] = map_.checked_jacobian(x);
    const auto phys = physical_->evaluate(map_.phi(x), (1.0 / j) * (f * b));
    const Mat2 ft = transpose(f);
    return {j * phys.energy, ft * phys.field, (1.0 / j) * (ft * phys.reluctivity * f)};
  }

  std::string name() const override { return "pullback(" + physical_->name() + ")"; }
  const DomainMap& map() const noexcept { return map_; }
  const MaterialPtr& physical() const noexcept { return physical_; }

  /// Physical bounds rescaled by the extremal singular values of F over the
  /// given reference points: eig((1/J) F^T H' F) lies in
  /// [gamma' smin^2 / J, L' smax^2 / J]. Not necessarily tight.
  std::optional<ConvexityBounds> bounds_over(std::span<const Vec2> points) const {
    const auto phys = physical_->declared_bounds();
    if (!phys || points.empty()) return std::nullopt;
    ConvexityBounds out{std::numeric_limits<double>::infinity(), 0.0, std::nullopt};
    for (const auto& x : points) {
      const auto [f, j] = map_.checked_jacobian(x);
      const auto sv = singular_values(f);
      out.gamma = std::min(out.gamma, phys->gamma * sv.min * sv.min / j);
      out.lipschitz = std::max(out.lipschitz, phys->lipschitz * sv.max * sv.max / j);
    }
    return out;
  }

 private:
  DomainMap map_;
  MaterialPtr physical_;
};

inline MaterialPtr pullback_material(const DomainMap& map, MaterialPtr physical) {
  return std::make_shared<const PullbackLaw>(map, std::move(physical));
}

/// Reference-domain source h_s(x) = F(x)^T h_s'(phi(x)).
inline std::function<Vec2(const Vec2&)> pullback_source(const DomainMap& map,
                                                        std::function<Vec2(const Vec2&)> physical) {
  return [map, physical = std::move(physical)](const Vec2& x) {
    const auto [f, j] = map.checked_jacobian(x);
    return transpose(f) * physical(map.phi(x));
  };
}

}  // namespace magfe
