#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "magfe/errors.hpp"
#include "magfe/small_matrix.hpp"

namespace magfe {

/// Vacuum reluctivity 1/mu0 in m/H.
inline constexpr double vacuum_reluctivity = 1e7 / (4.0 * std::numbers::pi);

/// Energy density, field h = dw/db and differential reluctivity d2w/db2.
struct MaterialResponse {
  double energy = 0.0;
  Vec2 field;
  Mat2 reluctivity;
};

/// Convexity bounds: gamma <= eig(d2w) <= lipschitz; hess_lipschitz bounds the
/// Lipschitz constant of d2w when known.
struct ConvexityBounds {
  double gamma = 0.0;
  double lipschitz = 0.0;
  std::optional<double> hess_lipschitz;
};

/// Energy density w(x, b) of a magnetic material. Implementations are
/// immutable and safe to evaluate concurrently.
class MaterialLaw {
 public:
  virtual ~MaterialLaw() = default;

  virtual MaterialResponse evaluate(const Vec2& x, const Vec2& b) const = 0;
  virtual double energy(const Vec2& x, const Vec2& b) const { return evaluate(x, b).energy; }
  /// Bounds known in closed form, if any.
  virtual std::optional<ConvexityBounds> declared_bounds() const { return std::nullopt; }
  virtual std::string name() const = 0;
};

using MaterialPtr = std::shared_ptr<const MaterialLaw>;

namespace detail {

inline void check_finite(const Vec2& b) {
  if (!std::isfinite(b.x) || !std::isfinite(b.y)) throw InvalidArgument("material: non-finite flux density");
}

}  // namespace detail

/// Radial profile w~(s) of an isotropic law w(b) = w~(|b|).
struct RadialValues {
  double value;       // w~(s)
  double derivative;  // w~'(s)
  double chord;       // w~'(s)/s, with its limit at s = 0
  double curvature;   // w~''(s)
};

/// Isotropic law built from a radial profile. The Hessian has eigenvalue
/// w~''(s) along b and w~'(s)/s across it.
class IsotropicLaw : public MaterialLaw {
 public:
  /// Below this flux magnitude the s -> 0 limits are used.
  static constexpr double small_flux = 1e-12;

  virtual RadialValues radial(double s) const = 0;

  MaterialResponse evaluate(const Vec2&, const Vec2& b) const override {
    detail::check_finite(b);
    const double s = norm(b);
    const auto r = radial(s < small_flux ? 0.0 : s);
    MaterialResponse out;
    out.energy = r.value;
    out.field = r.chord * b;
    out.reluctivity = r.chord * Mat2::identity();
    if (s >= small_flux) {
      const Vec2 e = (1.0 / s) * b;
      out.reluctivity += (r.curvature - r.chord) * Mat2::outer(e, e);
    }
    return out;
  }

  double energy(const Vec2&, const Vec2& b) const override {
    detail::check_finite(b);
    return radial(norm(b)).value;
  }
};

class LinearIsotropic final : public IsotropicLaw {
 public:
  explicit LinearIsotropic(double nu) : nu_(nu) {
    if (!(nu > 0.0)) throw InvalidArgument("LinearIsotropic: reluctivity must be positive");
  }

  RadialValues radial(double s) const override { return {0.5 * nu_ * s * s, nu_ * s, nu_, nu_}; }
  std::optional<ConvexityBounds> declared_bounds() const override { return ConvexityBounds{nu_, nu_, 0.0}; }
  std::string name() const override { return "linear"; }
  double reluctivity() const noexcept { return nu_; }

 private:
  double nu_;
};

/// Coefficients of the C^2-truncated Brauer law
///   w~(s) = k1/(2 k2) exp(k2 s^2) + k3/2 s^2   for s <= s_star,
///   w~(s) = a0 + a1 s + nu0/2 s^2              for s >  s_star.
struct BrauerParams {
  double k1 = 3.8;
  double k2 = 2.17;
  double k3 = 396.2;
  double nu0 = vacuum_reluctivity;
  double s_star = 0.0;
  double a0 = 0.0;
  double a1 = 0.0;
};

/// Differential reluctivity of the exponential branch.
inline double brauer_exp_curvature(double k1, double k2, double k3, double s) {
  return k1 * std::exp(k2 * s * s) * (1.0 + 2.0 * k2 * s * s) + k3;
}

/// Solves k1 exp(k2 s^2)(1 + 2 k2 s^2) + k3 = nu0 for the truncation point by
/// bisection and fixes a0, a1 for C^2 continuity.
inline BrauerParams brauer_build(double k1, double k2, double k3, double nu0) {
  if (!(k1 > 0.0 && k2 > 0.0 && k3 > 0.0)) throw InvalidArgument("brauer_build: k1, k2, k3 must be positive");
  if (!(nu0 > k1 + k3))
    throw NoThresholdError("brauer_build: nu0 must exceed k1 + k3 for a truncation point to exist");

  const auto excess = [&](double s) { return brauer_exp_curvature(k1, k2, k3, s) - nu0; };
  double lo = 0.0;
  double hi = 1.0;
  while (excess(hi) < 0.0) hi *= 2.0;
  while (hi - lo > 1e-12 * hi) {
    const double mid = 0.5 * (lo + hi);
    (excess(mid) < 0.0 ? lo : hi) = mid;
  }
  // lo keeps the exponential branch curvature at or below nu0
  BrauerParams p{k1, k2, k3, nu0, lo, 0.0, 0.0};
  const double s = p.s_star;
  const double e = std::exp(k2 * s * s);
  const double value = k1 / (2.0 * k2) * e + 0.5 * k3 * s * s;
  const double slope = k1 * s * e + k3 * s;
  p.a1 = slope - nu0 * s;
  p.a0 = value - p.a1 * s - 0.5 * nu0 * s * s;
  return p;
}

class BrauerLaw final : public IsotropicLaw {
 public:
  explicit BrauerLaw(const BrauerParams& params) : p_(params) {}
  BrauerLaw() : p_(brauer_build(3.8, 2.17, 396.2, vacuum_reluctivity)) {}

  /// Exponential branch only, without the truncation.
  RadialValues lower_branch(double s) const {
    const double e = std::exp(p_.k2 * s * s);
    const double chord = p_.k1 * e + p_.k3;
    return {p_.k1 / (2.0 * p_.k2) * e + 0.5 * p_.k3 * s * s, chord * s, chord,
            p_.k1 * e * (1.0 + 2.0 * p_.k2 * s * s) + p_.k3};
  }

  /// Quadratic extension only.
  RadialValues upper_branch(double s) const {
    return {p_.a0 + p_.a1 * s + 0.5 * p_.nu0 * s * s, p_.a1 + p_.nu0 * s, p_.a1 / s + p_.nu0, p_.nu0};
  }

  RadialValues radial(double s) const override { return s <= p_.s_star ? lower_branch(s) : upper_branch(s); }

  std::optional<ConvexityBounds> declared_bounds() const override {
    return ConvexityBounds{p_.k1 + p_.k3, p_.nu0, std::nullopt};
  }
  std::string name() const override { return "brauer"; }
  const BrauerParams& params() const noexcept { return p_; }

 private:
  BrauerParams p_;
};

/// w = nu0/2 |b|^2 - m.b, so h = nu0 b - m.
class PermanentMagnet final : public MaterialLaw {
 public:
  PermanentMagnet(double nu0, const Vec2& magnetization) : nu0_(nu0), m_(magnetization) {
    if (!(nu0 > 0.0)) throw InvalidArgument("PermanentMagnet: reluctivity must be positive");
  }

  MaterialResponse evaluate(const Vec2&, const Vec2& b) const override {
    detail::check_finite(b);
    return {0.5 * nu0_ * dot(b, b) - dot(m_, b), nu0_ * b - m_, nu0_ * Mat2::identity()};
  }
  std::optional<ConvexityBounds> declared_bounds() const override { return ConvexityBounds{nu0_, nu0_, 0.0}; }
  std::string name() const override { return "magnet"; }
  const Vec2& magnetization() const noexcept { return m_; }

 private:
  double nu0_;
  Vec2 m_;
};

/// w = 1/2 <N b, b> with N symmetric positive definite.
class AnisotropicLinear final : public MaterialLaw {
 public:
  explicit AnisotropicLinear(const Mat2& tensor) : n_(tensor) {
    if (std::abs(n_.xy - n_.yx) > 1e-12 * max_abs(n_)) throw InvalidArgument("AnisotropicLinear: tensor not symmetric");
    if (!(sym_eigenvalues(n_).min > 0.0)) throw InvalidArgument("AnisotropicLinear: tensor not positive definite");
  }

  MaterialResponse evaluate(const Vec2&, const Vec2& b) const override {
    detail::check_finite(b);
    const Vec2 h = n_ * b;
    return {0.5 * dot(h, b), h, n_};
  }
  std::optional<ConvexityBounds> declared_bounds() const override {
    const auto e = sym_eigenvalues(n_);
    return ConvexityBounds{e.min, e.max, 0.0};
  }
  std::string name() const override { return "anisotropic"; }
  const Mat2& tensor() const noexcept { return n_; }

 private:
  Mat2 n_;
};

/// w = 1/2 <N(x) b, b> with a spatially varying SPD tensor field.
class VariableAnisotropicLinear final : public MaterialLaw {
 public:
  using TensorField = std::function<Mat2(const Vec2&)>;

  explicit VariableAnisotropicLinear(TensorField tensor, std::optional<ConvexityBounds> bounds = std::nullopt)
      : tensor_(std::move(tensor)), bounds_(bounds) {}

  MaterialResponse evaluate(const Vec2& x, const Vec2& b) const override {
    detail::check_finite(b);
    const Mat2 n = tensor_(x);
    const Vec2 h = n * b;
    return {0.5 * dot(h, b), h, n};
  }
  std::optional<ConvexityBounds> declared_bounds() const override { return bounds_; }
  std::string name() const override { return "variable_anisotropic"; }

 private:
  TensorField tensor_;
  std::optional<ConvexityBounds> bounds_;
};

/// Sample set for bound certification.
struct RadialGrid {
  double s_max = 1.0;
  int count = 1000;
  Vec2 x{};
};

struct SamplePoint {
  Vec2 x;
  Vec2 b;
};

using SampleSpec = std::variant<RadialGrid, std::vector<SamplePoint>>;

struct CertifiedBounds {
  double gamma_hat = 0.0;
  double lipschitz_hat = 0.0;
  double hess_lipschitz_hat = 0.0;
  /// Closed-form bounds when the law declares them.
  std::optional<ConvexityBounds> analytic;
};

/// Eigenvalue scan of d2w over the samples, plus a finite-difference estimate
/// of the Hessian Lipschitz constant.
///
/// A radial grid samples b = (s, 0) for s in [0, s_max] and compares
/// neighbours along the ray and under a small rotation; a point cloud
/// compares all pairs sharing the same x.
inline CertifiedBounds certify_bounds(const MaterialLaw& law, const SampleSpec& spec) {
  std::vector<SamplePoint> samples;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  if (const auto* grid = std::get_if<RadialGrid>(&spec)) {
    if (grid->count < 2 || !(grid->s_max > 0.0)) throw InvalidArgument("certify_bounds: empty radial grid");
    const double angle = 1e-3;
    const auto n = static_cast<std::size_t>(grid->count);
    for (std::size_t i = 0; i < n; ++i) {
      const double s = grid->s_max * static_cast<double>(i) / static_cast<double>(n - 1);
      samples.push_back({grid->x, {s, 0.0}});
      samples.push_back({grid->x, {s * std::cos(angle), s * std::sin(angle)}});
      pairs.emplace_back(2 * i, 2 * i + 1);
      if (i > 0) pairs.emplace_back(2 * (i - 1), 2 * i);
    }
  } else {
    samples = std::get<std::vector<SamplePoint>>(spec);
    if (samples.empty()) throw InvalidArgument("certify_bounds: empty sample set");
    for (std::size_t i = 0; i < samples.size(); ++i)
      for (std::size_t j = i + 1; j < samples.size(); ++j)
        if (samples[i].x == samples[j].x) pairs.emplace_back(i, j);
  }

  CertifiedBounds out;
  out.gamma_hat = std::numeric_limits<double>::infinity();
  out.lipschitz_hat = -std::numeric_limits<double>::infinity();
  std::vector<Mat2> hessians;
  hessians.reserve(samples.size());
  for (const auto& sp : samples) {
    hessians.push_back(law.evaluate(sp.x, sp.b).reluctivity);
    const auto e = sym_eigenvalues(hessians.back());
    out.gamma_hat = std::min(out.gamma_hat, e.min);
    out.lipschitz_hat = std::max(out.lipschitz_hat, e.max);
  }
  for (const auto& [i, j] : pairs) {
    const double db = norm(samples[i].b - samples[j].b);
    if (db > 0.0) out.hess_lipschitz_hat = std::max(out.hess_lipschitz_hat, sym_norm(hessians[i] - hessians[j]) / db);
  }
  out.analytic = law.declared_bounds();
  return out;
}

/// Region tag -> law. w(x, .) is piecewise in x through the mesh regions.
using MaterialMap = std::map<int, MaterialPtr>;

}  // namespace magfe
