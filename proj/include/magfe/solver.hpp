#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "magfe/assembly.hpp"
#include "magfe/cg.hpp"
#include "magfe/errors.hpp"
#include "magfe/geometry.hpp"
#include "magfe/materials.hpp"

namespace magfe {

struct NewtonConfig {
  /// Backtracking factor: trial steps are 1, rho, rho^2, ...
  double rho = 0.5;
  /// Fraction of the linear decrease required by the Armijo test.
  double sigma = 0.01;
  /// Stop when ||Curl da^n||_h <= tol_increment * ||Curl da^0||_h ...
  double tol_increment = 1e-10;
  /// ... or when ||res^n||_2 <= tol_residual * ||res^0||_2.
  double tol_residual = 1e-10;
  int max_iter = 100;
  int max_backtracks = 60;
  CgSettings cg;
  /// Keep a^0, a^1, ... in the report (needed by the tail diagnostic).
  bool record_iterates = false;
  /// Certified convexity bounds used for the reported q and tau_*.
  std::optional<ConvexityBounds> bounds;

  void validate() const {
    if (!(rho > 0.0 && rho <= 0.5)) throw InvalidArgument("newton: rho must lie in (0, 1/2]");
    if (!(sigma > 0.0 && sigma < 0.5)) throw InvalidArgument("newton: sigma must lie in (0, 1/2)");
    if (!(tol_increment >= 0.0 && tol_residual >= 0.0)) throw InvalidArgument("newton: negative tolerance");
    if (max_iter < 0 || max_backtracks < 0) throw InvalidArgument("newton: negative iteration limit");
  }
};

struct IterationRecord {
  int n = 0;
  double energy = 0.0;
  double residual_norm = 0.0;
  double step = 0.0;
  int backtracks = 0;
  double increment_norm = 0.0;
  int cg_iterations = 0;
  bool cg_converged = true;
};

struct NewtonReport {
  std::string method = "newton";
  std::vector<IterationRecord> iterations;
  bool converged = false;
  std::string stop_reason;
  double final_energy = 0.0;
  double final_residual_norm = 0.0;
  /// Certified-bound diagnostics.
  std::optional<double> gamma;
  std::optional<double> lipschitz;
  std::optional<double> q;
  std::optional<double> tau_star;
  /// a^0, a^1, ..., a^N when recorded.
  std::vector<CoefficientVector> iterates;
  /// Zarantonello only: ||Curl(a^{n+1}-a^n)|| / ||Curl(a^n-a^{n-1})||.
  std::vector<double> contraction_ratios;
  std::optional<double> contraction_bound;
  std::vector<std::string> warnings;

  std::size_t num_iterations() const noexcept { return iterations.size(); }
};

/// Global convergence factor q = 1 - 4 rho sigma (1-sigma) (gamma/L)^3.
inline double newton_contraction_factor(double rho, double sigma, double gamma, double lipschitz) {
  const double ratio = gamma / lipschitz;
  return 1.0 - 4.0 * rho * sigma * (1.0 - sigma) * ratio * ratio * ratio;
}

/// Guaranteed Armijo step tau_* = 2 rho (1-sigma) gamma / L.
inline double newton_step_floor(double rho, double sigma, double gamma, double lipschitz) {
  return 2.0 * rho * (1.0 - sigma) * gamma / lipschitz;
}

/// Contraction factor sqrt(1 - 2 tau gamma + tau^2 L^2) of the Zarantonello map.
inline double zarantonello_contraction(double tau, double gamma, double lipschitz) {
  // (1 - tau gamma)^2 + tau^2 (L^2 - gamma^2) avoids cancellation near tau = 1/L
  const double d = 1.0 - tau * gamma;
  return std::sqrt(std::max(0.0, d * d + tau * tau * (lipschitz - gamma) * (lipschitz + gamma)));
}

/// Worst-case gamma and L over all laws of the problem. Laws without declared
/// bounds make the result empty; pulled-back laws are bounded over the
/// quadrature points of their elements.
inline std::optional<ConvexityBounds> certified_bounds(const Problem& problem) {
  ConvexityBounds out{std::numeric_limits<double>::infinity(), 0.0, std::nullopt};
  std::map<const MaterialLaw*, std::vector<Vec2>> points;
  const auto& rule = problem.rule();
  for (std::size_t t = 0; t < problem.mesh().num_triangles(); ++t) {
    auto& pts = points[&problem.law(t)];
    if (dynamic_cast<const PullbackLaw*>(&problem.law(t)) == nullptr) continue;
    const auto& map = problem.space().element_map(t);
    for (const auto& xi : rule.points) pts.push_back(map(xi));
  }
  for (const auto& [law, pts] : points) {
    std::optional<ConvexityBounds> b;
    if (const auto* pb = dynamic_cast<const PullbackLaw*>(law))
      b = pb->bounds_over(pts);
    else
      b = law->declared_bounds();
    if (!b) return std::nullopt;
    out.gamma = std::min(out.gamma, b->gamma);
    out.lipschitz = std::max(out.lipschitz, b->lipschitz);
  }
  if (points.empty()) return std::nullopt;
  return out;
}

namespace detail {

inline double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline void attach_bounds(NewtonReport& report, const NewtonConfig& cfg) {
  if (!cfg.bounds) return;
  report.gamma = cfg.bounds->gamma;
  report.lipschitz = cfg.bounds->lipschitz;
  report.q = newton_contraction_factor(cfg.rho, cfg.sigma, cfg.bounds->gamma, cfg.bounds->lipschitz);
  report.tau_star = newton_step_floor(cfg.rho, cfg.sigma, cfg.bounds->gamma, cfg.bounds->lipschitz);
}

/// Energies closer than this are indistinguishable in floating point.
inline double energy_rounding(const EnergyValue& e) { return 64.0 * std::numeric_limits<double>::epsilon() * e.magnitude; }

}  // namespace detail

/// Damped Newton method with Armijo backtracking:
///   H(a^n) da^n = -res(a^n),  a^{n+1} = a^n + tau^n da^n,
/// tau^n the largest rho^j with W(a^n + tau da^n) <= W(a^n) + sigma tau res.da^n.
inline std::pair<CoefficientVector, NewtonReport> newton_solve(const Problem& problem, CoefficientVector a,
                                                               const NewtonConfig& cfg = {}) {
  cfg.validate();
  check_conforming(problem.space(), a);
  NewtonReport report;
  detail::attach_bounds(report, cfg);
  if (cfg.record_iterates) report.iterates.push_back(a);

  auto res = problem.residual(a);
  auto energy = problem.energy_value(a);
  const double res0 = detail::norm2(res);
  double inc0 = 0.0;

  for (int n = 0;; ++n) {
    const double res_norm = detail::norm2(res);
    if (res_norm == 0.0 || (n > 0 && res_norm <= cfg.tol_residual * res0)) {
      report.converged = true;
      report.stop_reason = "residual";
      break;
    }
    if (n >= cfg.max_iter) {
      report.stop_reason = "max_iter";
      break;
    }

    const auto hessian = problem.hessian(a);
    std::vector<double> rhs(res.size());
    for (std::size_t i = 0; i < res.size(); ++i) rhs[i] = -res[i];
    const auto cg = solve_cg(hessian, rhs, cfg.cg);
    const auto& delta = cg.x;
    const double inc = problem.curl_norm(delta);
    if (n == 0) inc0 = inc;
    if (inc == 0.0) {
      report.converged = true;
      report.stop_reason = "increment";
      break;
    }

    double slope = 0.0;
    for (std::size_t i = 0; i < res.size(); ++i) slope += res[i] * delta[i];

    const double slack = detail::energy_rounding(energy);
    double tau = 1.0;
    int backtracks = 0;
    CoefficientVector trial{std::vector<double>(a.size())};
    EnergyValue trial_energy;
    for (;;) {
      for (std::size_t i = 0; i < a.size(); ++i) trial.values[i] = a.values[i] + tau * delta[i];
      trial_energy = problem.energy_value(trial);
      if (trial_energy.value <= energy.value + cfg.sigma * tau * slope + slack) break;
      if (++backtracks > cfg.max_backtracks)
        throw LineSearchFailure("newton: no Armijo step after " + std::to_string(cfg.max_backtracks) +
                                " backtracks at iteration " + std::to_string(n) + " (slope " +
                                std::to_string(slope) + ", energy " + std::to_string(energy.value) + ")");
      tau *= cfg.rho;
    }

    report.iterations.push_back({n, energy.value, res_norm, tau, backtracks, inc, cg.iterations, cg.converged});
    if (!cg.converged) report.warnings.push_back("cg not converged at iteration " + std::to_string(n));
    a = std::move(trial);
    energy = trial_energy;
    res = problem.residual(a);
    if (cfg.record_iterates) report.iterates.push_back(a);

    if (inc <= cfg.tol_increment * inc0) {
      report.converged = true;
      report.stop_reason = "increment";
      break;
    }
  }
  report.final_energy = energy.value;
  report.final_residual_norm = detail::norm2(res);
  return {std::move(a), std::move(report)};
}

/// Zarantonello fixed-point iteration
///   <Curl a^{n+1}, Curl v> = <Curl a^n, Curl v> - tau <dw(Curl a^n) - h_s, Curl v>,
/// each step one unit-reluctivity stiffness solve. Uses the tolerances,
/// iteration limit and CG settings of cfg.
inline std::pair<CoefficientVector, NewtonReport> zarantonello_solve(const Problem& problem, double tau,
                                                                     CoefficientVector a,
                                                                     const NewtonConfig& cfg = {}) {
  check_conforming(problem.space(), a);
  if (!(tau > 0.0)) throw InvalidArgument("zarantonello: tau must be positive");
  NewtonReport report;
  report.method = "zarantonello";
  if (cfg.bounds) {
    report.gamma = cfg.bounds->gamma;
    report.lipschitz = cfg.bounds->lipschitz;
    report.contraction_bound = zarantonello_contraction(tau, cfg.bounds->gamma, cfg.bounds->lipschitz);
    const double tau_max = 2.0 * cfg.bounds->gamma / (cfg.bounds->lipschitz * cfg.bounds->lipschitz);
    if (tau >= tau_max)
      report.warnings.push_back("tau = " + std::to_string(tau) + " is outside (0, 2 gamma / L^2) = (0, " +
                                std::to_string(tau_max) + "); contraction is not guaranteed");
  }
  if (cfg.record_iterates) report.iterates.push_back(a);

  auto res = problem.residual(a);
  const double res0 = detail::norm2(res);
  double inc0 = 0.0, previous = 0.0;
  for (int n = 0;; ++n) {
    const double res_norm = detail::norm2(res);
    if (res_norm == 0.0 || (n > 0 && res_norm <= cfg.tol_residual * res0)) {
      report.converged = true;
      report.stop_reason = "residual";
      break;
    }
    if (n >= cfg.max_iter) {
      report.stop_reason = "max_iter";
      break;
    }
    std::vector<double> rhs(res.size());
    for (std::size_t i = 0; i < res.size(); ++i) rhs[i] = -tau * res[i];
    const auto cg = solve_cg(problem.stiffness(), rhs, cfg.cg);
    const double inc = problem.curl_norm(cg.x);
    if (n == 0) inc0 = inc;
    if (n > 0 && previous > 0.0) report.contraction_ratios.push_back(inc / previous);
    previous = inc;

    report.iterations.push_back({n, problem.energy_value(a).value, res_norm, tau, 0, inc, cg.iterations, cg.converged});
    for (std::size_t i = 0; i < a.size(); ++i) a.values[i] += cg.x[i];
    res = problem.residual(a);
    if (cfg.record_iterates) report.iterates.push_back(a);
    if (inc <= cfg.tol_increment * inc0) {
      report.converged = true;
      report.stop_reason = "increment";
      break;
    }
  }
  report.final_energy = problem.energy_value(a).value;
  report.final_residual_norm = detail::norm2(res);
  return {std::move(a), std::move(report)};
}

struct TailSummary {
  /// First iteration from which every step was a full step without backtracking.
  std::size_t tail_start = 0;
  /// e_n = ||Curl(a^n - a_ref)||_{L2}, n = 0..N.
  std::vector<double> errors;
  /// (n, e_{n+1} / e_n^2) for tail iterations whose next error is above the noise floor.
  std::vector<std::pair<std::size_t, double>> ratios;
  /// Largest of the last three ratios.
  double m_hat = 0.0;
  /// Last three ratios finite and within a factor 10 of each other.
  bool bounded = false;
  /// e_1 already at the noise floor.
  bool immediate = false;
  std::string notice;
};

/// Local quadratic convergence check against a reference solution. Errors are
/// exact L2 norms because the rule integrates the squared Curl exactly.
/// Ratios whose numerator lies below noise_floor * e_0 are dropped.
inline TailSummary quadratic_tail_diagnostic(const NewtonReport& report, const CoefficientVector& reference,
                                             const Problem& problem, double noise_floor = 1e-10) {
  if (report.iterates.empty()) throw InvalidArgument("tail diagnostic: report has no recorded iterates");
  TailSummary out;
  for (const auto& it : report.iterates) {
    std::vector<double> diff(it.size());
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = it.values[i] - reference.values[i];
    out.errors.push_back(problem.curl_norm(diff));
  }
  const auto& steps = report.iterations;
  out.tail_start = steps.size();
  while (out.tail_start > 0 && steps[out.tail_start - 1].step == 1.0 && steps[out.tail_start - 1].backtracks == 0)
    --out.tail_start;

  const double floor = noise_floor * out.errors.front();
  out.immediate = out.errors.size() > 1 && out.errors[1] <= floor;
  for (std::size_t n = out.tail_start; n + 1 < out.errors.size(); ++n)
    if (out.errors[n + 1] > floor && out.errors[n] > 0.0)
      out.ratios.emplace_back(n, out.errors[n + 1] / (out.errors[n] * out.errors[n]));

  if (out.ratios.size() < 3) {
    out.notice = out.immediate ? "converged immediately" : "insufficient data: fewer than 3 tail ratios";
    return out;
  }
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (std::size_t i = out.ratios.size() - 3; i < out.ratios.size(); ++i) {
    lo = std::min(lo, out.ratios[i].second);
    hi = std::max(hi, out.ratios[i].second);
  }
  out.m_hat = hi;
  out.bounded = std::isfinite(hi) && lo > 0.0 && hi <= 10.0 * lo;
  return out;
}

}  // namespace magfe
