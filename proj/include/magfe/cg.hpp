#pragma once

#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "magfe/errors.hpp"
#include "magfe/sparse.hpp"

namespace magfe {

struct CgSettings {
  double rel_tol = 1e-12;
  int max_iter = 20000;
  bool jacobi = true;
  /// Throw SolverFailure instead of returning an unconverged result.
  bool strict = false;
};

struct CgResult {
  std::vector<double> x;
  int iterations = 0;
  /// ||A x - b|| / ||b|| of the returned iterate.
  double rel_residual = 0.0;
  bool converged = false;
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

}  // namespace detail

/// Preconditioned conjugate gradients for a symmetric positive definite
/// matrix, started from zero.
inline CgResult solve_cg(const SparseMatrix& a, std::span<const double> rhs, const CgSettings& cfg = {}) {
  const std::size_t n = a.rows();
  if (rhs.size() != n) throw InvalidArgument("solve_cg: right-hand side has wrong length");

  CgResult out;
  out.x.assign(n, 0.0);
  const double rhs_norm = std::sqrt(detail::dot(rhs, rhs));
  if (rhs_norm == 0.0) {
    out.converged = true;
    return out;
  }

  std::vector<double> inv_diag(n, 1.0);
  if (cfg.jacobi) {
    const auto d = a.diagonal();
    for (std::size_t i = 0; i < n; ++i) {
      if (!(d[i] > 0.0)) throw SolverFailure("solve_cg: non-positive diagonal entry, matrix is not SPD");
      inv_diag[i] = 1.0 / d[i];
    }
  }

  std::vector<double> r(n), z(n), p(n), q(n);
  const auto true_residual = [&] {
    a.multiply(out.x, q);
    for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - q[i];
    return std::sqrt(detail::dot(r, r)) / rhs_norm;
  };

  // Restart from the true residual when the recursive one has drifted below
  // the tolerance without the iterate meeting it.
  constexpr int max_restarts = 3;
  out.rel_residual = 1.0;
  for (int restart = 0; restart <= max_restarts && out.iterations < cfg.max_iter; ++restart) {
    if (restart > 0) out.rel_residual = true_residual();
    else r.assign(rhs.begin(), rhs.end());
    for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    p = z;
    double rz = detail::dot(r, z);

    while (out.iterations < cfg.max_iter) {
      a.multiply(p, q);
      const double pq = detail::dot(p, q);
      if (!(pq > 0.0)) throw SolverFailure("solve_cg: matrix is not positive definite");
      const double alpha = rz / pq;
      for (std::size_t i = 0; i < n; ++i) {
        out.x[i] += alpha * p[i];
        r[i] -= alpha * q[i];
      }
      ++out.iterations;
      if (std::sqrt(detail::dot(r, r)) <= cfg.rel_tol * rhs_norm) break;

      for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
      const double rz_new = detail::dot(r, z);
      const double beta = rz_new / rz;
      rz = rz_new;
      for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    out.rel_residual = true_residual();
    if (out.rel_residual <= cfg.rel_tol) break;
  }
  out.converged = out.rel_residual <= cfg.rel_tol;
  if (!out.converged && cfg.strict)
    throw SolverFailure("solve_cg: no convergence after " + std::to_string(out.iterations) +
                        " iterations (relative residual " + std::to_string(out.rel_residual) + ")");
  return out;
}

}  // namespace magfe
