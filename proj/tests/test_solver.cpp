#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "magfe/solver.hpp"

using namespace magfe;

namespace {

constexpr double pi = std::numbers::pi;

// Curl of a = (1.5/pi) sin(pi x) sin(pi y); peak |b| = 1.5.
Vec2 manufactured_b(const Vec2& x) {
  return {1.5 * std::sin(pi * x.x) * std::cos(pi * x.y), -1.5 * std::cos(pi * x.x) * std::sin(pi * x.y)};
}

Problem manufactured_problem(int n, int k, MaterialPtr law) {
  const FluxSource hs{[law](const Vec2& x, int) { return law->evaluate(x, manufactured_b(x)).field; }};
  return Problem(ProblemSpec{std::make_shared<const Mesh>(generate_unit_square(n)), k, {{1, law}}, hs});
}

/// Returns a deliberately wrong (too small) Hessian, so full Newton steps overshoot.
class MisreportedCurvature final : public MaterialLaw {
 public:
  MaterialResponse evaluate(const Vec2& x, const Vec2& b) const override {
    auto r = inner_.evaluate(x, b);
    r.reluctivity = 1e-3 * r.reluctivity;
    return r;
  }
  std::string name() const override { return "misreported"; }

 private:
  LinearIsotropic inner_{1.0};
};

}  // namespace

TEST(NewtonConfig, Validation) {
  EXPECT_NO_THROW(NewtonConfig{}.validate());
  EXPECT_THROW((NewtonConfig{.rho = 0.6}).validate(), InvalidArgument);
  EXPECT_THROW((NewtonConfig{.rho = 0.0}).validate(), InvalidArgument);
  EXPECT_THROW((NewtonConfig{.sigma = 0.5}).validate(), InvalidArgument);
  EXPECT_THROW((NewtonConfig{.sigma = 0.0}).validate(), InvalidArgument);
  EXPECT_THROW((NewtonConfig{.tol_increment = -1.0}).validate(), InvalidArgument);
}

TEST(ConvergenceFactors, ClosedForms) {
  EXPECT_DOUBLE_EQ(newton_contraction_factor(0.5, 0.25, 3.0, 3.0), 0.625);
  EXPECT_DOUBLE_EQ(newton_step_floor(0.5, 0.25, 3.0, 3.0), 0.75);
  const double ratio = 400.0 / vacuum_reluctivity;
  EXPECT_NEAR(newton_contraction_factor(0.5, 0.01, 400.0, vacuum_reluctivity),
              1.0 - 4 * 0.5 * 0.01 * 0.99 * ratio * ratio * ratio, 1e-16);
  EXPECT_LT(newton_contraction_factor(0.5, 0.01, 400.0, vacuum_reluctivity), 1.0);
  EXPECT_DOUBLE_EQ(zarantonello_contraction(0.5, 2.0, 2.0), 0.0);
  EXPECT_NEAR(zarantonello_contraction(1.0 / 16.0, 1.0, 4.0), std::sqrt(1.0 - 2.0 / 16.0 + 16.0 / 256.0), 1e-15);
}

TEST(CertifiedBounds, WorstCaseOverRegions) {
  const auto sq = generate_unit_square(2);
  std::vector<int> regions(sq.num_triangles(), 1);
  regions[0] = 2;
  const auto mesh = std::make_shared<const Mesh>(sq.vertices(), sq.triangles(), regions, sq.boundary_edges());
  const Problem p(ProblemSpec{mesh, 1,
                              {{1, std::make_shared<BrauerLaw>()}, {2, std::make_shared<LinearIsotropic>(50.0)}}});
  const auto b = certified_bounds(p);
  ASSERT_TRUE(b);
  EXPECT_EQ(b->gamma, 50.0);
  EXPECT_EQ(b->lipschitz, vacuum_reluctivity);
  const Problem none(ProblemSpec{std::make_shared<const Mesh>(sq), 1, {{1, std::make_shared<MisreportedCurvature>()}}});
  EXPECT_FALSE(certified_bounds(none));
}

TEST(NewtonSolve, LinearLawConvergesInOneFullStep) {
  for (int k : {1, 2}) {
    const auto p = manufactured_problem(4, k, std::make_shared<LinearIsotropic>(3.0));
    const auto [a, report] = newton_solve(p, p.zero());
    EXPECT_TRUE(report.converged);
    ASSERT_EQ(report.num_iterations(), 1u);
    EXPECT_EQ(report.iterations[0].step, 1.0);
    EXPECT_EQ(report.iterations[0].backtracks, 0);
    EXPECT_LE(report.final_residual_norm, 1e-10 * report.iterations[0].residual_norm);
  }
}

TEST(NewtonSolve, LinearLawEnergyGapWithinQBound) {
  // gamma = L: q = 0.625 for rho = 1/2, sigma = 1/4
  const auto p = manufactured_problem(4, 1, std::make_shared<LinearIsotropic>(2.0));
  NewtonConfig cfg{.sigma = 0.25, .bounds = ConvexityBounds{2.0, 2.0, 0.0}};
  const auto [a, report] = newton_solve(p, p.zero(), cfg);
  ASSERT_TRUE(report.q);
  EXPECT_DOUBLE_EQ(*report.q, 0.625);
  std::vector<double> energies;
  for (const auto& it : report.iterations) energies.push_back(it.energy);
  energies.push_back(report.final_energy);
  const double w_ref = assemble_energy(p, a);
  for (std::size_t n = 0; n < energies.size(); ++n)
    EXPECT_LE(energies[n] - w_ref, std::pow(0.625, static_cast<double>(n)) * (energies[0] - w_ref) + 1e-14);
  EXPECT_GT(energies[0] - w_ref, 0.0);
}

TEST(NewtonSolve, BrauerInvariants) {
  const auto law = std::make_shared<BrauerLaw>();
  const auto p = manufactured_problem(8, 1, law);
  const auto bounds = certified_bounds(p);
  ASSERT_TRUE(bounds);
  NewtonConfig cfg{.record_iterates = true, .bounds = bounds};
  const auto [a, report] = newton_solve(p, p.zero(), cfg);
  ASSERT_TRUE(report.converged) << report.stop_reason;
  EXPECT_GE(report.num_iterations(), 3u);

  NewtonConfig ref_cfg{.tol_increment = 1e-13, .tol_residual = 1e-13};
  const auto [ref, ref_report] = newton_solve(p, a, ref_cfg);
  const double w_ref = ref_report.final_energy;
  const double w0 = report.iterations[0].energy;
  const double q = *report.q;
  const double tau_floor = std::min(1.0, *report.tau_star);
  const double c = bounds->lipschitz / bounds->gamma;

  std::vector<double> diff(a.size());
  const auto curl_dist = [&](const CoefficientVector& v) {
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = v.values[i] - ref.values[i];
    return p.curl_norm(diff);
  };
  const double e0 = curl_dist(report.iterates[0]);
  for (std::size_t n = 0; n < report.num_iterations(); ++n) {
    const auto& it = report.iterations[n];
    EXPECT_GT(it.step, 0.0);
    EXPECT_LE(it.step, 1.0);
    EXPECT_GE(it.step, tau_floor);
    EXPECT_LE(it.energy - w_ref, std::pow(q, static_cast<double>(n)) * (w0 - w_ref) * (1.0 + 1e-12) + 1e-12);
    const double en = curl_dist(report.iterates[n]);
    EXPECT_LE(en * en, c * std::pow(q, static_cast<double>(n)) * e0 * e0 * (1.0 + 1e-12));
    if (n > 0) EXPECT_LE(it.energy, report.iterations[n - 1].energy);
  }

  // norm sandwich around the converged solution
  std::mt19937 rng(3);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 100; ++trial) {
    CoefficientVector v = ref;
    const double scale = std::pow(10.0, -3.0 + 3.0 * trial / 100.0);
    for (auto& x : v.values) x += scale * g(rng);
    const double gap = assemble_energy(p, v) - w_ref;
    const double d = curl_dist(v);
    EXPECT_GE(gap, 0.5 * bounds->gamma * d * d * (1.0 - 1e-9)) << trial;
    EXPECT_LE(gap, 0.5 * bounds->lipschitz * d * d * (1.0 + 1e-9)) << trial;
  }
}

TEST(NewtonSolve, IterationCountStableUnderRefinement) {
  const auto law = std::make_shared<BrauerLaw>();
  std::vector<std::size_t> counts;
  for (int n : {4, 8, 16}) {
    const auto p = manufactured_problem(n, 1, law);
    counts.push_back(newton_solve(p, p.zero()).second.num_iterations());
  }
  const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
  EXPECT_LE(*hi - *lo, 1u);
}

TEST(NewtonSolve, MaxIterationsReported) {
  const auto p = manufactured_problem(4, 1, std::make_shared<BrauerLaw>());
  const auto [a, report] = newton_solve(p, p.zero(), NewtonConfig{.max_iter = 1});
  EXPECT_FALSE(report.converged);
  EXPECT_EQ(report.stop_reason, "max_iter");
  EXPECT_EQ(report.num_iterations(), 1u);
}

TEST(NewtonSolve, LineSearchFailureIsFatal) {
  const auto p = manufactured_problem(4, 1, std::make_shared<MisreportedCurvature>());
  EXPECT_THROW(newton_solve(p, p.zero(), NewtonConfig{.max_backtracks = 2}), LineSearchFailure);
  // with enough backtracks the misreported curvature still yields descent
  const auto [a, report] = newton_solve(p, p.zero(), NewtonConfig{.max_iter = 3});
  EXPECT_GT(report.iterations[0].backtracks, 0);
  EXPECT_LT(report.final_energy, 0.0);
}

TEST(NewtonSolve, RejectsNonConformingStart) {
  const auto p = manufactured_problem(2, 1, std::make_shared<LinearIsotropic>(1.0));
  EXPECT_THROW(newton_solve(p, CoefficientVector{{1.0, 2.0}}), InvalidArgument);
}

TEST(ZarantonelloSolve, LinearLawOneStep) {
  const double nu = 5.0;
  const auto p = manufactured_problem(4, 1, std::make_shared<LinearIsotropic>(nu));
  const auto [a, report] = zarantonello_solve(p, 1.0 / nu, p.zero(), NewtonConfig{.bounds = ConvexityBounds{nu, nu}});
  EXPECT_TRUE(report.converged);
  EXPECT_EQ(report.num_iterations(), 1u);
  ASSERT_TRUE(report.contraction_bound);
  EXPECT_EQ(*report.contraction_bound, 0.0);
  EXPECT_TRUE(report.warnings.empty());
}

TEST(ZarantonelloSolve, AnisotropicRatiosWithinBound) {
  const auto p = Problem(ProblemSpec{std::make_shared<const Mesh>(generate_unit_square(6)), 1,
                                     {{1, std::make_shared<AnisotropicLinear>(Mat2::diagonal(1.0, 4.0))}},
                                     FluxSource{[](const Vec2& x, int) { return Vec2{std::sin(3 * x.y), x.x}; }}});
  const auto bounds = certified_bounds(p);
  const double tau = bounds->gamma / (bounds->lipschitz * bounds->lipschitz);
  const auto [a, report] = zarantonello_solve(p, tau, p.zero(), NewtonConfig{.max_iter = 60, .bounds = bounds});
  ASSERT_TRUE(report.contraction_bound);
  EXPECT_NEAR(*report.contraction_bound, std::sqrt(0.9375), 1e-15);
  ASSERT_GT(report.contraction_ratios.size(), 10u);
  for (double r : report.contraction_ratios) EXPECT_LE(r, *report.contraction_bound + 1e-8);
}

TEST(ZarantonelloSolve, BrauerRatiosWithinBound) {
  const auto p = manufactured_problem(4, 1, std::make_shared<BrauerLaw>());
  const auto bounds = certified_bounds(p);
  const double tau = bounds->gamma / (bounds->lipschitz * bounds->lipschitz);
  const auto [a, report] = zarantonello_solve(p, tau, p.zero(), NewtonConfig{.max_iter = 5, .bounds = bounds});
  ASSERT_EQ(report.contraction_ratios.size(), 4u);
  for (double r : report.contraction_ratios) EXPECT_LE(r, *report.contraction_bound + 1e-8);
}

TEST(ZarantonelloSolve, WarnsOutsideContractionRange) {
  const auto p = manufactured_problem(2, 1, std::make_shared<LinearIsotropic>(1.0));
  const auto [a, report] =
      zarantonello_solve(p, 2.5, p.zero(), NewtonConfig{.max_iter = 2, .bounds = ConvexityBounds{1.0, 1.0}});
  EXPECT_FALSE(report.warnings.empty());
  EXPECT_THROW(zarantonello_solve(p, 0.0, p.zero()), InvalidArgument);
}

TEST(ZarantonelloSolve, IncrementLinearInTau) {
  const auto p = manufactured_problem(4, 1, std::make_shared<BrauerLaw>());
  std::vector<double> inc;
  for (double tau : {1e-6, 2e-6, 4e-6}) {
    const auto [a, report] = zarantonello_solve(p, tau, p.zero(), NewtonConfig{.max_iter = 1});
    inc.push_back(report.iterations[0].increment_norm);
  }
  EXPECT_NEAR(inc[1] / inc[0], 2.0, 1e-9);
  EXPECT_NEAR(inc[2] / inc[0], 4.0, 1e-9);
}

TEST(TailDiagnostic, LinearLawImmediate) {
  const auto p = manufactured_problem(4, 1, std::make_shared<LinearIsotropic>(1.0));
  const auto [a, report] = newton_solve(p, p.zero(), NewtonConfig{.record_iterates = true});
  const auto tail = quadratic_tail_diagnostic(report, a, p);
  EXPECT_TRUE(tail.immediate);
  EXPECT_FALSE(tail.notice.empty());
  EXPECT_EQ(tail.tail_start, 0u);
}

TEST(TailDiagnostic, BrauerFullStepsNearSolution) {
  const auto p = manufactured_problem(8, 1, std::make_shared<BrauerLaw>());
  NewtonConfig cfg{.tol_increment = 1e-12, .tol_residual = 1e-12, .record_iterates = true};
  const auto [a, report] = newton_solve(p, p.zero(), cfg);
  const auto [ref, ref_report] = newton_solve(p, a, NewtonConfig{.tol_increment = 1e-14, .tol_residual = 1e-14});
  const auto tail = quadratic_tail_diagnostic(report, ref, p);
  EXPECT_LE(tail.tail_start + 3, report.num_iterations());
  for (std::size_t n = tail.tail_start; n < report.num_iterations(); ++n) {
    EXPECT_EQ(report.iterations[n].step, 1.0);
    EXPECT_EQ(report.iterations[n].backtracks, 0);
  }
  for (const auto& [n, r] : tail.ratios) {
    EXPECT_TRUE(std::isfinite(r));
    EXPECT_GT(r, 0.0);
  }
  EXPECT_THROW(quadratic_tail_diagnostic(NewtonReport{}, ref, p), InvalidArgument);
}
