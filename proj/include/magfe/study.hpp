#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "magfe/assembly.hpp"
#include "magfe/errors.hpp"
#include "magfe/geometry.hpp"
#include "magfe/materials.hpp"
#include "magfe/meshgen.hpp"
#include "magfe/solver.hpp"

namespace magfe {

/// Physical description of a problem: laws and sources live on the physical
/// domain and are pulled back to the mesh domain when a map is present.
struct ModelSetup {
  MaterialMap materials;
  Source source = NoSource{};
  std::set<int> dirichlet_tags = {1};
  std::optional<DomainMap> map;
};

/// Problem data on the mesh domain. With a map, every law becomes a
/// PullbackLaw, h_s becomes F^T h_s' o phi and j_s becomes J j_s' o phi.
inline ProblemSpec make_problem_spec(std::shared_ptr<const Mesh> mesh, int k, const ModelSetup& setup) {
  ProblemSpec spec{std::move(mesh), k, setup.materials, setup.source, setup.dirichlet_tags, std::nullopt};
  if (!setup.map) return spec;
  const DomainMap map = *setup.map;
  for (auto& [region, law] : spec.materials)
    if (law) law = pullback_material(map, law);
  if (const auto* flux = std::get_if<FluxSource>(&setup.source)) {
    spec.source = FluxSource{[map, f = flux->field](const Vec2& x, int region) {
      return pullback_source(map, [&](const Vec2& y) { return f(y, region); })(x);
    }};
  } else if (const auto* current = std::get_if<CurrentSource>(&setup.source)) {
    spec.source = CurrentSource{[map, j = current->density](const Vec2& x, int region) {
      return map.checked_jacobian(x).second * j(map.phi(x), region);
    }};
  }
  return spec;
}

enum class ErrorMode { manufactured_exact, successive_refinement, successive_degree };

inline std::string to_string(ErrorMode mode) {
  switch (mode) {
    case ErrorMode::manufactured_exact: return "manufactured-exact";
    case ErrorMode::successive_refinement: return "successive-refinement";
    case ErrorMode::successive_degree: return "successive-degree";
  }
  return "unknown";
}

inline ErrorMode parse_error_mode(const std::string& name) {
  if (name == "manufactured-exact") return ErrorMode::manufactured_exact;
  if (name == "successive-refinement") return ErrorMode::successive_refinement;
  if (name == "successive-degree") return ErrorMode::successive_degree;
  throw InvalidArgument("unknown error mode '" + name + "'");
}

struct Benchmark {
  std::string name;
  std::function<Mesh()> base_mesh;
  /// Level l+1 mesh from level l; child c of element t must be 4t + c.
  std::function<Mesh(const Mesh&)> refine = [](const Mesh& m) { return refine_uniform(m); };
  MaterialMap materials;
  /// Source for the final material assignment (manufactured sources depend on it).
  std::function<Source(const MaterialMap&)> source = [](const MaterialMap&) { return Source{NoSource{}}; };
  std::set<int> dirichlet_tags = {1};
  std::optional<DomainMap> map;
  int k = 1;
  int levels = 4;
  ErrorMode error_mode = ErrorMode::successive_refinement;
  /// Manufactured mode: exact potential (zero trace) and its Curl on the mesh domain.
  std::function<double(const Vec2&)> exact_a;
  std::function<Vec2(const Vec2&)> exact_b;

  ModelSetup setup() const { return {materials, source(materials), dirichlet_tags, map}; }

  void validate() const {
    if (!base_mesh || !refine || !source) throw ConfigurationError("benchmark '" + name + "': missing generator");
    if (levels < 1) throw ConfigurationError("benchmark '" + name + "': need at least one level");
    if (k < 1 || k + 1 > max_space_degree) throw UnsupportedDegree(k + 1, max_space_degree);
    if (error_mode == ErrorMode::successive_degree && 2 * k + 4 > max_rule_degree)
      throw UnsupportedDegree(k + 2, max_rule_degree / 2);
    if (error_mode == ErrorMode::manufactured_exact) {
      if (!exact_a || !exact_b) throw ConfigurationError("benchmark '" + name + "': manufactured mode needs exact a and b");
      const Mesh mesh = base_mesh();
      for (const auto& be : mesh.boundary_edges())
        for (int v : be.vertices)
          if (std::abs(exact_a(mesh.vertex(v))) > 1e-12)
            throw BoundaryCompatibilityError("benchmark '" + name + "': exact potential has nonzero trace");
    }
  }
};

/// Manufactured problem on the unit square: a = A sin(pi x) sin(pi y) with
/// peak |b| = peak_b, h_s = dw(Curl a) so that a is the exact minimizer.
inline Benchmark manufactured_benchmark(MaterialPtr law = nullptr, double peak_b = 1.5, int base_n = 4) {
  if (!law) law = std::make_shared<const BrauerLaw>();
  const double amp = peak_b / std::numbers::pi;
  const double pi = std::numbers::pi;
  Benchmark b;
  b.name = "manufactured";
  b.base_mesh = [base_n] { return generate_unit_square(base_n); };
  b.materials = {{1, law}};
  b.error_mode = ErrorMode::manufactured_exact;
  b.exact_a = [=](const Vec2& x) { return amp * std::sin(pi * x.x) * std::sin(pi * x.y); };
  b.exact_b = [=](const Vec2& x) {
    return Vec2{amp * pi * std::sin(pi * x.x) * std::cos(pi * x.y), -amp * pi * std::cos(pi * x.x) * std::sin(pi * x.y)};
  };
  b.source = [exact_b = b.exact_b](const MaterialMap& mats) -> Source {
    return FluxSource{[mats, exact_b](const Vec2& x, int region) { return mats.at(region)->evaluate(x, exact_b(x)).field; }};
  };
  return b;
}

/// Iron disc with two copper wires carrying opposite current densities.
inline Benchmark two_wire_disc_benchmark(const TwoWireGeometry& geo = {}, double current_density = 1e5, double h = 0.0125) {
  Benchmark b;
  b.name = "two_wire_disc";
  b.base_mesh = [geo, h] { return generate_two_wire_disc(geo, h); };
  b.refine = [geo](const Mesh& m) {
    const auto circles = geo.circles();
    return refine_with_curves(m, circles);
  };
  const auto copper = std::make_shared<const LinearIsotropic>(vacuum_reluctivity);
  b.materials = {{1, std::make_shared<const BrauerLaw>()}, {2, copper}, {3, copper}};
  b.source = [current_density](const MaterialMap&) -> Source {
    return CurrentSource{[current_density](const Vec2&, int region) {
      return region == 2 ? current_density : region == 3 ? -current_density : 0.0;
    }};
  };
  b.levels = 3;
  b.error_mode = ErrorMode::successive_refinement;
  return b;
}

/// Iron square with four alternately magnetized permanent-magnet patches.
/// The base grid resolves each magnet by 4 x 8 cells.
inline Benchmark pm_toy_benchmark(const PmToyGeometry& geo = {}, int base_n = 32) {
  Benchmark b;
  b.name = "pm_toy";
  b.base_mesh = [geo, base_n] { return generate_pm_toy(geo, base_n); };
  b.materials = {{1, std::make_shared<const BrauerLaw>()}};
  for (int r = 2; r <= 5; ++r)
    b.materials[r] = std::make_shared<const PermanentMagnet>(vacuum_reluctivity, geo.magnetization(r, vacuum_reluctivity));
  b.levels = 3;
  b.error_mode = ErrorMode::successive_refinement;
  return b;
}

/// Parameters of the mapped quarter-annulus problem: constant anisotropic
/// reluctivity N on r_inner <= |x'| <= r_outer, source h_s'(x') = c (-y', x').
struct AnnulusSetup {
  double r_inner = 0.5;
  double r_outer = 1.0;
  Mat2 tensor{2.0, 0.5, 0.5, 1.0};
  double source_scale = 1.0;
};

inline Benchmark annulus_mapped_benchmark(const AnnulusSetup& s = {}) {
  Benchmark b;
  b.name = "annulus_mapped";
  b.base_mesh = [] { return generate_unit_square(4); };
  b.materials = {{1, std::make_shared<const AnisotropicLinear>(s.tensor)}};
  b.source = [c = s.source_scale](const MaterialMap&) -> Source {
    return FluxSource{[c](const Vec2& x, int) { return Vec2{-c * x.y, c * x.x}; }};
  };
  b.map = quarter_annulus_map(s.r_inner, s.r_outer);
  b.levels = 4;
  b.error_mode = ErrorMode::successive_refinement;
  return b;
}

inline std::vector<Benchmark> builtin_benchmarks() {
  return {manufactured_benchmark(), two_wire_disc_benchmark(), pm_toy_benchmark(), annulus_mapped_benchmark()};
}

inline Benchmark find_benchmark(const std::string& name) {
  for (auto& b : builtin_benchmarks())
    if (b.name == name) return b;
  throw InvalidArgument("unknown benchmark '" + name + "'");
}

/// eoc_i = log(err_{i-1} / err_i) / log(ratio).
inline std::vector<double> compute_eoc(std::span<const double> errors, double ratio = 2.0) {
  if (errors.size() < 2) throw InvalidArgument("compute_eoc: need at least two errors");
  if (!(ratio > 1.0)) throw InvalidArgument("compute_eoc: ratio must exceed 1");
  for (double e : errors)
    if (!(e > 0.0)) throw InvalidArgument("compute_eoc: errors must be positive");
  std::vector<double> out;
  for (std::size_t i = 1; i < errors.size(); ++i) out.push_back(std::log(errors[i - 1] / errors[i]) / std::log(ratio));
  return out;
}

struct StudyRow {
  int level = 0;
  std::size_t ne = 0;
  std::size_t dof = 0;
  int iter = 0;
  double err_b = 0.0;
  std::optional<double> eoc_b;
  double err_h = 0.0;
  std::optional<double> eoc_h;
};

/// A converged discrete solution together with its problem.
struct Solution {
  std::shared_ptr<const Problem> problem;
  CoefficientVector a;
  NewtonReport report;
};

/// Solves from a = 0. Missing bounds in cfg are filled with certified ones.
inline Solution solve_problem(ProblemSpec spec, NewtonConfig cfg) {
  auto problem = std::make_shared<const Problem>(std::move(spec));
  if (!cfg.bounds) cfg.bounds = certified_bounds(*problem);
  auto [a, report] = newton_solve(*problem, problem->zero(), cfg);
  if (!report.converged) throw SolverFailure("newton did not converge: " + report.stop_reason);
  return {std::move(problem), std::move(a), std::move(report)};
}

/// b and h = dw(b) of a solution, on the mesh domain.
struct FieldSample {
  Vec2 b;
  Vec2 h;
};

inline FieldSample sample_solution(const Solution& s, std::size_t element, const Vec2& xi) {
  const auto& space = s.problem->space();
  const Vec2 b = eval_curl_field(space, s.a, element, xi);
  return {b, s.problem->law(element).evaluate(space.element_map(element)(xi), b).field};
}

struct RelativeErrors {
  double err_b = 0.0;
  double err_h = 0.0;
};

/// Relative L2 errors of approx against ref over a mesh, in physical
/// quantities when a map is given (b' = F b / J, h' = F^-T h, dx' = J dx).
/// Samplers take (element, reference point, mesh-domain point).
template <class Approx, class Ref>
RelativeErrors relative_errors(const Mesh& mesh, const QuadratureRule& rule, const std::optional<DomainMap>& map,
                               Approx&& approx, Ref&& ref) {
  double db = 0.0, nb = 0.0, dh = 0.0, nh = 0.0;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto em = element_map(mesh, t);
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const Vec2 x = em(rule.points[q]);
      FieldSample u = approx(t, rule.points[q], x);
      FieldSample r = ref(t, rule.points[q], x);
      double w = rule.weights[q] * em.area;
      if (map) {
        const auto [f, j] = map->checked_jacobian(x);
        const Mat2 fit = transpose(inverse(f));
        u = {(1.0 / j) * (f * u.b), fit * u.h};
        r = {(1.0 / j) * (f * r.b), fit * r.h};
        w *= j;
      }
      db += w * dot(u.b - r.b, u.b - r.b);
      nb += w * dot(r.b, r.b);
      dh += w * dot(u.h - r.h, u.h - r.h);
      nh += w * dot(r.h, r.h);
    }
  }
  if (!(nb > 0.0) || !(nh > 0.0)) throw SolverFailure("relative error: reference field vanishes");
  return {std::sqrt(db / nb), std::sqrt(dh / nh)};
}

/// Error-measurement rule: two degrees above the discretization rule.
inline const QuadratureRule& error_rule(int k) { return rule_for_degree(std::min(2 * k + 2, max_rule_degree)); }

struct StudyResult {
  std::vector<StudyRow> rows;
  /// Reports of every solve in order, including reference solves.
  std::vector<NewtonReport> reports;
  bool complete = true;
  std::string failure;
};

/// Refinement study. Level l (1-based) uses l-1 refinements of the base mesh.
/// Successive-refinement mode solves one extra level as reference for the
/// last row; successive-degree mode solves each level again with k+1.
inline StudyResult run_study(const Benchmark& bench, const NewtonConfig& cfg) {
  bench.validate();
  StudyResult out;
  const ModelSetup setup = bench.setup();
  const auto& rule = error_rule(bench.k);
  auto mesh = std::make_shared<const Mesh>(bench.base_mesh());
  std::optional<Solution> current;

  const auto finish_row = [&](int level, const Solution& s, RelativeErrors e) {
    out.rows.push_back({level, s.problem->mesh().num_triangles(), s.problem->num_free(),
                        static_cast<int>(s.report.num_iterations()), e.err_b, std::nullopt, e.err_h, std::nullopt});
  };
  try {
    current = solve_problem(make_problem_spec(mesh, bench.k, setup), cfg);
    out.reports.push_back(current->report);
    for (int level = 1; level <= bench.levels; ++level) {
      const Solution& s = *current;
      const auto self = [&](std::size_t t, const Vec2& xi, const Vec2&) { return sample_solution(s, t, xi); };
      if (bench.error_mode == ErrorMode::manufactured_exact) {
        const auto exact = [&](std::size_t t, const Vec2&, const Vec2& x) {
          const Vec2 b = bench.exact_b(x);
          return FieldSample{b, s.problem->law(t).evaluate(x, b).field};
        };
        finish_row(level, s, relative_errors(*mesh, rule, bench.map, self, exact));
      } else if (bench.error_mode == ErrorMode::successive_degree) {
        const Solution ref = solve_problem(make_problem_spec(mesh, bench.k + 1, setup), cfg);
        out.reports.push_back(ref.report);
        const auto other = [&](std::size_t t, const Vec2& xi, const Vec2&) { return sample_solution(ref, t, xi); };
        finish_row(level, s, relative_errors(*mesh, error_rule(bench.k + 1), bench.map, self, other));
      }

      if (level == bench.levels && bench.error_mode != ErrorMode::successive_refinement) break;
      auto fine_mesh = std::make_shared<const Mesh>(bench.refine(*mesh));
      if (fine_mesh->num_triangles() != 4 * mesh->num_triangles())
        throw ConfigurationError("benchmark '" + bench.name + "': refinement must split each element into four");
      Solution fine = solve_problem(make_problem_spec(fine_mesh, bench.k, setup), cfg);
      out.reports.push_back(fine.report);
      if (bench.error_mode == ErrorMode::successive_refinement) {
        const Mesh& coarse = *mesh;
        const auto parent = [&](std::size_t t, const Vec2&, const Vec2& x) {
          const std::size_t p = t / 4;
          return sample_solution(s, p, element_map(coarse, p).to_reference(x));
        };
        const auto child = [&](std::size_t t, const Vec2& xi, const Vec2&) { return sample_solution(fine, t, xi); };
        finish_row(level, s, relative_errors(*fine_mesh, rule, bench.map, parent, child));
      }
      mesh = fine_mesh;
      current = std::move(fine);
    }
  } catch (const Error& e) {
    out.complete = false;
    out.failure = e.what();
  }

  for (std::size_t i = 1; i < out.rows.size(); ++i) {
    const auto& prev = out.rows[i - 1];
    auto& row = out.rows[i];
    if (prev.err_b > 0.0 && row.err_b > 0.0) row.eoc_b = compute_eoc(std::vector<double>{prev.err_b, row.err_b})[0];
    if (prev.err_h > 0.0 && row.err_h > 0.0) row.eoc_h = compute_eoc(std::vector<double>{prev.err_h, row.err_h})[0];
  }
  return out;
}

inline constexpr const char* study_csv_header = "level,ne,dof,iter,err_b,eoc_b,err_h,eoc_h";

/// One header line plus one line per row; empty eoc fields before level 2.
inline void write_study_csv(std::ostream& os, std::span<const StudyRow> rows) {
  const auto num = [](double v, const char* fmt) {
    char buf[64];
    std::snprintf(buf, sizeof buf, fmt, v);
    return std::string(buf);
  };
  const auto opt = [&](const std::optional<double>& v) { return v ? num(*v, "%.4f") : std::string(); };
  os << study_csv_header << '\n';
  for (const auto& r : rows)
    os << r.level << ',' << r.ne << ',' << r.dof << ',' << r.iter << ',' << num(r.err_b, "%.6e") << ',' << opt(r.eoc_b)
       << ',' << num(r.err_h, "%.6e") << ',' << opt(r.eoc_h) << '\n';
}

}  // namespace magfe
