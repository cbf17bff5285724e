// Command-line front end: solve, study, material-check, mesh.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "magfe/telemetry.hpp"

using namespace magfe;

namespace {

enum ExitCode { ok = 0, usage = 1, solver_failure = 2, io_failure = 3 };

struct SolveArgs {
  std::string config;
  std::string mesh;
  std::string out;
  std::string fields;
};

struct StudyArgs {
  std::string benchmark;
  int degree = 1;
  int levels = 0;
  std::string config;
  std::string csv;
  std::string telemetry;
};

struct MaterialArgs {
  std::string material;
  std::vector<std::string> params;
};

struct MeshArgs {
  std::string generator = "unit_square";
  int n = 8;
  int refinements = 0;
  std::string in;
  std::string out;
};

void write_json(const std::string& path, const nlohmann::json& j) { write_text_file(path, j.dump(2) + "\n"); }

int run_solve(const SolveArgs& args) {
  const RunConfig cfg = load_run_config(args.config);
  Benchmark bench;
  if (cfg.benchmark) bench = find_benchmark(*cfg.benchmark);
  cfg.apply(bench);

  Mesh mesh;
  if (!args.mesh.empty())
    mesh = parse_mesh(read_text_file(args.mesh));
  else if (cfg.mesh)
    mesh = build_mesh(*cfg.mesh);
  else if (bench.base_mesh)
    mesh = bench.base_mesh();
  else
    throw ConfigurationError("solve: no mesh given (use --mesh, a [mesh] section or [problem] benchmark)");

  const auto spec = make_problem_spec(std::make_shared<const Mesh>(std::move(mesh)), bench.k, bench.setup());
  const auto problem = std::make_shared<const Problem>(spec);
  NewtonConfig newton = cfg.newton;
  if (!newton.bounds) newton.bounds = certified_bounds(*problem);

  std::pair<CoefficientVector, NewtonReport> result;
  if (cfg.method == "zarantonello") {
    if (!cfg.tau) throw ConfigurationError("solve: zarantonello needs [newton] tau");
    result = zarantonello_solve(*problem, *cfg.tau, problem->zero(), newton);
  } else {
    result = newton_solve(*problem, problem->zero(), newton);
  }
  const Solution solution{problem, std::move(result.first), std::move(result.second)};
  write_json(args.out, telemetry_json(solution, cfg.sections));
  if (!args.fields.empty()) {
    std::ostringstream os;
    write_field_dump(os, solution, bench.map);
    write_text_file(args.fields, os.str());
  }
  const auto& report = solution.report;
  std::printf("%s: %zu iterations, converged=%s (%s), energy %.12e\n", report.method.c_str(), report.num_iterations(),
              report.converged ? "true" : "false", report.stop_reason.c_str(), report.final_energy);
  return report.converged ? ok : solver_failure;
}

int run_study_command(const StudyArgs& args) {
  Benchmark bench = find_benchmark(args.benchmark);
  NewtonConfig newton;
  ConfigSections sections;
  if (!args.config.empty()) {
    const RunConfig cfg = load_run_config(args.config);
    cfg.apply(bench);
    newton = cfg.newton;
    sections = cfg.sections;
  }
  bench.k = args.degree;
  if (args.levels > 0) bench.levels = args.levels;

  const auto result = run_study(bench, newton);
  std::ostringstream csv;
  write_study_csv(csv, result.rows);
  write_text_file(args.csv, csv.str());
  std::cout << csv.str();
  if (!args.telemetry.empty()) {
    std::filesystem::create_directories(args.telemetry);
    for (std::size_t i = 0; i < result.reports.size(); ++i)
      write_json((std::filesystem::path(args.telemetry) / (bench.name + "_solve" + std::to_string(i) + ".json")).string(),
                 telemetry_json(result.reports[i], sections));
  }
  if (!result.complete) {
    std::cerr << "study incomplete: " << result.failure << "\n";
    return solver_failure;
  }
  return ok;
}

int run_material_check(const MaterialArgs& args) {
  std::map<std::string, double> params;
  for (const auto& p : args.params) {
    const auto eq = p.find('=');
    if (eq == std::string::npos) throw ConfigurationError("material-check: parameter '" + p + "' is not key=value");
    params[p.substr(0, eq)] = detail::to_number(p.substr(0, eq), p.substr(eq + 1));
  }
  const auto law = make_material(args.material, params);
  double s_max = 3.0;
  std::printf("law: %s\n", law->name().c_str());
  if (const auto* brauer = dynamic_cast<const BrauerLaw*>(law.get())) {
    const auto& p = brauer->params();
    const double s = p.s_star;
    const auto lo = brauer->lower_branch(s), hi = brauer->upper_branch(s);
    std::printf("s_star: %.12g\n", s);
    std::printf("c2_residual_value: %.3e\n", std::abs(lo.value - hi.value));
    std::printf("c2_residual_derivative: %.3e\n", std::abs(lo.derivative - hi.derivative));
    std::printf("c2_residual_curvature: %.3e\n", std::abs(lo.curvature - hi.curvature) / p.nu0);
    s_max = 2.0 * s;
  }
  const auto scan = certify_bounds(*law, RadialGrid{s_max, 4001, {}});
  std::printf("scan_range: [0, %.6g]\n", s_max);
  std::printf("gamma_scan: %.12g\n", scan.gamma_hat);
  std::printf("L_scan: %.12g\n", scan.lipschitz_hat);
  std::printf("L2_scan: %.6g\n", scan.hess_lipschitz_hat);
  if (scan.analytic) {
    std::printf("gamma_declared: %.12g\n", scan.analytic->gamma);
    std::printf("L_declared: %.12g\n", scan.analytic->lipschitz);
  }
  return ok;
}

int run_mesh_gen(const MeshArgs& args) {
  MeshConfig m;
  m.generator = args.generator;
  m.n = args.n;
  m.refinements = args.refinements;
  const auto mesh = build_mesh(m);
  write_text_file(args.out, serialize_mesh(mesh));
  std::printf("%zu vertices, %zu elements\n", mesh.num_vertices(), mesh.num_triangles());
  return ok;
}

int run_mesh_refine(const MeshArgs& args) {
  const auto mesh = refine_uniform(parse_mesh(read_text_file(args.in)));
  write_text_file(args.out, serialize_mesh(mesh));
  std::printf("%zu vertices, %zu elements\n", mesh.num_vertices(), mesh.num_triangles());
  return ok;
}

template <class F>
int guarded(F&& f) {
  try {
    return f();
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return io_failure;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return usage;
  } catch (const SolverFailure& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return solver_failure;
  } catch (const LineSearchFailure& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return solver_failure;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return usage;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return io_failure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"2D nonlinear magnetostatics solver and benchmark harness"};
  app.require_subcommand(1);
  int code = ok;

  SolveArgs solve;
  auto* solve_cmd = app.add_subcommand("solve", "Solve one problem described by a config file");
  solve_cmd->add_option("--config", solve.config, "Run config (key = value sections)")->required();
  solve_cmd->add_option("--mesh", solve.mesh, "Mesh file; overrides the config mesh");
  solve_cmd->add_option("--out", solve.out, "Telemetry JSON output")->required();
  solve_cmd->add_option("--fields", solve.fields, "Optional quadrature-point field dump (CSV)");
  solve_cmd->callback([&] { code = guarded([&] { return run_solve(solve); }); });

  StudyArgs study;
  auto* study_cmd = app.add_subcommand("study", "Refinement study of a built-in benchmark");
  study_cmd->add_option("--benchmark", study.benchmark, "manufactured | two_wire_disc | pm_toy | annulus_mapped")
      ->required();
  study_cmd->add_option("--degree", study.degree, "Curl degree k")->required()->check(CLI::Range(1, 3));
  study_cmd->add_option("--levels", study.levels, "Number of levels")->check(CLI::PositiveNumber);
  study_cmd->add_option("--config", study.config, "Run config with overrides");
  study_cmd->add_option("--csv", study.csv, "Study table output")->required();
  study_cmd->add_option("--telemetry", study.telemetry, "Directory for per-solve telemetry JSON");
  study_cmd->callback([&] { code = guarded([&] { return run_study_command(study); }); });

  MaterialArgs material;
  auto* mat_cmd = app.add_subcommand("material-check", "Certify convexity bounds of a material law");
  mat_cmd->add_option("--material", material.material, "linear | brauer | magnet | anisotropic")->required();
  mat_cmd->add_option("--params", material.params, "Parameters as key=value")->delimiter(',');
  mat_cmd->callback([&] { code = guarded([&] { return run_material_check(material); }); });

  MeshArgs mesh;
  auto* mesh_cmd = app.add_subcommand("mesh", "Generate or refine meshes");
  mesh_cmd->require_subcommand(1);
  auto* gen = mesh_cmd->add_subcommand("gen", "Generate a mesh");
  gen->add_option("--n", mesh.n, "Subdivisions per side")->check(CLI::PositiveNumber);
  gen->add_option("--generator", mesh.generator, "unit_square | two_wire_disc | pm_toy");
  gen->add_option("--refinements", mesh.refinements, "Uniform refinements")->check(CLI::NonNegativeNumber);
  gen->add_option("--out", mesh.out, "Output mesh file")->required();
  gen->callback([&] { code = guarded([&] { return run_mesh_gen(mesh); }); });
  auto* refine = mesh_cmd->add_subcommand("refine", "Uniformly refine a mesh file");
  refine->add_option("--in", mesh.in, "Input mesh file")->required();
  refine->add_option("--out", mesh.out, "Output mesh file")->required();
  refine->callback([&] { code = guarded([&] { return run_mesh_refine(mesh); }); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? ok : usage;
  }
  return code;
}
