#pragma once

#include <cstdio>
#include <optional>
#include <ostream>
#include <string>

#include "json.hpp"
#include "magfe/config.hpp"
#include "magfe/study.hpp"

namespace magfe {

inline nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

/// One JSON document per solve: config echo, per-iteration records,
/// certified bounds and the convergence outcome.
inline nlohmann::json telemetry_json(const NewtonReport& report, const ConfigSections& config,
                                     std::optional<std::pair<std::size_t, std::size_t>> size = std::nullopt) {
  nlohmann::json j;
  j["config"] = nlohmann::json::object();
  for (const auto& [section, values] : config) j["config"][section] = values;
  j["method"] = report.method;
  if (size) j["mesh"] = {{"ne", size->first}, {"dof", size->second}};
  j["iterations"] = nlohmann::json::array();
  for (const auto& it : report.iterations)
    j["iterations"].push_back({{"n", it.n},
                               {"energy", it.energy},
                               {"residual_norm", it.residual_norm},
                               {"step", it.step},
                               {"backtracks", it.backtracks},
                               {"increment_norm", it.increment_norm},
                               {"cg_iterations", it.cg_iterations},
                               {"cg_converged", it.cg_converged}});
  j["bounds"] = {{"gamma", optional_json(report.gamma)},
                 {"lipschitz", optional_json(report.lipschitz)},
                 {"q", optional_json(report.q)},
                 {"tau_star", optional_json(report.tau_star)}};
  if (!report.contraction_ratios.empty()) {
    j["contraction_ratios"] = report.contraction_ratios;
    j["contraction_bound"] = optional_json(report.contraction_bound);
  }
  j["converged"] = report.converged;
  j["stop_reason"] = report.stop_reason;
  j["final_energy"] = report.final_energy;
  j["final_residual_norm"] = report.final_residual_norm;
  j["warnings"] = report.warnings;
  return j;
}

inline nlohmann::json telemetry_json(const Solution& s, const ConfigSections& config) {
  return telemetry_json(s.report, config, std::pair{s.problem->mesh().num_triangles(), s.problem->num_free()});
}

/// Per-element quadrature-point fields as CSV, physical quantities when a
/// map is given: element,region,x,y,bx,by,hx,hy.
inline void write_field_dump(std::ostream& os, const Solution& s, const std::optional<DomainMap>& map = std::nullopt) {
  const auto& mesh = s.problem->mesh();
  const auto& rule = s.problem->rule();
  char buf[256];
  os << "element,region,x,y,bx,by,hx,hy\n";
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto& em = s.problem->space().element_map(t);
    for (const auto& xi : rule.points) {
      Vec2 x = em(xi);
      auto f = sample_solution(s, t, xi);
      if (map) {
        const auto [jac, det_j] = map->checked_jacobian(x);
        f = {(1.0 / det_j) * (jac * f.b), transpose(inverse(jac)) * f.h};
        x = map->phi(x);
      }
      std::snprintf(buf, sizeof buf, "%zu,%d,%.10e,%.10e,%.10e,%.10e,%.10e,%.10e\n", t, mesh.region(t), x.x, x.y, f.b.x,
                    f.b.y, f.h.x, f.h.y);
      os << buf;
    }
  }
}

}  // namespace magfe
