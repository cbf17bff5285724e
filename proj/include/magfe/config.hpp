#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include "magfe/errors.hpp"
#include "magfe/study.hpp"

namespace magfe {

/// Raw key = value pairs by section; keys outside any section go to "".
using ConfigSections = std::map<std::string, std::map<std::string, std::string>>;

/// Parses INI-style text: [section] headers, key = value lines, full-line
/// comments starting with ';' or '#'. Duplicate sections or keys are errors.
inline ConfigSections parse_config_sections(const std::string& text) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ParseError(e.line(), e.message());
  }
  ConfigSections out;
  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      out[""][name] = node.data();
      continue;
    }
    auto& section = out[name];
    for (const auto& [key, value] : node) {
      if (!value.empty()) throw ConfigurationError("config: nested key '" + name + "." + key + "'");
      section[key] = value.data();
    }
  }
  return out;
}

namespace detail {

/// Key lookup that records which keys were consumed.
class SectionReader {
 public:
  SectionReader(std::string name, const std::map<std::string, std::string>& values)
      : name_(std::move(name)), values_(values) {}

  std::optional<std::string> text(const std::string& key) {
    used_.insert(key);
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<double> number(const std::string& key) {
    const auto t = text(key);
    if (!t) return std::nullopt;
    double v = 0.0;
    const auto* end = t->data() + t->size();
    const auto [ptr, ec] = std::from_chars(t->data(), end, v);
    if (ec != std::errc() || ptr != end) throw ConfigurationError("config: [" + name_ + "] " + key + " is not a number: '" + *t + "'");
    return v;
  }

  std::optional<int> integer(const std::string& key) {
    const auto t = text(key);
    if (!t) return std::nullopt;
    int v = 0;
    const auto* end = t->data() + t->size();
    const auto [ptr, ec] = std::from_chars(t->data(), end, v);
    if (ec != std::errc() || ptr != end) throw ConfigurationError("config: [" + name_ + "] " + key + " is not an integer: '" + *t + "'");
    return v;
  }

  std::optional<bool> flag(const std::string& key) {
    const auto t = text(key);
    if (!t) return std::nullopt;
    if (*t == "true" || *t == "1") return true;
    if (*t == "false" || *t == "0") return false;
    throw ConfigurationError("config: [" + name_ + "] " + key + " must be true or false");
  }

  double number_or(const std::string& key, double fallback) { return number(key).value_or(fallback); }

  std::string required(const std::string& key) {
    auto t = text(key);
    if (!t) throw ConfigurationError("config: [" + name_ + "] missing key '" + key + "'");
    return *t;
  }

  /// Keys whose name starts with prefix followed by a region number.
  std::map<int, std::string> per_region(const std::string& prefix) {
    std::map<int, std::string> out;
    for (const auto& [key, value] : values_)
      if (key.rfind(prefix + ".", 0) == 0) {
        used_.insert(key);
        out[parse_region(key.substr(prefix.size() + 1))] = value;
      }
    return out;
  }

  void check_all_used() const {
    for (const auto& [key, value] : values_)
      if (!used_.contains(key)) throw ConfigurationError("config: unknown key '" + key + "' in [" + name_ + "]");
  }

  static int parse_region(const std::string& text) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) throw ConfigurationError("config: bad region '" + text + "'");
    return v;
  }

 private:
  std::string name_;
  const std::map<std::string, std::string>& values_;
  std::set<std::string> used_;
};

inline double to_number(const std::string& where, const std::string& text) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigurationError("config: " + where + " is not a number: '" + text + "'");
  return v;
}

}  // namespace detail

/// Material law from a name and numeric parameters. Recognized laws and keys:
///   linear:      nu
///   brauer:      k1, k2, k3, nu0 (defaults 3.8, 2.17, 396.2, 1e7/(4 pi))
///   magnet:      nu0 (default 1e7/(4 pi)), mx, my
///   anisotropic: nxx, nxy, nyy
inline MaterialPtr make_material(const std::string& law, const std::map<std::string, double>& params) {
  std::set<std::string> used;
  const auto get = [&](const std::string& key, std::optional<double> fallback = std::nullopt) {
    used.insert(key);
    const auto it = params.find(key);
    if (it != params.end()) return it->second;
    if (!fallback) throw ConfigurationError("material '" + law + "': missing parameter '" + key + "'");
    return *fallback;
  };
  MaterialPtr out;
  if (law == "linear") {
    out = std::make_shared<const LinearIsotropic>(get("nu"));
  } else if (law == "brauer") {
    out = std::make_shared<const BrauerLaw>(
        brauer_build(get("k1", 3.8), get("k2", 2.17), get("k3", 396.2), get("nu0", vacuum_reluctivity)));
  } else if (law == "magnet") {
    out = std::make_shared<const PermanentMagnet>(get("nu0", vacuum_reluctivity), Vec2{get("mx"), get("my")});
  } else if (law == "anisotropic") {
    const double xy = get("nxy", 0.0);
    out = std::make_shared<const AnisotropicLinear>(Mat2{get("nxx"), xy, xy, get("nyy")});
  } else {
    throw ConfigurationError("unknown material law '" + law + "'");
  }
  for (const auto& [key, value] : params)
    if (!used.contains(key)) throw ConfigurationError("material '" + law + "': unknown parameter '" + key + "'");
  return out;
}

/// Mesh source of a solve: a file or a built-in generator with refinements.
struct MeshConfig {
  std::optional<std::string> file;
  std::string generator = "unit_square";
  int n = 8;
  int refinements = 0;
};

/// Parsed run configuration. Sections and keys:
///   [problem]  benchmark, k, dirichlet (space-separated tags), levels, error_mode
///   [mesh]     file | generator (unit_square, two_wire_disc, pm_toy), n, refinements
///   [material.<region>]  law plus the parameters of make_material
///   [source]   form (none, flux, current); flux: hx, hy or hx.<region>, hy.<region>;
///              current: j or j.<region>
///   [newton]   rho, sigma, tol_increment, tol_residual, max_iter, max_backtracks,
///              cg_rel_tol, cg_max_iter, cg_jacobi, method (newton, zarantonello), tau
///   [map]      type (identity, affine, quarter_annulus); affine: a11, a12, a21, a22, b1, b2;
///              quarter_annulus: r_inner, r_outer
/// Unset entries leave the benchmark defaults in place.
struct RunConfig {
  ConfigSections sections;
  std::optional<std::string> benchmark;
  std::optional<int> k;
  std::optional<std::set<int>> dirichlet_tags;
  std::optional<int> levels;
  std::optional<ErrorMode> error_mode;
  std::optional<MeshConfig> mesh;
  MaterialMap materials;
  std::optional<Source> source;
  NewtonConfig newton;
  std::string method = "newton";
  std::optional<double> tau;
  std::optional<DomainMap> map;

  /// Applies every override to a benchmark.
  void apply(Benchmark& bench) const {
    if (k) bench.k = *k;
    if (dirichlet_tags) bench.dirichlet_tags = *dirichlet_tags;
    if (levels) bench.levels = *levels;
    if (error_mode) bench.error_mode = *error_mode;
    for (const auto& [region, law] : materials) bench.materials[region] = law;
    if (source) bench.source = [s = *source](const MaterialMap&) { return s; };
    if (map) bench.map = *map;
  }
};

inline RunConfig parse_run_config(const std::string& text) {
  RunConfig cfg;
  cfg.sections = parse_config_sections(text);
  for (const auto& [name, values] : cfg.sections) {
    detail::SectionReader r(name, values);
    if (name == "problem") {
      cfg.benchmark = r.text("benchmark");
      cfg.k = r.integer("k");
      if (const auto tags = r.text("dirichlet")) {
        std::set<int> parsed;
        std::istringstream in(*tags);
        for (std::string tag; in >> tag;) parsed.insert(detail::SectionReader::parse_region(tag));
        cfg.dirichlet_tags = parsed;
      }
      cfg.levels = r.integer("levels");
      if (const auto mode = r.text("error_mode")) cfg.error_mode = parse_error_mode(*mode);
    } else if (name == "mesh") {
      MeshConfig m;
      m.file = r.text("file");
      m.generator = r.text("generator").value_or(m.generator);
      m.n = r.integer("n").value_or(m.n);
      m.refinements = r.integer("refinements").value_or(0);
      if (m.refinements < 0) throw ConfigurationError("config: [mesh] refinements must be nonnegative");
      cfg.mesh = m;
    } else if (name.rfind("material.", 0) == 0) {
      const int region = detail::SectionReader::parse_region(name.substr(9));
      std::map<std::string, double> params;
      std::string law;
      for (const auto& [key, value] : values) {
        if (key == "law")
          law = value;
        else
          params[key] = detail::to_number("[" + name + "] " + key, value);
      }
      if (law.empty()) throw ConfigurationError("config: [" + name + "] missing key 'law'");
      cfg.materials[region] = make_material(law, params);
      continue;
    } else if (name == "source") {
      const std::string form = r.text("form").value_or("none");
      if (form == "none") {
        cfg.source = NoSource{};
      } else if (form == "flux") {
        const Vec2 all{r.number_or("hx", 0.0), r.number_or("hy", 0.0)};
        std::map<int, Vec2> regional;
        for (const auto& [region, v] : r.per_region("hx")) regional[region].x = detail::to_number("[source] hx", v);
        for (const auto& [region, v] : r.per_region("hy")) regional[region].y = detail::to_number("[source] hy", v);
        cfg.source = FluxSource{[all, regional](const Vec2&, int region) {
          const auto it = regional.find(region);
          return it == regional.end() ? all : it->second;
        }};
      } else if (form == "current") {
        const double all = r.number_or("j", 0.0);
        std::map<int, double> regional;
        for (const auto& [region, v] : r.per_region("j")) regional[region] = detail::to_number("[source] j", v);
        cfg.source = CurrentSource{[all, regional](const Vec2&, int region) {
          const auto it = regional.find(region);
          return it == regional.end() ? all : it->second;
        }};
      } else {
        throw ConfigurationError("config: unknown source form '" + form + "'");
      }
    } else if (name == "newton") {
      auto& n = cfg.newton;
      n.rho = r.number_or("rho", n.rho);
      n.sigma = r.number_or("sigma", n.sigma);
      n.tol_increment = r.number_or("tol_increment", n.tol_increment);
      n.tol_residual = r.number_or("tol_residual", n.tol_residual);
      n.max_iter = r.integer("max_iter").value_or(n.max_iter);
      n.max_backtracks = r.integer("max_backtracks").value_or(n.max_backtracks);
      n.cg.rel_tol = r.number_or("cg_rel_tol", n.cg.rel_tol);
      n.cg.max_iter = r.integer("cg_max_iter").value_or(n.cg.max_iter);
      n.cg.jacobi = r.flag("cg_jacobi").value_or(n.cg.jacobi);
      cfg.method = r.text("method").value_or("newton");
      if (cfg.method != "newton" && cfg.method != "zarantonello")
        throw ConfigurationError("config: unknown method '" + cfg.method + "'");
      cfg.tau = r.number("tau");
      n.validate();
    } else if (name == "map") {
      const std::string type = r.required("type");
      if (type == "identity") {
        cfg.map = identity_map();
      } else if (type == "affine") {
        const Mat2 a{r.number_or("a11", 1.0), r.number_or("a12", 0.0), r.number_or("a21", 0.0), r.number_or("a22", 1.0)};
        if (!(det(a) > 0.0)) throw OrientationError("config: affine map must have positive determinant");
        cfg.map = affine_map(a, {r.number_or("b1", 0.0), r.number_or("b2", 0.0)});
      } else if (type == "quarter_annulus") {
        cfg.map = quarter_annulus_map(r.number_or("r_inner", 0.5), r.number_or("r_outer", 1.0));
      } else {
        throw ConfigurationError("config: unknown map type '" + type + "'");
      }
    } else {
      throw ConfigurationError("config: unknown section [" + name + "]");
    }
    r.check_all_used();
  }
  return cfg;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text) || !out.flush()) throw IoError("cannot write '" + path + "'");
}

inline RunConfig load_run_config(const std::string& path) { return parse_run_config(read_text_file(path)); }

/// Mesh from the [mesh] section: a mesh file or a generator plus refinements.
inline Mesh build_mesh(const MeshConfig& m) {
  Mesh mesh;
  if (m.file) {
    mesh = parse_mesh(read_text_file(*m.file));
  } else if (m.generator == "unit_square") {
    mesh = generate_unit_square(m.n);
  } else if (m.generator == "two_wire_disc") {
    const TwoWireGeometry geo;
    mesh = generate_two_wire_disc(geo);
    const auto circles = geo.circles();
    for (int i = 0; i < m.refinements; ++i) mesh = refine_with_curves(mesh, circles);
    return mesh;
  } else if (m.generator == "pm_toy") {
    mesh = generate_pm_toy({}, m.n);
  } else {
    throw ConfigurationError("config: unknown mesh generator '" + m.generator + "'");
  }
  for (int i = 0; i < m.refinements; ++i) mesh = refine_uniform(mesh);
  return mesh;
}

}  // namespace magfe
