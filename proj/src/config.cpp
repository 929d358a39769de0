#include "wspec/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cctype>
#include <regex>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "wspec/json_out.hpp"
#include "wspec/mesh.hpp"

namespace wspec {

ConfigError::ConfigError(const std::string& message, std::string field, int line)
    : std::runtime_error(message), field_(std::move(field)), line_(line) {}

namespace {

using Json = nlohmann::json;
using LineMap = std::map<std::string, int>;

/// TOML tree as JSON, recording the source line of every dotted path.
Json toml_to_json(const toml::node& node, const std::string& path, LineMap& lines) {
  lines[path] = static_cast<int>(node.source().begin.line);
  if (const auto* t = node.as_table()) {
    Json j = Json::object();
    for (const auto& [key, child] : *t) {
      const std::string k(key.str());
      j[k] = toml_to_json(child, path.empty() ? k : path + "." + k, lines);
    }
    return j;
  }
  if (const auto* a = node.as_array()) {
    Json j = Json::array();
    for (std::size_t i = 0; i < a->size(); ++i) {
      j.push_back(toml_to_json(*a->get(i), path + "[" + std::to_string(i) + "]", lines));
    }
    return j;
  }
  if (const auto* v = node.as_integer()) return v->get();
  if (const auto* v = node.as_floating_point()) return v->get();
  if (const auto* v = node.as_boolean()) return v->get();
  if (const auto* v = node.as_string()) return v->get();
  std::ostringstream out;
  if (const auto* v = node.as_date()) out << v->get();
  else if (const auto* v = node.as_time()) out << v->get();
  else if (const auto* v = node.as_date_time()) out << v->get();
  return out.str();
}

class Reader {
public:
  Reader(const LineMap& lines, std::string origin) : lines_(lines), origin_(std::move(origin)) {}

  [[noreturn]] void fail(const std::string& path, const std::string& what) const {
    int line = 0;
    for (std::string p = path; !p.empty();) {
      const auto it = lines_.find(p);
      if (it != lines_.end()) {
        line = it->second;
        break;
      }
      const auto cut = p.find_last_of(".[");
      p = cut == std::string::npos ? std::string() : p.substr(0, cut);
    }
    std::string where = origin_;
    if (line > 0) where += ":" + std::to_string(line);
    throw ConfigError(where + ": " + (path.empty() ? std::string("config") : "'" + path + "'") + ": " + what, path, line);
  }

  void allow(const Json& table, const std::string& path, const std::set<std::string>& keys) const {
    for (const auto& [k, v] : table.items()) {
      if (!keys.count(k)) fail(join(path, k), "unknown key");
    }
  }

  double number(const Json& table, const std::string& path, const std::string& key, double fallback,
                double lo = -HUGE_VAL, double hi = HUGE_VAL) const {
    if (!table.contains(key)) return fallback;
    const Json& v = table.at(key);
    if (!v.is_number()) fail(join(path, key), "expected a number");
    const double x = v.get<double>();
    if (!(x >= lo && x <= hi)) fail(join(path, key), "value " + fmt(x) + " outside [" + fmt(lo) + ", " + fmt(hi) + "]");
    return x;
  }

  int integer(const Json& table, const std::string& path, const std::string& key, int fallback, int lo, int hi) const {
    if (!table.contains(key)) return fallback;
    const Json& v = table.at(key);
    if (!v.is_number_integer()) fail(join(path, key), "expected an integer");
    const auto x = v.get<long long>();
    if (x < lo || x > hi) fail(join(path, key), "value " + std::to_string(x) + " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return static_cast<int>(x);
  }

  std::string string(const Json& table, const std::string& path, const std::string& key, const std::string& fallback) const {
    if (!table.contains(key)) return fallback;
    const Json& v = table.at(key);
    if (!v.is_string()) fail(join(path, key), "expected a string");
    return v.get<std::string>();
  }

  bool boolean(const Json& table, const std::string& path, const std::string& key, bool fallback) const {
    if (!table.contains(key)) return fallback;
    const Json& v = table.at(key);
    if (!v.is_boolean()) fail(join(path, key), "expected true or false");
    return v.get<bool>();
  }

  const Json& table(const Json& parent, const std::string& path, const std::string& key) const {
    static const Json empty = Json::object();
    if (!parent.contains(key)) return empty;
    const Json& v = parent.at(key);
    if (!v.is_object()) fail(join(path, key), "expected a table");
    return v;
  }

  static std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

  static std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
  }

private:
  const LineMap& lines_;
  std::string origin_;
};

void check_field(const Reader& r, const Json& spec, const std::string& path, int dimension) {
  try {
    (void)ScalarField::from_json(spec, dimension);
  } catch (const std::exception& e) {
    r.fail(path, std::string("invalid field: ") + e.what());
  }
}

std::string number_text(const Json& v, const char* spec) {
  if (!v.is_number()) return dump_json(v, 0);
  char buf[40];
  std::snprintf(buf, sizeof buf, spec, v.get<double>());
  return buf;
}

/// Replaces "{name}" placeholders inside every string of a field spec.
Json substitute(const Json& spec, const std::string& name, const Json& value) {
  const std::string token = "{" + name + "}";
  if (spec.is_string()) {
    const std::string s = spec.get<std::string>();
    if (s == token) return value;
    std::string text = value.is_string() ? value.get<std::string>() : number_text(value, "%.17g");
    std::string out = s;
    for (auto pos = out.find(token); pos != std::string::npos; pos = out.find(token, pos + text.size())) {
      out.replace(pos, token.size(), text);
    }
    return out;
  }
  if (spec.is_object() || spec.is_array()) {
    Json out = spec;
    for (auto& item : out) item = substitute(item, name, value);
    return out;
  }
  return spec;
}

bool has_placeholder(const Json& spec) {
  if (spec.is_string()) {
    static const std::regex token(R"(\{[A-Za-z_][A-Za-z0-9_]*\})");
    return std::regex_search(spec.get<std::string>(), token);
  }
  if (spec.is_object() || spec.is_array()) {
    for (const auto& item : spec)
      if (has_placeholder(item)) return true;
  }
  return false;
}

InstanceConfig read_instance(const Reader& r, const Json& t, const std::string& path, std::size_t index) {
  r.allow(t, path, {"name", "shape", "mesh_file", "h", "refinements", "problem", "k", "phi", "potential", "probe"});
  InstanceConfig c;
  c.name = r.string(t, path, "name", "instance" + std::to_string(index));
  c.shape = r.string(t, path, "shape", "");
  c.mesh_file = r.string(t, path, "mesh_file", "");
  if (c.shape.empty() == c.mesh_file.empty()) r.fail(path, "exactly one of 'shape' or 'mesh_file' is required");
  int dimension = 2;
  if (!c.shape.empty()) {
    try {
      const Shape s = Shape::parse(c.shape);
      if (s.kind == Shape::Kind::sphere) dimension = 3;
      c.kind = (s.kind == Shape::Kind::sphere || s.kind == Shape::Kind::flat_torus) ? ProblemKind::closed : ProblemKind::dirichlet;
    } catch (const std::exception& e) {
      r.fail(Reader::join(path, "shape"), e.what());
    }
  }
  c.h = r.number(t, path, "h", c.h, 1e-4, 10.0);
  c.refinements = r.integer(t, path, "refinements", 0, 0, 6);
  if (t.contains("problem")) {
    try {
      c.kind = problem_kind_from_string(r.string(t, path, "problem", ""));
    } catch (const std::exception&) {
      r.fail(Reader::join(path, "problem"), "expected \"dirichlet\" or \"closed\"");
    }
  }
  c.k = r.integer(t, path, "k", c.k, 1, 10000);
  if (t.contains("phi")) c.phi = t.at("phi");
  if (t.contains("potential")) c.potential = t.at("potential");
  if (!has_placeholder(c.phi)) check_field(r, c.phi, Reader::join(path, "phi"), dimension);
  if (!c.potential.is_null() && !has_placeholder(c.potential)) check_field(r, c.potential, Reader::join(path, "potential"), dimension);
  if (t.contains("probe")) {
    const std::string pp = Reader::join(path, "probe");
    const Json& p = r.table(t, path, "probe");
    r.allow(p, pp, {"expression", "eigenvalue", "points", "order"});
    CrossingProbe probe;
    probe.expression = r.string(p, pp, "expression", "");
    if (probe.expression.empty()) r.fail(pp, "'expression' is required");
    probe.eigenvalue = r.number(p, pp, "eigenvalue", 0.0);
    probe.expected_points = r.integer(p, pp, "points", 0, 0, 1000);
    probe.expected_order = r.integer(p, pp, "order", 2, 1, 20);
    c.probe = probe;
  }
  return c;
}

std::string label_value(const Json& v) {
  std::string s = v.is_string() ? v.get<std::string>() : number_text(v, "%.10g");
  std::string out;
  for (char ch : s) out += (std::isalnum(static_cast<unsigned char>(ch)) || ch == '.' || ch == '-' || ch == '_') ? ch : '_';
  if (out.size() > 40) out.resize(40);
  return out;
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& origin) {
  LineMap lines;
  Json root;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    try {
      root = Json::parse(text);
    } catch (const Json::parse_error& e) {
      const std::size_t at = std::min(e.byte, text.size());
      const int line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(at), '\n'));
      throw ConfigError(origin + ":" + std::to_string(line) + ": JSON syntax error: " + e.what(), "", line);
    }
  } else {
    try {
      const toml::table t = toml::parse(text, origin);
      root = toml_to_json(t, "", lines);
    } catch (const toml::parse_error& e) {
      const int line = static_cast<int>(e.source().begin.line);
      throw ConfigError(origin + ":" + std::to_string(line) + ": TOML syntax error: " + std::string(e.description()), "", line);
    }
  }
  const Reader r(lines, origin);
  if (!root.is_object()) r.fail("", "top level must be a table");
  r.allow(root, "", {"output", "suite", "solver", "nodal", "verify", "instance", "sweep"});

  RunConfig c;
  c.output = r.string(root, "", "output", "");
  if (root.contains("suite")) {
    const Json& s = root.at("suite");
    if (s.is_string()) {
      if (s.get<std::string>() != "canonical") r.fail("suite", "only \"canonical\" is known");
      c.canonical_suite = true;
    } else if (s.is_object()) {
      r.allow(s, "suite", {"name", "planar_h", "sphere_h", "torus_h"});
      if (r.string(s, "suite", "name", "canonical") != "canonical") r.fail("suite.name", "only \"canonical\" is known");
      c.canonical_suite = true;
      c.canonical_planar_h = r.number(s, "suite", "planar_h", c.canonical_planar_h, 1e-3, 1.0);
      c.canonical_sphere_h = r.number(s, "suite", "sphere_h", c.canonical_sphere_h, 1e-3, 1.0);
      c.canonical_torus_h = r.number(s, "suite", "torus_h", c.canonical_torus_h, 1e-3, 1.0);
    } else {
      r.fail("suite", "expected \"canonical\" or a table");
    }
  }

  const Json& solver = r.table(root, "", "solver");
  r.allow(solver, "solver", {"tol", "seed"});
  c.tol = r.number(solver, "solver", "tol", c.tol, 1e-15, 1e-4);
  if (solver.contains("seed")) {
    const Json& s = solver.at("seed");
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0)) r.fail("solver.seed", "expected a nonnegative integer");
    c.seed = s.get<std::uint64_t>();
  }

  const Json& nodal = r.table(root, "", "nodal");
  r.allow(nodal, "nodal", {"tau_rel", "r_fit", "n_max", "rotations", "confident_residual"});
  c.nodal.tau_rel = r.number(nodal, "nodal", "tau_rel", c.nodal.tau_rel, 0.0, 0.5);
  c.nodal.r_fit_factor = r.number(nodal, "nodal", "r_fit", c.nodal.r_fit_factor, 1.0, 20.0);
  c.nodal.n_max = r.integer(nodal, "nodal", "n_max", c.nodal.n_max, 1, 12);
  c.nodal.confident_residual = r.number(nodal, "nodal", "confident_residual", c.nodal.confident_residual, 0.0, 1.0);
  c.rotations = r.integer(nodal, "nodal", "rotations", c.rotations, 0, 1000);

  const Json& verify = r.table(root, "", "verify");
  r.allow(verify, "verify", {"checks", "lemma_tol", "lemma_refinement", "cluster_c", "angle_tol_deg", "shift_constant"});
  if (verify.contains("checks")) {
    const Json& list = verify.at("checks");
    if (!list.is_array()) r.fail("verify.checks", "expected an array of check names");
    const auto& known = check_names();
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string p = "verify.checks[" + std::to_string(i) + "]";
      if (!list[i].is_string()) r.fail(p, "expected a string");
      const std::string name = list[i].get<std::string>();
      if (std::find(known.begin(), known.end(), name) == known.end()) r.fail(p, "unknown check '" + name + "'");
      c.checks.push_back(name);
    }
  }
  c.lemma_tol = r.number(verify, "verify", "lemma_tol", c.lemma_tol, 0.0, 1.0);
  c.lemma_refinement = r.boolean(verify, "verify", "lemma_refinement", c.lemma_refinement);
  c.cluster_c = r.number(verify, "verify", "cluster_c", c.cluster_c, 0.0, 100.0);
  c.angle_tol_deg = r.number(verify, "verify", "angle_tol_deg", c.angle_tol_deg, 0.0, 90.0);
  c.shift_constant = r.number(verify, "verify", "shift_constant", c.shift_constant, -700.0, 700.0);

  if (root.contains("instance")) {
    const Json& inst = root.at("instance");
    if (inst.is_object()) {
      c.instances.push_back(read_instance(r, inst, "instance", 0));
    } else if (inst.is_array()) {
      for (std::size_t i = 0; i < inst.size(); ++i) {
        const std::string p = "instance[" + std::to_string(i) + "]";
        if (!inst[i].is_object()) r.fail(p, "expected a table");
        c.instances.push_back(read_instance(r, inst[i], p, i));
      }
    } else {
      r.fail("instance", "expected a table or an array of tables");
    }
  }
  if (c.instances.empty() && !c.canonical_suite) r.fail("", "no [[instance]] given and suite not set");

  if (root.contains("sweep")) {
    const Json& sw = root.at("sweep");
    auto add_axis = [&](const std::string& key, const Json& values, const std::string& p) {
      const bool known = key == "h" || key == "refinements" || key == "phi" || key == "potential" || key.rfind("params.", 0) == 0;
      if (!known || key == "params.") r.fail(p, "unknown sweep axis '" + key + "'");
      if (!values.is_array() || values.empty()) r.fail(p, "expected a nonempty array of values");
      SweepAxis axis{key, {}};
      for (std::size_t i = 0; i < values.size(); ++i) {
        const Json& v = values[i];
        const std::string vp = p + "[" + std::to_string(i) + "]";
        if ((key == "h" || key.rfind("params.", 0) == 0) && !v.is_number()) r.fail(vp, "expected a number");
        if (key == "refinements" && !(v.is_number_integer() && v.get<long long>() >= 0 && v.get<long long>() <= 6)) {
          r.fail(vp, "expected an integer in [0, 6]");
        }
        axis.values.push_back(v);
      }
      c.sweep.push_back(std::move(axis));
    };
    if (sw.is_object()) {
      for (const auto& [key, values] : sw.items()) add_axis(key, values, "sweep." + key);
    } else if (sw.is_array()) {
      for (std::size_t i = 0; i < sw.size(); ++i) {
        const std::string p = "sweep[" + std::to_string(i) + "]";
        if (!sw[i].is_object()) r.fail(p, "expected a table with 'axis' and 'values'");
        r.allow(sw[i], p, {"axis", "values"});
        const std::string key = r.string(sw[i], p, "axis", "");
        if (!sw[i].contains("values")) r.fail(p, "'values' is required");
        add_axis(key, sw[i].at("values"), p + ".values");
      }
    } else {
      r.fail("sweep", "expected a table or an array of tables");
    }
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const std::exception& e) {
    throw ConfigError(path + ": " + e.what(), "", 0);
  }
  return parse_config(text, path);
}

VerifyOptions RunConfig::verify_options() const {
  VerifyOptions o;
  o.tol = tol;
  o.seed = seed;
  o.rotations = rotations;
  o.nodal = nodal;
  o.lemma_tol = lemma_tol;
  o.lemma_refinement = lemma_refinement;
  o.cluster_c = cluster_c;
  o.angle_tol_deg = angle_tol_deg;
  o.shift_constant = shift_constant;
  o.checks = std::set<std::string>(checks.begin(), checks.end());
  return o;
}

nlohmann::json RunConfig::to_json() const {
  Json j;
  j["output"] = output;
  if (canonical_suite) {
    j["suite"] = {{"name", "canonical"}, {"planar_h", canonical_planar_h}, {"sphere_h", canonical_sphere_h}, {"torus_h", canonical_torus_h}};
  }
  j["solver"] = {{"tol", tol}, {"seed", seed}};
  j["nodal"] = {{"tau_rel", nodal.tau_rel}, {"r_fit", nodal.r_fit_factor}, {"n_max", nodal.n_max},
                {"confident_residual", nodal.confident_residual}, {"rotations", rotations}};
  j["verify"] = {{"checks", checks}, {"lemma_tol", lemma_tol}, {"lemma_refinement", lemma_refinement},
                 {"cluster_c", cluster_c}, {"angle_tol_deg", angle_tol_deg}, {"shift_constant", shift_constant}};
  Json insts = Json::array();
  for (const auto& i : instances) {
    Json t = {{"name", i.name}, {"h", i.h}, {"refinements", i.refinements}, {"problem", to_string(i.kind)}, {"k", i.k}, {"phi", i.phi}};
    if (!i.shape.empty()) t["shape"] = i.shape;
    if (!i.mesh_file.empty()) t["mesh_file"] = i.mesh_file;
    if (!i.potential.is_null()) t["potential"] = i.potential;
    if (i.probe) {
      t["probe"] = {{"expression", i.probe->expression}, {"eigenvalue", i.probe->eigenvalue},
                    {"points", i.probe->expected_points}, {"order", i.probe->expected_order}};
    }
    insts.push_back(t);
  }
  j["instance"] = insts;
  Json sw = Json::array();
  for (const auto& a : sweep) sw.push_back({{"axis", a.key}, {"values", a.values}});
  j["sweep"] = sw;
  return j;
}

std::vector<VerifyInstance> build_instances(const RunConfig& config) {
  std::vector<VerifyInstance> out;
  if (config.canonical_suite) {
    out = canonical_suite(config.canonical_planar_h, config.canonical_sphere_h, config.canonical_torus_h);
  }
  for (std::size_t n = 0; n < config.instances.size(); ++n) {
    const InstanceConfig& ic = config.instances[n];
    const std::string path = "instance[" + std::to_string(n) + "]";
    std::string source;
    auto make_mesh = [&]() {
      try {
        TriMesh m = ic.mesh_file.empty() ? generate(Shape::parse(ic.shape), ic.h) : load(ic.mesh_file);
        source = ic.mesh_file.empty() ? ic.shape + " h=" + Reader::fmt(ic.h) : ic.mesh_file;
        for (int i = 0; i < ic.refinements; ++i) m = refine(m);
        if (ic.refinements > 0) source += " refinements=" + std::to_string(ic.refinements);
        return m;
      } catch (const std::exception& e) {
        throw ConfigError(path + ": mesh: " + e.what(), path, 0);
      }
    };
    TriMesh mesh = make_mesh();
    const int dim = mesh.dimension();
    VerifyInstance vi{ic.name, std::move(mesh), ScalarField::constant(0.0, dim), std::nullopt, ic.kind, ic.k, source, ic.probe};
    try {
      vi.phi = ScalarField::from_json(ic.phi, dim);
    } catch (const std::exception& e) {
      throw ConfigError(path + ".phi: " + e.what(), path + ".phi", 0);
    }
    if (!ic.potential.is_null()) {
      try {
        vi.potential = ScalarField::from_json(ic.potential, dim);
      } catch (const std::exception& e) {
        throw ConfigError(path + ".potential: " + e.what(), path + ".potential", 0);
      }
    }
    out.push_back(std::move(vi));
  }
  return out;
}

std::vector<GridPoint> expand_sweep(const RunConfig& config) {
  std::vector<GridPoint> points;
  std::size_t total = 1;
  for (const auto& a : config.sweep) total *= a.values.size();
  for (std::size_t flat = 0; flat < total; ++flat) {
    GridPoint gp;
    gp.config = config;
    gp.config.sweep.clear();
    char prefix[24];
    std::snprintf(prefix, sizeof prefix, "%03zu", flat);
    gp.label = prefix;
    std::size_t rest = flat;
    std::size_t stride = total;
    for (const auto& a : config.sweep) {
      stride /= a.values.size();
      const Json& v = a.values[rest / stride];
      rest %= stride;
      gp.values[a.key] = v;
      gp.label += "_" + (a.key.rfind("params.", 0) == 0 ? a.key.substr(7) : a.key) + "=" + label_value(v);
      for (auto& inst : gp.config.instances) {
        if (a.key == "h") inst.h = v.get<double>();
        else if (a.key == "refinements") inst.refinements = v.get<int>();
        else if (a.key == "phi") inst.phi = v;
        else if (a.key == "potential") inst.potential = v;
        else {
          const std::string name = a.key.substr(7);
          inst.phi = substitute(inst.phi, name, v);
          if (!inst.potential.is_null()) inst.potential = substitute(inst.potential, name, v);
        }
      }
      if (a.key == "h") {
        gp.config.canonical_planar_h = gp.config.canonical_sphere_h = gp.config.canonical_torus_h = v.get<double>();
      }
    }
    points.push_back(std::move(gp));
  }
  return points;
}

}  // namespace wspec
