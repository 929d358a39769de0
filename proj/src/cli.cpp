#include "wspec/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "wspec/assembly.hpp"
#include "wspec/config.hpp"
#include "wspec/eigensolve.hpp"
#include "wspec/json_out.hpp"
#include "wspec/mesh.hpp"
#include "wspec/nodal.hpp"
#include "wspec/verify.hpp"

#ifndef WSPEC_VERSION
#define WSPEC_VERSION "0.0.0"
#endif

namespace wspec {

namespace fs = std::filesystem;
using Json = nlohmann::json;

const char* tool_version() { return WSPEC_VERSION; }

namespace {

std::string hex(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// FNV-1a over the file bytes.
std::string file_hash(const std::string& path) {
  const std::string bytes = read_text_file(path);
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return hex(h);
}

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string safe_name(const std::string& s) {
  std::string out;
  for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-') ? c : '_';
  return out;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create directory '" + dir + "': " + ec.message());
}

void write_json(const std::string& path, const Json& j) { write_text_file(path, dump_json(j) + "\n"); }

void write_manifest(const std::string& dir, const std::string& command, const Json& config, const std::vector<std::string>& inputs) {
  Json hashes = Json::object();
  for (const auto& p : inputs) hashes[p] = file_hash(p);
  write_json((fs::path(dir) / "manifest.json").string(),
             {{"tool", "wspec"}, {"version", tool_version()}, {"command", command}, {"config", config}, {"inputs", hashes}});
}

Json nodal_options_json(const NodalOptions& o) {
  return {{"tau_rel", o.tau_rel}, {"r_fit", o.r_fit_factor}, {"n_max", o.n_max}, {"confident_residual", o.confident_residual}};
}

struct VerifyRun {
  VerificationReport report;
  std::vector<InstanceResult> results;
};

VerifyRun run_verification(const RunConfig& config) {
  VerifyRun run;
  run.report.index_convention = index_convention_text();
  const VerifyOptions options = config.verify_options();
  for (const auto& inst : build_instances(config)) run.results.push_back(verify_instance(inst, options, run.report));
  return run;
}

void write_verification(const std::string& dir, const VerifyRun& run) {
  ensure_dir(dir);
  write_json((fs::path(dir) / "report.json").string(), run.report.to_json());
  write_text_file((fs::path(dir) / "report.txt").string(), run.report.to_text());
  const fs::path spectra = fs::path(dir) / "spectra";
  ensure_dir(spectra.string());
  for (const auto& r : run.results) {
    Json j = spectrum_to_json(r.spectrum);
    j["instance"] = r.name;
    j["mesh_clusters"] = r.clusters;
    j["domain_counts"] = r.domain_counts;
    write_json((spectra / (safe_name(r.name) + ".json")).string(), j);
  }
}

struct Args {
  // mesh
  std::string shape;
  double mesh_h = 0.05;
  int refinements = 0;
  // solve
  std::string mesh_path;
  std::string phi = "0";
  std::string potential;
  std::string problem;
  int k = 6;
  double tol = 1e-10;
  std::uint64_t seed = 1;
  // nodal
  std::string spectrum_path;
  int index = 0;
  std::string svg;
  double tau_rel = NodalOptions{}.tau_rel;
  bool no_singular = false;
  // verify / sweep
  std::string config;
  bool allow_fail = false;
  std::string out;
};

int cmd_mesh(const Args& a) {
  TriMesh mesh = generate(Shape::parse(a.shape), a.mesh_h);
  for (int i = 0; i < a.refinements; ++i) mesh = refine(mesh);
  ensure_dir(a.out);
  const std::string path = (fs::path(a.out) / "mesh.json").string();
  save(mesh, path);
  write_manifest(a.out, "mesh", {{"shape", a.shape}, {"h", a.mesh_h}, {"refinements", a.refinements}}, {});
  std::cout << "mesh: " << mesh.num_vertices() << " vertices, " << mesh.num_triangles() << " triangles, mean edge "
            << mesh.mean_edge_length() << " -> " << path << "\n";
  return exit_ok;
}

std::pair<std::string, std::string> spectrum_files(const std::string& given) {
  fs::path p(given);
  if (fs::is_directory(p)) return {(p / "spectrum.json").string(), (p / "eigenvectors.json").string()};
  return {p.string(), (p.parent_path() / "eigenvectors.json").string()};
}

int cmd_solve(const Args& a) {
  const TriMesh mesh = load(a.mesh_path);
  const ProblemKind kind = a.problem.empty() ? (mesh.is_closed() ? ProblemKind::closed : ProblemKind::dirichlet)
                                             : problem_kind_from_string(a.problem);
  const ScalarField phi = ScalarField::from_string(a.phi, mesh.dimension());
  std::optional<ScalarField> potential;
  if (!a.potential.empty()) potential = ScalarField::from_string(a.potential, mesh.dimension());
  const WeightedOperator op = assemble(mesh, phi, potential ? &*potential : nullptr, kind);
  Spectrum s = smallest(op, a.k, a.tol, a.seed);
  ensure_dir(a.out);
  Json meta = spectrum_to_json(s);
  meta["phi"] = phi.to_json();
  meta["potential"] = potential ? potential->to_json() : Json(nullptr);
  meta["mesh_hash"] = hex(content_hash(mesh));
  write_json((fs::path(a.out) / "spectrum.json").string(), meta);
  write_json((fs::path(a.out) / "eigenvectors.json").string(), eigenvectors_to_json(s));
  write_manifest(a.out, "solve",
                 {{"mesh", a.mesh_path}, {"phi", phi.describe()}, {"potential", potential ? Json(potential->describe()) : Json(nullptr)},
                  {"problem", to_string(kind)}, {"k", a.k}, {"tol", a.tol}, {"seed", a.seed}},
                 {a.mesh_path});
  for (std::size_t i = 0; i < s.eigenvalues.size(); ++i) {
    std::cout << i << "  " << g17(s.eigenvalues[i]) << "  residual " << s.residuals[i] << "\n";
  }
  return exit_ok;
}

int cmd_nodal(const Args& a) {
  const TriMesh mesh = load(a.mesh_path);
  const auto [meta_path, vec_path] = spectrum_files(a.spectrum_path);
  const Spectrum s = spectrum_from_json(Json::parse(read_text_file(meta_path)), Json::parse(read_text_file(vec_path)));
  if (a.index < 0 || a.index >= static_cast<int>(s.eigenvalues.size())) {
    throw std::invalid_argument("--index " + std::to_string(a.index) + " outside [0, " + std::to_string(s.eigenvalues.size()) + ")");
  }
  int dofs = 0;
  const std::vector<int> dof_map = build_dof_map(mesh, s.problem_kind, &dofs);
  const Vector& x = s.eigenvectors[static_cast<std::size_t>(a.index)];
  if (x.size() != dofs) throw std::invalid_argument("eigenvector length does not match the mesh");
  std::vector<double> u(dof_map.size(), 0.0);
  for (std::size_t v = 0; v < dof_map.size(); ++v)
    if (dof_map[v] >= 0) u[v] = x[dof_map[v]];
  NodalOptions options;
  options.tau_rel = a.tau_rel;
  NodalAnalysis analysis = analyze(mesh, u, options);
  analysis.function_index = a.index;
  if (!a.no_singular) analysis.singular_points = detect_singular_points(mesh, u, analysis, options);
  ensure_dir(a.out);
  const std::string stem = "nodal_" + std::to_string(a.index);
  Json j = to_json(analysis);
  j["eigenvalue"] = s.eigenvalues[static_cast<std::size_t>(a.index)];
  write_json((fs::path(a.out) / (stem + ".json")).string(), j);
  const std::string svg = a.svg.empty() ? (fs::path(a.out) / (stem + ".svg")).string() : a.svg;
  write_text_file(svg, render_svg(mesh, analysis));
  write_manifest(a.out, "nodal",
                 {{"mesh", a.mesh_path}, {"spectrum", meta_path}, {"index", a.index}, {"svg", svg}, {"nodal", nodal_options_json(options)}},
                 {a.mesh_path, meta_path, vec_path});
  std::cout << "eigenpair " << a.index << ": " << analysis.domain_count << " nodal domains, " << analysis.segments.size()
            << " chains, " << analysis.singular_points.size() << " singular points\n";
  return exit_ok;
}

int finish(const VerificationReport& report, bool allow_fail) {
  const int failures = report.failures();
  if (failures == 0) return exit_ok;
  if (allow_fail) {
    std::cerr << "warning: " << failures << " failed check record(s)\n";
    return exit_ok;
  }
  std::cerr << failures << " failed check record(s)\n";
  return exit_check_failure;
}

int cmd_verify(const Args& a) {
  RunConfig config = load_config(a.config);
  if (!a.out.empty()) config.output = a.out;
  if (config.output.empty()) throw ConfigError("no output directory: pass --out or set 'output'", "output", 0);
  const VerifyRun run = run_verification(config);
  write_verification(config.output, run);
  write_manifest(config.output, "verify", config.to_json(), {a.config});
  std::cout << run.report.to_text();
  return finish(run.report, a.allow_fail);
}

int cmd_sweep(const Args& a) {
  RunConfig config = load_config(a.config);
  if (!a.out.empty()) config.output = a.out;
  if (config.output.empty()) throw ConfigError("no output directory: pass --out or set 'output'", "output", 0);
  ensure_dir(config.output);
  const auto points = expand_sweep(config);

  std::vector<std::string> axis_keys;
  for (const auto& axis : config.sweep) axis_keys.push_back(axis.key);
  int kmax = 0;
  for (const auto& inst : config.instances) kmax = std::max(kmax, inst.k);
  if (config.canonical_suite) kmax = std::max(kmax, 10);

  std::ostringstream csv;
  csv << "point";
  for (const auto& key : axis_keys) csv << "," << key;
  csv << ",instance";
  for (int i = 0; i < kmax; ++i) csv << ",lambda_" << i;
  for (int i = 0; i < kmax; ++i) csv << ",domains_" << i;
  for (const auto& name : check_names()) csv << ",pass_rate_" << name;
  csv << "\n";

  int failures = 0;
  for (const auto& gp : points) {
    const std::string dir = (fs::path(config.output) / gp.label).string();
    const VerifyRun run = run_verification(gp.config);
    write_verification(dir, run);
    write_manifest(dir, "sweep", gp.config.to_json(), {a.config});
    failures += run.report.failures();
    for (const auto& r : run.results) {
      csv << gp.label;
      for (const auto& key : axis_keys) {
        const Json& v = gp.values.at(key);
        std::string cell = v.is_number() ? g17(v.get<double>()) : (v.is_string() ? v.get<std::string>() : dump_json(v, 0));
        if (cell.find_first_of(",\"\n") != std::string::npos) {
          std::string quoted = "\"";
          for (char c : cell) quoted += c == '"' ? std::string("\"\"") : std::string(1, c);
          cell = quoted + "\"";
        }
        csv << "," << cell;
      }
      csv << "," << r.name;
      for (int i = 0; i < kmax; ++i) {
        csv << ",";
        if (i < static_cast<int>(r.spectrum.eigenvalues.size()) && i < static_cast<int>(r.domain_counts.size())) csv << g17(r.spectrum.eigenvalues[static_cast<std::size_t>(i)]);
      }
      for (int i = 0; i < kmax; ++i) {
        csv << ",";
        if (i < static_cast<int>(r.domain_counts.size())) csv << r.domain_counts[static_cast<std::size_t>(i)];
      }
      for (const auto& name : check_names()) {
        int pass = 0, total = 0;
        for (const auto& rec : run.report.records) {
          if (rec.status != "ok" || rec.check.rfind(name, 0) != 0) continue;
          if (rec.instance != r.name && rec.instance != r.name + " probe") continue;
          ++total;
          pass += rec.pass ? 1 : 0;
        }
        csv << ",";
        if (total > 0) csv << g17(static_cast<double>(pass) / total);
      }
      csv << "\n";
    }
    std::cout << gp.label << ": " << run.report.failures() << " failure(s)\n";
  }
  write_text_file((fs::path(config.output) / "index.csv").string(), csv.str());
  write_manifest(config.output, "sweep", config.to_json(), {a.config});
  if (failures == 0) return exit_ok;
  if (a.allow_fail) {
    std::cerr << "warning: " << failures << " failed check record(s)\n";
    return exit_ok;
  }
  std::cerr << failures << " failed check record(s)\n";
  return exit_check_failure;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"weighted Laplacian spectra, nodal sets and property checks on triangle meshes", "wspec"};
  app.set_help_flag("--help", "print this help and exit");
  app.set_version_flag("--version", tool_version());
  app.require_subcommand(1);
  Args a;

  auto* mesh = app.add_subcommand("mesh", "generate a mesh");
  mesh->add_option("--shape", a.shape, "disk(r) | rectangle(w,h) | annulus(r0,r1) | flat_torus(lx,ly) | sphere(r)")->required();
  mesh->add_option("--h", a.mesh_h, "target mean edge length")->check(CLI::PositiveNumber);
  mesh->add_option("--refine", a.refinements, "uniform refinements after generation")->check(CLI::Range(0, 6));
  mesh->add_option("--out", a.out, "output directory")->required();

  auto* solve = app.add_subcommand("solve", "smallest eigenpairs of the weighted operator");
  solve->add_option("--mesh", a.mesh_path, "mesh file")->required()->check(CLI::ExistingFile);
  solve->add_option("--phi", a.phi, "weight field: number, builtin call, expression or JSON spec");
  solve->add_option("--h", a.potential, "potential field, same syntax as --phi");
  solve->add_option("--problem", a.problem, "dirichlet | closed (default from the mesh)")
      ->check(CLI::IsMember({"dirichlet", "closed"}));
  solve->add_option("--k", a.k, "number of eigenpairs")->check(CLI::PositiveNumber);
  solve->add_option("--tol", a.tol, "relative residual tolerance")->check(CLI::Range(1e-15, 1e-4));
  solve->add_option("--seed", a.seed, "start-block seed");
  solve->add_option("--out", a.out, "output directory")->required();

  auto* nodal = app.add_subcommand("nodal", "nodal domains, chains and singular points of one eigenfunction");
  nodal->add_option("--mesh", a.mesh_path, "mesh file")->required()->check(CLI::ExistingFile);
  nodal->add_option("--spectrum", a.spectrum_path, "solve output directory or spectrum.json")->required()->check(CLI::ExistingPath);
  nodal->add_option("--index", a.index, "eigenpair index (0-based)");
  nodal->add_option("--svg", a.svg, "SVG path (default <out>/nodal_<index>.svg)");
  nodal->add_option("--tau-rel", a.tau_rel, "relative zero threshold")->check(CLI::Range(0.0, 0.5));
  nodal->add_flag("--no-singular", a.no_singular, "skip singular point detection");
  nodal->add_option("--out", a.out, "output directory")->required();

  auto* verify = app.add_subcommand("verify", "run the check suite described by a config");
  verify->add_option("--config", a.config, "TOML or JSON run config")->required()->check(CLI::ExistingFile);
  verify->add_option("--out", a.out, "output directory (overrides the config)");
  verify->add_flag("--allow-fail", a.allow_fail, "report failed checks as warnings and exit 0");

  auto* sweep = app.add_subcommand("sweep", "run the check suite over a parameter grid");
  sweep->add_option("--config", a.config, "TOML or JSON run config with a [sweep] section")->required()->check(CLI::ExistingFile);
  sweep->add_option("--out", a.out, "output directory (overrides the config)");
  sweep->add_flag("--allow-fail", a.allow_fail, "report failed checks as warnings and exit 0");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_usage;
  }

  try {
    if (*mesh) return cmd_mesh(a);
    if (*solve) return cmd_solve(a);
    if (*nodal) return cmd_nodal(a);
    if (*verify) return cmd_verify(a);
    if (*sweep) return cmd_sweep(a);
  } catch (const NonConvergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_no_convergence;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return exit_usage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_usage;
  }
  return exit_usage;
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  for (const auto& s : args) argv.push_back(s.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace wspec
