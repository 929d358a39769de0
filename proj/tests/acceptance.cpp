// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "wspec/cli.hpp"
#include "wspec/verify.hpp"

using namespace wspec;
namespace fs = std::filesystem;

namespace {

constexpr double pi = std::numbers::pi;

struct Outcome {
  bool pass = true;
  std::string detail;
};

Spectrum solve(const TriMesh& mesh, ProblemKind kind, int k, const ScalarField& phi) {
  return smallest(assemble(mesh, phi, nullptr, kind), k);
}

// max |computed - exact| / exact, with an absolute test for exact zeros.
bool within(const std::vector<double>& got, const std::vector<double>& exact, double rel, double& worst) {
  bool ok = got.size() >= exact.size();
  worst = 0.0;
  for (std::size_t i = 0; i < exact.size() && i < got.size(); ++i) {
    if (exact[i] == 0.0) {
      ok = ok && std::abs(got[i]) <= 1e-8;
      continue;
    }
    const double e = std::abs(got[i] - exact[i]) / exact[i];
    worst = std::max(worst, e);
    ok = ok && e <= rel;
  }
  return ok;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome analytic_spectra() {
  Outcome o;
  double w = 0.0;

  const Spectrum sq = solve(generate(Shape::rectangle(1, 1), 0.02), ProblemKind::dirichlet, 3, ScalarField::constant(0.0));
  const bool a = within(sq.eigenvalues, oracle::rectangle_dirichlet(1, 1, 3), 0.01, w);
  o.detail += "square " + fmt("%.2e", w);
  o.pass = o.pass && a;

  const Spectrum disk = solve(generate(Shape::disk(1), 0.02), ProblemKind::dirichlet, 1, ScalarField::constant(0.0));
  const bool b = within(disk.eigenvalues, {oracle::j01 * oracle::j01}, 0.01, w);
  o.detail += ", disk " + fmt("%.2e", w);
  o.pass = o.pass && b;

  const Spectrum sph = solve(icosphere(1.0, 5), ProblemKind::closed, 9, ScalarField::constant(0.0, 3));
  const bool c = within(sph.eigenvalues, oracle::sphere_closed(9), 0.02, w);
  o.detail += ", sphere " + fmt("%.2e", w);
  o.pass = o.pass && c;

  const Spectrum tor = solve(generate(Shape::flat_torus(2 * pi, 2 * pi), 0.02), ProblemKind::closed, 6, ScalarField::constant(0.0));
  const bool d = within(tor.eigenvalues, oracle::torus_closed(6), 0.02, w);
  o.detail += ", torus " + fmt("%.2e", w);
  o.pass = o.pass && d;
  return o;
}

Outcome convergence_order() {
  std::vector<double> x, y;
  TriMesh mesh = generate(Shape::rectangle(1, 1), 0.1);
  for (int level = 0; level < 4; ++level) {
    if (level > 0) mesh = refine(mesh);
    const Spectrum s = solve(mesh, ProblemKind::dirichlet, 1, ScalarField::constant(0.0));
    x.push_back(std::log(mesh.mean_edge_length()));
    y.push_back(std::log(s.eigenvalues[0] - 2 * pi * pi));
  }
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return {std::abs(slope - 2.0) <= 0.3, "slope " + fmt("%.3f", slope)};
}

struct Tally {
  int pass = 0, fail = 0, other = 0;
};

Tally tally(const VerificationReport& r, const std::string& check, const std::function<bool(const CheckRecord&)>& filter = nullptr) {
  Tally t;
  for (const auto& rec : r.records) {
    if (rec.check != check || (filter && !filter(rec))) continue;
    if (!rec.pass) ++t.fail;
    else if (rec.status == "ok") ++t.pass;
    else ++t.other;
  }
  return t;
}

std::string describe(const Tally& t) {
  return std::to_string(t.pass) + " pass, " + std::to_string(t.fail) + " fail, " + std::to_string(t.other) + " skipped/inconclusive";
}

bool starts_with(const std::string& s, const std::string& prefix) { return s.rfind(prefix, 0) == 0; }

Outcome determinism(const fs::path& dir) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ofstream(dir / "run.toml") << R"toml(
[[instance]]
name = "disk"
shape = "disk(1)"
h = 0.05
k = 6
phi = "gaussian_well(2, 0.5, 0, 0)"

[[instance]]
name = "sphere"
shape = "sphere(1)"
problem = "closed"
h = 0.1
k = 8
phi = "radial_quadratic(1)"

[[instance]]
name = "torus"
shape = "flat_torus(2*pi, 2*pi)"
problem = "closed"
h = 0.1
k = 8
probe = { expression = "sin(x)*sin(y)", eigenvalue = 2.0, points = 4, order = 2 }
)toml";
  const std::string cfg = (dir / "run.toml").string();
  const int r1 = run_cli(std::vector<std::string>{"wspec", "verify", "--config", cfg, "--out", (dir / "a").string(), "--allow-fail"});
  const int r2 = run_cli(std::vector<std::string>{"wspec", "verify", "--config", cfg, "--out", (dir / "b").string(), "--allow-fail"});
  if (r1 != 0 || r2 != 0) return {false, "verify runs exited with " + std::to_string(r1) + ", " + std::to_string(r2)};
  int compared = 0, differing = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir / "a")) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), dir / "a");
    if (rel.filename() == "manifest.json") continue;  // records the differing --out path
    ++compared;
    differing += slurp(e.path()) == slurp(dir / "b" / rel) ? 0 : 1;
  }
  return {compared >= 5 && differing == 0, std::to_string(compared) + " files compared, " + std::to_string(differing) + " differ"};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::current_path() / "acceptance_out";
  fs::create_directories(work);
  std::map<int, Outcome> results;
  std::map<int, double> seconds;
  auto timed = [&](int id, const std::function<Outcome()>& f) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      results[id] = f();
    } catch (const std::exception& e) {
      results[id] = {false, std::string("exception: ") + e.what()};
    }
    seconds[id] += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  timed(1, analytic_spectra);
  timed(2, convergence_order);

  // Criteria 3-8 read the canonical suite report.
  VerificationReport report;
  report.index_convention = index_convention_text();
  VerifyOptions options;
  options.lemma_refinement = true;
  const auto t0 = std::chrono::steady_clock::now();
  std::string suite_error;
  try {
    for (const auto& inst : canonical_suite()) {
      const auto s0 = std::chrono::steady_clock::now();
      verify_instance(inst, options, report);
      std::printf("  solved and checked %-36s %6.1f s\n", inst.name.c_str(),
                  std::chrono::duration<double>(std::chrono::steady_clock::now() - s0).count());
    }
  } catch (const std::exception& e) {
    suite_error = e.what();
  }
  const double suite_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ofstream(work / "canonical_report.json") << report.to_json().dump(1) << "\n";
  std::ofstream(work / "canonical_report.txt") << report.to_text();

  auto from_report = [&](int id, const std::function<Outcome()>& f) {
    if (!suite_error.empty()) {
      results[id] = {false, "canonical suite aborted: " + suite_error};
      return;
    }
    timed(id, f);
  };

  from_report(3, [&] {
    const Tally t = tally(report, "courant");
    return Outcome{t.fail == 0 && t.pass > 0, describe(t)};
  });
  from_report(4, [&] {
    const Tally base = tally(report, "nodal_domain_eigenvalue");
    const Tally refined = tally(report, "nodal_domain_eigenvalue_refinement");
    double worst = 0.0;
    for (const auto& r : report.records)
      if (r.check == "nodal_domain_eigenvalue" && r.status == "ok") worst = std::max(worst, r.measured.at("relative_error").get<double>());
    return Outcome{base.fail == 0 && refined.fail == 0 && base.pass > 0 && refined.pass > 0,
                   "baseline " + describe(base) + "; refinement " + describe(refined) + "; worst error " + fmt("%.4f", worst)};
  });
  from_report(5, [&] {
    const Tally t = tally(report, "multiplicity_bound");
    bool sphere_three = false;
    int torus_records = 0;
    for (const auto& r : report.records) {
      if (r.check != "multiplicity_bound") continue;
      if (r.instance == "sphere phi=0" && r.measured.at("i") == 1) sphere_three = r.measured.at("multiplicity") == 3 && r.measured.at("bound") == 3;
      if (starts_with(r.instance, "torus") && r.measured.at("i").get<int>() <= 5) ++torus_records;
    }
    return Outcome{t.fail == 0 && sphere_three && torus_records >= 15,
                   describe(t) + "; sphere i=1 multiplicity 3 = bound: " + (sphere_three ? "yes" : "no") + "; torus i<=5 records " +
                       std::to_string(torus_records)};
  });
  from_report(6, [&] {
    const Tally order = tally(report, "order_bound");
    const Tally probe = tally(report, "crossing_probe");
    return Outcome{order.fail == 0 && probe.fail == 0 && probe.pass == 1, "order bound " + describe(order) + "; crossing probe " + describe(probe)};
  });
  from_report(7, [&] {
    const Tally t = tally(report, "equiangular");
    double worst = 0.0;
    for (const auto& r : report.records)
      if (r.check == "equiangular" && r.measured.at("max_angle_error_deg").is_number())
        worst = std::max(worst, r.measured.at("max_angle_error_deg").get<double>());
    return Outcome{t.fail == 0 && t.pass > 0, describe(t) + "; worst deviation " + fmt("%.2f", worst) + " deg"};
  });
  from_report(8, [&] {
    const Tally shift = tally(report, "shift_and_reduction");
    const Tally basics = tally(report, "orthogonality_and_basics");
    return Outcome{shift.fail == 0 && basics.fail == 0 && shift.pass > 0 && basics.pass > 0,
                   "shift/reduction " + describe(shift) + "; orthogonality/basics " + describe(basics)};
  });
  timed(9, [&] { return determinism(work / "determinism"); });

  static const char* names[] = {"",
                                "analytic spectra",
                                "convergence order",
                                "Courant nodal domain bound",
                                "nodal domain eigenvalue",
                                "multiplicity bound",
                                "vanishing order bound",
                                "equiangular branches",
                                "algebraic identities",
                                "determinism"};
  std::printf("canonical suite: %zu records, %d failures, %.1f s\n", report.records.size(), report.failures(), suite_seconds);
  bool all = true;
  for (int id = 1; id <= 9; ++id) {
    const Outcome& o = results[id];
    all = all && o.pass;
    const double extra = (id >= 3 && id <= 8) ? suite_seconds : 0.0;
    std::printf("criterion %d %-28s %s  (%s) [%.1f s%s]\n", id, names[id], o.pass ? "PASS" : "FAIL", o.detail.c_str(), seconds[id] + extra,
                extra > 0 ? " incl. shared suite" : "");
  }
  std::fflush(stdout);
  return all ? 0 : 1;
}
