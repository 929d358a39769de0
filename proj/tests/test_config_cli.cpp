#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include <json.hpp>

#include "wspec/cli.hpp"
#include "wspec/config.hpp"

using namespace wspec;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("wspec_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "wspec");
  return run_cli(args);
}

ConfigError config_error(const std::string& text) {
  try {
    (void)parse_config(text, "test.toml");
  } catch (const ConfigError& e) {
    return e;
  }
  FAIL("expected a config error");
  return ConfigError("", "", 0);
}

}  // namespace

TEST_CASE("TOML config parsing") {
  const RunConfig c = parse_config(R"toml(
output = "out/x"
[solver]
tol = 1e-9
seed = 11
[nodal]
tau_rel = 1e-7
rotations = 3
[verify]
checks = ["courant", "multiplicity_bound"]
lemma_tol = 0.04
[[instance]]
name = "torus"
shape = "flat_torus(2*pi, 2*pi)"
problem = "closed"
h = 0.1
k = 8
phi = "radial_quadratic(1)"
potential = { expr = "1 + x^2" }
)toml");
  CHECK(c.output == "out/x");
  CHECK(c.tol == 1e-9);
  CHECK(c.seed == 11);
  CHECK(c.nodal.tau_rel == 1e-7);
  CHECK(c.rotations == 3);
  CHECK(c.checks == std::vector<std::string>{"courant", "multiplicity_bound"});
  CHECK(c.lemma_tol == 0.04);
  REQUIRE(c.instances.size() == 1);
  CHECK(c.instances[0].kind == ProblemKind::closed);
  CHECK(c.instances[0].k == 8);
  CHECK(c.instances[0].potential["expr"] == "1 + x^2");
  const VerifyOptions o = c.verify_options();
  CHECK(o.seed == 11);
  CHECK(o.checks.count("courant") == 1);

  const auto inst = build_instances(c);
  REQUIRE(inst.size() == 1);
  CHECK(inst[0].mesh.genus() == 1);
  CHECK(inst[0].potential.has_value());

  // The normalized echo parses back to the same echo.
  CHECK(parse_config(c.to_json().dump()).to_json() == c.to_json());
}

TEST_CASE("config diagnostics carry line and field") {
  {
    const ConfigError e = config_error("output = \"x\"\n[solver]\ntol = 1e-9\nsede = 3\n");
    CHECK(e.line() == 4);
    CHECK(e.field() == "solver.sede");
    CHECK(std::string(e.what()).find("test.toml:4") != std::string::npos);
  }
  {
    const ConfigError e = config_error("[[instance]]\nname = \"a\"\nshape = \"disk(1)\"\nh = -1\n");
    CHECK(e.line() == 4);
    CHECK(e.field() == "instance[0].h");
  }
  {
    const ConfigError e = config_error("[[instance]]\nname = \"a\"\nshape = \"disk(1)\"\nproblem = \"neumann\"\n");
    CHECK(e.field() == "instance[0].problem");
  }
  {
    const ConfigError e = config_error("[solver\n");
    CHECK(e.line() == 1);
  }
  CHECK_THROWS_AS(parse_config("{\"solver\": {\"tol\": 1}}"), ConfigError);
  CHECK_THROWS_AS(parse_config("[[instance]]\nname = \"a\"\n"), ConfigError);
}

TEST_CASE("sweep expansion") {
  const RunConfig c = load_config(WSPEC_SOURCE_DIR "/configs/sweep_quadratic.toml");
  const auto grid = expand_sweep(c);
  REQUIRE(grid.size() == 6);
  CHECK(grid[0].label == "000_c=0_h=0.05");
  CHECK(grid[1].values.at("h") == 0.035);
  CHECK(grid[2].values.at("params.c") == 1.0);
  CHECK(grid[5].config.instances[0].h == 0.035);
  CHECK(grid[5].config.instances[0].phi["params"]["c"] == 4.0);
  for (const auto& g : grid) CHECK_FALSE(build_instances(g.config).empty());
  CHECK(expand_sweep(parse_config("[[instance]]\nname = \"a\"\nshape = \"disk(1)\"\n")).size() == 1);
}

TEST_CASE("solve and nodal commands") {
  const fs::path dir = scratch("solve");
  // The square's second eigenspace is two-dimensional, so its basis (and nodal
  // line) is solver-dependent; a 1 x 0.9 rectangle makes the x = 1/2 mode simple.
  REQUIRE(run({"mesh", "--shape", "rectangle(1,0.9)", "--h", "0.03", "--out", (dir / "mesh").string()}) == exit_ok);
  const std::string mesh_file = (dir / "mesh" / "mesh.json").string();
  REQUIRE(fs::exists(mesh_file));
  CHECK(fs::exists(dir / "mesh" / "manifest.json"));

  REQUIRE(run({"solve", "--mesh", mesh_file, "--problem", "dirichlet", "--k", "2", "--out", (dir / "s").string()}) == exit_ok);
  const auto spec = nlohmann::json::parse(slurp(dir / "s" / "spectrum.json"));
  CHECK(spec["eigenvalues"][0].get<double>() == doctest::Approx(22.0543012).epsilon(0.01));
  const auto manifest = nlohmann::json::parse(slurp(dir / "s" / "manifest.json"));
  CHECK(manifest["command"] == "solve");
  CHECK(manifest.contains("version"));
  CHECK(manifest["inputs"].size() == 1);

  // Byte-stable outputs.
  REQUIRE(run({"solve", "--mesh", mesh_file, "--problem", "dirichlet", "--k", "2", "--out", (dir / "s2").string()}) == exit_ok);
  CHECK(slurp(dir / "s" / "spectrum.json") == slurp(dir / "s2" / "spectrum.json"));
  CHECK(slurp(dir / "s" / "eigenvectors.json") == slurp(dir / "s2" / "eigenvectors.json"));

  REQUIRE(run({"nodal", "--mesh", mesh_file, "--spectrum", (dir / "s").string(), "--index", "1", "--out", (dir / "n").string()}) == exit_ok);
  const auto nodal = nlohmann::json::parse(slurp(dir / "n" / "nodal_1.json"));
  CHECK(nodal["domain_count"] == 2);

  // One nodal path, drawn near the middle of the 1000-wide view (x = 1/2).
  const std::string svg = slurp(dir / "n" / "nodal_1.svg");
  const std::regex nodal_path("<path d=\"([^\"]*)\" fill=\"none\" stroke=\"#000000\"");
  std::smatch m;
  REQUIRE(std::regex_search(svg, m, nodal_path));
  const std::string d = m[1];
  CHECK(std::count(d.begin(), d.end(), 'M') == 1);
  const std::regex point("[ML] ([0-9.]+) ([0-9.]+)");
  int points = 0;
  for (auto it = std::sregex_iterator(d.begin(), d.end(), point); it != std::sregex_iterator(); ++it, ++points)
    CHECK(std::abs(std::stod((*it)[1]) - 500.0) <= 0.05 * 960.0);
  CHECK(points >= 10);
}

TEST_CASE("unit square ground state from the command line") {
  const fs::path dir = scratch("square");
  REQUIRE(run({"mesh", "--shape", "rectangle(1,1)", "--h", "0.03", "--out", (dir / "mesh").string()}) == exit_ok);
  REQUIRE(run({"solve", "--mesh", (dir / "mesh" / "mesh.json").string(), "--phi", "0", "--k", "1", "--out", (dir / "s").string()}) == exit_ok);
  const auto spec = nlohmann::json::parse(slurp(dir / "s" / "spectrum.json"));
  CHECK(spec["eigenvalues"][0].get<double>() == doctest::Approx(19.7392088).epsilon(0.01));
  CHECK(spec["problem_kind"] == "dirichlet");
}

TEST_CASE("exit codes") {
  const fs::path dir = scratch("exit");
  CHECK(run({"bogus"}) == exit_usage);
  CHECK(run({"solve", "--k", "3"}) == exit_usage);
  CHECK(run({"mesh", "--shape", "hexagon(1)", "--out", (dir / "m").string()}) == exit_usage);

  write_text(dir / "bad.toml", "[solver]\ntol = \"small\"\n");
  CHECK(run({"verify", "--config", (dir / "bad.toml").string(), "--out", (dir / "v").string()}) == exit_usage);

  // Asking for more nodal-domain accuracy than a coarse mesh can give fails the check.
  write_text(dir / "strict.toml", R"toml(
[verify]
checks = ["nodal_domain_eigenvalue"]
lemma_tol = 1e-6
[[instance]]
name = "disk"
shape = "disk(1)"
h = 0.1
k = 3
phi = "gaussian_well(2, 0.5, 0.3, 0.1)"
)toml");
  CHECK(run({"verify", "--config", (dir / "strict.toml").string(), "--out", (dir / "strict").string()}) == exit_check_failure);
  CHECK(run({"verify", "--config", (dir / "strict.toml").string(), "--out", (dir / "strict2").string(), "--allow-fail"}) == exit_ok);
  CHECK(fs::exists(dir / "strict" / "report.json"));
}

TEST_CASE("verify and sweep outputs are byte-stable") {
  const fs::path dir = scratch("verify");
  write_text(dir / "small.toml", R"toml(
[[instance]]
name = "disk"
shape = "disk(1)"
h = 0.1
k = 4
phi = { builtin = "gaussian_well", params = { A = 2, sigma = 0.5, center = [0, 0] } }

[[instance]]
name = "sphere"
shape = "sphere(1)"
problem = "closed"
h = 0.2
k = 5
)toml");
  REQUIRE(run({"verify", "--config", (dir / "small.toml").string(), "--out", (dir / "a").string()}) == exit_ok);
  REQUIRE(run({"verify", "--config", (dir / "small.toml").string(), "--out", (dir / "b").string()}) == exit_ok);
  for (const char* f : {"report.json", "report.txt", "spectra/disk.json", "spectra/sphere.json"}) {
    CAPTURE(f);
    REQUIRE(fs::exists(dir / "a" / f));
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  }
  const auto manifest = nlohmann::json::parse(slurp(dir / "a" / "manifest.json"));
  CHECK(manifest["config"]["instance"].size() == 2);

  write_text(dir / "sweep.toml", R"toml(
[[instance]]
name = "square"
shape = "rectangle(1,1)"
h = 0.1
k = 3
phi = "radial_quadratic({c})"

[sweep]
"params.c" = [0.0, 2.0]
)toml");
  REQUIRE(run({"sweep", "--config", (dir / "sweep.toml").string(), "--out", (dir / "sw").string()}) == exit_ok);
  const std::string csv = slurp(dir / "sw" / "index.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  CHECK(csv.rfind("point,params.c,instance,lambda_0", 0) == 0);
  CHECK(fs::exists(dir / "sw" / "000_c=0" / "report.json"));
  CHECK(fs::exists(dir / "sw" / "001_c=2" / "manifest.json"));
}
