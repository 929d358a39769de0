#include <doctest.h>

#include <cmath>
#include <numbers>

#include "wspec/verify.hpp"

using namespace wspec;

namespace {

constexpr double pi = std::numbers::pi;

NodalAnalysis with_count(int count) {
  NodalAnalysis a;
  a.domain_count = count;
  return a;
}

NodalAnalysis with_point(int order, std::vector<double> angles, bool confident) {
  NodalAnalysis a;
  SingularPoint sp;
  sp.fit.order = order;
  sp.fit.branch_angles = std::move(angles);
  sp.fit.residual = confident ? 0.01 : 0.5;
  sp.confident = confident;
  a.singular_points.push_back(sp);
  return a;
}

Spectrum fake_spectrum(std::vector<double> values, ProblemKind kind) {
  Spectrum s;
  s.eigenvalues = std::move(values);
  s.problem_kind = kind;
  return s;
}

bool all_pass(const std::vector<CheckRecord>& records) {
  for (const auto& r : records)
    if (!r.pass) return false;
  return true;
}

}  // namespace

TEST_CASE("multiplicity bound formula") {
  SUBCASE("sphere attains the bound at i = 1") {
    const auto r = check_multiplicity_bound("sphere", {{0}, {1, 2, 3}, {4, 5, 6, 7, 8}}, {0, 2, 2, 2, 6, 6, 6, 6, 6}, 0, 1);
    REQUIRE(r.size() == 1);
    CHECK(r[0].pass);
    CHECK(r[0].measured["bound"] == 3);
    CHECK(r[0].measured["multiplicity"] == 3);
    CHECK(r[0].margin == 0.0);
  }
  SUBCASE("torus i = 1 bound is ten") {
    const auto r = check_multiplicity_bound("torus", {{0}, {1, 2, 3, 4}}, {0, 1, 1, 1, 1}, 1, 4);
    REQUIRE(r.size() == 4);
    CHECK(r[0].measured["bound"] == 10);
    CHECK(r[0].measured["multiplicity"] == 4);
    CHECK(r[3].measured["bound"] == 28);
    CHECK(all_pass(r));
  }
  SUBCASE("an oversized cluster on the sphere fails") {
    const auto r = check_multiplicity_bound("bad", {{0}, {1, 2, 3, 4}}, {0, 2, 2, 2, 2}, 0, 1);
    REQUIRE(r.size() == 1);
    CHECK_FALSE(r[0].pass);
    CHECK(r[0].margin == -1.0);
  }
}

TEST_CASE("Courant bound uses the largest index of the cluster") {
  const Spectrum d = fake_spectrum({1, 2, 2, 3}, ProblemKind::dirichlet);
  const std::vector<std::vector<int>> clusters = {{0}, {1, 2}, {3}};
  SUBCASE("counts within the bound pass") {
    const auto r = check_courant("d", d, clusters, {with_count(1), with_count(3), with_count(2), with_count(4)}, {}, 4);
    REQUIRE(r.size() == 4);
    CHECK(all_pass(r));
    CHECK(r[1].measured["bound"] == 3);
  }
  SUBCASE("a rotated sample above the bound fails") {
    const auto r = check_courant("d", d, clusters, {with_count(1), with_count(2), with_count(2), with_count(3)}, {{1, with_count(4)}}, 4);
    REQUIRE(r.size() == 5);
    CHECK_FALSE(r[4].pass);
    CHECK(r[4].measured["function"] == "rotation 0");
  }
  SUBCASE("ground state above one fails") {
    const auto r = check_courant("d", d, clusters, {with_count(2)}, {}, 1);
    CHECK_FALSE(r[0].pass);
  }
  SUBCASE("closed surfaces count lambda_0 as index 0") {
    const Spectrum c = fake_spectrum({0, 1, 1, 1, 1}, ProblemKind::closed);
    const auto r = check_courant("c", c, {{0}, {1, 2, 3, 4}}, {with_count(1), with_count(2), with_count(2), with_count(2), with_count(2)}, {}, 5);
    CHECK(all_pass(r));
    CHECK(r[1].measured["bound"] == 5);
  }
}

TEST_CASE("order bound") {
  const std::vector<std::vector<int>> clusters = {{0}, {1, 2, 3, 4}, {5, 6, 7, 8}};
  const NodalAnalysis crossing = with_point(2, {0, pi / 2, pi, 3 * pi / 2}, true);
  const NodalAnalysis weak = with_point(5, {}, false);
  const auto r = check_order_bound("torus", clusters, {{5, &crossing}, {6, &weak}}, 1);
  REQUIRE(r.size() == 2);
  CHECK(r[0].pass);
  CHECK(r[0].measured["i"] == 8);
  CHECK(r[0].margin == 8.0);
  CHECK(r[1].pass);
  CHECK(r[1].status == "inconclusive");

  const auto s = check_order_bound("sphere", {{0}, {1, 2, 3}}, {{1, &crossing}}, 0);
  REQUIRE(s.size() == 1);
  CHECK(s[0].pass);
  const auto t = check_order_bound("sphere", {{0}, {1}}, {{1, &crossing}}, 0);
  CHECK_FALSE(t[0].pass);
}

TEST_CASE("equiangular check") {
  const NodalAnalysis good = with_point(2, {0.05, pi / 2 + 0.05, pi - 0.05, 3 * pi / 2}, true);
  const NodalAnalysis bad = with_point(2, {0, 1.2, pi, 3 * pi / 2}, true);
  const NodalAnalysis missing = with_point(2, {0, pi / 2, pi}, true);
  const NodalAnalysis weak = with_point(2, {0, 1.2, pi, 3 * pi / 2}, false);
  const auto r = check_equiangular("t", {{1, &good}, {2, &bad}, {3, &missing}, {4, &weak}}, 10.0);
  REQUIRE(r.size() == 3);
  CHECK(r[0].pass);
  CHECK_FALSE(r[1].pass);
  CHECK_FALSE(r[2].pass);
}

TEST_CASE("checks on a solved square instance") {
  const TriMesh mesh = generate(Shape::rectangle(1, 1), 0.05);
  const ScalarField phi = ScalarField::radial_quadratic(1.0, 2, {0.5, 0.5});
  const WeightedOperator op = assemble(mesh, phi, nullptr, ProblemKind::dirichlet);
  Spectrum s = smallest(op, 4);
  const auto clusters = mesh_clusters(s, mesh.mean_edge_length());
  std::vector<NodalAnalysis> basis;
  for (const auto& x : s.eigenvectors) basis.push_back(analyze(mesh, op.to_vertex_values(x)));

  CHECK(all_pass(check_orthogonality_and_basics("square", s, op, clusters, basis, false)));
  CHECK(all_pass(check_shift_and_reduction("square", mesh, phi, nullptr, ProblemKind::dirichlet, 4, 5.0, {})));

  const auto ground = check_nodal_domain_eigenvalue("square", mesh, op, phi, nullptr, s, 0, {});
  REQUIRE(ground.size() == 1);
  CHECK(ground[0].pass);
  CHECK(ground[0].measured["relative_error"].get<double>() <= 1e-6);

  const auto second = check_nodal_domain_eigenvalue("square", mesh, op, phi, nullptr, s, 1, {});
  REQUIRE(second.size() == 2);
  for (const auto& r : second) {
    CHECK(r.pass);
    CHECK(r.status == "ok");
    CHECK(r.measured["relative_error"].get<double>() <= 0.05);
  }
}

TEST_CASE("projection onto an eigenspace") {
  const TriMesh mesh = generate(Shape::flat_torus(2 * pi, 2 * pi), 0.15);
  const WeightedOperator op = assemble(mesh, ScalarField::constant(0.0), nullptr, ProblemKind::closed);
  const Spectrum s = smallest(op, 5);
  std::vector<double> values;
  for (const auto& p : mesh.vertices()) values.push_back(std::sin(p.x()) + 0.5 * std::cos(3 * p.y()));
  const auto projected = project_onto(op, s, {1, 2, 3, 4}, values);
  REQUIRE(projected.size() == mesh.num_vertices());
  double err = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) err = std::max(err, std::abs(projected[i] - std::sin(mesh.vertices()[i].x())));
  CHECK(err <= 0.05);
}

TEST_CASE("verify_instance is deterministic and passes on a small disk") {
  VerifyInstance inst{"disk small", generate(Shape::disk(1), 0.08), ScalarField::gaussian_well(2.0, 0.5, {0.0, 0.0}), std::nullopt,
                      ProblemKind::dirichlet, 5, "disk(1) h=0.08", std::nullopt};
  VerifyOptions opt;
  VerificationReport a, b;
  a.index_convention = b.index_convention = index_convention_text();
  const InstanceResult ra = verify_instance(inst, opt, a);
  verify_instance(inst, opt, b);
  CHECK(a.failures() == 0);
  CHECK(a.to_json().dump() == b.to_json().dump());
  CHECK(a.to_text() == b.to_text());
  CHECK(ra.spectrum.eigenvalues.size() >= 5);
  CHECK(ra.domain_counts[0] == 1);
  for (const char* name : {"orthogonality_and_basics", "shift_and_reduction", "courant", "nodal_domain_eigenvalue"})
    CHECK(a.count(name, true) > 0);
  CHECK(a.to_json()["provenance"][0]["mesh_hash"].is_string());

  SUBCASE("check selection") {
    opt.checks = {"courant"};
    VerificationReport c;
    verify_instance(inst, opt, c);
    for (const auto& r : c.records) CHECK(r.check == "courant");
  }
}

TEST_CASE("failed records appear in the text summary") {
  VerificationReport r;
  r.index_convention = index_convention_text();
  CheckRecord rec;
  rec.check = "courant";
  rec.instance = "x";
  rec.assertion = "domain_count <= 1";
  rec.pass = false;
  rec.margin = -1;
  r.records.push_back(rec);
  CHECK(r.failures() == 1);
  CHECK(r.to_text().find("FAIL") != std::string::npos);
  CHECK(r.to_json()["failures"] == 1);
}

TEST_CASE("canonical suite layout") {
  const auto suite = canonical_suite(0.1, 0.2, 0.3);
  REQUIRE(suite.size() == 12);
  int closed = 0, probes = 0;
  for (const auto& inst : suite) {
    closed += inst.kind == ProblemKind::closed;
    probes += inst.probe.has_value();
    CHECK(inst.k >= 8);
  }
  CHECK(closed == 6);
  CHECK(probes == 1);
  CHECK(check_names().size() == 8);
}
