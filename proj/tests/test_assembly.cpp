#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>
#include <tuple>

#include "wspec/assembly.hpp"
#include "wspec/eigensolve.hpp"

using namespace wspec;

namespace {

constexpr double pi = std::numbers::pi;

Vector interpolate(const WeightedOperator& op, const TriMesh& m, double (*f)(const Eigen::Vector3d&)) {
  std::vector<double> values;
  for (const auto& p : m.vertices()) values.push_back(f(p));
  return op.from_vertex_values(values);
}

double max_abs(const SparseMatrix& m) {
  double out = 0.0;
  for (int c = 0; c < m.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(m, c); it; ++it) out = std::max(out, std::abs(it.value()));
  return out;
}

double ground_mode(const Eigen::Vector3d& p) { return std::sin(pi * p.x()) * std::sin(pi * p.y()); }

std::set<std::tuple<int, int, double>> triples(const SparseMatrix& m) {
  std::set<std::tuple<int, int, double>> out;
  for (int c = 0; c < m.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(m, c); it; ++it) out.insert({static_cast<int>(it.row()), static_cast<int>(it.col()), it.value()});
  return out;
}

std::set<std::tuple<int, int, double>> transposed_triples(const SparseMatrix& m) {
  std::set<std::tuple<int, int, double>> out;
  for (auto [r, c, v] : triples(m)) out.insert({c, r, v});
  return out;
}

}  // namespace

TEST_CASE("reference triangle element matrices") {
  const LocalMatrices lm = local_matrices({0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 1}, {0, 0, 0});
  Eigen::Matrix3d a;
  a << 2, -1, -1, -1, 1, 0, -1, 0, 1;
  Eigen::Matrix3d m;
  m << 2, 1, 1, 1, 2, 1, 1, 1, 2;
  CHECK((lm.stiffness - 0.5 * a).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK((lm.mass - m / 24.0).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK(lm.potential.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("constant phi scales the true matrices by exp(-c)") {
  const TriMesh mesh = generate(Shape::disk(1), 0.15);
  const WeightedOperator a0 = assemble(mesh, ScalarField::constant(0.0), nullptr, ProblemKind::dirichlet);
  for (double c : {-3.0, 0.7, 5.0}) {
    const WeightedOperator ac = assemble(mesh, ScalarField::constant(c), nullptr, ProblemKind::dirichlet);
    const SparseMatrix ds = ac.true_stiffness() - std::exp(-c) * a0.true_stiffness();
    const SparseMatrix dm = ac.true_mass() - std::exp(-c) * a0.true_mass();
    CHECK(max_abs(ds) <= 1e-15 * std::exp(-c) * max_abs(a0.true_stiffness()));
    CHECK(max_abs(dm) <= 1e-15 * std::exp(-c) * max_abs(a0.true_mass()));
    CHECK(ac.weighted_volume == doctest::Approx(std::exp(-c) * a0.weighted_volume).epsilon(1e-14));
  }
}

TEST_CASE("closed torus stiffness annihilates constants") {
  const TriMesh mesh = generate(Shape::flat_torus(2 * pi, 2 * pi), 0.2);
  for (const ScalarField& phi : {ScalarField::constant(0.0), ScalarField::radial_quadratic(1.0, 2, {pi, pi})}) {
    const WeightedOperator op = assemble(mesh, phi, nullptr, ProblemKind::closed);
    CHECK(op.num_dofs() == static_cast<int>(mesh.num_quotient_vertices()));
    const Vector ones = Vector::Ones(op.num_dofs());
    const Vector r = op.stiffness * ones;
    for (int i = 0; i < op.num_dofs(); ++i) {
      double row = 0.0;
      for (SparseMatrix::InnerIterator it(op.stiffness, i); it; ++it) row = std::max(row, std::abs(it.value()));
      CHECK(std::abs(r[i]) <= 1e-12 * row);
    }
    CHECK(weighted_inner(op, ones, ones) == doctest::Approx(op.weighted_volume).epsilon(1e-12));
    CHECK(std::abs(rayleigh(op, ones)) <= 1e-12);
  }
}

TEST_CASE("assembled matrices are exactly symmetric") {
  const TriMesh mesh = generate(Shape::annulus(0.4, 1.0), 0.1);
  const ScalarField phi = ScalarField::gaussian_well(2.0, 0.5, {0.3, 0.0});
  const ScalarField h = ScalarField::expression("1 + x^2", 2);
  const WeightedOperator op = assemble(mesh, phi, &h, ProblemKind::dirichlet);
  REQUIRE(op.potential.has_value());
  CHECK(triples(op.stiffness) == transposed_triples(op.stiffness));
  CHECK(triples(op.mass) == transposed_triples(op.mass));
  CHECK(triples(*op.potential) == transposed_triples(*op.potential));
}

TEST_CASE("weighted inner product and Rayleigh quotient") {
  const TriMesh mesh = generate(Shape::rectangle(1, 1), 0.05);
  const ScalarField phi = ScalarField::radial_quadratic(1.0, 2, {0.5, 0.5});
  const WeightedOperator op = assemble(mesh, phi, nullptr, ProblemKind::dirichlet);
  SeededRandom rng(7);
  Vector u(op.num_dofs()), v(op.num_dofs());
  for (int i = 0; i < op.num_dofs(); ++i) {
    u[i] = rng.normal();
    v[i] = rng.normal();
  }
  CHECK(weighted_inner(op, u, u) > 0.0);
  CHECK(weighted_inner(op, u, v) == weighted_inner(op, v, u));
  CHECK_THROWS(weighted_inner(op, u, Vector::Zero(3)));
  CHECK_THROWS(rayleigh(op, Vector::Zero(op.num_dofs())));

  const Spectrum s = smallest(op, 2);
  CHECK(rayleigh(op, s.eigenvectors[0]) == doctest::Approx(s.eigenvalues[0]).epsilon(1e-12));
  CHECK(rayleigh(op, s.eigenvectors[1]) == doctest::Approx(s.eigenvalues[1]).epsilon(1e-12));
  CHECK(rayleigh(op, u) >= s.eigenvalues[0]);
  CHECK(rayleigh(op, interpolate(op, mesh, ground_mode)) >= s.eigenvalues[0]);
}

TEST_CASE("Rayleigh quotient of the interpolated ground mode converges at second order") {
  std::vector<double> errors, sizes;
  TriMesh mesh = structured_rectangle(1, 1, 8, 8);
  for (int level = 0; level < 4; ++level) {
    if (level > 0) mesh = refine(mesh);
    const WeightedOperator op = assemble(mesh, ScalarField::constant(0.0), nullptr, ProblemKind::dirichlet);
    errors.push_back(std::abs(rayleigh(op, interpolate(op, mesh, ground_mode)) - 2 * pi * pi));
    sizes.push_back(mesh.mean_edge_length());
  }
  for (int i = 1; i < 4; ++i) {
    const double slope = std::log(errors[i - 1] / errors[i]) / std::log(sizes[i - 1] / sizes[i]);
    CAPTURE(i);
    CHECK(slope == doctest::Approx(2.0).epsilon(0.15));
  }
}

TEST_CASE("bilinear form restricted to a sign domain equals the sum over its triangles") {
  const TriMesh mesh = generate(Shape::rectangle(1, 1), 0.05);
  const ScalarField phi = ScalarField::gaussian_well(2.0, 0.5, {0.5, 0.5});
  const WeightedOperator op = assemble(mesh, phi, nullptr, ProblemKind::dirichlet);

  // Triangles of the positive domain of sin(2 pi x) sin(pi y), i.e. x < 1/2.
  const auto& tris = mesh.triangles();
  std::vector<char> in_domain(tris.size(), 0);
  std::vector<char> touches_outside(mesh.num_vertices(), 0);
  for (std::size_t t = 0; t < tris.size(); ++t) {
    double cx = 0.0;
    for (int v : tris[t]) cx += mesh.vertices()[static_cast<std::size_t>(v)].x() / 3.0;
    in_domain[t] = cx < 0.5;
    if (!in_domain[t])
      for (int v : tris[t]) touches_outside[static_cast<std::size_t>(v)] = 1;
  }
  std::vector<double> uv(mesh.num_vertices(), 0.0), vv(mesh.num_vertices(), 0.0);
  for (std::size_t i = 0; i < mesh.num_vertices(); ++i) {
    const auto& p = mesh.vertices()[i];
    if (touches_outside[i] || op.dof_map[i] < 0) continue;
    uv[i] = std::sin(2 * pi * p.x()) * std::sin(pi * p.y());
    vv[i] = p.x() * p.y() + 0.25;
  }
  const Vector u = op.from_vertex_values(uv);
  const Vector v = op.from_vertex_values(vv);
  const double global = u.dot(op.true_stiffness() * v);

  double local = 0.0;
  for (std::size_t t = 0; t < tris.size(); ++t) {
    if (!in_domain[t]) continue;
    const auto& tri = tris[t];
    const auto& p = mesh.vertices();
    const auto g = gauss_points(p[static_cast<std::size_t>(tri[0])], p[static_cast<std::size_t>(tri[1])], p[static_cast<std::size_t>(tri[2])]);
    std::array<double, 3> w{};
    for (int q = 0; q < 3; ++q) w[static_cast<std::size_t>(q)] = std::exp(-phi.eval(g[static_cast<std::size_t>(q)]));
    const LocalMatrices lm =
        local_matrices(p[static_cast<std::size_t>(tri[0])], p[static_cast<std::size_t>(tri[1])], p[static_cast<std::size_t>(tri[2])], w, {0, 0, 0});
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        local += uv[static_cast<std::size_t>(tri[static_cast<std::size_t>(a)])] * lm.stiffness(a, b) * vv[static_cast<std::size_t>(tri[static_cast<std::size_t>(b)])];
  }
  CHECK(global != 0.0);
  CHECK(global == doctest::Approx(local).epsilon(1e-12));
}

TEST_CASE("dof map") {
  const TriMesh rect = structured_rectangle(1, 1, 4, 4);
  int n = 0;
  const auto map = build_dof_map(rect, ProblemKind::dirichlet, &n);
  CHECK(n == 9);
  for (int b : rect.boundary_vertices()) CHECK(map[static_cast<std::size_t>(b)] == -1);

  const TriMesh torus = periodic_grid(1, 1, 4, 4);
  const auto tmap = build_dof_map(torus, ProblemKind::closed, &n);
  CHECK(n == 16);
  for (const auto& [canonical, duplicate] : torus.periodic_map()) CHECK(tmap[static_cast<std::size_t>(canonical)] == tmap[static_cast<std::size_t>(duplicate)]);
}

TEST_CASE("assembly errors") {
  const TriMesh disk = generate(Shape::disk(1), 0.2);
  const TriMesh sphere = generate(Shape::sphere(1), 0.3);
  CHECK_THROWS_AS(assemble(disk, ScalarField::constant(0), nullptr, ProblemKind::closed), AssemblyError);
  CHECK_THROWS_AS(assemble(sphere, ScalarField::constant(0, 3), nullptr, ProblemKind::dirichlet), AssemblyError);
  CHECK_THROWS_AS(assemble(disk, ScalarField::expression("800*x", 2), nullptr, ProblemKind::dirichlet), AssemblyError);
  CHECK_THROWS_AS(assemble(sphere, ScalarField::expression("x + y", 2), nullptr, ProblemKind::closed), AssemblyError);
  CHECK_THROWS(problem_kind_from_string("neumann"));
  CHECK(problem_kind_from_string("closed") == ProblemKind::closed);
}

TEST_CASE("lumped mass keeps row sums") {
  const TriMesh mesh = generate(Shape::flat_torus(1, 1), 0.1);
  AssemblyOptions opt;
  opt.lumped_mass = true;
  const WeightedOperator lumped = assemble(mesh, ScalarField::constant(0), nullptr, ProblemKind::closed, opt);
  const WeightedOperator consistent = assemble(mesh, ScalarField::constant(0), nullptr, ProblemKind::closed);
  const Vector ones = Vector::Ones(lumped.num_dofs());
  CHECK((lumped.mass * ones - consistent.mass * ones).cwiseAbs().maxCoeff() <= 1e-15);
  for (int c = 0; c < lumped.mass.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(lumped.mass, c); it; ++it)
      if (it.row() != it.col()) CHECK(it.value() == 0.0);
}
