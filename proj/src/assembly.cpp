#include "wspec/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace wspec {

std::string to_string(ProblemKind kind) { return kind == ProblemKind::dirichlet ? "dirichlet" : "closed"; }

ProblemKind problem_kind_from_string(const std::string& s) {
  if (s == "dirichlet") return ProblemKind::dirichlet;
  if (s == "closed") return ProblemKind::closed;
  throw std::invalid_argument("problem kind must be 'dirichlet' or 'closed', got '" + s + "'");
}

double WeightedOperator::measure_scale() const { return std::exp(-weight_shift); }

SparseMatrix WeightedOperator::system_matrix() const {
  if (potential) return stiffness + *potential;
  return stiffness;
}

std::vector<double> WeightedOperator::to_vertex_values(const Vector& coeffs) const {
  if (coeffs.size() != num_dofs()) throw std::invalid_argument("coefficient vector size does not match dof count");
  std::vector<double> values(dof_map.size(), 0.0);
  for (std::size_t v = 0; v < dof_map.size(); ++v) {
    if (dof_map[v] >= 0) values[v] = coeffs[dof_map[v]];
  }
  return values;
}

Vector WeightedOperator::from_vertex_values(const std::vector<double>& values) const {
  if (values.size() != dof_map.size()) throw std::invalid_argument("vertex value count does not match mesh");
  Vector x = Vector::Zero(num_dofs());
  for (std::size_t v = 0; v < dof_map.size(); ++v) {
    if (dof_map[v] >= 0) x[dof_map[v]] = values[v];
  }
  return x;
}

std::vector<int> build_dof_map(const TriMesh& mesh, ProblemKind kind, int* num_dofs) {
  std::vector<int> map(mesh.num_vertices(), -1);
  int next = 0;
  for (std::size_t v = 0; v < mesh.num_vertices(); ++v) {
    const int vi = static_cast<int>(v);
    if (mesh.canonical(vi) != vi) continue;
    if (kind == ProblemKind::dirichlet && mesh.is_boundary(vi)) continue;
    map[v] = next++;
  }
  for (std::size_t v = 0; v < mesh.num_vertices(); ++v) map[v] = map[static_cast<std::size_t>(mesh.canonical(static_cast<int>(v)))];
  if (num_dofs) *num_dofs = next;
  return map;
}

std::array<Eigen::Vector3d, 3> gauss_points(const Eigen::Vector3d& p0, const Eigen::Vector3d& p1, const Eigen::Vector3d& p2) {
  constexpr double a = 2.0 / 3.0, b = 1.0 / 6.0;
  return {Eigen::Vector3d(a * p0 + b * p1 + b * p2), Eigen::Vector3d(b * p0 + a * p1 + b * p2),
          Eigen::Vector3d(b * p0 + b * p1 + a * p2)};
}

LocalMatrices local_matrices(const Eigen::Vector3d& p0, const Eigen::Vector3d& p1, const Eigen::Vector3d& p2,
                             const std::array<double, 3>& w, const std::array<double, 3>& h, bool lumped_mass) {
  const Eigen::Vector3d p[3] = {p0, p1, p2};
  Eigen::Vector3d e[3];
  for (int i = 0; i < 3; ++i) e[i] = p[(i + 2) % 3] - p[(i + 1) % 3];
  const double area = 0.5 * (p1 - p0).cross(p2 - p0).norm();
  const double w_mean = (w[0] + w[1] + w[2]) / 3.0;

  // Basis values at Gauss point q: 2/3 on corner q, 1/6 elsewhere.
  auto psi = [](int i, int q) { return i == q ? 2.0 / 3.0 : 1.0 / 6.0; };
  LocalMatrices out;
  for (int i = 0; i < 3; ++i) {
    for (int j = i; j < 3; ++j) {
      const double k = e[i].dot(e[j]) / (4.0 * area) * w_mean;
      double m = 0.0, hp = 0.0;
      for (int q = 0; q < 3; ++q) {
        const double b = psi(i, q) * psi(j, q) / 3.0;
        m += b * w[q];
        hp += b * w[q] * h[q];
      }
      m *= area;
      hp *= area;
      out.stiffness(i, j) = out.stiffness(j, i) = k;
      out.mass(i, j) = out.mass(j, i) = m;
      out.potential(i, j) = out.potential(j, i) = hp;
    }
  }
  if (lumped_mass) {
    for (int i = 0; i < 3; ++i) {
      const double row = out.mass.row(i).sum();
      out.mass.row(i).setZero();
      out.mass(i, i) = row;
    }
  }
  return out;
}

WeightedOperator assemble(const TriMesh& mesh, const ScalarField& phi, const ScalarField* potential, ProblemKind kind,
                          const AssemblyOptions& options) {
  if (kind == ProblemKind::dirichlet && mesh.is_closed()) {
    throw AssemblyError("Dirichlet problem needs a mesh with boundary");
  }
  if (kind == ProblemKind::closed && !mesh.is_closed()) {
    throw AssemblyError("closed problem needs a mesh without boundary");
  }
  auto check_dim = [&](const ScalarField& f, const char* what) {
    if (!f.is_constant() && f.dimension() != mesh.dimension()) {
      throw AssemblyError(std::string(what) + " dimension " + std::to_string(f.dimension()) + " does not match mesh dimension " +
                          std::to_string(mesh.dimension()));
    }
  };
  check_dim(phi, "phi");
  if (potential) check_dim(*potential, "potential");

  auto eval_at = [&](const ScalarField& f, const Eigen::Vector3d& x) {
    if (f.is_constant()) {
      const double zero[3] = {0.0, 0.0, 0.0};
      return f.eval(std::span<const double>(zero, static_cast<std::size_t>(f.dimension())));
    }
    return f.eval(x);
  };

  const std::size_t nt = mesh.num_triangles();
  std::vector<std::array<double, 3>> phi_q(nt), h_q(nt, {0.0, 0.0, 0.0});
  double phi_min = std::numeric_limits<double>::infinity();
  double phi_max = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < nt; ++t) {
    const Triangle& tri = mesh.triangles()[t];
    const auto g = gauss_points(mesh.vertices()[tri[0]], mesh.vertices()[tri[1]], mesh.vertices()[tri[2]]);
    for (int q = 0; q < 3; ++q) {
      const double v = eval_at(phi, g[q]);
      if (!std::isfinite(v)) throw AssemblyError("phi is not finite at a quadrature point");
      phi_q[t][q] = v;
      phi_min = std::min(phi_min, v);
      phi_max = std::max(phi_max, v);
      if (potential) {
        h_q[t][q] = eval_at(*potential, g[q]);
        if (!std::isfinite(h_q[t][q])) throw AssemblyError("potential is not finite at a quadrature point");
      }
    }
  }
  if (phi_max - phi_min > 700.0) {
    throw AssemblyError("exp(-phi) overflows: phi varies by " + std::to_string(phi_max - phi_min) + " (> 700) over the mesh");
  }

  WeightedOperator op;
  op.problem_kind = kind;
  op.weight_shift = phi_min;
  if (potential) {
    op.potential_min = std::numeric_limits<double>::infinity();
    for (const auto& hq : h_q) op.potential_min = std::min({op.potential_min, hq[0], hq[1], hq[2]});
  }
  int n = 0;
  op.dof_map = build_dof_map(mesh, kind, &n);
  if (n == 0) throw AssemblyError("mesh has no free degrees of freedom");

  using Trip = Eigen::Triplet<double>;
  std::vector<Trip> ka, ma, ha;
  ka.reserve(nt * 9);
  ma.reserve(nt * 9);
  if (potential) ha.reserve(nt * 9);
  double volume = 0.0;
  for (std::size_t t = 0; t < nt; ++t) {
    const Triangle& tri = mesh.triangles()[t];
    std::array<double, 3> w;
    for (int q = 0; q < 3; ++q) w[q] = std::exp(-(phi_q[t][q] - phi_min));
    const LocalMatrices loc = local_matrices(mesh.vertices()[tri[0]], mesh.vertices()[tri[1]], mesh.vertices()[tri[2]], w,
                                             h_q[t], options.lumped_mass);
    volume += mesh.triangle_area(static_cast<int>(t)) * (w[0] + w[1] + w[2]) / 3.0;
    for (int i = 0; i < 3; ++i) {
      const int di = op.dof_map[static_cast<std::size_t>(tri[i])];
      if (di < 0) continue;
      for (int j = 0; j < 3; ++j) {
        const int dj = op.dof_map[static_cast<std::size_t>(tri[j])];
        if (dj < 0) continue;
        ka.emplace_back(di, dj, loc.stiffness(i, j));
        ma.emplace_back(di, dj, loc.mass(i, j));
        if (potential) ha.emplace_back(di, dj, loc.potential(i, j));
      }
    }
  }
  op.stiffness.resize(n, n);
  op.stiffness.setFromTriplets(ka.begin(), ka.end());
  op.mass.resize(n, n);
  op.mass.setFromTriplets(ma.begin(), ma.end());
  if (potential) {
    SparseMatrix h(n, n);
    h.setFromTriplets(ha.begin(), ha.end());
    op.potential = std::move(h);
  }
  op.weighted_volume = volume * op.measure_scale();
  return op;
}

double weighted_inner(const WeightedOperator& op, const Vector& u, const Vector& v) {
  if (u.size() != op.num_dofs() || v.size() != op.num_dofs()) throw std::invalid_argument("weighted_inner: dimension mismatch");
  // Each stored pair (i,j), (j,i) contributes the symmetric term once, so the
  // result is bitwise symmetric in u and v.
  double s = 0.0;
  for (int k = 0; k < op.mass.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(op.mass, k); it; ++it) {
      const auto i = it.row(), j = it.col();
      if (i == j) s += it.value() * (u[i] * v[i]);
      else if (i < j) s += it.value() * (u[i] * v[j] + u[j] * v[i]);
    }
  }
  return s * op.measure_scale();
}

double rayleigh(const WeightedOperator& op, const Vector& u) {
  if (u.size() != op.num_dofs()) throw std::invalid_argument("rayleigh: dimension mismatch");
  const double den = u.dot(op.mass * u);
  if (!(den > 0.0)) throw std::invalid_argument("rayleigh: zero vector");
  double num = u.dot(op.stiffness * u);
  if (op.potential) num += u.dot(*op.potential * u);
  return num / den;
}

void export_coo(const SparseMatrix& m, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  char buf[96];
  for (int k = 0; k < m.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) {
      std::snprintf(buf, sizeof buf, "%ld %ld %.17g\n", static_cast<long>(it.row()), static_cast<long>(it.col()), it.value());
      f << buf;
    }
  }
}

}  // namespace wspec
