#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "wspec/field.hpp"
#include "wspec/mesh.hpp"

namespace wspec {

class AssemblyError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

using SparseMatrix = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;

enum class ProblemKind { dirichlet, closed };

std::string to_string(ProblemKind kind);
ProblemKind problem_kind_from_string(const std::string& s);

struct AssemblyOptions {
  bool lumped_mass = false;
};

/// Discrete weighted weak form on P1 elements.
///
/// With w = exp(-phi):
///   stiffness  A_ij = int grad psi_i . grad psi_j w
///   mass       M_ij = int psi_i psi_j w
///   potential  H_ij = int h psi_i psi_j w
/// so that -int v Delta_phi u w = int grad u . grad v w and the discrete problem
/// is (A + H) x = lambda M x.
///
/// The stored matrices are assembled with exp(-(phi - weight_shift)); the true
/// matrices are measure_scale() times the stored ones. Eigenvalues and Rayleigh
/// quotients do not depend on the shift.
struct WeightedOperator {
  SparseMatrix stiffness;
  SparseMatrix mass;
  std::optional<SparseMatrix> potential;
  std::vector<int> dof_map;  ///< mesh vertex -> equation index, -1 for Dirichlet vertices
  ProblemKind problem_kind = ProblemKind::dirichlet;
  double weight_shift = 0.0;  ///< min of phi over the quadrature points
  double weighted_volume = 0.0;
  double potential_min = 0.0;  ///< min of h over the quadrature points (0 without potential)

  int num_dofs() const { return static_cast<int>(stiffness.rows()); }
  double measure_scale() const;
  /// A + H (stored scaling).
  SparseMatrix system_matrix() const;
  SparseMatrix true_stiffness() const { return measure_scale() * stiffness; }
  SparseMatrix true_mass() const { return measure_scale() * mass; }

  /// Per-vertex values of a coefficient vector; Dirichlet vertices get 0.
  std::vector<double> to_vertex_values(const Vector& coeffs) const;
  /// Coefficient vector interpolating a function sampled at mesh vertices.
  Vector from_vertex_values(const std::vector<double>& values) const;
};

WeightedOperator assemble(const TriMesh& mesh, const ScalarField& phi, const ScalarField* potential, ProblemKind kind,
                          const AssemblyOptions& options = {});

/// Degree-of-freedom map alone (no integration).
std::vector<int> build_dof_map(const TriMesh& mesh, ProblemKind kind, int* num_dofs = nullptr);

/// u^T M v, in the true (unshifted) measure.
double weighted_inner(const WeightedOperator& op, const Vector& u, const Vector& v);

/// (u^T (A + H) u) / (u^T M u).
double rayleigh(const WeightedOperator& op, const Vector& u);

/// Element matrices for one triangle with the weight (and optional potential)
/// sampled at the three interior Gauss points (barycentric 2/3,1/6,1/6 and
/// permutations, weights 1/3).
struct LocalMatrices {
  Eigen::Matrix3d stiffness;
  Eigen::Matrix3d mass;
  Eigen::Matrix3d potential;
};
LocalMatrices local_matrices(const Eigen::Vector3d& p0, const Eigen::Vector3d& p1, const Eigen::Vector3d& p2,
                             const std::array<double, 3>& weight_at_gauss, const std::array<double, 3>& potential_at_gauss,
                             bool lumped_mass = false);

/// Gauss points of a triangle in its chart.
std::array<Eigen::Vector3d, 3> gauss_points(const Eigen::Vector3d& p0, const Eigen::Vector3d& p1, const Eigen::Vector3d& p2);

/// Coordinate-format dump, one "row col value" triple per line.
void export_coo(const SparseMatrix& m, const std::string& path);

}  // namespace wspec
