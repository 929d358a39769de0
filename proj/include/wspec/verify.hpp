#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "wspec/assembly.hpp"
#include "wspec/eigensolve.hpp"
#include "wspec/field.hpp"
#include "wspec/mesh.hpp"
#include "wspec/nodal.hpp"

namespace wspec {

struct CheckRecord {
  std::string check;
  std::string instance;
  std::string assertion;
  nlohmann::json measured = nlohmann::json::object();
  double margin = 0.0;  ///< positive when the assertion holds with room to spare
  bool pass = true;
  /// "ok", "skipped" (under-resolved input) or "inconclusive" (low-confidence fit).
  std::string status = "ok";
};

/// Projection of a known function onto the eigenspace nearest a target
/// eigenvalue, analysed for singular points.
struct CrossingProbe {
  std::string expression;
  double eigenvalue = 0.0;
  int expected_points = 0;
  int expected_order = 0;
};

struct VerifyInstance {
  std::string name;
  TriMesh mesh;
  ScalarField phi;
  std::optional<ScalarField> potential;
  ProblemKind kind = ProblemKind::dirichlet;
  int k = 1;
  std::string mesh_source;  ///< shape and resolution, for provenance
  std::optional<CrossingProbe> probe;
};

struct VerifyOptions {
  double tol = 1e-10;
  std::uint64_t seed = 1;
  int rotations = 5;
  NodalOptions nodal;
  double lemma_tol = 0.05;
  int lemma_max_k = 5;
  int min_interior_vertices = 20;
  double cluster_c = 0.25;
  double angle_tol_deg = 10.0;
  double shift_constant = 5.0;
  bool lemma_refinement = false;  ///< also compare Lemma errors after one refinement
  std::set<std::string> checks;   ///< empty runs every check
};

/// Names accepted in VerifyOptions::checks, in report order.
const std::vector<std::string>& check_names();

struct InstanceResult {
  std::string name;
  Spectrum spectrum;
  std::vector<std::vector<int>> clusters;  ///< mesh-aware multiplicity groups
  std::vector<int> domain_counts;          ///< of the basis eigenfunctions
  nlohmann::json provenance;
};

struct VerificationReport {
  std::vector<nlohmann::json> provenance;
  std::vector<CheckRecord> records;
  std::string index_convention;

  int failures() const;
  int count(const std::string& check, bool passed) const;
  nlohmann::json to_json() const;
  std::string to_text() const;
};

// Individual checks. Eigenpair i (0-based) is lambda_{i+1} for Dirichlet
// problems and lambda^c_i for closed ones, so the Courant bound on a cluster
// whose largest member is j is j + 1 in both cases.

std::vector<CheckRecord> check_courant(const std::string& instance, const Spectrum& s,
                                       const std::vector<std::vector<int>>& clusters, const std::vector<NodalAnalysis>& basis,
                                       const std::vector<std::pair<int, NodalAnalysis>>& rotated, int up_to);

std::vector<CheckRecord> check_nodal_domain_eigenvalue(const std::string& instance, const TriMesh& mesh,
                                                       const WeightedOperator& op, const ScalarField& phi,
                                                       const ScalarField* potential, const Spectrum& s, int index,
                                                       const VerifyOptions& options);

std::vector<CheckRecord> check_multiplicity_bound(const std::string& instance, const std::vector<std::vector<int>>& clusters,
                                                  const std::vector<double>& eigenvalues, int genus, int i_max);

std::vector<CheckRecord> check_order_bound(const std::string& instance, const std::vector<std::vector<int>>& clusters,
                                           const std::vector<std::pair<int, const NodalAnalysis*>>& analyses, int genus);

std::vector<CheckRecord> check_equiangular(const std::string& instance,
                                           const std::vector<std::pair<int, const NodalAnalysis*>>& analyses,
                                           double angle_tol_deg);

std::vector<CheckRecord> check_orthogonality_and_basics(const std::string& instance, const Spectrum& s,
                                                        const WeightedOperator& op, const std::vector<std::vector<int>>& clusters,
                                                        const std::vector<NodalAnalysis>& basis, bool has_potential);

std::vector<CheckRecord> check_shift_and_reduction(const std::string& instance, const TriMesh& mesh, const ScalarField& phi,
                                                   const ScalarField* potential, ProblemKind kind, int k, double c,
                                                   const VerifyOptions& options);

/// Relative errors of the Lemma check on `mesh` and on refine(mesh); passes when
/// the largest error per eigenpair does not grow.
std::vector<CheckRecord> check_lemma_refinement(const VerifyInstance& instance, const VerifyOptions& options);

/// Vertex values of the M-orthogonal projection of `values` onto the given
/// eigenvectors.
std::vector<double> project_onto(const WeightedOperator& op, const Spectrum& s, const std::vector<int>& members,
                                 const std::vector<double>& values);

/// Solves an instance and runs the selected checks, appending to `report`.
InstanceResult verify_instance(const VerifyInstance& instance, const VerifyOptions& options, VerificationReport& report);

/// Square and disk (Dirichlet), sphere and flat torus (closed), each with
/// phi in {0, radial_quadratic(1), gaussian_well(2, 0.5, center)}.
std::vector<VerifyInstance> canonical_suite(double planar_h = 0.02, double sphere_h = 0.04, double torus_h = 0.05);

std::string index_convention_text();

}  // namespace wspec
