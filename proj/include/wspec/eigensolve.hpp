#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "wspec/assembly.hpp"

namespace wspec {

struct SolverReport {
  int iterations = 0;
  double tolerance = 0.0;
  std::uint64_t seed = 0;
  double shift = 0.0;
  int block_size = 0;
  int shift_retries = 0;
  std::string method;
};

/// Raised when the iteration budget runs out; carries the best residuals seen.
class NonConvergenceError : public std::runtime_error {
public:
  NonConvergenceError(const std::string& what, std::vector<double> best) : std::runtime_error(what), best_residuals(std::move(best)) {}
  std::vector<double> best_residuals;
};

class FactorizationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct Spectrum {
  std::vector<double> eigenvalues;  ///< ascending
  std::vector<Vector> eigenvectors; ///< M-orthonormal (true measure)
  std::vector<double> residuals;
  std::vector<std::vector<int>> clusters;
  ProblemKind problem_kind = ProblemKind::dirichlet;
  SolverReport report;

  double max_residual() const;
  /// Index of the cluster containing eigenpair i.
  int cluster_of(int i) const;
};

/// Normalized residual ||(A+H)x - lambda M x||_2 / ((||A+H||_1 + |lambda| ||M||_1) ||x||_2).
double relative_residual(const WeightedOperator& op, const Vector& x, double lambda);

/// The k smallest eigenpairs of (A + H) x = lambda M x.
///
/// Shift-invert subspace iteration with a sparse LDL^T factorization of
/// A + H - sigma M and Rayleigh-Ritz in the M inner product; small problems
/// are solved densely. Deterministic for fixed inputs.
Spectrum smallest(const WeightedOperator& op, int k, double tol = 1e-10, std::uint64_t seed = 1, int max_iterations = 2000);

/// Partition into maximal runs with |l[i+1] - l[i]| / max(1, |l[i]|) < rel_tol.
std::vector<std::vector<int>> cluster(const std::vector<double>& eigenvalues, double rel_tol);

/// Default multiplicity tolerance: max(1e-8, 10 * max residual).
double default_cluster_tolerance(const Spectrum& s);

/// Same partition rule with one tolerance per consecutive gap.
std::vector<std::vector<int>> cluster_with_gaps(const std::vector<double>& eigenvalues, const std::vector<double>& gap_tol);

/// Clusters that also absorb the discretization splitting of continuum-degenerate
/// eigenvalues: gap i uses max(default, c * max(1, |l[i]|) * h^2).
std::vector<std::vector<int>> mesh_clusters(const Spectrum& s, double mean_edge_length, double c = 0.25);

/// Dirichlet lambda_1 (or the first k eigenpairs) on an extracted submesh, using
/// the same weight and potential.
Spectrum solve_on_submesh(const SubmeshExtraction& extraction, const ScalarField& phi, const ScalarField* potential = nullptr,
                          int k = 1, double tol = 1e-10, std::uint64_t seed = 1);

/// R random orthogonal mixtures of the eigenvectors of each cluster (size > 1),
/// M-orthonormality preserved. Returned as (cluster index, vectors).
struct ClusterRotation {
  int cluster = -1;
  std::vector<Vector> vectors;
};
std::vector<ClusterRotation> random_cluster_rotations(const Spectrum& s, int rotations, std::uint64_t seed);

/// Portable seeded generator (splitmix64), identical on every platform.
class SeededRandom {
public:
  explicit SeededRandom(std::uint64_t seed);
  double uniform();  ///< in [0, 1)
  double normal();

private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
  std::uint64_t next();
};

nlohmann::json spectrum_to_json(const Spectrum& s);
nlohmann::json eigenvectors_to_json(const Spectrum& s);
Spectrum spectrum_from_json(const nlohmann::json& meta, const nlohmann::json& vectors);

}  // namespace wspec
