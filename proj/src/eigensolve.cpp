#include "wspec/eigensolve.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SparseCholesky>

namespace wspec {

namespace {

using Dense = Eigen::MatrixXd;

constexpr int kDenseLimit = 400;
constexpr int kReshiftIteration = 4;

double norm1(const SparseMatrix& m) {
  double best = 0.0;
  for (int k = 0; k < m.outerSize(); ++k) {
    double s = 0.0;
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) s += std::abs(it.value());
    best = std::max(best, s);
  }
  return best;
}

double trace(const SparseMatrix& m) {
  double t = 0.0;
  for (int k = 0; k < m.outerSize(); ++k) t += m.coeff(k, k);
  return t;
}

/// Modified Gram-Schmidt in the M inner product. Columns that collapse are
/// replaced by fresh random vectors and orthogonalized again.
void mgs_orthonormalize(Dense& y, const SparseMatrix& m, SeededRandom& rng) {
  for (Eigen::Index j = 0; j < y.cols(); ++j) {
    for (int attempt = 0; attempt < 4; ++attempt) {
      const double before = std::sqrt(std::max(0.0, y.col(j).dot(m * y.col(j))));
      for (int pass = 0; pass < 2; ++pass) {
        for (Eigen::Index i = 0; i < j; ++i) {
          const Vector mi = m * y.col(i);
          y.col(j) -= mi.dot(y.col(j)) * y.col(i);
        }
      }
      const double nrm = std::sqrt(std::max(0.0, y.col(j).dot(m * y.col(j))));
      if (nrm > 1e-10 * before && nrm > 0.0) {
        y.col(j) /= nrm;
        break;
      }
      for (Eigen::Index r = 0; r < y.rows(); ++r) y(r, j) = rng.normal();
    }
  }
}

/// CholQR2: two rounds of Y <- Y R^{-1} with R the Cholesky factor of Y^T M Y.
void m_orthonormalize(Dense& y, const SparseMatrix& m, SeededRandom& rng) {
  for (int round = 0; round < 2; ++round) {
    Dense g = y.transpose() * (m * y);
    g = 0.5 * (g + g.transpose());
    Eigen::LLT<Dense> llt(g);
    const Dense l = llt.matrixL();
    const double dmin = l.diagonal().minCoeff(), dmax = l.diagonal().maxCoeff();
    if (llt.info() != Eigen::Success || !(dmin > 1e-7 * dmax)) {
      mgs_orthonormalize(y, m, rng);
      return;
    }
    y = llt.matrixU().solve<Eigen::OnTheRight>(y);
  }
}

/// Largest-magnitude coefficient made positive, so bases are reproducible.
void fix_sign(Vector& x) {
  Eigen::Index arg = 0;
  x.cwiseAbs().maxCoeff(&arg);
  if (x[arg] < 0.0) x = -x;
}

struct RitzResult {
  Eigen::VectorXd values;
  Dense vectors;
};

RitzResult rayleigh_ritz(const Dense& y, const SparseMatrix& s, const SparseMatrix& m) {
  Dense sr = y.transpose() * (s * y);
  Dense mr = y.transpose() * (m * y);
  sr = 0.5 * (sr + sr.transpose());
  mr = 0.5 * (mr + mr.transpose());
  Eigen::GeneralizedSelfAdjointEigenSolver<Dense> es(sr, mr);
  if (es.info() != Eigen::Success) throw FactorizationError("Rayleigh-Ritz projection failed");
  return {es.eigenvalues(), y * es.eigenvectors()};
}

}  // namespace

// splitmix64 (Steele, Lea, Flood).
SeededRandom::SeededRandom(std::uint64_t seed) : state_(seed) {}

std::uint64_t SeededRandom::next() {
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double SeededRandom::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double SeededRandom::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u = 0.0;
  while (u <= 0.0) u = uniform();
  const double v = uniform();
  const double r = std::sqrt(-2.0 * std::log(u));
  const double a = 2.0 * M_PI * v;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

double Spectrum::max_residual() const {
  double r = 0.0;
  for (double v : residuals) r = std::max(r, v);
  return r;
}

int Spectrum::cluster_of(int i) const {
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    if (std::find(clusters[c].begin(), clusters[c].end(), i) != clusters[c].end()) return static_cast<int>(c);
  }
  return -1;
}

double relative_residual(const WeightedOperator& op, const Vector& x, double lambda) {
  const SparseMatrix s = op.system_matrix();
  const double den = (norm1(s) + std::abs(lambda) * norm1(op.mass)) * x.norm();
  if (!(den > 0.0)) return std::numeric_limits<double>::infinity();
  return (s * x - lambda * (op.mass * x)).norm() / den;
}

Spectrum smallest(const WeightedOperator& op, int k, double tol, std::uint64_t seed, int max_iterations) {
  const int n = op.num_dofs();
  if (k < 1) throw std::invalid_argument("k must be positive");
  if (k > n - 1) {
    throw std::invalid_argument("k = " + std::to_string(k) + " exceeds dof count - 1 = " + std::to_string(n - 1));
  }
  if (!(tol > 0.0 && tol <= 1e-4)) throw std::invalid_argument("tol must lie in (0, 1e-4]");

  const SparseMatrix s = op.system_matrix();
  const SparseMatrix& m = op.mass;
  const double s1 = norm1(s), m1 = norm1(m);
  const double spectral_scale = trace(s) / trace(m);

  Spectrum out;
  out.problem_kind = op.problem_kind;
  out.report.tolerance = tol;
  out.report.seed = seed;

  Eigen::VectorXd values;
  Dense vectors;
  auto residual_of = [&](const Vector& x, double lambda) {
    return (s * x - lambda * (m * x)).norm() / ((s1 + std::abs(lambda) * m1) * x.norm());
  };

  if (n <= kDenseLimit) {
    Dense sd(s), md(m);
    Eigen::GeneralizedSelfAdjointEigenSolver<Dense> es(sd, md);
    if (es.info() != Eigen::Success) throw FactorizationError("dense generalized eigensolver failed");
    values = es.eigenvalues().head(k);
    vectors = es.eigenvectors().leftCols(k);
    out.report.method = "dense";
    out.report.block_size = n;
  } else {
    double sigma = -1e-3 * spectral_scale;
    if (op.potential) sigma = std::min(sigma, op.potential_min - 1e-3 * spectral_scale);
    auto try_factor = [&](Eigen::SimplicialLDLT<SparseMatrix>& f, double shift) {
      f.compute(SparseMatrix(s - shift * m));
      return f.info() == Eigen::Success && f.vectorD().minCoeff() > 0.0;
    };
    Eigen::SimplicialLDLT<SparseMatrix> ldlt;
    bool factored = false;
    for (int attempt = 0; attempt < 4 && !factored; ++attempt) {
      factored = try_factor(ldlt, sigma);
      if (!factored) {
        ++out.report.shift_retries;
        sigma -= (attempt + 1) * 10.0 * std::abs(sigma) + 1e-8;
      }
    }
    if (!factored) throw FactorizationError("shifted matrix could not be factored as positive definite");
    out.report.shift = sigma;
    out.report.method = "shift-invert subspace iteration";

    const int p = std::min(n, std::max(k + 8, 2 * k));
    out.report.block_size = p;
    SeededRandom rng(seed);
    Dense y(n, p);
    for (int j = 0; j < p; ++j)
      for (int i = 0; i < n; ++i) y(i, j) = rng.normal();
    m_orthonormalize(y, m, rng);

    std::vector<double> best(static_cast<std::size_t>(k), std::numeric_limits<double>::infinity());
    bool converged = false;
    int reshifts = 0;
    for (int it = 1; it <= max_iterations; ++it) {
      const Dense my = m * y;
      y = ldlt.solve(my);
      m_orthonormalize(y, m, rng);
      RitzResult rr = rayleigh_ritz(y, s, m);
      y = rr.vectors;
      out.report.iterations = it;
      if (it % kReshiftIteration == 0 && reshifts < 3) {
        ++reshifts;
        // Ritz values bound the spectrum from above; the inertia check in
        // try_factor rejects a shift that is not below the smallest eigenvalue.
        const double lo = rr.values[0], hi = rr.values[k - 1];
        const double candidate = lo - 0.5 * (hi - lo) - 0.5 * std::abs(lo) - 1e-8 * spectral_scale;
        if (candidate > sigma) {
          if (try_factor(ldlt, candidate)) {
            sigma = candidate;
            out.report.shift = sigma;
            reshifts = 3;
          } else if (!try_factor(ldlt, sigma)) {
            throw FactorizationError("shifted matrix could not be refactored");
          }
        }
      }
      bool all = true;
      for (int i = 0; i < k; ++i) {
        const double r = residual_of(y.col(i), rr.values[i]);
        best[static_cast<std::size_t>(i)] = std::min(best[static_cast<std::size_t>(i)], r);
        if (!(r <= tol)) all = false;
      }
      if (all) {
        values = rr.values.head(k);
        vectors = y.leftCols(k);
        converged = true;
        break;
      }
    }
    if (!converged) {
      throw NonConvergenceError("eigensolver did not reach tolerance in " + std::to_string(max_iterations) + " iterations",
                                best);
    }
  }

  const double to_true = 1.0 / std::sqrt(op.measure_scale());
  for (int i = 0; i < k; ++i) {
    Vector x = vectors.col(i);
    const double r = residual_of(x, values[i]);
    if (!(r <= tol)) {
      throw NonConvergenceError("eigenpair " + std::to_string(i) + " residual " + std::to_string(r) + " above tolerance",
                                std::vector<double>{r});
    }
    fix_sign(x);
    out.eigenvalues.push_back(values[i]);
    out.residuals.push_back(r);
    out.eigenvectors.push_back(x * to_true);
  }
  out.clusters = cluster(out.eigenvalues, default_cluster_tolerance(out));
  return out;
}

std::vector<std::vector<int>> cluster(const std::vector<double>& eigenvalues, double rel_tol) {
  std::vector<double> tols(eigenvalues.empty() ? 0 : eigenvalues.size() - 1, rel_tol);
  return cluster_with_gaps(eigenvalues, tols);
}

std::vector<std::vector<int>> cluster_with_gaps(const std::vector<double>& eigenvalues, const std::vector<double>& gap_tol) {
  std::vector<std::vector<int>> out;
  for (std::size_t i = 0; i < eigenvalues.size(); ++i) {
    const bool join = i > 0 && std::abs(eigenvalues[i] - eigenvalues[i - 1]) / std::max(1.0, std::abs(eigenvalues[i - 1])) <
                                   gap_tol[i - 1];
    if (!join) out.emplace_back();
    out.back().push_back(static_cast<int>(i));
  }
  return out;
}

double default_cluster_tolerance(const Spectrum& s) { return std::max(1e-8, 10.0 * s.max_residual()); }

std::vector<std::vector<int>> mesh_clusters(const Spectrum& s, double mean_edge_length, double c) {
  const double base = default_cluster_tolerance(s);
  std::vector<double> tols;
  for (std::size_t i = 0; i + 1 < s.eigenvalues.size(); ++i) {
    const double lam = std::max(1.0, std::abs(s.eigenvalues[i]));
    tols.push_back(std::max(base, c * lam * mean_edge_length * mean_edge_length));
  }
  return cluster_with_gaps(s.eigenvalues, tols);
}

Spectrum solve_on_submesh(const SubmeshExtraction& extraction, const ScalarField& phi, const ScalarField* potential, int k,
                          double tol, std::uint64_t seed) {
  const TriMesh& sub = extraction.submesh;
  if (sub.is_closed()) throw AssemblyError("submesh has no boundary");
  int free = 0;
  build_dof_map(sub, ProblemKind::dirichlet, &free);
  if (free < 1) throw AssemblyError("submesh has no interior vertex (nodal domain under-resolved)");
  if (k > free - 1 && free > 1) k = free - 1;
  const WeightedOperator op = assemble(sub, phi, potential, ProblemKind::dirichlet);
  if (free == 1) {
    // A single interior vertex: the 1x1 problem is its own Rayleigh quotient.
    Spectrum out;
    out.problem_kind = ProblemKind::dirichlet;
    const double lam = op.system_matrix().coeff(0, 0) / op.mass.coeff(0, 0);
    out.eigenvalues = {lam};
    out.eigenvectors = {Vector::Constant(1, 1.0 / std::sqrt(op.mass.coeff(0, 0) * op.measure_scale()))};
    out.residuals = {0.0};
    out.clusters = {{0}};
    out.report.method = "dense";
    out.report.tolerance = tol;
    out.report.seed = seed;
    out.report.block_size = 1;
    return out;
  }
  return smallest(op, k, tol, seed);
}

std::vector<ClusterRotation> random_cluster_rotations(const Spectrum& s, int rotations, std::uint64_t seed) {
  std::vector<ClusterRotation> out;
  SeededRandom rng(seed);
  for (std::size_t c = 0; c < s.clusters.size(); ++c) {
    const auto& members = s.clusters[c];
    const int m = static_cast<int>(members.size());
    if (m < 2) continue;
    for (int r = 0; r < rotations; ++r) {
      Dense g(m, m);
      for (int j = 0; j < m; ++j)
        for (int i = 0; i < m; ++i) g(i, j) = rng.normal();
      Eigen::HouseholderQR<Dense> qr(g);
      Dense q = qr.householderQ() * Dense::Identity(m, m);
      const Dense rr = qr.matrixQR().triangularView<Eigen::Upper>();
      for (int j = 0; j < m; ++j)
        if (rr(j, j) < 0.0) q.col(j) = -q.col(j);
      ClusterRotation rot;
      rot.cluster = static_cast<int>(c);
      for (int j = 0; j < m; ++j) {
        Vector v = Vector::Zero(s.eigenvectors[static_cast<std::size_t>(members[0])].size());
        for (int i = 0; i < m; ++i) v += q(i, j) * s.eigenvectors[static_cast<std::size_t>(members[static_cast<std::size_t>(i)])];
        rot.vectors.push_back(std::move(v));
      }
      out.push_back(std::move(rot));
    }
  }
  return out;
}

nlohmann::json spectrum_to_json(const Spectrum& s) {
  nlohmann::json j;
  j["eigenvalues"] = s.eigenvalues;
  j["residuals"] = s.residuals;
  j["clusters"] = s.clusters;
  j["problem_kind"] = to_string(s.problem_kind);
  j["solver_report"] = {{"iterations", s.report.iterations}, {"tolerance", s.report.tolerance},
                        {"seed", s.report.seed},             {"shift", s.report.shift},
                        {"block_size", s.report.block_size}, {"shift_retries", s.report.shift_retries},
                        {"method", s.report.method}};
  return j;
}

nlohmann::json eigenvectors_to_json(const Spectrum& s) {
  nlohmann::json arr = nlohmann::json::array();
  for (const Vector& v : s.eigenvectors) arr.push_back(std::vector<double>(v.data(), v.data() + v.size()));
  return {{"eigenvectors", arr}};
}

Spectrum spectrum_from_json(const nlohmann::json& meta, const nlohmann::json& vectors) {
  Spectrum s;
  s.eigenvalues = meta.at("eigenvalues").get<std::vector<double>>();
  s.residuals = meta.value("residuals", std::vector<double>(s.eigenvalues.size(), 0.0));
  s.clusters = meta.value("clusters", std::vector<std::vector<int>>{});
  s.problem_kind = problem_kind_from_string(meta.value("problem_kind", std::string("dirichlet")));
  if (meta.contains("solver_report")) {
    const auto& r = meta.at("solver_report");
    s.report.iterations = r.value("iterations", 0);
    s.report.tolerance = r.value("tolerance", 0.0);
    s.report.seed = r.value("seed", std::uint64_t{0});
    s.report.shift = r.value("shift", 0.0);
    s.report.block_size = r.value("block_size", 0);
    s.report.shift_retries = r.value("shift_retries", 0);
    s.report.method = r.value("method", std::string());
  }
  const auto& arr = vectors.contains("eigenvectors") ? vectors.at("eigenvectors") : vectors;
  for (const auto& v : arr) {
    const auto data = v.get<std::vector<double>>();
    s.eigenvectors.push_back(Eigen::Map<const Vector>(data.data(), static_cast<Eigen::Index>(data.size())));
  }
  if (s.eigenvectors.size() != s.eigenvalues.size()) throw std::invalid_argument("eigenvector count does not match eigenvalue count");
  if (s.clusters.empty()) s.clusters = cluster(s.eigenvalues, default_cluster_tolerance(s));
  return s;
}

}  // namespace wspec
