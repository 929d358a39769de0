#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "wspec/mesh.hpp"

namespace wspec {

struct NodalOptions {
  double tau_rel = 1e-8;             ///< |u| <= tau_rel * max|u| counts as zero
  double r_fit_factor = 3.0;         ///< fit radius in mean edge lengths
  int n_max = 6;                     ///< highest vanishing order tried
  double confident_residual = 0.1;   ///< fits below this normalized residual are confident
  double ray_radius_fraction = 0.6;  ///< branch rays are read on a circle of this fraction of r_fit
};

/// Polyline through the discrete zero set. Points are in the chart of the
/// triangle that produced them, so a chain crossing a periodic seam jumps by
/// one period.
struct NodalChain {
  std::vector<Eigen::Vector3d> points;
  bool closed = false;
};

struct OrderFit {
  int order = 0;  ///< 0 when undetermined
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double residual = 1.0;
  std::vector<double> residual_by_order;  ///< entry N-1 is the best residual for order N
  std::vector<double> branch_angles;      ///< sorted, in [0, 2pi), local chart
  int sample_count = 0;
  std::string note;

  int branch_count() const { return static_cast<int>(branch_angles.size()); }
  /// max |gap - pi/N| over consecutive branch angles, or infinity when the
  /// branch count differs from 2N.
  double max_angle_error() const;
};

struct SingularPoint {
  OrderFit fit;
  bool confident = false;
};

struct NodalAnalysis {
  int function_index = -1;
  double tau = 0.0;
  std::vector<int> sign_labels;    ///< per mesh vertex: -1, 0, +1
  std::vector<int> domain_labels;  ///< per mesh vertex, -1 on zero vertices
  int domain_count = 0;
  std::vector<NodalChain> segments;
  std::vector<int> flagged_triangles;  ///< triangles touching an interior zero vertex
  std::vector<SingularPoint> singular_points;
};

/// Sign labels, nodal domains (union-find over same-sign edges of the quotient
/// mesh) and nodal chains of the piecewise-linear interpolant. `vertex_values`
/// holds one value per mesh vertex.
NodalAnalysis analyze(const TriMesh& mesh, const std::vector<double>& vertex_values, const NodalOptions& options = {});

/// Candidates are interior zero vertices whose link changes sign at least four
/// times, chain junctions, and places where two distinct stretches of the nodal
/// set come within one mean edge length. Candidates are merged within two mean
/// edge lengths, fitted, and kept unless the fit says order 1. Candidates whose
/// fit ball reaches the boundary are skipped.
std::vector<SingularPoint> detect_singular_points(const TriMesh& mesh, const std::vector<double>& vertex_values,
                                                  const NodalAnalysis& analysis, const NodalOptions& options = {});

/// Least-squares fit of u near `point` against {Re z^N, Im z^N}, N = 1..n_max,
/// in local chart coordinates scaled by the fit radius, with the center refined
/// within one mean edge length. Branch angles are where the discrete zero set
/// crosses a circle around the refined center.
OrderFit fit_vanishing_order(const TriMesh& mesh, const std::vector<double>& vertex_values, const Eigen::Vector3d& point,
                             const NodalOptions& options = {});

nlohmann::json to_json(const NodalAnalysis& analysis);

/// Nodal chains over the mesh outline with a fixed viewBox. Planar and periodic
/// meshes are drawn in their chart; spheres in two orthographic hemispheres.
std::string render_svg(const TriMesh& mesh, const NodalAnalysis& analysis);

}  // namespace wspec
