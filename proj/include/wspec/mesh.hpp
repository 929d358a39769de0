#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace wspec {

class MeshError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

using Triangle = std::array<int, 3>;

/// Unordered pair of canonical vertex ids, stored with first < second.
struct EdgeKey {
  int a = -1;
  int b = -1;
  EdgeKey() = default;
  EdgeKey(int u, int v) : a(u < v ? u : v), b(u < v ? v : u) {}
  bool operator==(const EdgeKey&) const = default;
  auto operator<=>(const EdgeKey&) const = default;
};

/// Triangulated 2-manifold: planar (dimension 2), flat torus (dimension 2 with a
/// periodic identification of seam vertices), or a surface embedded in 3-space.
///
/// All topological quantities (edges, boundary, Euler characteristic) are computed
/// on the quotient obtained by collapsing every periodic duplicate onto its
/// canonical vertex. Geometry is always taken from the chart coordinates of the
/// triangle being processed, so seam triangles never wrap.
///
/// Immutable after construction; the constructor validates every invariant.
class TriMesh {
public:
  /// `periodic_map` holds (canonical, duplicate) pairs. When `genus` is given for a
  /// closed mesh it must agree with the Euler characteristic.
  TriMesh(int dimension, std::vector<Eigen::Vector3d> vertices, std::vector<Triangle> triangles,
          std::vector<std::pair<int, int>> periodic_map = {}, std::optional<int> genus = std::nullopt);

  int dimension() const { return dim_; }
  const std::vector<Eigen::Vector3d>& vertices() const { return vertices_; }
  const std::vector<Triangle>& triangles() const { return triangles_; }
  const std::vector<int>& boundary_vertices() const { return boundary_; }
  const std::vector<std::pair<int, int>>& periodic_map() const { return periodic_; }
  std::optional<int> genus() const { return genus_; }
  double mean_edge_length() const { return mean_edge_length_; }

  std::size_t num_vertices() const { return vertices_.size(); }
  std::size_t num_triangles() const { return triangles_.size(); }
  /// Vertex count of the quotient.
  std::size_t num_quotient_vertices() const { return num_quotient_vertices_; }
  std::size_t num_edges() const { return edges_.size(); }
  int euler_characteristic() const;
  bool is_closed() const { return boundary_.empty(); }
  bool is_periodic() const { return !periodic_.empty(); }

  /// Canonical representative of a vertex under the periodic identification.
  int canonical(int v) const { return canon_[static_cast<std::size_t>(v)]; }
  bool is_boundary(int v) const { return on_boundary_[static_cast<std::size_t>(canonical(v))] != 0; }

  /// Quotient edges, sorted.
  const std::vector<EdgeKey>& edges() const { return edges_; }
  /// Number of triangles adjacent to each entry of edges().
  const std::vector<int>& edge_valence() const { return edge_valence_; }

  double triangle_area(int t) const;
  /// Chart displacement from corner i to corner j of triangle t.
  Eigen::Vector3d corner_vector(int t, int i, int j) const;

  /// Triangles incident to each canonical vertex, as (triangle, corner) pairs.
  const std::vector<std::vector<std::pair<int, int>>>& vertex_triangles() const { return vertex_tris_; }

  /// Radius shared by all vertices when this is a closed surface centred at the
  /// origin (used to re-project during refinement); nullopt otherwise.
  std::optional<double> sphere_radius() const;

  /// Total (unweighted) area.
  double area() const;

private:
  int dim_;
  std::vector<Eigen::Vector3d> vertices_;
  std::vector<Triangle> triangles_;
  std::vector<std::pair<int, int>> periodic_;
  std::optional<int> genus_;
  std::vector<int> canon_;
  std::vector<int> boundary_;
  std::vector<char> on_boundary_;
  std::vector<EdgeKey> edges_;
  std::vector<int> edge_valence_;
  std::vector<std::vector<std::pair<int, int>>> vertex_tris_;
  std::size_t num_quotient_vertices_ = 0;
  double mean_edge_length_ = 0.0;
};

/// Canonical domain descriptions accepted by generate().
struct Shape {
  enum class Kind { disk, rectangle, annulus, flat_torus, sphere };
  Kind kind;
  std::vector<double> params;

  static Shape disk(double radius) { return {Kind::disk, {radius}}; }
  static Shape rectangle(double width, double height) { return {Kind::rectangle, {width, height}}; }
  static Shape annulus(double r_in, double r_out) { return {Kind::annulus, {r_in, r_out}}; }
  static Shape flat_torus(double lx, double ly) { return {Kind::flat_torus, {lx, ly}}; }
  static Shape sphere(double radius) { return {Kind::sphere, {radius}}; }

  /// Parses "disk(1)", "rectangle(1,1)", "annulus:0.5,1", ... into a Shape.
  static Shape parse(const std::string& text);
  std::string to_string() const;
};

TriMesh generate(const Shape& shape, double target_h);

// Lower-level deterministic constructors used by generate().
TriMesh structured_rectangle(double width, double height, int nx, int ny);
TriMesh periodic_grid(double lx, double ly, int nx, int ny);
TriMesh icosphere(double radius, int level);

/// Uniform 1-to-4 subdivision. Spheres have their new vertices projected back
/// onto the sphere; every other mesh is refined in place (nested).
TriMesh refine(const TriMesh& mesh);

struct SubmeshExtraction {
  TriMesh submesh;
  std::vector<int> vertex_lift;  ///< submesh vertex -> parent vertex
  int origin_domain_id = -1;
};

/// Cuts out an edge-connected set of triangles. The boundary of the result is
/// what a Dirichlet solve on it will clamp.
SubmeshExtraction extract_submesh(const TriMesh& mesh, const std::vector<int>& triangle_set,
                                  int origin_domain_id = -1);

/// Mesh refined conformingly along the zero set of a piecewise-linear function.
struct LevelSetSplit {
  TriMesh mesh;
  std::vector<double> values;      ///< per vertex of `mesh`; inserted vertices carry 0
  std::vector<int> parent_vertex;  ///< original vertex id, or -1 for inserted crossings
  std::vector<int> parent_triangle;
};

/// Inserts one vertex on every edge whose endpoint values have strictly opposite
/// signs (|value| <= zero_tol counts as zero) and re-triangulates the cut
/// triangles. Crossing parameters are clamped into [clamp, 1 - clamp] so no
/// piece degenerates.
LevelSetSplit split_by_level_set(const TriMesh& mesh, const std::vector<double>& vertex_values,
                                 double zero_tol, double clamp = 1e-3);

void save(const TriMesh& mesh, const std::string& path);
TriMesh load(const std::string& path);
std::string to_json_text(const TriMesh& mesh);
TriMesh from_json_text(const std::string& text);

/// FNV-1a hash of the serialized mesh, for provenance records.
std::uint64_t content_hash(const TriMesh& mesh);

}  // namespace wspec
