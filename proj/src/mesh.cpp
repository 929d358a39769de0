#include "wspec/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <queue>
#include <sstream>

#include "wspec/expr.hpp"
#include "wspec/json_out.hpp"

namespace wspec {

namespace {

double signed_area_2d(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c) {
  return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
}

}  // namespace

TriMesh::TriMesh(int dimension, std::vector<Eigen::Vector3d> vertices, std::vector<Triangle> triangles,
                 std::vector<std::pair<int, int>> periodic_map, std::optional<int> genus)
    : dim_(dimension),
      vertices_(std::move(vertices)),
      triangles_(std::move(triangles)),
      periodic_(std::move(periodic_map)),
      genus_(genus) {
  if (dim_ != 2 && dim_ != 3) throw MeshError("mesh dimension must be 2 or 3");
  if (triangles_.empty()) throw MeshError("mesh has no triangles");
  const int nv = static_cast<int>(vertices_.size());
  for (auto& v : vertices_) {
    if (!v.allFinite()) throw MeshError("non-finite vertex coordinate");
    if (dim_ == 2) v.z() = 0.0;
  }

  canon_.resize(vertices_.size());
  for (int v = 0; v < nv; ++v) canon_[static_cast<std::size_t>(v)] = v;
  std::vector<char> is_dup(vertices_.size(), 0);
  for (const auto& [c, d] : periodic_) {
    if (c < 0 || c >= nv || d < 0 || d >= nv) throw MeshError("periodic_map references a missing vertex");
    if (c == d) throw MeshError("periodic_map pairs a vertex with itself");
    if (is_dup[static_cast<std::size_t>(d)]) throw MeshError("vertex appears twice as a periodic duplicate");
    is_dup[static_cast<std::size_t>(d)] = 1;
    canon_[static_cast<std::size_t>(d)] = c;
  }
  for (const auto& [c, d] : periodic_) {
    if (is_dup[static_cast<std::size_t>(c)]) throw MeshError("periodic_map canonical vertex is itself a duplicate");
  }

  std::vector<char> used(vertices_.size(), 0);
  std::vector<EdgeKey> keys;
  std::vector<std::pair<int, int>> directed;
  keys.reserve(triangles_.size() * 3);
  directed.reserve(triangles_.size() * 3);
  double signed_volume = 0.0;
  for (std::size_t t = 0; t < triangles_.size(); ++t) {
    const Triangle& tri = triangles_[t];
    for (int i : tri) {
      if (i < 0 || i >= nv) throw MeshError("triangle " + std::to_string(t) + " references missing vertex " + std::to_string(i));
    }
    const int a = canonical(tri[0]), b = canonical(tri[1]), c = canonical(tri[2]);
    if (a == b || b == c || a == c) throw MeshError("triangle " + std::to_string(t) + " has repeated vertices");
    const double area = triangle_area(static_cast<int>(t));
    if (!(area > 0.0)) throw MeshError("triangle " + std::to_string(t) + " is degenerate");
    if (dim_ == 2 && !(signed_area_2d(vertices_[tri[0]], vertices_[tri[1]], vertices_[tri[2]]) > 0.0)) {
      throw MeshError("triangle " + std::to_string(t) + " is not counterclockwise");
    }
    if (dim_ == 3) signed_volume += vertices_[tri[0]].dot(vertices_[tri[1]].cross(vertices_[tri[2]]));
    for (int i = 0; i < 3; ++i) {
      const int u = canonical(tri[i]), w = canonical(tri[(i + 1) % 3]);
      used[static_cast<std::size_t>(u)] = 1;
      keys.emplace_back(u, w);
      directed.emplace_back(u, w);
    }
  }
  for (int v = 0; v < nv; ++v) {
    if (!is_dup[static_cast<std::size_t>(v)] && !used[static_cast<std::size_t>(v)]) {
      throw MeshError("vertex " + std::to_string(v) + " is not referenced by any triangle");
    }
  }

  std::sort(directed.begin(), directed.end());
  if (std::adjacent_find(directed.begin(), directed.end()) != directed.end()) {
    throw MeshError("inconsistent triangle orientation or non-manifold edge");
  }
  std::sort(keys.begin(), keys.end());
  for (std::size_t i = 0; i < keys.size();) {
    std::size_t j = i;
    while (j < keys.size() && keys[j] == keys[i]) ++j;
    const int count = static_cast<int>(j - i);
    if (count > 2) throw MeshError("non-manifold edge");
    edges_.push_back(keys[i]);
    edge_valence_.push_back(count);
    i = j;
  }

  on_boundary_.assign(vertices_.size(), 0);
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    if (edge_valence_[e] == 1) {
      on_boundary_[static_cast<std::size_t>(edges_[e].a)] = 1;
      on_boundary_[static_cast<std::size_t>(edges_[e].b)] = 1;
    }
  }
  for (int v = 0; v < nv; ++v) {
    if (on_boundary_[static_cast<std::size_t>(canonical(v))]) boundary_.push_back(v);
  }

  num_quotient_vertices_ = 0;
  for (int v = 0; v < nv; ++v) num_quotient_vertices_ += is_dup[static_cast<std::size_t>(v)] ? 0 : 1;

  vertex_tris_.assign(vertices_.size(), {});
  for (std::size_t t = 0; t < triangles_.size(); ++t) {
    for (int i = 0; i < 3; ++i) {
      vertex_tris_[static_cast<std::size_t>(canonical(triangles_[t][i]))].emplace_back(static_cast<int>(t), i);
    }
  }

  // Each quotient edge is measured once, in the first triangle that contains it.
  std::vector<char> measured(edges_.size(), 0);
  double total = 0.0;
  for (std::size_t t = 0; t < triangles_.size(); ++t) {
    for (int i = 0; i < 3; ++i) {
      const EdgeKey k(canonical(triangles_[t][i]), canonical(triangles_[t][(i + 1) % 3]));
      const auto idx = static_cast<std::size_t>(std::lower_bound(edges_.begin(), edges_.end(), k) - edges_.begin());
      if (!measured[idx]) {
        measured[idx] = 1;
        total += corner_vector(static_cast<int>(t), i, (i + 1) % 3).norm();
      }
    }
  }
  mean_edge_length_ = total / static_cast<double>(edges_.size());

  if (is_closed()) {
    const int chi = euler_characteristic();
    if (genus_) {
      if (*genus_ < 0 || chi != 2 - 2 * *genus_) {
        throw MeshError("Euler characteristic " + std::to_string(chi) + " does not match genus " + std::to_string(*genus_));
      }
    } else {
      if (chi > 2 || (2 - chi) % 2 != 0) throw MeshError("closed mesh has invalid Euler characteristic " + std::to_string(chi));
      genus_ = (2 - chi) / 2;
    }
    if (dim_ == 3 && !(signed_volume > 0.0)) throw MeshError("closed surface is not outward oriented");
  }
}

int TriMesh::euler_characteristic() const {
  return static_cast<int>(num_quotient_vertices_) - static_cast<int>(edges_.size()) + static_cast<int>(triangles_.size());
}

double TriMesh::triangle_area(int t) const {
  const Eigen::Vector3d e1 = corner_vector(t, 0, 1);
  const Eigen::Vector3d e2 = corner_vector(t, 0, 2);
  return 0.5 * e1.cross(e2).norm();
}

Eigen::Vector3d TriMesh::corner_vector(int t, int i, int j) const {
  const Triangle& tri = triangles_[static_cast<std::size_t>(t)];
  return vertices_[static_cast<std::size_t>(tri[j])] - vertices_[static_cast<std::size_t>(tri[i])];
}

std::optional<double> TriMesh::sphere_radius() const {
  if (dim_ != 3 || !is_closed()) return std::nullopt;
  const double r = vertices_.front().norm();
  if (!(r > 0.0)) return std::nullopt;
  for (const auto& v : vertices_) {
    if (std::abs(v.norm() - r) > 1e-9 * r) return std::nullopt;
  }
  return r;
}

double TriMesh::area() const {
  double a = 0.0;
  for (std::size_t t = 0; t < triangles_.size(); ++t) a += triangle_area(static_cast<int>(t));
  return a;
}

// ---------------------------------------------------------------------------
// Shapes

Shape Shape::parse(const std::string& text) {
  std::string name;
  std::string args;
  const auto open = text.find_first_of("(:");
  if (open == std::string::npos) {
    name = text;
  } else {
    name = text.substr(0, open);
    args = text.substr(open + 1);
    if (text[open] == '(') {
      if (args.empty() || args.back() != ')') throw MeshError("shape '" + text + "': missing ')'");
      args.pop_back();
    }
  }
  std::vector<double> params;
  std::stringstream ss(args);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    try {
      params.push_back(evaluate(parse_expression(item.substr(b), 1), std::span<const double>()));
    } catch (const std::exception&) {
      throw MeshError("shape '" + text + "': bad parameter '" + item + "'");
    }
  }
  Kind kind;
  std::size_t arity;
  if (name == "disk") kind = Kind::disk, arity = 1;
  else if (name == "rectangle") kind = Kind::rectangle, arity = 2;
  else if (name == "annulus") kind = Kind::annulus, arity = 2;
  else if (name == "flat_torus") kind = Kind::flat_torus, arity = 2;
  else if (name == "sphere") kind = Kind::sphere, arity = 1;
  else throw MeshError("unknown shape '" + name + "'");
  if (params.size() != arity) {
    throw MeshError("shape '" + name + "' expects " + std::to_string(arity) + " parameter(s)");
  }
  return {kind, std::move(params)};
}

std::string Shape::to_string() const {
  static const char* names[] = {"disk", "rectangle", "annulus", "flat_torus", "sphere"};
  std::string s = names[static_cast<int>(kind)];
  s += '(';
  for (std::size_t i = 0; i < params.size(); ++i) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", params[i]);
    if (i) s += ',';
    s += buf;
  }
  s += ')';
  return s;
}

TriMesh structured_rectangle(double width, double height, int nx, int ny) {
  if (!(width > 0.0) || !(height > 0.0)) throw MeshError("rectangle sides must be positive");
  if (nx < 1 || ny < 1) throw MeshError("rectangle grid needs at least one cell per side");
  std::vector<Eigen::Vector3d> verts;
  verts.reserve(static_cast<std::size_t>((nx + 1) * (ny + 1)));
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) verts.emplace_back(width * i / nx, height * j / ny, 0.0);
  }
  std::vector<Triangle> tris;
  tris.reserve(static_cast<std::size_t>(2 * nx * ny));
  auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      tris.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      tris.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  }
  return TriMesh(2, std::move(verts), std::move(tris));
}

TriMesh periodic_grid(double lx, double ly, int nx, int ny) {
  if (!(lx > 0.0) || !(ly > 0.0)) throw MeshError("torus periods must be positive");
  if (nx < 3 || ny < 3) throw MeshError("periodic grid needs at least 3 cells per direction");
  TriMesh chart = structured_rectangle(lx, ly, nx, ny);
  std::vector<std::pair<int, int>> pairs;
  auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      if (i == nx || j == ny) pairs.emplace_back(id(i % nx, j % ny), id(i, j));
    }
  }
  return TriMesh(2, chart.vertices(), chart.triangles(), std::move(pairs), 1);
}

namespace {

struct Ring {
  std::vector<int> ids;
  std::vector<double> angles;  // ascending, in [0, 2pi)
};

Ring make_ring(std::vector<Eigen::Vector3d>& verts, double radius, int count) {
  Ring r;
  for (int j = 0; j < count; ++j) {
    const double a = 2.0 * std::numbers::pi * j / count;
    r.ids.push_back(static_cast<int>(verts.size()));
    r.angles.push_back(a);
    verts.emplace_back(radius * std::cos(a), radius * std::sin(a), 0.0);
  }
  return r;
}

// Fills the band between two concentric rings, walking both by angle.
void stitch(const Ring& inner, const Ring& outer, std::vector<Triangle>& tris) {
  const std::size_t m = inner.ids.size(), n = outer.ids.size();
  const double two_pi = 2.0 * std::numbers::pi;
  auto ia = [&](std::size_t i) { return inner.ids[i % m]; };
  auto ib = [&](std::size_t j) { return outer.ids[j % n]; };
  auto aa = [&](std::size_t i) { return inner.angles[i % m] + (i >= m ? two_pi : 0.0); };
  auto ab = [&](std::size_t j) { return outer.angles[j % n] + (j >= n ? two_pi : 0.0); };
  std::size_t i = 0, j = 0;
  while (i < m || j < n) {
    const bool advance_outer = (i == m) || (j < n && ab(j + 1) <= aa(i + 1) + 1e-12);
    if (advance_outer) {
      tris.push_back({ia(i), ib(j), ib(j + 1)});
      ++j;
    } else {
      tris.push_back({ia(i), ib(j), ia(i + 1)});
      ++i;
    }
  }
}

}  // namespace

TriMesh icosphere(double radius, int level) {
  if (!(radius > 0.0)) throw MeshError("sphere radius must be positive");
  if (level < 0) throw MeshError("icosphere level must be nonnegative");
  const double p = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Eigen::Vector3d> v = {{-1, p, 0}, {1, p, 0}, {-1, -p, 0}, {1, -p, 0}, {0, -1, p}, {0, 1, p},
                                    {0, -1, -p}, {0, 1, -p}, {p, 0, -1}, {p, 0, 1}, {-p, 0, -1}, {-p, 0, 1}};
  for (auto& x : v) x = x.normalized() * radius;
  std::vector<Triangle> f = {{0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                             {11, 10, 2}, {10, 7, 6}, {7, 1, 8}, {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8},
                             {3, 8, 9}, {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};
  TriMesh mesh(3, std::move(v), std::move(f), {}, 0);
  for (int l = 0; l < level; ++l) mesh = refine(mesh);
  return mesh;
}

TriMesh generate(const Shape& shape, double target_h) {
  if (!(target_h > 0.0) || !std::isfinite(target_h)) throw MeshError("target_h must be positive");
  for (double p : shape.params) {
    if (!(p > 0.0) || !std::isfinite(p)) throw MeshError("shape parameters must be positive: " + shape.to_string());
  }
  auto too_coarse = [&]() { return MeshError("target_h " + std::to_string(target_h) + " too coarse for " + shape.to_string()); };
  switch (shape.kind) {
    case Shape::Kind::rectangle: {
      const int nx = std::max(1, static_cast<int>(std::lround(shape.params[0] / target_h)));
      const int ny = std::max(1, static_cast<int>(std::lround(shape.params[1] / target_h)));
      if (2 * nx * ny < 16) throw too_coarse();
      return structured_rectangle(shape.params[0], shape.params[1], nx, ny);
    }
    case Shape::Kind::flat_torus: {
      const int nx = static_cast<int>(std::lround(shape.params[0] / target_h));
      const int ny = static_cast<int>(std::lround(shape.params[1] / target_h));
      if (nx < 3 || ny < 3) throw too_coarse();
      return periodic_grid(shape.params[0], shape.params[1], nx, ny);
    }
    case Shape::Kind::disk: {
      const double radius = shape.params[0];
      const int rings = static_cast<int>(std::lround(radius / target_h));
      if (rings < 2) throw too_coarse();
      std::vector<Eigen::Vector3d> verts{{0.0, 0.0, 0.0}};
      std::vector<Triangle> tris;
      Ring prev = make_ring(verts, radius / rings, 6);
      for (int j = 0; j < 6; ++j) tris.push_back({0, prev.ids[j], prev.ids[(j + 1) % 6]});
      for (int r = 2; r <= rings; ++r) {
        Ring next = make_ring(verts, radius * r / rings, 6 * r);
        stitch(prev, next, tris);
        prev = std::move(next);
      }
      return TriMesh(2, std::move(verts), std::move(tris));
    }
    case Shape::Kind::annulus: {
      const double r_in = shape.params[0], r_out = shape.params[1];
      if (!(r_in < r_out)) throw MeshError("annulus requires r_in < r_out");
      const int bands = std::max(1, static_cast<int>(std::lround((r_out - r_in) / target_h)));
      std::vector<Eigen::Vector3d> verts;
      std::vector<Triangle> tris;
      auto count_at = [&](double r) {
        return std::max(6, static_cast<int>(std::lround(2.0 * std::numbers::pi * r / target_h)));
      };
      Ring prev = make_ring(verts, r_in, count_at(r_in));
      for (int b = 1; b <= bands; ++b) {
        const double r = r_in + (r_out - r_in) * b / bands;
        Ring next = make_ring(verts, r, count_at(r));
        stitch(prev, next, tris);
        prev = std::move(next);
      }
      if (tris.size() < 16) throw too_coarse();
      return TriMesh(2, std::move(verts), std::move(tris));
    }
    case Shape::Kind::sphere: {
      const double radius = shape.params[0];
      // Level-0 icosahedron edge is about 1.05 radius; each level halves it.
      const double ratio = 1.0515 * radius / target_h;
      const int level = ratio <= 1.0 ? 0 : static_cast<int>(std::lround(std::log2(ratio)));
      return icosphere(radius, level);
    }
  }
  throw MeshError("unhandled shape");
}

// ---------------------------------------------------------------------------
// Refinement

namespace {

// Allocates one new vertex per chart edge; chart edges that coincide on the
// quotient get their new vertices identified through the periodic map.
struct EdgeVertexAllocator {
  const TriMesh& mesh;
  std::vector<Eigen::Vector3d>& verts;
  std::vector<std::pair<int, int>>& periodic;
  std::map<std::pair<int, int>, int> by_chart;
  std::map<EdgeKey, int> by_quotient;

  template <class PositionFn>
  int get(int u, int v, PositionFn&& position) {
    const std::pair<int, int> ck{std::min(u, v), std::max(u, v)};
    if (auto it = by_chart.find(ck); it != by_chart.end()) return it->second;
    const int id = static_cast<int>(verts.size());
    verts.push_back(position(u, v));
    by_chart.emplace(ck, id);
    const EdgeKey qk(mesh.canonical(u), mesh.canonical(v));
    if (auto it = by_quotient.find(qk); it != by_quotient.end()) {
      periodic.emplace_back(it->second, id);
    } else {
      by_quotient.emplace(qk, id);
    }
    return id;
  }
};

}  // namespace

TriMesh refine(const TriMesh& mesh) {
  std::vector<Eigen::Vector3d> verts = mesh.vertices();
  std::vector<std::pair<int, int>> periodic = mesh.periodic_map();
  const std::optional<double> radius = mesh.sphere_radius();
  EdgeVertexAllocator alloc{mesh, verts, periodic, {}, {}};
  auto midpoint = [&](int u, int v) {
    Eigen::Vector3d p = 0.5 * (mesh.vertices()[static_cast<std::size_t>(u)] + mesh.vertices()[static_cast<std::size_t>(v)]);
    if (radius) p = p.normalized() * *radius;
    return p;
  };
  std::vector<Triangle> tris;
  tris.reserve(mesh.num_triangles() * 4);
  for (const Triangle& t : mesh.triangles()) {
    const int m01 = alloc.get(t[0], t[1], midpoint);
    const int m12 = alloc.get(t[1], t[2], midpoint);
    const int m20 = alloc.get(t[2], t[0], midpoint);
    tris.push_back({t[0], m01, m20});
    tris.push_back({t[1], m12, m01});
    tris.push_back({t[2], m20, m12});
    tris.push_back({m01, m12, m20});
  }
  return TriMesh(mesh.dimension(), std::move(verts), std::move(tris), std::move(periodic), mesh.genus());
}

// ---------------------------------------------------------------------------
// Submeshes

SubmeshExtraction extract_submesh(const TriMesh& mesh, const std::vector<int>& triangle_set, int origin_domain_id) {
  if (triangle_set.empty()) throw MeshError("extract_submesh: empty triangle set");
  const int nt = static_cast<int>(mesh.num_triangles());
  std::vector<char> selected(mesh.num_triangles(), 0);
  for (int t : triangle_set) {
    if (t < 0 || t >= nt) throw MeshError("extract_submesh: triangle index out of range");
    if (selected[static_cast<std::size_t>(t)]) throw MeshError("extract_submesh: duplicate triangle index");
    selected[static_cast<std::size_t>(t)] = 1;
  }

  // Edge-connectivity over quotient edges.
  std::map<EdgeKey, std::vector<int>> edge_tris;
  for (int t : triangle_set) {
    const Triangle& tri = mesh.triangles()[static_cast<std::size_t>(t)];
    for (int i = 0; i < 3; ++i) {
      edge_tris[EdgeKey(mesh.canonical(tri[i]), mesh.canonical(tri[(i + 1) % 3]))].push_back(t);
    }
  }
  std::vector<char> seen(mesh.num_triangles(), 0);
  std::queue<int> queue;
  queue.push(triangle_set.front());
  seen[static_cast<std::size_t>(triangle_set.front())] = 1;
  std::size_t reached = 0;
  while (!queue.empty()) {
    const int t = queue.front();
    queue.pop();
    ++reached;
    const Triangle& tri = mesh.triangles()[static_cast<std::size_t>(t)];
    for (int i = 0; i < 3; ++i) {
      for (int s : edge_tris[EdgeKey(mesh.canonical(tri[i]), mesh.canonical(tri[(i + 1) % 3]))]) {
        if (!seen[static_cast<std::size_t>(s)]) {
          seen[static_cast<std::size_t>(s)] = 1;
          queue.push(s);
        }
      }
    }
  }
  if (reached != triangle_set.size()) throw MeshError("extract_submesh: triangle set is not edge-connected");

  std::vector<int> local(mesh.num_vertices(), -1);
  std::vector<int> lift;
  std::vector<Eigen::Vector3d> verts;
  std::vector<Triangle> tris;
  tris.reserve(triangle_set.size());
  for (int t : triangle_set) {
    Triangle out{};
    const Triangle& tri = mesh.triangles()[static_cast<std::size_t>(t)];
    for (int i = 0; i < 3; ++i) {
      int& l = local[static_cast<std::size_t>(tri[i])];
      if (l < 0) {
        l = static_cast<int>(verts.size());
        verts.push_back(mesh.vertices()[static_cast<std::size_t>(tri[i])]);
        lift.push_back(tri[i]);
      }
      out[i] = l;
    }
    tris.push_back(out);
  }
  // Keep periodic identifications among the retained chart vertices.
  std::vector<std::pair<int, int>> periodic;
  std::map<int, int> class_rep;
  for (std::size_t l = 0; l < lift.size(); ++l) {
    const int c = mesh.canonical(lift[l]);
    auto [it, inserted] = class_rep.emplace(c, static_cast<int>(l));
    if (!inserted) periodic.emplace_back(it->second, static_cast<int>(l));
  }
  TriMesh sub(mesh.dimension(), std::move(verts), std::move(tris), std::move(periodic));
  return SubmeshExtraction{std::move(sub), std::move(lift), origin_domain_id};
}

LevelSetSplit split_by_level_set(const TriMesh& mesh, const std::vector<double>& vertex_values, double zero_tol,
                                 double clamp) {
  if (vertex_values.size() != mesh.num_vertices()) throw MeshError("split_by_level_set: value count mismatch");
  auto value = [&](int v) { return vertex_values[static_cast<std::size_t>(mesh.canonical(v))]; };
  auto sign = [&](int v) {
    const double x = value(v);
    return x > zero_tol ? 1 : (x < -zero_tol ? -1 : 0);
  };
  std::vector<Eigen::Vector3d> verts = mesh.vertices();
  std::vector<std::pair<int, int>> periodic = mesh.periodic_map();
  std::vector<double> values(mesh.num_vertices());
  std::vector<int> parent_vertex(mesh.num_vertices());
  for (std::size_t v = 0; v < mesh.num_vertices(); ++v) {
    values[v] = value(static_cast<int>(v));
    parent_vertex[v] = static_cast<int>(v);
  }
  EdgeVertexAllocator alloc{mesh, verts, periodic, {}, {}};
  auto crossing = [&](int u, int v) {
    double t = value(u) / (value(u) - value(v));
    t = std::clamp(t, clamp, 1.0 - clamp);
    const Eigen::Vector3d& a = mesh.vertices()[static_cast<std::size_t>(u)];
    const Eigen::Vector3d& b = mesh.vertices()[static_cast<std::size_t>(v)];
    return Eigen::Vector3d(a + t * (b - a));
  };
  // The allocator orders endpoints by id; crossing() is symmetric up to the clamp,
  // so compute it from the lower id for determinism.
  auto get_crossing = [&](int u, int v) {
    const int lo = std::min(u, v), hi = std::max(u, v);
    return alloc.get(lo, hi, [&](int, int) { return crossing(lo, hi); });
  };

  std::vector<Triangle> tris;
  std::vector<int> parent_tri;
  for (std::size_t ti = 0; ti < mesh.num_triangles(); ++ti) {
    const Triangle& t = mesh.triangles()[ti];
    const int s[3] = {sign(t[0]), sign(t[1]), sign(t[2])};
    int crossings = 0;
    for (int i = 0; i < 3; ++i) crossings += (s[i] * s[(i + 1) % 3] < 0) ? 1 : 0;
    auto emit = [&](int a, int b, int c) {
      tris.push_back({a, b, c});
      parent_tri.push_back(static_cast<int>(ti));
    };
    if (crossings == 0) {
      emit(t[0], t[1], t[2]);
    } else if (crossings == 2) {
      int lone = 0;
      for (int i = 0; i < 3; ++i) {
        if (s[i] * s[(i + 1) % 3] < 0 && s[i] * s[(i + 2) % 3] < 0) lone = i;
      }
      const int vi = t[lone], vj = t[(lone + 1) % 3], vk = t[(lone + 2) % 3];
      const int pij = get_crossing(vi, vj);
      const int pik = get_crossing(vi, vk);
      emit(vi, pij, pik);
      // Quad pij, vj, vk, pik split along its shorter diagonal.
      const double d1 = (verts[static_cast<std::size_t>(pij)] - verts[static_cast<std::size_t>(vk)]).norm();
      const double d2 = (verts[static_cast<std::size_t>(vj)] - verts[static_cast<std::size_t>(pik)]).norm();
      if (d1 <= d2) {
        emit(pij, vj, vk);
        emit(pij, vk, pik);
      } else {
        emit(pij, vj, pik);
        emit(vj, vk, pik);
      }
    } else {
      int zero = 0;
      for (int i = 0; i < 3; ++i) {
        if (s[i] == 0) zero = i;
      }
      const int vi = t[zero], vj = t[(zero + 1) % 3], vk = t[(zero + 2) % 3];
      const int p = get_crossing(vj, vk);
      emit(vi, vj, p);
      emit(vi, p, vk);
    }
  }
  values.resize(verts.size(), 0.0);
  parent_vertex.resize(verts.size(), -1);
  TriMesh cut(mesh.dimension(), std::move(verts), std::move(tris), std::move(periodic), mesh.is_closed() ? mesh.genus() : std::nullopt);
  return LevelSetSplit{std::move(cut), std::move(values), std::move(parent_vertex), std::move(parent_tri)};
}

// ---------------------------------------------------------------------------
// Serialization

std::string to_json_text(const TriMesh& mesh) {
  nlohmann::json j;
  nlohmann::json verts = nlohmann::json::array();
  for (const auto& v : mesh.vertices()) {
    if (mesh.dimension() == 2) verts.push_back({v.x(), v.y()});
    else verts.push_back({v.x(), v.y(), v.z()});
  }
  j["vertices"] = std::move(verts);
  nlohmann::json tris = nlohmann::json::array();
  for (const auto& t : mesh.triangles()) tris.push_back({t[0], t[1], t[2]});
  j["triangles"] = std::move(tris);
  j["boundary_vertices"] = mesh.boundary_vertices();
  if (mesh.is_periodic()) {
    nlohmann::json pm = nlohmann::json::array();
    for (const auto& [a, b] : mesh.periodic_map()) pm.push_back({a, b});
    j["periodic_map"] = std::move(pm);
  }
  if (mesh.genus()) j["genus"] = *mesh.genus();
  return dump_json(j, 0);
}

TriMesh from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw MeshError(std::string("malformed mesh file: ") + e.what());
  }
  try {
    if (!j.is_object() || !j.contains("vertices") || !j.contains("triangles")) {
      throw MeshError("mesh file needs 'vertices' and 'triangles'");
    }
    int dim = 0;
    std::vector<Eigen::Vector3d> verts;
    for (const auto& v : j.at("vertices")) {
      const int d = static_cast<int>(v.size());
      if ((d != 2 && d != 3) || (dim != 0 && d != dim)) throw MeshError("vertices must all be [x,y] or all [x,y,z]");
      dim = d;
      verts.emplace_back(v[0].get<double>(), v[1].get<double>(), d == 3 ? v[2].get<double>() : 0.0);
    }
    std::vector<Triangle> tris;
    for (const auto& t : j.at("triangles")) {
      if (t.size() != 3) throw MeshError("triangles must have 3 indices");
      tris.push_back({t[0].get<int>(), t[1].get<int>(), t[2].get<int>()});
    }
    std::vector<std::pair<int, int>> periodic;
    if (j.contains("periodic_map") && !j["periodic_map"].is_null()) {
      for (const auto& p : j["periodic_map"]) {
        if (p.size() != 2) throw MeshError("periodic_map entries must be pairs");
        periodic.emplace_back(p[0].get<int>(), p[1].get<int>());
      }
    }
    std::optional<int> genus;
    if (j.contains("genus") && !j["genus"].is_null()) genus = j["genus"].get<int>();
    if (dim == 0) throw MeshError("mesh file has no vertices");
    TriMesh mesh(dim, std::move(verts), std::move(tris), std::move(periodic), genus);
    if (j.contains("boundary_vertices")) {
      auto stored = j["boundary_vertices"].get<std::vector<int>>();
      std::sort(stored.begin(), stored.end());
      if (stored != mesh.boundary_vertices()) throw MeshError("boundary_vertices do not match the triangulation");
    }
    return mesh;
  } catch (const nlohmann::json::exception& e) {
    throw MeshError(std::string("malformed mesh file: ") + e.what());
  }
}

void save(const TriMesh& mesh, const std::string& path) { write_text_file(path, to_json_text(mesh)); }

TriMesh load(const std::string& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const std::exception& e) {
    throw MeshError(e.what());
  }
  return from_json_text(text);
}

std::uint64_t content_hash(const TriMesh& mesh) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : to_json_text(mesh)) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace wspec
