#include "wspec/nodal.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <deque>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <stdexcept>

#include <Eigen/Dense>

#include "wspec/union_find.hpp"

namespace wspec {

namespace {

constexpr double kPi = std::numbers::pi;

/// Periods of a flat torus chart (zero for non-periodic directions).
struct Periods {
  double lx = 0.0, ly = 0.0;

  explicit Periods(const TriMesh& mesh) {
    for (const auto& [c, d] : mesh.periodic_map()) {
      const Eigen::Vector3d delta = mesh.vertices()[static_cast<std::size_t>(d)] - mesh.vertices()[static_cast<std::size_t>(c)];
      lx = std::max(lx, std::abs(delta.x()));
      ly = std::max(ly, std::abs(delta.y()));
    }
  }

  Eigen::Vector3d wrap(Eigen::Vector3d d) const {
    if (lx > 0.0) d.x() -= lx * std::round(d.x() / lx);
    if (ly > 0.0) d.y() -= ly * std::round(d.y() / ly);
    return d;
  }
  double distance(const Eigen::Vector3d& a, const Eigen::Vector3d& b) const { return wrap(b - a).norm(); }
};

using PointKey = std::pair<int, int>;  // (a, b) crossing on edge a<b, or (v, -1) at a zero vertex

struct Piece {
  PointKey key[2];
  Eigen::Vector3d pos[2];
};

int sign_of(double v, double tau) { return v > tau ? 1 : (v < -tau ? -1 : 0); }

/// Zero set of the linear interpolant on one triangle, in coordinates `p`.
/// Appends 0 or 1 segment; both-zero edges are handled by the caller.
template <typename Emit>
void triangle_piece(const std::array<int, 3>& s, const std::array<double, 3>& u, const std::array<Eigen::Vector3d, 3>& p,
                    const std::array<int, 3>& ids, Emit emit) {
  int zeros = 0, zero_corner = -1;
  for (int i = 0; i < 3; ++i)
    if (s[i] == 0) {
      ++zeros;
      zero_corner = i;
    }
  auto crossing = [&](int i, int j) {
    const double t = u[i] / (u[i] - u[j]);
    return std::make_pair(PointKey{std::min(ids[i], ids[j]), std::max(ids[i], ids[j])}, Eigen::Vector3d(p[i] + t * (p[j] - p[i])));
  };
  if (zeros == 0) {
    std::vector<std::pair<PointKey, Eigen::Vector3d>> pts;
    for (int i = 0; i < 3; ++i) {
      const int j = (i + 1) % 3;
      if (s[i] != s[j]) pts.push_back(crossing(i, j));
    }
    if (pts.size() == 2) emit(pts[0], pts[1]);
  } else if (zeros == 1) {
    const int a = (zero_corner + 1) % 3, b = (zero_corner + 2) % 3;
    if (s[a] != s[b]) emit(std::make_pair(PointKey{ids[zero_corner], -1}, p[zero_corner]), crossing(a, b));
  }
}

std::vector<NodalChain> chain_pieces(const std::vector<Piece>& pieces) {
  std::map<PointKey, std::vector<int>> incident;
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    incident[pieces[i].key[0]].push_back(static_cast<int>(i));
    incident[pieces[i].key[1]].push_back(static_cast<int>(i));
  }
  std::vector<char> used(pieces.size(), 0);
  std::vector<NodalChain> chains;

  auto walk = [&](int first, int from_end) {
    NodalChain c;
    int cur = first, end = from_end;
    const PointKey start = pieces[first].key[from_end];
    c.points.push_back(pieces[first].pos[from_end]);
    while (true) {
      used[cur] = 1;
      const int far = 1 - end;
      c.points.push_back(pieces[cur].pos[far]);
      const PointKey k = pieces[cur].key[far];
      if (k == start) {
        c.closed = true;
        break;
      }
      const auto& inc = incident[k];
      if (inc.size() != 2) break;
      const int next = inc[0] == cur ? inc[1] : inc[0];
      if (used[next]) break;
      end = pieces[next].key[0] == k ? 0 : 1;
      cur = next;
    }
    chains.push_back(std::move(c));
  };

  for (const auto& [key, inc] : incident) {
    if (inc.size() == 2) continue;
    for (int pi : inc) {
      if (used[pi]) continue;
      walk(pi, pieces[pi].key[0] == key ? 0 : 1);
    }
  }
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    if (!used[i]) walk(static_cast<int>(i), 0);
  }
  return chains;
}

std::vector<Piece> zero_pieces(const TriMesh& mesh, const std::vector<double>& u, const std::vector<int>& sign) {
  std::vector<Piece> pieces;
  // A both-zero edge belongs to the nodal set when its opposite vertices have
  // opposite signs, or one is nonzero and the other an interior zero (a line
  // continuing through a crossing). Boundary vertices are zero by constraint
  // and say nothing about the side.
  std::map<EdgeKey, Piece> zero_edges;
  std::map<EdgeKey, std::vector<int>> opposite;
  std::set<EdgeKey> shortcut;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const Triangle& tri = mesh.triangles()[t];
    std::array<int, 3> s, ids;
    std::array<double, 3> val;
    std::array<Eigen::Vector3d, 3> p;
    for (int i = 0; i < 3; ++i) {
      const auto v = static_cast<std::size_t>(tri[i]);
      s[i] = sign[v];
      val[i] = u[v];
      p[i] = mesh.vertices()[v];
      ids[i] = mesh.canonical(tri[i]);
    }
    triangle_piece(s, val, p, ids, [&](const auto& a, const auto& b) { pieces.push_back({{a.first, b.first}, {a.second, b.second}}); });
    if (s[0] == 0 && s[1] == 0 && s[2] == 0 && !mesh.is_boundary(tri[0]) && !mesh.is_boundary(tri[1]) && !mesh.is_boundary(tri[2])) {
      // An all-zero triangle at a crossing: its longest edge cuts the corner
      // between the two lines through it.
      int longest = 0;
      for (int i = 1; i < 3; ++i)
        if ((p[(i + 1) % 3] - p[i]).norm() > (p[(longest + 1) % 3] - p[longest]).norm()) longest = i;
      shortcut.insert(EdgeKey(ids[longest], ids[(longest + 1) % 3]));
    }
    for (int i = 0; i < 3; ++i) {
      const int j = (i + 1) % 3;
      if (s[i] != 0 || s[j] != 0) continue;
      const EdgeKey ek(ids[i], ids[j]);
      const int o = tri[(i + 2) % 3];
      if (!mesh.is_boundary(o)) opposite[ek].push_back(s[(i + 2) % 3]);
      if (!zero_edges.count(ek)) zero_edges[ek] = {{PointKey{ids[i], -1}, PointKey{ids[j], -1}}, {p[i], p[j]}};
    }
  }
  for (auto& [ek, piece] : zero_edges) {
    if (shortcut.count(ek)) continue;
    const auto& o = opposite[ek];
    if (o.size() == 2 && o[0] != o[1] && (o[0] * o[1] == -1 || o[0] * o[1] == 0)) pieces.push_back(piece);
  }
  return pieces;
}

/// Vertices near a point in local 2-D coordinates (x, y, 0), keyed by canonical id.
struct LocalChart {
  std::map<int, Eigen::Vector2d> coords;
  std::vector<int> triangles;
  Eigen::Vector3d origin, e1, e2;  // sphere tangent frame
  bool tangent = false;
};

LocalChart local_chart(const TriMesh& mesh, const Eigen::Vector3d& point, double radius) {
  LocalChart chart;
  chart.origin = point;
  const std::size_t nv = mesh.num_vertices();
  if (mesh.dimension() == 3) {
    chart.tangent = true;
    const Eigen::Vector3d n = point.normalized();
    const double r = mesh.sphere_radius().value_or(point.norm());
    chart.origin = n * r;
    Eigen::Vector3d a = std::abs(n.x()) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
    chart.e1 = (a - a.dot(n) * n).normalized();
    chart.e2 = n.cross(chart.e1);
    for (std::size_t v = 0; v < nv; ++v) {
      const Eigen::Vector3d d = mesh.vertices()[v] - chart.origin;
      if (d.norm() > radius || d.dot(n) < -0.5 * r) continue;
      chart.coords[static_cast<int>(v)] = Eigen::Vector2d(d.dot(chart.e1), d.dot(chart.e2));
    }
  } else {
    const Periods periods(mesh);
    int seed = -1;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t v = 0; v < nv; ++v) {
      const int c = mesh.canonical(static_cast<int>(v));
      const double d = periods.distance(point, mesh.vertices()[v]);
      if (d < best) {
        best = d;
        seed = c;
      }
    }
    const Eigen::Vector3d d0 = periods.wrap(mesh.vertices()[static_cast<std::size_t>(seed)] - point);
    chart.coords[seed] = Eigen::Vector2d(d0.x(), d0.y());
    std::deque<int> queue{seed};
    while (!queue.empty()) {
      const int v = queue.front();
      queue.pop_front();
      const Eigen::Vector2d cv = chart.coords[v];
      for (const auto& [t, corner] : mesh.vertex_triangles()[static_cast<std::size_t>(v)]) {
        for (int j = 0; j < 3; ++j) {
          if (j == corner) continue;
          const int w = mesh.canonical(mesh.triangles()[static_cast<std::size_t>(t)][j]);
          if (chart.coords.count(w)) continue;
          const Eigen::Vector3d step = mesh.corner_vector(t, corner, j);
          const Eigen::Vector2d cw = cv + Eigen::Vector2d(step.x(), step.y());
          if (cw.norm() > radius) continue;
          chart.coords[w] = cw;
          queue.push_back(w);
        }
      }
    }
  }
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const Triangle& tri = mesh.triangles()[t];
    bool inside = true;
    for (int i = 0; i < 3 && inside; ++i) {
      const int key = chart.tangent ? tri[i] : mesh.canonical(tri[i]);
      inside = chart.coords.count(key) > 0;
    }
    if (inside) chart.triangles.push_back(static_cast<int>(t));
  }
  return chart;
}

struct Sample {
  Eigen::Vector2d z;
  double u;
};

double harmonic_residual(const std::vector<Sample>& samples, int order, const Eigen::Vector2d& center, double scale) {
  const auto n = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd a(n, 2);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::complex<double> z((samples[i].z.x() - center.x()) / scale, (samples[i].z.y() - center.y()) / scale);
    const std::complex<double> zn = std::pow(z, order);
    a(i, 0) = zn.real();
    a(i, 1) = zn.imag();
    b[i] = samples[i].u;
  }
  const Eigen::VectorXd coef = a.colPivHouseholderQr().solve(b);
  const double den = b.norm();
  return den > 0.0 ? (a * coef - b).norm() / den : 1.0;
}

/// Nelder-Mead over the center offset, confined to a disk of radius `bound`.
std::pair<Eigen::Vector2d, double> refine_center(const std::vector<Sample>& samples, int order, double scale, double bound) {
  auto f = [&](const Eigen::Vector2d& c) {
    const double r = harmonic_residual(samples, order, c, scale);
    const double over = c.norm() - bound;
    return over > 0.0 ? r + 1.0 + over / bound : r;
  };
  std::array<Eigen::Vector2d, 3> x = {Eigen::Vector2d(0, 0), Eigen::Vector2d(0.3 * bound, 0), Eigen::Vector2d(0, 0.3 * bound)};
  std::array<double, 3> fx = {f(x[0]), f(x[1]), f(x[2])};
  for (int it = 0; it < 80; ++it) {
    std::array<int, 3> idx = {0, 1, 2};
    std::sort(idx.begin(), idx.end(), [&](int i, int j) { return fx[i] < fx[j]; });
    const int b = idx[0], m = idx[1], w = idx[2];
    if ((x[w] - x[b]).norm() < 1e-4 * bound) break;
    const Eigen::Vector2d centroid = 0.5 * (x[b] + x[m]);
    const Eigen::Vector2d xr = centroid + (centroid - x[w]);
    const double fr = f(xr);
    if (fr < fx[b]) {
      const Eigen::Vector2d xe = centroid + 2.0 * (centroid - x[w]);
      const double fe = f(xe);
      if (fe < fr) {
        x[w] = xe;
        fx[w] = fe;
      } else {
        x[w] = xr;
        fx[w] = fr;
      }
    } else if (fr < fx[m]) {
      x[w] = xr;
      fx[w] = fr;
    } else {
      const Eigen::Vector2d xc = centroid + 0.5 * (x[w] - centroid);
      const double fc = f(xc);
      if (fc < fx[w]) {
        x[w] = xc;
        fx[w] = fc;
      } else {
        for (int i : {m, w}) {
          x[i] = x[b] + 0.5 * (x[i] - x[b]);
          fx[i] = f(x[i]);
        }
      }
    }
  }
  const int best = static_cast<int>(std::min_element(fx.begin(), fx.end()) - fx.begin());
  return {x[best], harmonic_residual(samples, order, x[best], scale)};
}

double mean_abs_max(const std::vector<double>& u) {
  double m = 0.0;
  for (double v : u) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace

double OrderFit::max_angle_error() const {
  if (order < 1 || branch_count() != 2 * order) return std::numeric_limits<double>::infinity();
  double worst = 0.0;
  const double expected = kPi / order;
  for (std::size_t i = 0; i < branch_angles.size(); ++i) {
    const double next = i + 1 < branch_angles.size() ? branch_angles[i + 1] : branch_angles[0] + 2.0 * kPi;
    worst = std::max(worst, std::abs(next - branch_angles[i] - expected));
  }
  return worst;
}

NodalAnalysis analyze(const TriMesh& mesh, const std::vector<double>& u, const NodalOptions& options) {
  if (u.size() != mesh.num_vertices()) throw std::invalid_argument("nodal analysis: one value per mesh vertex expected");
  const double umax = mean_abs_max(u);
  if (!(umax > 0.0)) throw std::invalid_argument("nodal analysis: function is identically zero");

  NodalAnalysis a;
  a.tau = options.tau_rel * umax;
  const std::size_t nv = mesh.num_vertices();
  a.sign_labels.resize(nv);
  for (std::size_t v = 0; v < nv; ++v) a.sign_labels[v] = sign_of(u[v], a.tau);

  UnionFind uf(nv);
  for (const EdgeKey& e : mesh.edges()) {
    const int sa = a.sign_labels[static_cast<std::size_t>(e.a)];
    if (sa != 0 && sa == a.sign_labels[static_cast<std::size_t>(e.b)]) uf.unite(e.a, e.b);
  }
  std::map<int, int> root_label;
  a.domain_labels.assign(nv, -1);
  for (std::size_t v = 0; v < nv; ++v) {
    const int c = mesh.canonical(static_cast<int>(v));
    if (a.sign_labels[static_cast<std::size_t>(c)] == 0) continue;
    const int r = uf.find(c);
    auto it = root_label.find(r);
    if (it == root_label.end()) it = root_label.emplace(r, static_cast<int>(root_label.size())).first;
    a.domain_labels[v] = it->second;
  }
  a.domain_count = static_cast<int>(root_label.size());

  a.segments = chain_pieces(zero_pieces(mesh, u, a.sign_labels));
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    for (int v : mesh.triangles()[t]) {
      if (a.sign_labels[static_cast<std::size_t>(v)] == 0 && !mesh.is_boundary(v)) {
        a.flagged_triangles.push_back(static_cast<int>(t));
        break;
      }
    }
  }
  return a;
}

OrderFit fit_vanishing_order(const TriMesh& mesh, const std::vector<double>& u, const Eigen::Vector3d& point,
                             const NodalOptions& options) {
  OrderFit fit;
  fit.center = point;
  const double h = mesh.mean_edge_length();
  const double r_fit = options.r_fit_factor * h;
  const LocalChart chart = local_chart(mesh, point, r_fit + 3.0 * h);

  std::vector<Sample> samples;
  for (const auto& [v, z] : chart.coords) {
    if (z.norm() <= r_fit) samples.push_back({z, u[static_cast<std::size_t>(v)]});
  }
  fit.sample_count = static_cast<int>(samples.size());
  if (samples.size() < 12) {
    fit.note = "too few vertices in the fit ball";
    return fit;
  }
  double unorm = 0.0;
  for (const auto& s : samples) unorm = std::max(unorm, std::abs(s.u));
  if (!(unorm > 0.0)) {
    fit.note = "function vanishes on the fit ball";
    return fit;
  }

  Eigen::Vector2d best_center(0, 0);
  for (int order = 1; order <= options.n_max; ++order) {
    const auto [c, r] = refine_center(samples, order, r_fit, h);
    fit.residual_by_order.push_back(r);
    if (fit.order == 0 || r < fit.residual) {
      fit.order = order;
      fit.residual = r;
      best_center = c;
    }
  }

  if (chart.tangent) {
    const double radius = chart.origin.norm();
    fit.center = (chart.origin + best_center.x() * chart.e1 + best_center.y() * chart.e2).normalized() * radius;
  } else {
    fit.center = point + Eigen::Vector3d(best_center.x(), best_center.y(), 0.0);
    // Report the center in the same chart as the input point.
    fit.center.z() = point.z();
  }

  // Branch rays: zero pieces of the local chart crossing a circle around the center.
  const double rho = options.ray_radius_fraction * r_fit;
  const double tau = options.tau_rel * mean_abs_max(u);
  std::vector<double> angles;
  for (int t : chart.triangles) {
    const Triangle& tri = mesh.triangles()[static_cast<std::size_t>(t)];
    std::array<int, 3> s, ids;
    std::array<double, 3> val;
    std::array<Eigen::Vector3d, 3> p;
    for (int i = 0; i < 3; ++i) {
      const int key = chart.tangent ? tri[i] : mesh.canonical(tri[i]);
      const Eigen::Vector2d z = chart.coords.at(key) - best_center;
      p[i] = Eigen::Vector3d(z.x(), z.y(), 0.0);
      val[i] = u[static_cast<std::size_t>(tri[i])];
      s[i] = sign_of(val[i], tau);
      ids[i] = mesh.canonical(tri[i]);
    }
    auto add_crossings = [&](const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
      const Eigen::Vector2d pa = a.head<2>(), d = b.head<2>() - a.head<2>();
      const double qa = d.squaredNorm(), qb = 2.0 * pa.dot(d), qc = pa.squaredNorm() - rho * rho;
      const double disc = qb * qb - 4.0 * qa * qc;
      if (qa <= 0.0 || disc < 0.0) return;
      for (double sgn : {-1.0, 1.0}) {
        const double t = (-qb + sgn * std::sqrt(disc)) / (2.0 * qa);
        if (t < 0.0 || t >= 1.0) continue;
        const Eigen::Vector2d q = pa + t * d;
        double ang = std::atan2(q.y(), q.x());
        if (ang < 0.0) ang += 2.0 * kPi;
        angles.push_back(ang);
      }
    };
    triangle_piece(s, val, p, ids, [&](const auto& a, const auto& b) { add_crossings(a.second, b.second); });
    for (int i = 0; i < 3; ++i) {
      const int j = (i + 1) % 3;
      if (s[i] == 0 && s[j] == 0 && ids[i] < ids[j]) add_crossings(p[i], p[j]);
    }
  }
  std::sort(angles.begin(), angles.end());
  for (double ang : angles) {
    if (!fit.branch_angles.empty() && ang - fit.branch_angles.back() < 1e-9) continue;
    fit.branch_angles.push_back(ang);
  }
  if (fit.branch_angles.size() > 1 && fit.branch_angles.front() + 2.0 * kPi - fit.branch_angles.back() < 1e-9) {
    fit.branch_angles.pop_back();
  }
  return fit;
}

std::vector<SingularPoint> detect_singular_points(const TriMesh& mesh, const std::vector<double>& u,
                                                  const NodalAnalysis& analysis, const NodalOptions& options) {
  const double h = mesh.mean_edge_length();
  const double r_fit = options.r_fit_factor * h;
  const Periods periods(mesh);
  auto dist = [&](const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
    return mesh.dimension() == 3 ? (a - b).norm() : periods.distance(a, b);
  };
  std::vector<Eigen::Vector3d> candidates;

  // Interior zero vertices whose link changes sign at least four times.
  const auto& vt = mesh.vertex_triangles();
  for (std::size_t v = 0; v < vt.size(); ++v) {
    const int vi = static_cast<int>(v);
    if (mesh.canonical(vi) != vi || analysis.sign_labels[v] != 0 || mesh.is_boundary(vi) || vt[v].empty()) continue;
    std::map<int, int> step;
    for (const auto& [t, corner] : vt[v]) {
      const Triangle& tri = mesh.triangles()[static_cast<std::size_t>(t)];
      step[mesh.canonical(tri[(corner + 1) % 3])] = mesh.canonical(tri[(corner + 2) % 3]);
    }
    std::vector<int> ring;
    int cur = step.begin()->first;
    for (std::size_t i = 0; i < step.size(); ++i) {
      const int s = analysis.sign_labels[static_cast<std::size_t>(cur)];
      if (s != 0) ring.push_back(s);
      const auto it = step.find(cur);
      if (it == step.end()) break;
      cur = it->second;
    }
    int changes = 0;
    for (std::size_t i = 0; i < ring.size(); ++i) changes += ring[i] != ring[(i + 1) % ring.size()];
    if (changes >= 4) candidates.push_back(mesh.vertices()[v]);
  }

  // Endpoints of chains that stop in the interior meet at junctions.
  for (const auto& ch : analysis.segments) {
    if (ch.closed || ch.points.size() < 2) continue;
    for (const Eigen::Vector3d& end : {ch.points.front(), ch.points.back()}) {
      int touching = 0;
      for (const auto& other : analysis.segments)
        for (const Eigen::Vector3d& q : {other.points.front(), other.points.back()})
          if (!other.closed && dist(end, q) < 1e-12) ++touching;
      if (touching >= 3) candidates.push_back(end);
    }
  }

  const std::size_t exact_count = candidates.size();

  // Near approaches of distinct stretches of the nodal set.
  struct ChainPoint {
    Eigen::Vector3d x;
    int chain;
    double s;
  };
  std::vector<ChainPoint> pts;
  std::vector<double> length(analysis.segments.size(), 0.0);
  for (std::size_t c = 0; c < analysis.segments.size(); ++c) {
    const auto& ch = analysis.segments[c];
    double s = 0.0;
    for (std::size_t i = 0; i < ch.points.size(); ++i) {
      if (i > 0) s += dist(ch.points[i - 1], ch.points[i]);
      pts.push_back({ch.points[i], static_cast<int>(c), s});
    }
    length[c] = s;
  }
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      if (dist(pts[i].x, pts[j].x) > h) continue;
      if (pts[i].chain == pts[j].chain) {
        double gap = std::abs(pts[i].s - pts[j].s);
        if (analysis.segments[static_cast<std::size_t>(pts[i].chain)].closed) gap = std::min(gap, length[static_cast<std::size_t>(pts[i].chain)] - gap);
        if (gap <= 3.0 * h) continue;
      }
      Eigen::Vector3d mid = pts[i].x + 0.5 * (mesh.dimension() == 3 ? Eigen::Vector3d(pts[j].x - pts[i].x) : periods.wrap(pts[j].x - pts[i].x));
      candidates.push_back(mid);
    }
  }
  // Merge within two mean edge lengths. Vertex and junction candidates sit on
  // the crossing and are kept as is; proximity candidates are averaged.
  struct Group {
    Eigen::Vector3d seed, offset_sum;
    int count;
    bool exact;
  };
  std::vector<Group> groups;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const bool exact = i < exact_count;
    bool placed = false;
    for (auto& g : groups) {
      if (dist(g.seed, candidates[i]) > 2.0 * h) continue;
      placed = true;
      if (!g.exact) {
        g.offset_sum += mesh.dimension() == 3 ? Eigen::Vector3d(candidates[i] - g.seed) : periods.wrap(candidates[i] - g.seed);
        ++g.count;
      }
      break;
    }
    if (!placed) groups.push_back({candidates[i], Eigen::Vector3d::Zero(), 1, exact});
  }
  std::vector<Eigen::Vector3d> merged;
  for (const auto& g : groups) merged.push_back(g.seed + g.offset_sum / g.count);

  std::vector<Eigen::Vector3d> boundary;
  for (int b : mesh.boundary_vertices()) boundary.push_back(mesh.vertices()[static_cast<std::size_t>(b)]);

  std::vector<SingularPoint> out;
  for (const auto& c : merged) {
    bool near_boundary = false;
    for (const auto& b : boundary) {
      if ((b - c).norm() < r_fit + h) {
        near_boundary = true;
        break;
      }
    }
    if (near_boundary) continue;
    SingularPoint sp;
    sp.fit = fit_vanishing_order(mesh, u, c, options);
    if (sp.fit.order == 1) continue;
    sp.confident = sp.fit.order >= 2 && sp.fit.residual < options.confident_residual;
    bool duplicate = false;
    for (const auto& prev : out) {
      if (dist(prev.fit.center, sp.fit.center) <= 2.0 * h) duplicate = true;
    }
    if (!duplicate) out.push_back(std::move(sp));
  }
  return out;
}

nlohmann::json to_json(const NodalAnalysis& a) {
  using nlohmann::json;
  json j;
  j["function_index"] = a.function_index;
  j["tau"] = a.tau;
  j["domain_count"] = a.domain_count;
  j["sign_labels"] = a.sign_labels;
  j["domain_labels"] = a.domain_labels;
  j["flagged_triangles"] = a.flagged_triangles;
  json segs = json::array();
  for (const auto& c : a.segments) {
    json pts = json::array();
    for (const auto& p : c.points) pts.push_back({p.x(), p.y(), p.z()});
    segs.push_back({{"closed", c.closed}, {"points", pts}});
  }
  j["segments"] = segs;
  json sps = json::array();
  for (const auto& sp : a.singular_points) {
    const double err = sp.fit.max_angle_error();
    sps.push_back({{"location", {sp.fit.center.x(), sp.fit.center.y(), sp.fit.center.z()}},
                   {"vanishing_order", sp.fit.order},
                   {"branch_angles", sp.fit.branch_angles},
                   {"branch_count", sp.fit.branch_count()},
                   {"fit_residual", sp.fit.residual},
                   {"residual_by_order", sp.fit.residual_by_order},
                   {"max_angle_error", std::isfinite(err) ? json(err) : json(nullptr)},
                   {"confident", sp.confident},
                   {"samples", sp.fit.sample_count}});
  }
  j["singular_points"] = sps;
  return j;
}

namespace {

std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::string render_svg(const TriMesh& mesh, const NodalAnalysis& a) {
  constexpr double kSize = 1000.0, kMargin = 20.0;
  std::string out;
  auto path = [&](const std::vector<std::vector<Eigen::Vector2d>>& lines, const char* style) {
    std::string d;
    for (const auto& line : lines) {
      if (line.size() < 2) continue;
      for (std::size_t i = 0; i < line.size(); ++i) d += (i ? " L " : (d.empty() ? "M " : " M ")) + fmt6(line[i].x()) + " " + fmt6(line[i].y());
    }
    if (!d.empty()) out += "<path d=\"" + d + "\" " + style + "/>\n";
  };

  if (mesh.dimension() == 3) {
    // Two orthographic hemispheres: z >= 0 on the left, z < 0 (mirrored) on the right.
    const double r = mesh.sphere_radius().value_or(1.0);
    const double half = (kSize - 3.0 * kMargin) / 4.0;
    auto to_view = [&](const Eigen::Vector3d& p, int hemi) {
      const double cx = kMargin + half + hemi * (2.0 * half + kMargin);
      const double x = hemi == 0 ? p.x() : -p.x();
      return Eigen::Vector2d(cx + half * x / r, kMargin + half - half * p.y() / r);
    };
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " + fmt6(kSize) + " " + fmt6(2.0 * half + 2.0 * kMargin) + "\">\n";
    for (int hemi = 0; hemi < 2; ++hemi) {
      const Eigen::Vector2d c = to_view(Eigen::Vector3d::Zero(), hemi);
      out += "<circle cx=\"" + fmt6(c.x()) + "\" cy=\"" + fmt6(c.y()) + "\" r=\"" + fmt6(half) + "\" fill=\"none\" stroke=\"#888888\"/>\n";
    }
    std::vector<std::vector<Eigen::Vector2d>> lines[2];
    for (const auto& ch : a.segments) {
      int cur = -1;
      for (std::size_t i = 0; i + 1 < ch.points.size(); ++i) {
        const int hemi = (ch.points[i] + ch.points[i + 1]).z() >= 0.0 ? 0 : 1;
        if (hemi != cur) {
          lines[hemi].emplace_back();
          lines[hemi].back().push_back(to_view(ch.points[i], hemi));
          cur = hemi;
        }
        lines[hemi].back().push_back(to_view(ch.points[i + 1], hemi));
      }
    }
    for (auto& l : lines) path(l, "fill=\"none\" stroke=\"#000000\" stroke-width=\"1.5\"");
    for (const auto& sp : a.singular_points) {
      const Eigen::Vector2d c = to_view(sp.fit.center, sp.fit.center.z() >= 0.0 ? 0 : 1);
      out += "<circle cx=\"" + fmt6(c.x()) + "\" cy=\"" + fmt6(c.y()) + "\" r=\"4.000000\" fill=\"#cc0000\"/>\n";
    }
    out += "</svg>\n";
    return out;
  }

  Eigen::Vector2d lo(std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity());
  Eigen::Vector2d hi = -lo;
  for (const auto& v : mesh.vertices()) {
    lo = lo.cwiseMin(v.head<2>());
    hi = hi.cwiseMax(v.head<2>());
  }
  const double span = std::max(hi.x() - lo.x(), hi.y() - lo.y());
  const double scale = (kSize - 2.0 * kMargin) / span;
  const double height = (hi.y() - lo.y()) * scale + 2.0 * kMargin;
  auto to_view = [&](const Eigen::Vector3d& p) {
    return Eigen::Vector2d(kMargin + (p.x() - lo.x()) * scale, height - kMargin - (p.y() - lo.y()) * scale);
  };
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " + fmt6(kSize) + " " + fmt6(height) + "\">\n";

  std::vector<std::vector<Eigen::Vector2d>> outline;
  if (mesh.is_periodic()) {
    outline.push_back({to_view({lo.x(), lo.y(), 0}), to_view({hi.x(), lo.y(), 0}), to_view({hi.x(), hi.y(), 0}),
                       to_view({lo.x(), hi.y(), 0}), to_view({lo.x(), lo.y(), 0})});
  } else {
    for (std::size_t e = 0; e < mesh.edges().size(); ++e) {
      if (mesh.edge_valence()[e] != 1) continue;
      const EdgeKey& k = mesh.edges()[e];
      outline.push_back({to_view(mesh.vertices()[static_cast<std::size_t>(k.a)]), to_view(mesh.vertices()[static_cast<std::size_t>(k.b)])});
    }
  }
  path(outline, "fill=\"none\" stroke=\"#888888\" stroke-width=\"1\"");

  const Periods periods(mesh);
  std::vector<std::vector<Eigen::Vector2d>> lines;
  for (const auto& ch : a.segments) {
    lines.emplace_back();
    for (std::size_t i = 0; i < ch.points.size(); ++i) {
      if (i > 0 && (ch.points[i] - ch.points[i - 1]).norm() > 0.5 * std::max(periods.lx, periods.ly) && mesh.is_periodic()) {
        lines.emplace_back();
      }
      lines.back().push_back(to_view(ch.points[i]));
    }
  }
  path(lines, "fill=\"none\" stroke=\"#000000\" stroke-width=\"1.5\"");
  for (const auto& sp : a.singular_points) {
    const Eigen::Vector2d c = to_view(sp.fit.center);
    out += "<circle cx=\"" + fmt6(c.x()) + "\" cy=\"" + fmt6(c.y()) + "\" r=\"4.000000\" fill=\"#cc0000\"/>\n";
  }
  out += "</svg>\n";
  return out;
}

}  // namespace wspec
