#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <set>

#include <json.hpp>

#include "wspec/mesh.hpp"

using namespace wspec;

namespace {

double min_angle_deg(const TriMesh& m) {
  double best = 180.0;
  for (std::size_t t = 0; t < m.num_triangles(); ++t) {
    for (int i = 0; i < 3; ++i) {
      const Eigen::Vector3d a = m.corner_vector(static_cast<int>(t), i, (i + 1) % 3);
      const Eigen::Vector3d b = m.corner_vector(static_cast<int>(t), i, (i + 2) % 3);
      const double c = a.dot(b) / (a.norm() * b.norm());
      best = std::min(best, std::acos(std::clamp(c, -1.0, 1.0)) * 180.0 / std::numbers::pi);
    }
  }
  return best;
}

std::string temp_path(const std::string& name) { return (std::filesystem::temp_directory_path() / name).string(); }

}  // namespace

TEST_CASE("structured 2x2 rectangle has disk-type Euler characteristic") {
  const TriMesh m = structured_rectangle(1, 1, 2, 2);
  CHECK(m.num_triangles() == 8);
  CHECK(m.num_vertices() == 9);
  CHECK(m.num_edges() == 16);
  CHECK(m.euler_characteristic() == 1);
  CHECK(m.boundary_vertices().size() == 8);
}

TEST_CASE("icosphere level 0 counts") {
  const TriMesh m = icosphere(1.0, 0);
  CHECK(m.num_vertices() == 12);
  CHECK(m.num_edges() == 30);
  CHECK(m.num_triangles() == 20);
  CHECK(m.euler_characteristic() == 2);
  CHECK(m.genus() == 0);
  CHECK(m.is_closed());
}

TEST_CASE("4x4 periodic grid is a torus on the quotient") {
  const TriMesh m = periodic_grid(2 * std::numbers::pi, 2 * std::numbers::pi, 4, 4);
  CHECK(m.num_quotient_vertices() == 16);
  CHECK(m.num_edges() == 48);
  CHECK(m.num_triangles() == 32);
  CHECK(m.euler_characteristic() == 0);
  CHECK(m.genus() == 1);
  CHECK(m.is_closed());
  CHECK(m.is_periodic());
}

TEST_CASE("refinement quadruples triangles and preserves topology") {
  const TriMesh s1 = refine(icosphere(1.0, 0));
  CHECK(s1.num_vertices() == 42);
  CHECK(s1.num_triangles() == 80);
  CHECK(s1.euler_characteristic() == 2);
  for (const auto& v : s1.vertices()) CHECK(v.norm() == doctest::Approx(1.0).epsilon(1e-14));

  for (const Shape& shape : {Shape::disk(1), Shape::rectangle(2, 1), Shape::annulus(0.5, 1), Shape::flat_torus(3, 2), Shape::sphere(2)}) {
    const TriMesh m = generate(shape, 0.3);
    const TriMesh r = refine(m);
    CHECK(r.num_triangles() == 4 * m.num_triangles());
    CHECK(r.euler_characteristic() == m.euler_characteristic());
    CHECK(r.is_closed() == m.is_closed());
    CHECK(r.genus() == m.genus());
  }
}

TEST_CASE("generated meshes satisfy the shape contract") {
  struct Case {
    Shape shape;
    bool closed;
    int genus;
  };
  const std::vector<Case> cases = {{Shape::disk(1), false, 0},           {Shape::rectangle(1, 2), false, 0},
                                   {Shape::annulus(0.4, 1.0), false, 0}, {Shape::flat_torus(6.0, 4.0), true, 1},
                                   {Shape::sphere(1), true, 0}};
  for (const auto& c : cases) {
    for (double h : {0.2, 0.1, 0.05}) {
      CAPTURE(c.shape.to_string());
      CAPTURE(h);
      const TriMesh m = generate(c.shape, h);
      CHECK(m.num_triangles() >= 16);
      CHECK(m.mean_edge_length() <= 2 * h);
      CHECK(m.mean_edge_length() >= h / 2);
      CHECK(m.is_closed() == c.closed);
      if (c.closed) {
        CHECK(m.genus() == c.genus);
        CHECK(m.euler_characteristic() == 2 - 2 * c.genus);
      } else {
        CHECK_FALSE(m.boundary_vertices().empty());
      }
      CHECK(min_angle_deg(m) >= 10.0);
      for (std::size_t t = 0; t < m.num_triangles(); ++t) CHECK(m.triangle_area(static_cast<int>(t)) > 0.0);
    }
  }
}

TEST_CASE("annulus Euler characteristic is zero") {
  const TriMesh m = generate(Shape::annulus(0.5, 1.0), 0.1);
  CHECK(m.euler_characteristic() == 0);
}

TEST_CASE("generate rejects invalid parameters") {
  CHECK_THROWS_AS(generate(Shape::annulus(1.0, 0.5), 0.1), MeshError);
  CHECK_THROWS_AS(generate(Shape::disk(1), 0.0), MeshError);
  CHECK_THROWS_AS(generate(Shape::rectangle(1, 1), 5.0), MeshError);
  CHECK_THROWS_AS(Shape::parse("hexagon(1)"), MeshError);
  CHECK_THROWS_AS(Shape::parse("disk(1,2)"), MeshError);
}

TEST_CASE("shape parsing accepts constant expressions") {
  const Shape s = Shape::parse("flat_torus(2*pi, 2*pi)");
  CHECK(s.kind == Shape::Kind::flat_torus);
  CHECK(s.params[0] == doctest::Approx(2 * std::numbers::pi));
}

TEST_CASE("save and load round trip bit for bit") {
  for (const TriMesh& m : {generate(Shape::disk(1), 0.2), generate(Shape::flat_torus(3, 3), 0.4), generate(Shape::sphere(1.3), 0.4)}) {
    const std::string path = temp_path("wspec_roundtrip.json");
    save(m, path);
    const TriMesh r = load(path);
    REQUIRE(r.num_vertices() == m.num_vertices());
    for (std::size_t v = 0; v < m.num_vertices(); ++v) CHECK(r.vertices()[v] == m.vertices()[v]);
    CHECK(r.triangles() == m.triangles());
    CHECK(r.boundary_vertices() == m.boundary_vertices());
    CHECK(r.periodic_map() == m.periodic_map());
    CHECK(r.genus() == m.genus());
    CHECK(to_json_text(r) == to_json_text(m));
    CHECK(content_hash(r) == content_hash(m));
  }
}

TEST_CASE("load rejects malformed meshes") {
  nlohmann::json j = nlohmann::json::parse(to_json_text(structured_rectangle(1, 1, 2, 2)));
  SUBCASE("dangling vertex index") {
    j["triangles"][0][1] = 99;
    CHECK_THROWS_AS(from_json_text(j.dump()), MeshError);
  }
  SUBCASE("wrong genus on a closed mesh") {
    nlohmann::json s = nlohmann::json::parse(to_json_text(icosphere(1.0, 0)));
    s["genus"] = 1;
    CHECK_THROWS_AS(from_json_text(s.dump()), MeshError);
  }
  SUBCASE("not JSON") { CHECK_THROWS_AS(from_json_text("{vertices"), MeshError); }
  SUBCASE("missing file") { CHECK_THROWS_AS(load(temp_path("wspec_does_not_exist.json")), MeshError); }
}

TEST_CASE("extract_submesh") {
  const TriMesh m = structured_rectangle(1, 1, 8, 8);
  SUBCASE("full set is isomorphic to the parent") {
    std::vector<int> all(m.num_triangles());
    for (std::size_t t = 0; t < all.size(); ++t) all[t] = static_cast<int>(t);
    const SubmeshExtraction ex = extract_submesh(m, all, 0);
    CHECK(ex.submesh.num_vertices() == m.num_vertices());
    CHECK(ex.submesh.num_triangles() == m.num_triangles());
    CHECK(ex.submesh.boundary_vertices().size() == m.boundary_vertices().size());
  }
  SUBCASE("one triangle") {
    const SubmeshExtraction ex = extract_submesh(m, {5});
    CHECK(ex.submesh.num_vertices() == 3);
    CHECK(ex.submesh.boundary_vertices().size() == 3);
  }
  SUBCASE("left half strip") {
    std::vector<int> left;
    double area = 0.0;
    for (std::size_t t = 0; t < m.num_triangles(); ++t) {
      double cx = 0.0;
      for (int v : m.triangles()[t]) cx += m.vertices()[static_cast<std::size_t>(v)].x() / 3.0;
      if (cx < 0.5) {
        left.push_back(static_cast<int>(t));
        area += m.triangle_area(static_cast<int>(t));
      }
    }
    const SubmeshExtraction ex = extract_submesh(m, left, 3);
    CHECK(ex.origin_domain_id == 3);
    CHECK(ex.submesh.area() == area);
    for (const auto& v : ex.submesh.vertices()) CHECK(v.x() <= 0.5 + 1e-15);
    std::set<int> lifted(ex.vertex_lift.begin(), ex.vertex_lift.end());
    CHECK(lifted.size() == ex.vertex_lift.size());
    // 4 x 8 cells: perimeter of 2 * (4 + 8) vertices.
    CHECK(ex.submesh.boundary_vertices().size() == 24);
  }
  SUBCASE("disconnected set is rejected") { CHECK_THROWS_AS(extract_submesh(m, {0, static_cast<int>(m.num_triangles()) - 1}), MeshError); }
}

TEST_CASE("level-set split is conforming and keeps the sign pattern") {
  const TriMesh m = generate(Shape::rectangle(1, 1), 0.1);
  std::vector<double> u;
  for (const auto& p : m.vertices()) u.push_back(std::sin(2 * std::numbers::pi * p.x() + 0.3) * std::sin(std::numbers::pi * p.y()));
  const LevelSetSplit s = split_by_level_set(m, u, 1e-12);
  CHECK(s.mesh.area() == doctest::Approx(m.area()).epsilon(1e-13));
  CHECK(s.mesh.euler_characteristic() == 1);
  for (std::size_t t = 0; t < s.mesh.num_triangles(); ++t) {
    int pos = 0, neg = 0;
    for (int v : s.mesh.triangles()[t]) {
      pos += s.values[static_cast<std::size_t>(v)] > 1e-12;
      neg += s.values[static_cast<std::size_t>(v)] < -1e-12;
    }
    CHECK((pos == 0 || neg == 0));
  }
}
