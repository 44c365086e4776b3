#include <doctest.h>

#include <algorithm>
#include <limits>
#include <random>

#include "altrec/core.hpp"
#include "support.hpp"

using namespace altrec;
using altrec::testing::icosphere;

namespace {

// Closest point as the best of the interior projection and the three edge
// projections.
Point3 closest_oracle(const Point3& p, const Point3& a, const Point3& b, const Point3& c) {
  const Vec3 n = (b - a).cross(c - a);
  Point3 best = a;
  double best_d = std::numeric_limits<double>::infinity();
  const Point3 proj = p - n * (n.dot(p - a) / n.squaredNorm());
  const double s0 = (b - a).cross(proj - a).dot(n);
  const double s1 = (c - b).cross(proj - b).dot(n);
  const double s2 = (a - c).cross(proj - c).dot(n);
  if (s0 >= 0 && s1 >= 0 && s2 >= 0) {
    best = proj;
    best_d = (p - proj).norm();
  }
  const Point3 ends[3][2] = {{a, b}, {b, c}, {c, a}};
  for (const auto& e : ends) {
    const Vec3 d = e[1] - e[0];
    const double t = std::clamp(d.dot(p - e[0]) / d.squaredNorm(), 0.0, 1.0);
    const Point3 q = e[0] + t * d;
    if ((p - q).norm() < best_d) {
      best_d = (p - q).norm();
      best = q;
    }
  }
  return best;
}

TriangleMesh random_soup(std::size_t faces, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  TriangleMesh m;
  for (std::size_t f = 0; f < faces; ++f) {
    const Point3 base(u(rng), u(rng), u(rng));
    for (int k = 0; k < 3; ++k)
      m.vertices.push_back(base + 0.2 * Vec3(u(rng), u(rng), u(rng)));
    const auto i = static_cast<std::int32_t>(3 * f);
    m.faces.push_back({i, i + 1, i + 2});
  }
  return m;
}

} // namespace

TEST_CASE("unit vector normalizes and rejects zero") {
  const UnitVector3 u(3.0, 0.0, 4.0);
  CHECK(u.vec().norm() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(u.x() == doctest::Approx(0.6));
  CHECK_FALSE(UnitVector3::try_from(Vec3::Zero()).has_value());
}

TEST_CASE("normalize_to_unit scales by the largest extent") {
  PointCloud c;
  c.points = {{0, 0, 0}, {2, 1, 0}};
  const auto r = normalize_to_unit(c);
  CHECK(r.transform.scale == doctest::Approx(0.5));
  CHECK((r.cloud.points[1] - Point3(1, 0.5, 0)).norm() < 1e-15);
  CHECK(r.cloud.points[0].norm() == 0.0);
}

TEST_CASE("normalize_to_unit keeps a unit cloud") {
  PointCloud c;
  c.points = {{0.2, 0.1, 0}, {1.2, 0.5, 0.3}};
  const auto r = normalize_to_unit(c);
  CHECK(r.transform.scale == 1.0);
  for (std::size_t i = 0; i < c.size(); ++i)
    CHECK((r.cloud.points[i] - c.points[i]).norm() == 0.0);
}

TEST_CASE("normalize_to_unit on a random cloud") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  PointCloud c;
  for (int i = 0; i < 10000; ++i)
    c.points.emplace_back(u(rng), u(rng), u(rng));
  const auto r = normalize_to_unit(c);
  Point3 lo = r.cloud.points[0], hi = lo;
  for (const auto& p : r.cloud.points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Vec3 ext = hi - lo;
  CHECK(ext.maxCoeff() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((ext.array() <= 1.0 + 1e-12).all());
}

TEST_CASE("normalize_to_unit rejects degenerate input") {
  PointCloud c;
  c.points = {{1, 1, 1}, {1, 1, 1}};
  CHECK_THROWS_AS(normalize_to_unit(c), Error);
  CHECK_THROWS_AS(normalize_to_unit(PointCloud{}), Error);
}

TEST_CASE("bounding_cube side and containment") {
  PointCloud c;
  c.points = {{0, 0, 0}, {1, 0.5, 0.25}};
  const Aabb cube = bounding_cube(c, 0.2);
  CHECK(cube.extent().x() == doctest::Approx(1.2));
  CHECK(cube.extent().y() == doctest::Approx(1.2));
  CHECK(cube.extent().z() == doctest::Approx(1.2));

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2.0, 5.0);
  PointCloud r;
  for (int i = 0; i < 2000; ++i)
    r.points.emplace_back(u(rng), 0.3 * u(rng), u(rng));
  for (double pad : {0.0, 0.1}) {
    const Aabb b = bounding_cube(r, pad);
    for (const auto& p : r.points)
      CHECK(b.contains(p));
  }
}

TEST_CASE("sample_mesh_uniform follows face areas") {
  TriangleMesh m;
  m.vertices = {{0, 0, 0}, {2, 0, 0}, {0, 1, 0}, {0, 0, 1}, {3, 0, 1}, {0, 2, 1}};
  m.faces = {{0, 1, 2}, {3, 4, 5}};
  REQUIRE(m.face_area(0) == doctest::Approx(1.0));
  REQUIRE(m.face_area(1) == doctest::Approx(3.0));
  std::vector<std::int32_t> src;
  const PointCloud s = sample_mesh_uniform(m, 4000, 11, src);
  const auto n0 = std::count(src.begin(), src.end(), 0);
  const double sd = std::sqrt(4000 * 0.25 * 0.75);
  CHECK(std::abs(static_cast<double>(n0) - 1000.0) < 3 * sd);

  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto& f = m.faces[static_cast<std::size_t>(src[i])];
    const Point3 &a = m.vertices[f[0]], &b = m.vertices[f[1]], &c = m.vertices[f[2]];
    const Vec3 n = (b - a).cross(c - a);
    CHECK(std::abs(n.normalized().dot(s.points[i] - a)) < 1e-9);
    const double area = n.norm();
    const double l0 = (c - b).cross(s.points[i] - b).dot(n) / (area * area);
    const double l1 = (a - c).cross(s.points[i] - c).dot(n) / (area * area);
    CHECK(l0 >= -1e-12);
    CHECK(l1 >= -1e-12);
    CHECK(l0 + l1 <= 1.0 + 1e-12);
    CHECK(s.normals[i].dot(n.normalized()) == doctest::Approx(1.0));
  }

  const PointCloud again = sample_mesh_uniform(m, 4000, 11);
  CHECK(again.points == s.points);
}

TEST_CASE("sample_mesh_uniform skips zero-area faces") {
  TriangleMesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {2, 0, 0}};
  m.faces = {{0, 1, 3}, {0, 1, 2}};
  std::vector<std::int32_t> src;
  sample_mesh_uniform(m, 500, 1, src);
  CHECK(std::all_of(src.begin(), src.end(), [](std::int32_t f) { return f == 1; }));
}

TEST_CASE("closest point above a triangle") {
  TriangleMesh m;
  m.vertices = {{-1, -1, 0}, {1, -1, 0}, {0, 1, 0}};
  m.faces = {{0, 1, 2}};
  const MeshIndex index = MeshIndex::build(m);
  const ClosestPoint cp = index.closest(Point3(0, 0, 1));
  CHECK(cp.point.norm() < 1e-15);
  CHECK(cp.dist == doctest::Approx(1.0));
  CHECK(cp.face == 0);
  CHECK(cp.normal.z() == doctest::Approx(1.0));

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 200; ++i) {
    const Point3 p(u(rng), u(rng), u(rng));
    const Point3 q = index.closest(p).point;
    CHECK((q - closest_oracle(p, m.vertices[0], m.vertices[1], m.vertices[2])).norm() < 1e-12);
  }
}

TEST_CASE("closest point of a vertex is itself") {
  const TriangleMesh m = icosphere(2);
  const MeshIndex index = MeshIndex::build(m);
  for (const auto& v : m.vertices) {
    const ClosestPoint cp = index.closest(v);
    CHECK(cp.dist < 1e-12);
    CHECK((cp.point - v).norm() < 1e-12);
  }
}

TEST_CASE("mesh index agrees with brute force") {
  const TriangleMesh m = random_soup(300, 9);
  const MeshIndex index = MeshIndex::build(m);
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(-0.3, 1.5);
  for (int i = 0; i < 500; ++i) {
    const Point3 p(u(rng), u(rng), u(rng));
    double best = std::numeric_limits<double>::infinity();
    Point3 best_q;
    for (const auto& f : m.faces) {
      const Point3 q = closest_oracle(p, m.vertices[f[0]], m.vertices[f[1]], m.vertices[f[2]]);
      if ((p - q).norm() < best) {
        best = (p - q).norm();
        best_q = q;
      }
    }
    const ClosestPoint cp = index.closest(p);
    CHECK(cp.dist == doctest::Approx(best).epsilon(1e-10));
    CHECK((cp.point - best_q).norm() < 1e-10);
  }
}

TEST_CASE("mesh index rejects meshes without area") {
  TriangleMesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
  m.faces = {{0, 1, 2}};
  CHECK_THROWS_AS(MeshIndex::build(m), Error);
  CHECK_THROWS_AS(MeshIndex::build(TriangleMesh{}), Error);
}

TEST_CASE("kd tree queries match brute force") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Point3> pts;
  for (int i = 0; i < 3000; ++i)
    pts.emplace_back(u(rng), u(rng), u(rng));
  // Exact duplicates exercise the index tie-break.
  pts.push_back(pts[17]);
  pts.push_back(pts[17]);
  const KdTree tree(pts);

  std::vector<Point3> queries = {pts[17]};
  for (int i = 0; i < 200; ++i)
    queries.emplace_back(u(rng) * 1.2 - 0.1, u(rng), u(rng));
  for (const auto& q : queries) {
    std::vector<std::pair<double, std::uint32_t>> all;
    for (std::uint32_t i = 0; i < pts.size(); ++i)
      all.emplace_back((pts[i] - q).squaredNorm(), i);
    std::sort(all.begin(), all.end());

    const auto nn = tree.nearest(q);
    CHECK(nn.index == all[0].second);
    CHECK(nn.dist2 == all[0].first);

    const auto knn = tree.knn(q, 12);
    REQUIRE(knn.size() == 12);
    for (std::size_t j = 0; j < 12; ++j) {
      CHECK(knn[j].index == all[j].second);
      CHECK(knn[j].dist2 == all[j].first);
    }

    const double r = 0.08;
    std::vector<std::uint32_t> inside;
    for (const auto& [d2, i] : all)
      if (d2 <= r * r)
        inside.push_back(i);
    std::sort(inside.begin(), inside.end());
    CHECK(tree.radius(q, r) == inside);

    CHECK(tree.any_within(q, all[0].first) == false);
    CHECK(tree.any_within(q, std::nextafter(all[0].first, 1.0)));
    const auto within = tree.nearest_within(q, all[0].first);
    CHECK_FALSE(within.has_value());
  }
  CHECK(tree.nearest(pts[17]).index == 17);
}

TEST_CASE("kd tree knn larger than the set returns everything") {
  std::vector<Point3> pts = {{0, 0, 0}, {1, 0, 0}, {0, 2, 0}};
  const KdTree tree(pts);
  const auto k = tree.knn(Point3(0.1, 0, 0), 10);
  REQUIRE(k.size() == 3);
  CHECK(k[0].index == 0);
  CHECK(k[1].index == 1);
  CHECK(k[2].index == 2);
}

TEST_CASE("normalize_to_unit is idempotent") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-5.0, 2.0);
  PointCloud c;
  for (int i = 0; i < 500; ++i)
    c.points.emplace_back(u(rng), 0.5 * u(rng), u(rng));
  const auto once = normalize_to_unit(c);
  const auto twice = normalize_to_unit(once.cloud);
  for (std::size_t i = 0; i < c.size(); ++i)
    CHECK((once.cloud.points[i] - twice.cloud.points[i]).norm() < 1e-9);
}

TEST_CASE("closest distance never exceeds the distance to any vertex") {
  const TriangleMesh m = random_soup(80, 12);
  const MeshIndex index = MeshIndex::build(m);
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-1.0, 2.0);
  for (int i = 0; i < 200; ++i) {
    const Point3 p(u(rng), u(rng), u(rng));
    const double d = index.closest(p).dist;
    for (const auto& v : m.vertices)
      CHECK(d <= (p - v).norm() + 1e-12);
  }
}
