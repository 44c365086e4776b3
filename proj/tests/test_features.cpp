#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>

#include "altrec/features.hpp"
#include "altrec/projection.hpp"
#include "support.hpp"

using namespace altrec;
using namespace altrec::features;

TEST_CASE("sharpness ratio of diagonal covariances") {
  CHECK(sharpness_ratio(Vec3(1, 0, 0).asDiagonal()) == 0.0);
  CHECK(sharpness_ratio(Vec3(1, 1, 0).asDiagonal()) == doctest::Approx(0.5));
  CHECK(sharpness_ratio(Vec3(3, 1, 1).asDiagonal()) == doctest::Approx(0.2));
  CHECK(sharpness_ratio(Mat3::Zero()) == 0.0);
  Mat3 skew = Mat3::Identity();
  skew(0, 1) = 0.5;
  CHECK_THROWS_AS(sharpness_ratio(skew), Error);
}

TEST_CASE("sharpness ratio is rotation invariant") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (int t = 0; t < 100; ++t) {
    const Vec3 ev(u(rng), u(rng), u(rng));
    const Eigen::Quaterniond q = Eigen::Quaterniond::UnitRandom();
    const Mat3 R = q.toRotationMatrix();
    Mat3 cov = R * ev.asDiagonal() * R.transpose();
    cov = 0.5 * (cov + cov.transpose()).eval();
    Vec3 sorted = ev;
    std::sort(sorted.data(), sorted.data() + 3);
    CHECK(sharpness_ratio(cov) == doctest::Approx(sorted[1] / ev.sum()).epsilon(1e-9));
  }
}

TEST_CASE("percentile threshold") {
  std::vector<double> r;
  for (int i = 0; i <= 10; ++i)
    r.push_back(0.1 * i);
  std::shuffle(r.begin(), r.end(), std::mt19937_64(2));
  const Threshold t = select_threshold_percentile(r, 0.9);
  CHECK(t.c == doctest::Approx(0.9));
  CHECK(t.sigma == doctest::Approx(0.45));

  const std::vector<double> same(50, 0.3);
  const Threshold s = select_threshold_percentile(same);
  CHECK(s.c == 0.3);
  CHECK(s.sigma == 0.15);

  CHECK_THROWS_AS(select_threshold_percentile({}), Error);
  CHECK_THROWS_AS(select_threshold_percentile(same, 1.5), Error);
}

TEST_CASE("percentile threshold against a full sort") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 0.5);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> r(1 + rng() % 500);
    for (double& x : r)
      x = u(rng);
    const double p = std::uniform_real_distribution<double>(0.01, 0.99)(rng);
    std::vector<double> sorted = r;
    std::sort(sorted.begin(), sorted.end());
    const auto idx = static_cast<std::size_t>(std::floor(p * static_cast<double>(r.size() - 1)));
    CHECK(select_threshold_percentile(r, p).c == std::max(sorted[idx], 1e-9));
  }
}

TEST_CASE("lambda coefficient values") {
  CHECK(lambda_coefficient(0.05, 0.11, 0.05) == 1.0);
  CHECK(lambda_coefficient(0.16, 0.11, 0.05) ==
        doctest::Approx(0.1 + 0.9 / std::numbers::e).epsilon(1e-12));
  CHECK(lambda_coefficient(0.16, 0.11, 0.05) == doctest::Approx(0.43109).epsilon(1e-5));
  CHECK(lambda_coefficient(0.21, 0.11, 0.05) == doctest::Approx(0.11648).epsilon(1e-4));
  CHECK_THROWS_AS(lambda_coefficient(0.2, 0.1, 0.0), Error);
}

TEST_CASE("lambda coefficient stays in range") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double prev = 1.0;
  for (int i = 0; i < 1000; ++i) {
    const double l = lambda_coefficient(u(rng), 0.5 * u(rng), 0.01 + u(rng));
    CHECK(l > 0.1);
    CHECK(l <= 1.0);
  }
  // Non-increasing in r.
  for (int i = 0; i <= 100; ++i) {
    const double l = lambda_coefficient(0.01 * i, 0.2, 0.1);
    CHECK(l <= prev);
    prev = l;
  }
}

TEST_CASE("lambda field") {
  SharpnessField f{{0.0, 0.11, 0.16}, 0.11, 0.05};
  const LambdaField l = lambda_field(f);
  REQUIRE(l.size() == 3);
  CHECK(l.lambdas[0] == 1.0);
  CHECK(l.lambdas[1] == 1.0);
  CHECK(l.lambdas[2] == doctest::Approx(0.1 + 0.9 / std::numbers::e));
}

TEST_CASE("vcm of a plane points along its normal") {
  std::vector<Point3> grid;
  for (int i = 0; i < 50; ++i)
    for (int j = 0; j < 50; ++j)
      grid.emplace_back(i / 49.0, j / 49.0, 0.0);
  VcmParams p;
  p.offset_radius = 0.1;
  p.convolution_radius = 0.05;
  p.integration_samples = 200;
  p.seed = 7;
  const auto cov = compute_vcm(grid, p);
  REQUIRE(cov.size() == grid.size());
  for (int i = 10; i < 40; i += 3)
    for (int j = 10; j < 40; j += 3) {
      const Eigen::SelfAdjointEigenSolver<Mat3> es(cov[static_cast<std::size_t>(i * 50 + j)]);
      const Vec3 major = es.eigenvectors().col(2);
      CHECK(std::abs(major.z()) > std::cos(10.0 * std::numbers::pi / 180.0));
    }
}

TEST_CASE("vcm is higher on cube edges than on faces") {
  const TriangleMesh cube = altrec::testing::unit_cube_mesh();
  const PointCloud c = sample_mesh_uniform(cube, 6000, 3);
  VcmParams p;
  p.integration_samples = 150;
  const auto ratios = sharpness_ratios(c.points, p);
  double edge = 0.0, face = 0.0;
  int ne = 0, nf = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const Point3& q = c.points[i];
    int near = 0;
    double inner = 1.0;
    for (int a = 0; a < 3; ++a) {
      const double d = std::min(q[a], 1.0 - q[a]);
      near += d < 0.01;
      inner = std::min(inner, d < 0.01 ? 1.0 : d);
    }
    if (near >= 2) {
      edge += ratios[i];
      ++ne;
    } else if (inner > 0.2) {
      face += ratios[i];
      ++nf;
    }
  }
  REQUIRE(ne > 0);
  REQUIRE(nf > 0);
  CHECK(edge / ne > 3 * (face / nf));
}

TEST_CASE("nearby parallel planes truncate the integration region") {
  std::vector<Point3> pts;
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j < 20; ++j) {
      pts.emplace_back(i / 19.0, j / 19.0, 0.0);
      pts.emplace_back(i / 19.0, j / 19.0, 0.05);
    }
  VcmParams p;
  p.offset_radius = 0.1;
  p.convolution_radius = 0.05;
  p.integration_samples = 400;
  const RawVcm raw = compute_raw_vcm(pts, p);
  // A lone plane's cell keeps about half of the ball; the second plane at
  // distance R / 2 cuts that further.
  const std::size_t mid = 2 * (10 * 20 + 10);
  CHECK(raw.accepted[mid] < p.integration_samples / 2);
  CHECK(raw.accepted[mid] > 0);
  CHECK(raw.offset_radius == 0.1);
}

TEST_CASE("vcm is deterministic and validates input") {
  const PointCloud c = altrec::testing::sphere_cloud(500, 1);
  VcmParams p;
  p.integration_samples = 50;
  CHECK(compute_vcm(c.points, p) == compute_vcm(c.points, p));
  std::vector<Point3> three(c.points.begin(), c.points.begin() + 3);
  CHECK_THROWS_AS(compute_vcm(three, p), Error);
}

TEST_CASE("projection examples") {
  using projection::lambda_project;
  using projection::uniform_lambda;
  TriangleMesh plane;
  plane.vertices = {{-1, -1, 0}, {3, -1, 0}, {-1, 3, 0}};
  plane.faces = {{0, 1, 2}};

  SUBCASE("midpoint") {
    TriangleMesh wall;
    wall.vertices = {{1, -1, -1}, {1, 1, -1}, {1, 0, 2}};
    wall.faces = {{0, 1, 2}};
    PointCloud c;
    c.points = {Point3(0, 0, 0)};
    const auto r = lambda_project(c, wall, uniform_lambda(1, 0.5));
    CHECK((r.points.points[0] - Point3(0.5, 0, 0)).norm() < 1e-15);
    CHECK(r.displacements[0] == doctest::Approx(0.5));
  }
  SUBCASE("full projection lands on the mesh") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-0.5, 1.0);
    PointCloud c;
    for (int i = 0; i < 200; ++i)
      c.points.emplace_back(u(rng), u(rng), u(rng));
    const auto r = lambda_project(c, plane, uniform_lambda(c.size(), 1.0));
    const MeshIndex index = MeshIndex::build(plane);
    for (const auto& p : r.points.points)
      CHECK(index.closest(p).dist < 1e-9);
    CHECK(r.points.has_normals());
  }
  SUBCASE("points on the mesh stay put") {
    PointCloud c;
    c.points = {Point3(0.2, 0.3, 0), Point3(0, 0, 0)};
    const auto r = lambda_project(c, plane, uniform_lambda(2, 0.7));
    for (std::size_t i = 0; i < 2; ++i)
      CHECK((r.points.points[i] - c.points[i]).norm() < 1e-9);
  }
  SUBCASE("contracts") {
    PointCloud c;
    c.points = {Point3(0, 0, 1)};
    CHECK_THROWS_AS(lambda_project(c, plane, uniform_lambda(2, 0.5)), Error);
    CHECK_THROWS_AS(lambda_project(c, TriangleMesh{}, uniform_lambda(1, 0.5)), Error);
  }
}

TEST_CASE("uniform lambda") {
  using projection::uniform_lambda;
  CHECK(uniform_lambda(5, 0.5).lambdas == std::vector<double>(5, 0.5));
  CHECK(uniform_lambda(3, 1.0).lambdas == std::vector<double>(3, 1.0));
  CHECK_THROWS_AS(uniform_lambda(3, 0.05), Error);
  CHECK_THROWS_AS(uniform_lambda(3, 0.1), Error);
  CHECK_THROWS_AS(uniform_lambda(3, 1.5), Error);
}
