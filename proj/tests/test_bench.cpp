#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "altrec/bench.hpp"
#include "altrec/io.hpp"
#include "support.hpp"

using namespace altrec;
using namespace altrec::bench;

TEST_CASE("gaussian noise") {
  const PointCloud c = altrec::testing::sphere_cloud(100000, 1);
  const PointCloud same = add_gaussian_noise(c, 0.0, 2);
  CHECK(same.points == c.points);
  CHECK_FALSE(same.has_normals());

  const PointCloud n = add_gaussian_noise(c, 1e-2, 2);
  for (int a = 0; a < 3; ++a) {
    double s = 0, s2 = 0;
    for (std::size_t i = 0; i < c.size(); ++i) {
      const double d = n.points[i][a] - c.points[i][a];
      s += d;
      s2 += d * d;
    }
    const double mean = s / c.size();
    const double sd = std::sqrt(s2 / c.size() - mean * mean);
    CHECK(std::abs(sd - 1e-2) < 0.02 * 1e-2);
  }
  CHECK(add_gaussian_noise(c, 1e-2, 2).points == n.points);
  CHECK_THROWS_AS(add_gaussian_noise(c, -1.0, 2), Error);
}

TEST_CASE("outliers") {
  const PointCloud c = altrec::testing::sphere_cloud(160000, 1);
  CHECK(add_outliers(c, 0, Aabb{Point3::Zero(), Point3::Ones()}, 1).points == c.points);
  const Aabb box{Point3(-1, -1, -1), Point3(2, 2, 2)};
  const PointCloud o = add_outliers(c, 1000, box, 5);
  REQUIRE(o.size() == 161000);
  CHECK(o.normals.size() == o.size());
  for (std::size_t i = 0; i < c.size(); ++i)
    CHECK(o.points[i] == c.points[i]);
  for (std::size_t i = c.size(); i < o.size(); ++i)
    CHECK(box.contains(o.points[i]));
  CHECK(add_outliers(c, 1000, box, 5).points == o.points);
}

TEST_CASE("density variation") {
  const PointCloud c = altrec::testing::sphere_cloud(100000, 2);
  CHECK(vary_density(c, 1.0, 0, 3).points == c.points);
  const PointCloud v = vary_density(c, 0.2, 0, 3);
  std::vector<double> xs;
  for (const auto& p : c.points)
    xs.push_back(p.x());
  std::nth_element(xs.begin(), xs.begin() + xs.size() / 2, xs.end());
  const double median = xs[xs.size() / 2];
  std::size_t upper = 0, lower = 0, upper_before = 0;
  for (const auto& p : c.points)
    upper_before += p.x() > median;
  for (const auto& p : v.points)
    (p.x() > median ? upper : lower) += 1;
  CHECK(lower == c.size() - upper_before);
  const double expect = 0.2 * static_cast<double>(upper_before);
  CHECK(std::abs(static_cast<double>(upper) - expect) <
        3 * std::sqrt(static_cast<double>(upper_before) * 0.2 * 0.8));
  CHECK(vary_density(c, 0.2, 0, 3).points == v.points);
  CHECK_THROWS_AS(vary_density(c, 0.0, 0, 3), Error);
  CHECK_THROWS_AS(vary_density(c, 0.5, 3, 3), Error);
}

TEST_CASE("misalignment moves every other point") {
  const PointCloud c = altrec::testing::sphere_cloud(1000, 4);
  const PointCloud m = add_misalignment(c, 0.01, 5);
  REQUIRE(m.size() == c.size());
  const Vec3 shift = m.points[1] - c.points[1];
  CHECK(shift.norm() == doctest::Approx(0.01));
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (i % 2 == 0)
      CHECK(m.points[i] == c.points[i]);
    else
      CHECK((m.points[i] - c.points[i] - shift).norm() < 1e-15);
  }
}

TEST_CASE("corruption spec") {
  CorruptionSpec s;
  s.gaussian_std = 0.01;
  s.outlier_count = 10;
  const PointCloud c = altrec::testing::sphere_cloud(500, 6);
  const PointCloud out = corrupt(c, s);
  CHECK(out.size() == 510);
  CHECK(corrupt(c, s).points == out.points);
  s.density_ratio = 2.0;
  CHECK_THROWS_AS(s.validate(), Error);
}

TEST_CASE("benchmark csv") {
  std::ostringstream empty;
  write_benchmark_csv(empty, {});
  CHECK(empty.str() ==
        "# altrec-bench-csv v1\n"
        "shape,status,n_points,d0,rmsd_before,mads_before,chamfer_before,nc_before,"
        "fscore_before,rmsd_after,mads_after,chamfer_after,nc_after,fscore_after,error\n");
  CHECK(run_benchmark({}, CorruptionSpec{}, pipeline::PipelineConfig{}).empty());
}

TEST_CASE("benchmark on a small sphere") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "altrec_bench_tests";
  fs::create_directories(dir);
  const fs::path sphere = dir / "sphere.obj";
  io::write_mesh(sphere, altrec::testing::icosphere(4));
  const fs::path missing = dir / "missing.obj";

  CorruptionSpec s;
  s.gaussian_std = 1e-2;
  s.seed = 2;
  pipeline::PipelineConfig cfg;
  cfg.d_min = 5;
  cfg.d_max = 5;
  cfg.d_sharp = 6;
  cfg.outer_iters = 2;
  cfg.ipsr.max_iters = 8;
  BenchmarkOptions o;
  o.samples = 4000;
  o.gt_samples = 20000;
  o.tau = 0.01;
  const auto rows = run_benchmark({sphere, missing}, s, cfg, o);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].ok);
  CHECK(rows[0].before.rmsd > rows[0].after.rmsd);
  CHECK_FALSE(rows[1].ok);
  CHECK_FALSE(rows[1].error.empty());

  std::ostringstream a, b;
  write_benchmark_csv(a, rows);
  write_benchmark_csv(b, run_benchmark({sphere, missing}, s, cfg, o));
  CHECK(a.str() == b.str());
}
