#include <doctest.h>

#include <sstream>

#include "altrec/metrics.hpp"
#include "altrec/pipeline.hpp"
#include "support.hpp"

using namespace altrec;
using namespace altrec::pipeline;

TEST_CASE("depth schedules") {
  CHECK(depth_schedule(6) == std::vector<int>{6, 6, 7, 7, 8});
  CHECK(depth_schedule(7) == std::vector<int>{7, 7, 8, 8, 8});
  CHECK(depth_schedule(8) == std::vector<int>{8, 8, 8, 8, 8});
  CHECK(depth_schedule(4, 9, 7) == std::vector<int>{4, 4, 5, 5, 6, 6, 7});
  CHECK(depth_schedule(5, 6, 2) == std::vector<int>{5, 5});
  CHECK_THROWS_AS(depth_schedule(9), Error);
  CHECK_THROWS_AS(depth_schedule(0), Error);
  for (int d_max = 1; d_max <= 10; ++d_max)
    for (int d0 = 1; d0 <= d_max; ++d0) {
      const auto s = depth_schedule(d0, d_max, 8);
      CHECK(std::is_sorted(s.begin(), s.end()));
      CHECK(s.front() == d0);
      CHECK(s.back() <= d_max);
    }
}

TEST_CASE("depth acceptance rule") {
  const std::vector<double> early(12, 0.3);
  CHECK(assess_depth(8, 12, early, 30, 0.7).converged_well);

  std::vector<double> stuck(30, 2.0);
  std::fill(stuck.end() - 5, stuck.end(), 1.2);
  const DepthTrial t = assess_depth(8, 30, stuck, 30, 0.7);
  CHECK_FALSE(t.converged_well);
  CHECK(t.last_five_mean == doctest::Approx(1.2));

  std::vector<double> settling(30, 2.0);
  std::fill(settling.end() - 5, settling.end(), 0.5);
  CHECK(assess_depth(7, 30, settling, 30, 0.7).converged_well);
}

TEST_CASE("config validation") {
  PipelineConfig c;
  c.outer_iters = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = PipelineConfig{};
  c.d_min = 9;
  CHECK_THROWS_AS(c.validate(), Error);
  c = PipelineConfig{};
  c.early_lambda = 0.1;
  CHECK_THROWS_AS(c.validate(), Error);
  c = PipelineConfig{};
  c.lambda_mode = UniformLambda{0.05};
  CHECK_THROWS_AS(c.validate(), Error);
  c = PipelineConfig{};
  c.lambda_mode = FixedLambda{0.11, 0.0};
  CHECK_THROWS_AS(c.validate(), Error);
}

namespace {

PipelineConfig small_config() {
  PipelineConfig c;
  c.d_min = 4;
  c.d_max = 5;
  c.d_sharp = 5;
  c.outer_iters = 2;
  c.ipsr.max_iters = 8;
  c.vcm.integration_samples = 40;
  c.seed = 3;
  return c;
}

} // namespace

TEST_CASE("small pipeline run") {
  const PointCloud clean = altrec::testing::sphere_cloud(4000, 5);
  const PointCloud noisy = altrec::testing::with_noise(clean, 0.01, 6);
  const PointCloud gt = altrec::testing::sphere_cloud(20000, 7);
  const PipelineConfig cfg = small_config();
  const PipelineResult r = run_pipeline(noisy, cfg, &gt);

  CHECK(r.denoised.size() == noisy.size());
  REQUIRE(r.report.records.size() == 2);
  CHECK(r.report.schedule == depth_schedule(r.report.d0, cfg.d_max, cfg.outer_iters));
  for (std::size_t k = 0; k < r.report.records.size(); ++k) {
    const auto& rec = r.report.records[k];
    CHECK(rec.iter == static_cast<int>(k) + 1);
    CHECK(rec.projection_depth == r.report.schedule[k]);
    CHECK(rec.depth == r.report.schedule[std::min(k + 1, r.report.schedule.size() - 1)]);
    CHECK(std::isfinite(rec.mean_displacement));
    if (rec.projection_depth < cfg.d_sharp) {
      CHECK(rec.min_lambda == cfg.early_lambda);
      CHECK(rec.max_lambda == cfg.early_lambda);
    } else {
      CHECK(rec.min_lambda > 0.1);
      CHECK(rec.max_lambda <= 1.0);
      CHECK(rec.threshold.has_value());
    }
    REQUIRE(rec.rmsd.has_value());
  }
  CHECK(*r.report.records.back().rmsd == metrics::rmsd(r.denoised.points, gt.points));
  CHECK(*r.report.initial_rmsd == metrics::rmsd(noisy.points, gt.points));
  CHECK(*r.report.records.back().rmsd < *r.report.initial_rmsd);
  CHECK(r.report.max_residual <= cfg.ipsr.cg_tolerance);
  CHECK_FALSE(r.mesh.faces.empty());
  CHECK_FALSE(r.projection_mesh.faces.empty());

  SUBCASE("bit-identical rerun") {
    const PipelineResult again = run_pipeline(noisy, cfg, &gt);
    CHECK(again.denoised.points == r.denoised.points);
    CHECK(again.mesh.vertices == r.mesh.vertices);
    CHECK(again.mesh.faces == r.mesh.faces);
    for (std::size_t k = 0; k < r.report.records.size(); ++k) {
      CHECK(again.report.records[k].rmsd == r.report.records[k].rmsd);
      CHECK(again.report.records[k].final_v == r.report.records[k].final_v);
    }
  }
  SUBCASE("reusing the initial depth gives the same result") {
    const InitialDepth init = select_initial_depth(noisy, cfg);
    const PipelineResult reused = run_pipeline(noisy, cfg, &gt, &init);
    CHECK(reused.denoised.points == r.denoised.points);
  }
  SUBCASE("report csv") {
    std::ostringstream out;
    write_report_csv(out, r.report);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "iter,depth,ipsr_iters,final_v,mean_disp,rmsd,time_ms");
    int rows = 0;
    while (std::getline(in, line))
      ++rows;
    CHECK(rows == 2);
  }
}

TEST_CASE("one outer iteration") {
  const PointCloud noisy =
      altrec::testing::with_noise(altrec::testing::sphere_cloud(3000, 8), 0.005, 9);
  PipelineConfig cfg = small_config();
  cfg.outer_iters = 1;
  cfg.lambda_mode = UniformLambda{1.0};
  const PipelineResult r = run_pipeline(noisy, cfg);
  REQUIRE(r.report.records.size() == 1);
  CHECK_FALSE(r.report.records[0].rmsd.has_value());
  CHECK_FALSE(r.report.initial_rmsd.has_value());
}

TEST_CASE("pipeline rejects tiny inputs") {
  PointCloud tiny;
  tiny.points = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  CHECK_THROWS_AS(run_pipeline(tiny, small_config()), Error);
}
