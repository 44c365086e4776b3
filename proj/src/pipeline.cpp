#include "altrec/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <numeric>
#include <string>

#include "altrec/metrics.hpp"
#include "altrec/projection.hpp"

namespace altrec::pipeline {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

ipsr::IpsrConfig ipsr_at(const PipelineConfig& config, int depth) {
  ipsr::IpsrConfig c = config.ipsr;
  c.depth = depth;
  c.point_weight = config.point_weight;
  c.seed = config.seed;
  return c;
}

struct Coefficients {
  features::LambdaField field;
  std::optional<features::Threshold> threshold;
};

Coefficients coefficients_for(const PointCloud& cloud, int depth, int outer_iter,
                              const PipelineConfig& config) {
  if (depth < config.d_sharp)
    return {projection::uniform_lambda(cloud.size(), config.early_lambda), std::nullopt};
  if (const auto* u = std::get_if<UniformLambda>(&config.lambda_mode))
    return {projection::uniform_lambda(cloud.size(), u->value), std::nullopt};
  features::VcmParams vcm = config.vcm;
  vcm.seed = config.vcm.seed + static_cast<std::uint64_t>(outer_iter);
  features::SharpnessField sharp;
  sharp.ratios = features::sharpness_ratios(cloud.points, vcm);
  features::Threshold t;
  if (const auto* p = std::get_if<PercentileLambda>(&config.lambda_mode)) {
    t = features::select_threshold_percentile(sharp.ratios, p->percentile);
  } else {
    const auto& f = std::get<FixedLambda>(config.lambda_mode);
    t = features::Threshold{f.c, f.sigma};
  }
  sharp.c = t.c;
  sharp.sigma = t.sigma;
  return {features::lambda_field(sharp), t};
}

} // namespace

DepthTrial assess_depth(int depth, int iterations, std::span<const double> history,
                        int max_iters, double last_five_threshold) {
  DepthTrial trial{depth, iterations, 0.0, false};
  const std::size_t n = std::min<std::size_t>(5, history.size());
  if (n > 0)
    trial.last_five_mean =
        std::accumulate(history.end() - static_cast<std::ptrdiff_t>(n), history.end(), 0.0) /
        static_cast<double>(n);
  trial.converged_well = iterations < max_iters || trial.last_five_mean < last_five_threshold;
  return trial;
}

void PipelineConfig::validate() const {
  if (d_min < 1 || d_max > 10 || d_min > d_max)
    throw Error(ErrorKind::PreconditionViolation,
                "depth range [" + std::to_string(d_min) + ", " + std::to_string(d_max) +
                    "] is invalid");
  if (outer_iters < 1)
    throw Error(ErrorKind::PreconditionViolation, "outer_iters must be at least 1");
  if (!(early_lambda > 0.1 && early_lambda <= 1.0))
    throw Error(ErrorKind::OutOfRange, "early_lambda must lie in (0.1, 1]");
  if (!(point_weight >= 0.0))
    throw Error(ErrorKind::PreconditionViolation, "point_weight must be non-negative");
  if (const auto* p = std::get_if<PercentileLambda>(&lambda_mode);
      p && !(p->percentile > 0.0 && p->percentile < 1.0))
    throw Error(ErrorKind::OutOfRange, "percentile must lie in (0, 1)");
  if (const auto* f = std::get_if<FixedLambda>(&lambda_mode); f && !(f->sigma > 0.0))
    throw Error(ErrorKind::PreconditionViolation, "sigma must be positive");
  if (const auto* u = std::get_if<UniformLambda>(&lambda_mode);
      u && !(u->value > 0.1 && u->value <= 1.0))
    throw Error(ErrorKind::OutOfRange, "uniform coefficient must lie in (0.1, 1]");
  ipsr_at(*this, d_min).validate();
}

InitialDepth select_initial_depth(const PointCloud& points, const PipelineConfig& config) {
  config.validate();
  if (points.size() < 4)
    throw Error(ErrorKind::PreconditionViolation, "the pipeline needs at least four points");
  InitialDepth out;
  for (int d = config.d_max; d >= config.d_min; --d) {
    const ipsr::IpsrConfig ic = ipsr_at(config, d);
    ipsr::IpsrResult r = ipsr::run_ipsr(points, ic);
    const DepthTrial trial = assess_depth(d, r.iterations, r.variation_history, ic.max_iters,
                                          config.last_five_threshold);
    out.trials.push_back(trial);
    if (trial.converged_well || d == config.d_min) {
      out.d0 = d;
      out.warm = std::move(r);
      break;
    }
  }
  return out;
}

std::vector<int> depth_schedule(int d0, int d_max, int count) {
  if (d0 < 1 || d0 > d_max)
    throw Error(ErrorKind::OutOfRange,
                "initial depth " + std::to_string(d0) + " outside [1, " + std::to_string(d_max) + "]");
  std::vector<int> out(static_cast<std::size_t>(std::max(count, 0)));
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = std::min(d_max, d0 + static_cast<int>(i / 2));
  return out;
}

PipelineResult run_pipeline(const PointCloud& points, const PipelineConfig& config,
                            const PointCloud* gt_dense, const InitialDepth* initial) {
  config.validate();
  if (points.size() < 4)
    throw Error(ErrorKind::PreconditionViolation, "the pipeline needs at least four points");
  PipelineResult result;
  PipelineReport& report = result.report;
  const auto rmsd_of = [&](const PointCloud& c) -> std::optional<double> {
    if (!gt_dense)
      return std::nullopt;
    return metrics::rmsd(c.points, gt_dense->points);
  };

  PointCloud current{points.points, {}};
  ipsr::IpsrResult surface;
  try {
    const auto start = Clock::now();
    InitialDepth selected = initial ? *initial : select_initial_depth(current, config);
    report.initial_time_ms = initial ? 0.0 : elapsed_ms(start);
    report.d0 = selected.d0;
    report.trials = selected.trials;
    report.schedule = depth_schedule(selected.d0, config.d_max, config.outer_iters);
    report.initial_rmsd = rmsd_of(current);
    surface = std::move(selected.warm);
    report.max_residual = surface.max_residual;
  } catch (const Error& e) {
    throw PipelineFailure(e, report);
  }

  int surface_depth = report.d0;
  for (int k = 0; k < config.outer_iters; ++k) {
    try {
      const auto start = Clock::now();
      IterationRecord rec;
      rec.iter = k + 1;
      rec.projection_depth = surface_depth;
      rec.depth = report.schedule[static_cast<std::size_t>(std::min(k + 1, config.outer_iters - 1))];

      const Coefficients coeff = coefficients_for(current, surface_depth, k, config);
      const auto [lo, hi] = std::minmax_element(coeff.field.lambdas.begin(), coeff.field.lambdas.end());
      rec.min_lambda = *lo;
      rec.max_lambda = *hi;
      rec.threshold = coeff.threshold;
      projection::ProjectionResult projected =
          projection::lambda_project(current, surface.mesh, coeff.field);
      rec.mean_displacement =
          std::accumulate(projected.displacements.begin(), projected.displacements.end(), 0.0) /
          static_cast<double>(projected.displacements.size());
      rec.rmsd = rmsd_of(projected.points);

      current = std::move(projected.points);
      ipsr::IpsrResult next = ipsr::run_ipsr(PointCloud{current.points, {}},
                                             ipsr_at(config, rec.depth),
                                             std::span<const UnitVector3>(current.normals));
      rec.ipsr_iterations = next.iterations;
      rec.final_v = next.variation_history.back();
      rec.ipsr_converged = next.converged;
      rec.max_residual = next.max_residual;
      report.max_residual = std::max(report.max_residual, next.max_residual);
      result.projection_mesh = std::move(surface.mesh);
      surface = std::move(next);
      surface_depth = rec.depth;
      rec.time_ms = elapsed_ms(start);
      report.records.push_back(rec);
    } catch (const Error& e) {
      throw PipelineFailure(e, report);
    }
  }
  result.denoised = PointCloud{std::move(current.points), std::move(surface.normals)};
  result.mesh = std::move(surface.mesh);
  return result;
}

PipelineResult run_pipeline(const PointCloud& points, const PipelineConfig& config,
                            const TriangleMesh& ground_truth) {
  const PointCloud gt = sample_mesh_uniform(ground_truth, config.gt_samples, config.seed);
  return run_pipeline(points, config, &gt);
}

void write_report_csv(std::ostream& out, const PipelineReport& report) {
  out << "iter,depth,ipsr_iters,final_v,mean_disp,rmsd,time_ms\n";
  out.precision(17);
  for (const auto& r : report.records) {
    out << r.iter << ',' << r.depth << ',' << r.ipsr_iterations << ',' << r.final_v << ','
        << r.mean_displacement << ',';
    if (r.rmsd)
      out << *r.rmsd;
    out << ',' << r.time_ms << '\n';
  }
}

void write_report_csv(const std::filesystem::path& path, const PipelineReport& report) {
  std::ofstream f(path);
  if (!f)
    throw Error(ErrorKind::IoError, "cannot write " + path.string());
  write_report_csv(f, report);
  if (!f)
    throw Error(ErrorKind::IoError, "failed writing " + path.string());
}

} // namespace altrec::pipeline
