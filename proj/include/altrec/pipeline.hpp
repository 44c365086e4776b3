#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <variant>
#include <vector>

#include "altrec/core.hpp"
#include "altrec/features.hpp"
#include "altrec/ipsr.hpp"

namespace altrec::pipeline {

/// c is the given percentile of the current sharpness ratios, sigma = c / 2.
struct PercentileLambda {
  double percentile = 0.9;
};

struct FixedLambda {
  double c = 0.11;
  double sigma = 0.05;
};

/// Same coefficient everywhere at sharp depths (ablation).
struct UniformLambda {
  double value = 1.0;
};

using LambdaMode = std::variant<PercentileLambda, FixedLambda, UniformLambda>;

struct PipelineConfig {
  int d_min = 6;
  int d_max = 8;
  int outer_iters = 5;
  /// Projections onto surfaces of at least this depth use sharpness-aware
  /// coefficients; shallower ones use early_lambda everywhere.
  int d_sharp = 8;
  double point_weight = 1.0;
  double early_lambda = 0.5;
  LambdaMode lambda_mode = PercentileLambda{};
  /// Mean variation of the last five iPSR iterations under which a depth
  /// still counts as converging well.
  double last_five_threshold = 0.7;
  /// Iteration limits, threshold and neighbourhood of every iPSR run. Its
  /// depth, point weight and seed are set by the pipeline.
  ipsr::IpsrConfig ipsr;
  features::VcmParams vcm;
  std::uint64_t seed = 0;
  /// Ground-truth samples drawn when a ground-truth mesh is supplied.
  std::size_t gt_samples = 100000;

  void validate() const;
};

struct DepthTrial {
  int depth = 0;
  int iterations = 0;
  double last_five_mean = 0.0;
  bool converged_well = false;
};

struct InitialDepth {
  int d0 = 0;
  /// iPSR result at d0; it is the first surface of the pipeline.
  ipsr::IpsrResult warm;
  std::vector<DepthTrial> trials;
};

/// A depth converges well when its run stopped before max_iters or the mean
/// of its last five variations is below the threshold.
DepthTrial assess_depth(int depth, int iterations, std::span<const double> history,
                        int max_iters, double last_five_threshold);

/// Runs iPSR from d_max down to d_min and keeps the first depth that
/// converges well: it stopped before max_iters, or the mean of its last five
/// variations is below last_five_threshold. Falls back to d_min.
InitialDepth select_initial_depth(const PointCloud& points, const PipelineConfig& config);

/// Reconstruction depths after the first surface: d0 twice, then one level
/// deeper every two steps, capped at d_max, `count` entries. Throws OutOfRange
/// unless 1 <= d0 <= d_max.
std::vector<int> depth_schedule(int d0, int d_max = 8, int count = 5);

/// One outer iteration k: project P(k) onto S(k), then reconstruct S(k+1).
struct IterationRecord {
  int iter = 0;
  /// Depth of S(k+1): the next scheduled depth, or the last one for the
  /// final surface.
  int depth = 0;
  /// Depth of S(k), the k-th scheduled depth, which decides the coefficient
  /// rule.
  int projection_depth = 0;
  int ipsr_iterations = 0;
  double final_v = 0.0;
  bool ipsr_converged = false;
  double mean_displacement = 0.0;
  double min_lambda = 0.0;
  double max_lambda = 0.0;
  /// Threshold pair used at sharp depths.
  std::optional<features::Threshold> threshold;
  /// RMSD of P(k+1) against the ground truth, when supplied.
  std::optional<double> rmsd;
  double max_residual = 0.0;
  double time_ms = 0.0;
};

struct PipelineReport {
  int d0 = 0;
  std::vector<int> schedule;
  std::vector<DepthTrial> trials;
  std::optional<double> initial_rmsd;
  std::vector<IterationRecord> records;
  double initial_time_ms = 0.0;
  /// Largest relative residual of any Poisson solve in the run.
  double max_residual = 0.0;
};

struct PipelineResult {
  PointCloud denoised;
  /// S(K), reconstructed from the final cloud.
  TriangleMesh mesh;
  /// S(K-1), the surface the final cloud was projected onto.
  TriangleMesh projection_mesh;
  PipelineReport report;
};

/// Raised when a stage fails; carries the records completed so far.
class PipelineFailure : public Error {
public:
  PipelineFailure(const Error& cause, PipelineReport partial)
      : Error(cause), partial_(std::move(partial)) {}
  const PipelineReport& partial_report() const noexcept { return partial_; }

private:
  PipelineReport partial_;
};

/// Alternates iPSR and coefficient-weighted projection. When `gt_dense` is
/// given, the report carries metrics::rmsd of every intermediate cloud
/// against it. `initial` reuses a previous select_initial_depth result for
/// the same points and configuration.
PipelineResult run_pipeline(const PointCloud& points, const PipelineConfig& config,
                            const PointCloud* gt_dense = nullptr,
                            const InitialDepth* initial = nullptr);

/// Same, sampling config.gt_samples points from a ground-truth mesh.
PipelineResult run_pipeline(const PointCloud& points, const PipelineConfig& config,
                            const TriangleMesh& ground_truth);

/// iter,depth,ipsr_iters,final_v,mean_disp,rmsd,time_ms; rmsd is empty when
/// no ground truth was given.
void write_report_csv(std::ostream& out, const PipelineReport& report);
void write_report_csv(const std::filesystem::path& path, const PipelineReport& report);

} // namespace altrec::pipeline
