#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "altrec/core.hpp"
#include "altrec/metrics.hpp"
#include "altrec/pipeline.hpp"

namespace altrec::bench {

/// Per-coordinate Gaussian perturbation. Normals are dropped: noisy clouds
/// are unoriented inputs.
PointCloud add_gaussian_noise(const PointCloud& cloud, double stddev, std::uint64_t seed);

/// Appends `count` points uniform in `box`. When the cloud carries normals
/// the new points get random directions.
PointCloud add_outliers(const PointCloud& cloud, std::size_t count, const Aabb& box,
                        std::uint64_t seed);

/// Keeps each point strictly above the median coordinate along `axis` with
/// probability `ratio`; the other half is untouched. Order is preserved.
PointCloud vary_density(const PointCloud& cloud, double ratio, int axis, std::uint64_t seed);

/// Experimental structured noise: odd-indexed points are translated by
/// `offset` along a random direction, as if from a second misaligned scan.
PointCloud add_misalignment(const PointCloud& cloud, double offset, std::uint64_t seed);

struct CorruptionSpec {
  double gaussian_std = 0.0;
  std::size_t outlier_count = 0;
  /// Outliers are drawn in this box; the unit cube when absent.
  std::optional<Aabb> outlier_box;
  double density_ratio = 1.0;
  int split_axis = 0;
  double misalignment = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Density change, misalignment, noise, then outliers.
PointCloud corrupt(const PointCloud& clean, const CorruptionSpec& spec);

struct BenchmarkOptions {
  std::size_t samples = 50000;
  std::size_t gt_samples = 100000;
  double tau = 5e-3;
  std::uint64_t seed = 0;
  /// Adds a wall-time column; rows are then no longer reproducible.
  bool include_timing = false;
};

struct BenchmarkRow {
  std::string shape;
  bool ok = false;
  std::string error;
  std::size_t n_points = 0;
  int d0 = 0;
  metrics::MetricReport before;
  metrics::MetricReport after;
  double time_ms = 0.0;
};

/// For every mesh: normalize to unit max extent, sample, corrupt, denoise and
/// evaluate input and output against a dense ground-truth sample. A failing
/// shape yields a row with ok = false and the run continues.
std::vector<BenchmarkRow> run_benchmark(const std::vector<std::filesystem::path>& shapes,
                                        const CorruptionSpec& corruption,
                                        const pipeline::PipelineConfig& config,
                                        const BenchmarkOptions& options = {});

inline constexpr int kBenchCsvVersion = 1;

/// Leading "# altrec-bench-csv v1" line, then a fixed header.
void write_benchmark_csv(std::ostream& out, const std::vector<BenchmarkRow>& rows,
                         bool include_timing = false);
void write_benchmark_csv(const std::filesystem::path& path, const std::vector<BenchmarkRow>& rows,
                         bool include_timing = false);

} // namespace altrec::bench
