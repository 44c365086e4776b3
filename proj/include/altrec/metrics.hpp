#pragma once

#include <cstdint>
#include <optional>
#include <span>

#include "altrec/core.hpp"

namespace altrec::metrics {

/// Distances below are Euclidean distances to the nearest point of the
/// other set. Every function throws EmptyInput on an empty argument.

/// Root mean square distance from each point of `pred` to `gt`.
double rmsd(std::span<const Point3> pred, std::span<const Point3> gt);

/// Mean distance from each point of `pred` to `gt`.
double mads(std::span<const Point3> pred, std::span<const Point3> gt);

/// Mean distance a -> b plus mean distance b -> a.
double chamfer_l1(std::span<const Point3> a, std::span<const Point3> b);

/// Mean |n_gt . n_pred| over the ground-truth samples, each matched to its
/// nearest predicted sample. Throws MissingNormals.
double normal_consistency(const PointCloud& pred, const PointCloud& gt);

/// Harmonic mean of precision (pred within tau of gt) and recall (gt within
/// tau of pred); 0 when both vanish.
double f_score(std::span<const Point3> pred, std::span<const Point3> gt, double tau = 5e-3);

struct MetricReport {
  double rmsd = 0.0;
  double mads = 0.0;
  double chamfer_l1 = 0.0;
  /// Present when both inputs carry normals.
  std::optional<double> normal_consistency;
  double f_score = 0.0;
  std::size_t n_pred = 0;
  std::size_t n_gt = 0;
  double tau = 5e-3;
};

MetricReport evaluate(const PointCloud& pred, const PointCloud& gt, double tau = 5e-3);

/// Samples both meshes area-uniformly (`samples` points each, fixed seeds)
/// and evaluates the samples.
MetricReport evaluate_meshes(const TriangleMesh& pred, const TriangleMesh& gt,
                             std::size_t samples = 100000, double tau = 5e-3,
                             std::uint64_t seed = 0);

} // namespace altrec::metrics
