#include "altrec/metrics.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "altrec/parallel.hpp"

namespace altrec::metrics {

namespace {

void require_points(std::span<const Point3> pts, const char* what) {
  if (pts.empty())
    throw Error(ErrorKind::EmptyInput, std::string(what) + " is empty");
}

/// Squared distance from each query to its nearest target. Small target sets
/// are scanned directly.
std::vector<double> nearest_dist2(std::span<const Point3> queries,
                                  std::span<const Point3> targets) {
  std::vector<double> out(queries.size());
  if (targets.size() <= 32) {
    parallel_for(queries.size(), [&](std::size_t i) {
      double best = std::numeric_limits<double>::infinity();
      for (const Point3& t : targets)
        best = std::min(best, (queries[i] - t).squaredNorm());
      out[i] = best;
    });
    return out;
  }
  const KdTree tree(targets);
  parallel_for(queries.size(), [&](std::size_t i) { out[i] = tree.nearest(queries[i]).dist2; });
  return out;
}

double mean_of(const std::vector<double>& v, bool take_sqrt) {
  const double s = deterministic_sum(v.size(), [&](std::size_t i) {
    return take_sqrt ? std::sqrt(v[i]) : v[i];
  });
  return s / static_cast<double>(v.size());
}

double fraction_within(const std::vector<double>& d2, double tau) {
  const double t2 = tau * tau;
  std::size_t hits = 0;
  for (double d : d2)
    hits += d <= t2;
  return static_cast<double>(hits) / static_cast<double>(d2.size());
}

double f1(double precision, double recall) {
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

} // namespace

double rmsd(std::span<const Point3> pred, std::span<const Point3> gt) {
  require_points(pred, "prediction");
  require_points(gt, "ground truth");
  return std::sqrt(mean_of(nearest_dist2(pred, gt), false));
}

double mads(std::span<const Point3> pred, std::span<const Point3> gt) {
  require_points(pred, "prediction");
  require_points(gt, "ground truth");
  return mean_of(nearest_dist2(pred, gt), true);
}

double chamfer_l1(std::span<const Point3> a, std::span<const Point3> b) {
  require_points(a, "first set");
  require_points(b, "second set");
  return mean_of(nearest_dist2(a, b), true) + mean_of(nearest_dist2(b, a), true);
}

double normal_consistency(const PointCloud& pred, const PointCloud& gt) {
  require_points(pred.points, "prediction");
  require_points(gt.points, "ground truth");
  if (!pred.has_normals() || !gt.has_normals())
    throw Error(ErrorKind::MissingNormals, "normal consistency needs normals on both sets");
  pred.validate();
  gt.validate();
  const KdTree tree(pred.points);
  const double s = deterministic_sum(gt.size(), [&](std::size_t i) {
    const auto nb = tree.nearest(gt.points[i]);
    return std::abs(gt.normals[i].dot(pred.normals[nb.index]));
  });
  return std::min(1.0, s / static_cast<double>(gt.size()));
}

double f_score(std::span<const Point3> pred, std::span<const Point3> gt, double tau) {
  require_points(pred, "prediction");
  require_points(gt, "ground truth");
  if (!(tau > 0.0))
    throw Error(ErrorKind::PreconditionViolation, "tau must be positive");
  return f1(fraction_within(nearest_dist2(pred, gt), tau),
            fraction_within(nearest_dist2(gt, pred), tau));
}

MetricReport evaluate(const PointCloud& pred, const PointCloud& gt, double tau) {
  require_points(pred.points, "prediction");
  require_points(gt.points, "ground truth");
  if (!(tau > 0.0))
    throw Error(ErrorKind::PreconditionViolation, "tau must be positive");
  const std::vector<double> forward = nearest_dist2(pred.points, gt.points);
  const std::vector<double> backward = nearest_dist2(gt.points, pred.points);
  MetricReport r;
  r.rmsd = std::sqrt(mean_of(forward, false));
  r.mads = mean_of(forward, true);
  r.chamfer_l1 = r.mads + mean_of(backward, true);
  r.f_score = f1(fraction_within(forward, tau), fraction_within(backward, tau));
  if (pred.has_normals() && gt.has_normals())
    r.normal_consistency = normal_consistency(pred, gt);
  r.n_pred = pred.size();
  r.n_gt = gt.size();
  r.tau = tau;
  return r;
}

MetricReport evaluate_meshes(const TriangleMesh& pred, const TriangleMesh& gt,
                             std::size_t samples, double tau, std::uint64_t seed) {
  const PointCloud ps = sample_mesh_uniform(pred, samples, seed);
  const PointCloud gs = sample_mesh_uniform(gt, samples, seed + 1);
  return evaluate(ps, gs, tau);
}

} // namespace altrec::metrics
