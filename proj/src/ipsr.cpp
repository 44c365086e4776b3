#include "altrec/ipsr.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "altrec/parallel.hpp"

namespace altrec::ipsr {

void IpsrConfig::validate() const {
  if (max_iters < 1)
    throw Error(ErrorKind::PreconditionViolation, "max_iters must be at least 1");
  if (!(v_threshold > 0.0))
    throw Error(ErrorKind::PreconditionViolation, "v_threshold must be positive");
  if (neighbor_faces < 1)
    throw Error(ErrorKind::PreconditionViolation, "neighbor_faces must be at least 1");
  poisson_params().validate();
}

poisson::PoissonParams IpsrConfig::poisson_params() const {
  poisson::PoissonParams p;
  p.depth = depth;
  p.point_weight = point_weight;
  p.cg_tolerance = cg_tolerance;
  p.pad_fraction = pad_fraction;
  return p;
}

std::vector<UnitVector3> init_normals_random(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  std::vector<UnitVector3> out;
  out.reserve(n);
  while (out.size() < n) {
    const Vec3 v(gauss(rng), gauss(rng), gauss(rng));
    if (auto u = UnitVector3::try_from(v, 1e-12))
      out.push_back(*u);
  }
  return out;
}

namespace {

std::vector<Vec3> area_normals(const TriangleMesh& mesh) {
  std::vector<Vec3> out(mesh.faces.size());
  for (std::size_t f = 0; f < mesh.faces.size(); ++f)
    out[f] = 0.5 * mesh.face_cross(f);
  return out;
}

std::vector<UnitVector3> finish(std::span<const Vec3> sums, std::span<const double> areas,
                                std::span<const UnitVector3> previous) {
  std::vector<UnitVector3> out(sums.size());
  parallel_for(sums.size(), [&](std::size_t i) {
    const double len = areas[i] > 0.0 ? sums[i].norm() / areas[i] : 0.0;
    if (len >= 1e-12)
      out[i] = UnitVector3(sums[i]);
    else if (!previous.empty())
      out[i] = previous[i];
  });
  return out;
}

double angle_between(const Vec3& a, const Vec3& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

} // namespace

std::vector<UnitVector3> update_normals_from_mesh(std::span<const Point3> points,
                                                  std::span<const UnitVector3> previous,
                                                  const TriangleMesh& mesh, std::size_t k,
                                                  Neighborhood mode) {
  if (k == 0)
    throw Error(ErrorKind::PreconditionViolation, "k must be at least 1");
  if (!previous.empty() && previous.size() != points.size())
    throw Error(ErrorKind::LengthMismatch, "previous normals do not match the point count");
  if (mesh.faces.empty())
    throw Error(ErrorKind::EmptyMesh, "mesh has no faces");
  if (points.empty())
    return {};
  const std::vector<Vec3> weighted = area_normals(mesh);
  std::vector<Vec3> sums(points.size(), Vec3::Zero());
  std::vector<double> areas(points.size(), 0.0);

  if (mode == Neighborhood::NearestFaces) {
    std::vector<Point3> centroids(mesh.faces.size());
    for (std::size_t f = 0; f < mesh.faces.size(); ++f)
      centroids[f] = mesh.face_centroid(f);
    const KdTree tree(centroids);
    parallel_for(points.size(), [&](std::size_t i) {
      for (const auto& nb : tree.knn(points[i], k)) {
        sums[i] += weighted[nb.index];
        areas[i] += weighted[nb.index].norm();
      }
    });
  } else {
    const KdTree tree(points);
    const std::size_t kk = std::min(k, points.size());
    std::vector<std::uint32_t> hits(mesh.faces.size() * kk);
    parallel_for(mesh.faces.size(), [&](std::size_t f) {
      thread_local std::vector<KdTree::Neighbor> nbs;
      tree.knn(mesh.face_centroid(f), kk, nbs);
      for (std::size_t j = 0; j < kk; ++j)
        hits[f * kk + j] = nbs[j].index;
    });
    // Serial scatter in face order keeps the sums independent of threading.
    for (std::size_t f = 0; f < mesh.faces.size(); ++f)
      for (std::size_t j = 0; j < kk; ++j) {
        const std::uint32_t i = hits[f * kk + j];
        sums[i] += weighted[f];
        areas[i] += weighted[f].norm();
      }
  }
  return finish(sums, areas, previous);
}

std::vector<UnitVector3> update_normals_from_mesh(const PointCloud& points,
                                                  const TriangleMesh& mesh, std::size_t k,
                                                  Neighborhood mode) {
  points.validate();
  return update_normals_from_mesh(points.points, points.normals, mesh, k, mode);
}

double convergence_value(std::span<const UnitVector3> old_normals,
                         std::span<const UnitVector3> new_normals) {
  if (old_normals.size() != new_normals.size())
    throw Error(ErrorKind::LengthMismatch, std::to_string(old_normals.size()) + " vs " +
                                               std::to_string(new_normals.size()) + " normals");
  const std::size_t n = old_normals.size();
  if (n == 0)
    throw Error(ErrorKind::EmptyInput, "no normals to compare");
  std::vector<double> angles(n);
  parallel_for(n, [&](std::size_t i) { angles[i] = angle_between(old_normals[i], new_normals[i]); });
  const auto top = static_cast<std::size_t>(std::ceil(0.001 * static_cast<double>(n)));
  std::nth_element(angles.begin(), angles.begin() + (top - 1), angles.end(), std::greater<>());
  std::sort(angles.begin(), angles.begin() + top, std::greater<>());
  double s = 0.0;
  for (std::size_t i = 0; i < top; ++i)
    s += angles[i];
  return s / static_cast<double>(top);
}

IpsrResult run_ipsr(const PointCloud& points, const IpsrConfig& config,
                    std::optional<std::span<const UnitVector3>> initial_normals) {
  config.validate();
  if (points.size() < 4)
    throw Error(ErrorKind::PreconditionViolation, "iPSR needs at least four points");
  IpsrResult result;
  if (initial_normals) {
    if (initial_normals->size() != points.size())
      throw Error(ErrorKind::LengthMismatch, "initial normals do not match the point count");
    result.normals.assign(initial_normals->begin(), initial_normals->end());
  } else {
    result.normals = init_normals_random(points.size(), config.seed);
  }

  poisson::Reconstructor rec(points.points, config.poisson_params());
  std::optional<poisson::ScalarGrid> previous;
  const auto base_k = static_cast<std::size_t>(config.neighbor_faces);
  for (int it = 0; it < config.max_iters; ++it) {
    poisson::ReconstructResult r;
    try {
      r = rec.run(result.normals, previous ? &*previous : nullptr);
    } catch (const SolverDiverged& e) {
      throw SolverDiverged(e.achieved_residual(), e.cg_iterations(), static_cast<std::size_t>(it));
    }
    result.max_residual = std::max(result.max_residual, r.stats.relative_residual);
    result.cg_iterations += r.stats.iterations;
    std::size_t k = base_k;
    if (config.scale_neighbors && config.neighborhood == Neighborhood::FaceToSamples) {
      const double per_cell =
          2.0 * static_cast<double>(points.size()) / static_cast<double>(r.mesh.faces.size());
      if (per_cell > 1.0)
        k = static_cast<std::size_t>(std::ceil(static_cast<double>(base_k) * per_cell));
    }
    auto next = update_normals_from_mesh(points.points, result.normals, r.mesh, k,
                                         config.neighborhood);
    const double v = convergence_value(result.normals, next);
    result.variation_history.push_back(v);
    result.normals = std::move(next);
    result.mesh = std::move(r.mesh);
    previous = std::move(r.grid);
    result.iterations = it + 1;
    if (v < config.v_threshold)
      break;
  }
  result.converged = result.variation_history.back() < config.v_threshold;
  return result;
}

} // namespace altrec::ipsr
