#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "altrec/core.hpp"
#include "altrec/poisson.hpp"

namespace altrec::ipsr {

/// How faces of the intermediate mesh are attached to samples when
/// re-estimating normals.
enum class Neighborhood {
  /// Every face is attached to the k samples nearest its centroid.
  FaceToSamples,
  /// Every sample averages the k faces whose centroids are nearest.
  NearestFaces,
};

struct IpsrConfig {
  int depth = 6;
  int max_iters = 30;
  /// Stop once the normal variation drops below this many radians.
  double v_threshold = 0.175;
  /// Nearest faces averaged per point when re-estimating normals.
  int neighbor_faces = 10;
  Neighborhood neighborhood = Neighborhood::FaceToSamples;
  /// With FaceToSamples, multiply k by the number of points per surface cell
  /// (estimated as 2 points / faces) when that exceeds one, so a face reaches
  /// about as far as it would over one sample per cell.
  bool scale_neighbors = true;
  double point_weight = 1.0;
  std::uint64_t seed = 0;
  double pad_fraction = 0.1;
  double cg_tolerance = 1e-6;

  void validate() const;
  poisson::PoissonParams poisson_params() const;
};

struct IpsrResult {
  TriangleMesh mesh;
  std::vector<UnitVector3> normals;
  int iterations = 0;
  std::vector<double> variation_history;
  bool converged = false;
  /// Largest relative residual reported by any Poisson solve of the run.
  double max_residual = 0.0;
  int cg_iterations = 0;
};

/// n directions uniform on the sphere (normalized Gaussian triples).
std::vector<UnitVector3> init_normals_random(std::size_t n, std::uint64_t seed);

/// New normal of each point: the renormalized area-weighted mean of the unit
/// normals of the faces attached to it under `mode`. A point with no attached
/// face, or whose mean has norm below 1e-12, keeps its previous normal (from
/// `points.normals`; +z when the cloud carries none). Throws EmptyMesh.
std::vector<UnitVector3> update_normals_from_mesh(
    const PointCloud& points, const TriangleMesh& mesh, std::size_t k,
    Neighborhood mode = Neighborhood::FaceToSamples);

std::vector<UnitVector3> update_normals_from_mesh(
    std::span<const Point3> points, std::span<const UnitVector3> previous,
    const TriangleMesh& mesh, std::size_t k, Neighborhood mode = Neighborhood::FaceToSamples);

/// Mean of the ceil(0.001 n) largest angles, in radians, between matching
/// normals.
double convergence_value(std::span<const UnitVector3> old_normals,
                         std::span<const UnitVector3> new_normals);

/// Alternates Poisson reconstruction and normal re-estimation until the
/// variation falls below the threshold or max_iters reconstructions ran.
/// Without initial normals the run starts from init_normals_random(seed).
/// A solver failure is rethrown as SolverDiverged carrying the 0-based
/// iteration index.
IpsrResult run_ipsr(const PointCloud& points, const IpsrConfig& config,
                    std::optional<std::span<const UnitVector3>> initial_normals = std::nullopt);

} // namespace altrec::ipsr
