#pragma once

#include <span>
#include <vector>

#include "altrec/core.hpp"
#include "altrec/features.hpp"

namespace altrec::projection {

struct ProjectionResult {
  /// Projected points, each carrying the normal of the face it was pulled
  /// toward.
  PointCloud points;
  /// |p' - p| per point.
  std::vector<double> displacements;
};

/// p' = (1 - lambda) p + lambda q with q the closest point of the mesh.
/// Throws LengthMismatch and EmptyMesh.
ProjectionResult lambda_project(const PointCloud& cloud, const TriangleMesh& mesh,
                                const features::LambdaField& lambdas);

/// Same, against a prebuilt index.
ProjectionResult lambda_project(const PointCloud& cloud, const MeshIndex& index,
                                const features::LambdaField& lambdas);

/// n copies of value. Throws OutOfRange unless 0.1 < value <= 1.
features::LambdaField uniform_lambda(std::size_t n, double value);

} // namespace altrec::projection
