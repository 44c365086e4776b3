#include "altrec/projection.hpp"

#include <string>

#include "altrec/parallel.hpp"

namespace altrec::projection {

ProjectionResult lambda_project(const PointCloud& cloud, const MeshIndex& index,
                                const features::LambdaField& lambdas) {
  if (lambdas.size() != cloud.size())
    throw Error(ErrorKind::LengthMismatch, std::to_string(lambdas.size()) +
                                               " coefficients for " +
                                               std::to_string(cloud.size()) + " points");
  ProjectionResult out;
  out.points.points.resize(cloud.size());
  out.points.normals.resize(cloud.size());
  out.displacements.resize(cloud.size());
  parallel_for(cloud.size(), [&](std::size_t i) {
    const Point3& p = cloud.points[i];
    const ClosestPoint cp = index.closest(p);
    const double lambda = lambdas.lambdas[i];
    out.points.points[i] = lambda == 1.0 ? cp.point : ((1.0 - lambda) * p + lambda * cp.point).eval();
    out.points.normals[i] = cp.normal;
    out.displacements[i] = (out.points.points[i] - p).norm();
  });
  return out;
}

ProjectionResult lambda_project(const PointCloud& cloud, const TriangleMesh& mesh,
                                const features::LambdaField& lambdas) {
  if (lambdas.size() != cloud.size())
    throw Error(ErrorKind::LengthMismatch, std::to_string(lambdas.size()) +
                                               " coefficients for " +
                                               std::to_string(cloud.size()) + " points");
  return lambda_project(cloud, MeshIndex::build(mesh), lambdas);
}

features::LambdaField uniform_lambda(std::size_t n, double value) {
  if (!(value > 0.1 && value <= 1.0))
    throw Error(ErrorKind::OutOfRange,
                "uniform coefficient " + std::to_string(value) + " outside (0.1, 1]");
  return features::LambdaField{std::vector<double>(n, value)};
}

} // namespace altrec::projection
