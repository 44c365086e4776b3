#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "altrec/core.hpp"

namespace altrec::features {

using Mat3 = Eigen::Matrix3d;

struct VcmParams {
  /// Offset radius R; defaults to 5% of the bounding-box diagonal.
  std::optional<double> offset_radius;
  /// Convolution radius r; defaults to 5% of the bounding-box diagonal.
  std::optional<double> convolution_radius;
  int integration_samples = 500;
  std::uint64_t seed = 0;
};

/// Per-point covariance of the point's Voronoi cell clipped to the R-ball,
/// estimated by Monte Carlo and summed over the sites within r. Sample j of
/// point i is drawn from a generator seeded by (seed, i), so the result does
/// not depend on the thread schedule. Throws TooFewPoints below four points.
std::vector<Mat3> compute_vcm(std::span<const Point3> points, const VcmParams& params);

/// Unconvolved variant, exposed for inspection: covariance about each site
/// and the number of accepted integration samples.
struct RawVcm {
  std::vector<Mat3> covariances;
  std::vector<int> accepted;
  double offset_radius = 0.0;
  double convolution_radius = 0.0;
};
RawVcm compute_raw_vcm(std::span<const Point3> points, const VcmParams& params);

/// Middle eigenvalue over the trace; 0 when the trace is below 1e-18.
/// Throws NotSymmetric.
double sharpness_ratio(const Mat3& cov);

struct Threshold {
  double c = 0.0;
  double sigma = 0.0;
};

/// c is the ascending-sorted ratio at index floor(percentile (n - 1)),
/// clamped below at 1e-9; sigma = c / 2. Throws EmptyInput and OutOfRange.
Threshold select_threshold_percentile(std::span<const double> ratios, double percentile = 0.9);

/// 0.1 + 0.9 exp(-max(r - c, 0)^2 / sigma^2), never below the next double
/// above 0.1.
double lambda_coefficient(double r, double c, double sigma);

struct SharpnessField {
  std::vector<double> ratios;
  double c = 0.0;
  double sigma = 0.0;
};

struct LambdaField {
  std::vector<double> lambdas;

  std::size_t size() const noexcept { return lambdas.size(); }
};

/// Ratios of compute_vcm; c and sigma left for the caller.
std::vector<double> sharpness_ratios(std::span<const Point3> points, const VcmParams& params);

LambdaField lambda_field(const SharpnessField& field);

} // namespace altrec::features
