#include "altrec/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include <Eigen/Eigenvalues>

#include "altrec/parallel.hpp"

namespace altrec::features {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

} // namespace

RawVcm compute_raw_vcm(std::span<const Point3> points, const VcmParams& params) {
  if (points.size() < 4)
    throw Error(ErrorKind::TooFewPoints,
                "VCM needs at least four points, got " + std::to_string(points.size()));
  const double diagonal = Aabb::of(points).diagonal();
  RawVcm raw;
  raw.offset_radius = params.offset_radius.value_or(0.05 * diagonal);
  raw.convolution_radius = params.convolution_radius.value_or(0.05 * diagonal);
  if (!(raw.offset_radius > 0.0))
    throw Error(ErrorKind::PreconditionViolation, "offset radius must be positive");
  if (!(raw.convolution_radius >= 0.0))
    throw Error(ErrorKind::PreconditionViolation, "convolution radius must be non-negative");
  if (params.integration_samples < 1)
    throw Error(ErrorKind::PreconditionViolation, "integration_samples must be at least 1");

  const KdTree tree(points);
  const double R = raw.offset_radius;
  const int samples = params.integration_samples;
  // Each accepted sample stands for ball_volume / samples of the cell.
  const double unit = 4.0 / 3.0 * std::numbers::pi * R * R * R / samples;
  raw.covariances.assign(points.size(), Mat3::Zero());
  raw.accepted.assign(points.size(), 0);
  parallel_for(points.size(), [&](std::size_t i) {
    std::mt19937_64 rng(mix_seed(params.seed, i));
    std::normal_distribution<double> gauss;
    std::uniform_real_distribution<double> uniform;
    Mat3 acc = Mat3::Zero();
    int accepted = 0;
    for (int s = 0; s < samples; ++s) {
      Vec3 dir(gauss(rng), gauss(rng), gauss(rng));
      const double len = dir.norm();
      const double radius = R * std::cbrt(uniform(rng));
      if (len == 0.0)
        continue;
      const Vec3 offset = dir * (radius / len);
      if (tree.any_within(points[i] + offset, offset.squaredNorm()))
        continue;
      acc.noalias() += offset * offset.transpose();
      ++accepted;
    }
    raw.covariances[i] = unit * acc;
    raw.accepted[i] = accepted;
  });
  return raw;
}

std::vector<Mat3> compute_vcm(std::span<const Point3> points, const VcmParams& params) {
  RawVcm raw = compute_raw_vcm(points, params);
  if (raw.convolution_radius == 0.0)
    return std::move(raw.covariances);
  const KdTree tree(points);
  std::vector<Mat3> out(points.size(), Mat3::Zero());
  parallel_for(points.size(), [&](std::size_t i) {
    Mat3 sum = Mat3::Zero();
    for (std::uint32_t j : tree.radius(points[i], raw.convolution_radius))
      sum += raw.covariances[j];
    out[i] = sum;
  });
  return out;
}

double sharpness_ratio(const Mat3& cov) {
  const double scale = std::max(cov.cwiseAbs().maxCoeff(), 1e-300);
  if (!cov.allFinite() || (cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw Error(ErrorKind::NotSymmetric, "covariance is not symmetric");
  const Eigen::SelfAdjointEigenSolver<Mat3> eig(cov, Eigen::EigenvaluesOnly);
  // Ascending order: index 1 is the middle eigenvalue.
  const Eigen::Vector3d ev = eig.eigenvalues().cwiseMax(0.0);
  const double trace = ev.sum();
  if (trace < 1e-18)
    return 0.0;
  return ev[1] / trace;
}

Threshold select_threshold_percentile(std::span<const double> ratios, double percentile) {
  if (ratios.empty())
    throw Error(ErrorKind::EmptyInput, "no sharpness ratios");
  if (!(percentile > 0.0 && percentile < 1.0))
    throw Error(ErrorKind::OutOfRange, "percentile must lie in (0, 1)");
  std::vector<double> sorted(ratios.begin(), ratios.end());
  const auto idx = static_cast<std::size_t>(
      std::floor(percentile * static_cast<double>(sorted.size() - 1)));
  std::nth_element(sorted.begin(), sorted.begin() + idx, sorted.end());
  const double c = std::max(sorted[idx], 1e-9);
  return Threshold{c, 0.5 * c};
}

double lambda_coefficient(double r, double c, double sigma) {
  if (!(sigma > 0.0))
    throw Error(ErrorKind::PreconditionViolation, "sigma must be positive");
  const double excess = std::max(r - c, 0.0);
  // The tail rounds to 0.1 long before the exponential vanishes.
  static const double floor = std::nextafter(0.1, 1.0);
  return std::max(floor, 0.1 + 0.9 * std::exp(-(excess * excess) / (sigma * sigma)));
}

std::vector<double> sharpness_ratios(std::span<const Point3> points, const VcmParams& params) {
  const std::vector<Mat3> vcm = compute_vcm(points, params);
  std::vector<double> out(vcm.size());
  parallel_for(vcm.size(), [&](std::size_t i) { out[i] = sharpness_ratio(vcm[i]); });
  return out;
}

LambdaField lambda_field(const SharpnessField& field) {
  LambdaField out;
  out.lambdas.resize(field.ratios.size());
  for (std::size_t i = 0; i < field.ratios.size(); ++i)
    out.lambdas[i] = lambda_coefficient(field.ratios[i], field.c, field.sigma);
  return out;
}

} // namespace altrec::features
