#include "altrec/bench.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <random>

#include "altrec/io.hpp"

namespace altrec::bench {

PointCloud add_gaussian_noise(const PointCloud& cloud, double stddev, std::uint64_t seed) {
  if (!(stddev >= 0.0))
    throw Error(ErrorKind::PreconditionViolation, "noise deviation must be non-negative");
  PointCloud out{cloud.points, {}};
  if (stddev == 0.0)
    return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, stddev);
  for (Point3& p : out.points)
    for (int a = 0; a < 3; ++a)
      p[a] += gauss(rng);
  return out;
}

PointCloud add_outliers(const PointCloud& cloud, std::size_t count, const Aabb& box,
                        std::uint64_t seed) {
  PointCloud out = cloud;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform;
  std::normal_distribution<double> gauss;
  for (std::size_t i = 0; i < count; ++i) {
    Point3 p;
    for (int a = 0; a < 3; ++a)
      p[a] = box.min[a] + uniform(rng) * (box.max[a] - box.min[a]);
    out.points.push_back(p);
    if (cloud.has_normals()) {
      std::optional<UnitVector3> n;
      while (!n)
        n = UnitVector3::try_from(Vec3(gauss(rng), gauss(rng), gauss(rng)), 1e-12);
      out.normals.push_back(*n);
    }
  }
  return out;
}

PointCloud vary_density(const PointCloud& cloud, double ratio, int axis, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio <= 1.0))
    throw Error(ErrorKind::OutOfRange, "density ratio must lie in (0, 1]");
  if (axis < 0 || axis > 2)
    throw Error(ErrorKind::OutOfRange, "axis must be 0, 1 or 2");
  if (ratio == 1.0 || cloud.empty())
    return cloud;
  std::vector<double> coords(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i)
    coords[i] = cloud.points[i][axis];
  const auto mid = coords.begin() + static_cast<std::ptrdiff_t>(coords.size() / 2);
  std::nth_element(coords.begin(), mid, coords.end());
  const double median = *mid;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform;
  PointCloud out;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (cloud.points[i][axis] > median && uniform(rng) >= ratio)
      continue;
    out.points.push_back(cloud.points[i]);
    if (cloud.has_normals())
      out.normals.push_back(cloud.normals[i]);
  }
  return out;
}

PointCloud add_misalignment(const PointCloud& cloud, double offset, std::uint64_t seed) {
  PointCloud out = cloud;
  if (offset == 0.0)
    return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  std::optional<UnitVector3> dir;
  while (!dir)
    dir = UnitVector3::try_from(Vec3(gauss(rng), gauss(rng), gauss(rng)), 1e-12);
  const Vec3 shift = offset * dir->vec();
  for (std::size_t i = 1; i < out.points.size(); i += 2)
    out.points[i] += shift;
  return out;
}

void CorruptionSpec::validate() const {
  if (!(gaussian_std >= 0.0))
    throw Error(ErrorKind::PreconditionViolation, "gaussian_std must be non-negative");
  if (!(density_ratio > 0.0 && density_ratio <= 1.0))
    throw Error(ErrorKind::OutOfRange, "density_ratio must lie in (0, 1]");
  if (split_axis < 0 || split_axis > 2)
    throw Error(ErrorKind::OutOfRange, "split_axis must be 0, 1 or 2");
  if (!(misalignment >= 0.0))
    throw Error(ErrorKind::PreconditionViolation, "misalignment must be non-negative");
}

PointCloud corrupt(const PointCloud& clean, const CorruptionSpec& spec) {
  spec.validate();
  PointCloud c = vary_density(clean, spec.density_ratio, spec.split_axis, spec.seed + 1);
  c = add_misalignment(c, spec.misalignment, spec.seed + 2);
  c = add_gaussian_noise(c, spec.gaussian_std, spec.seed + 3);
  const Aabb box = spec.outlier_box.value_or(Aabb{Point3::Zero(), Point3::Ones()});
  return add_outliers(c, spec.outlier_count, box, spec.seed + 4);
}

std::vector<BenchmarkRow> run_benchmark(const std::vector<std::filesystem::path>& shapes,
                                        const CorruptionSpec& corruption,
                                        const pipeline::PipelineConfig& config,
                                        const BenchmarkOptions& options) {
  corruption.validate();
  config.validate();
  std::vector<BenchmarkRow> rows;
  for (const auto& path : shapes) {
    BenchmarkRow row;
    row.shape = path.string();
    const auto start = std::chrono::steady_clock::now();
    try {
      TriangleMesh mesh = io::read_mesh(path);
      mesh = transform_mesh(mesh, unit_transform_for(Aabb::of(mesh.vertices)));
      const PointCloud clean = sample_mesh_uniform(mesh, options.samples, options.seed);
      const PointCloud gt = sample_mesh_uniform(mesh, options.gt_samples, options.seed + 1);
      const PointCloud noisy = corrupt(clean, corruption);
      row.before = metrics::evaluate(noisy, gt, options.tau);
      row.n_points = noisy.size();
      const pipeline::PipelineResult result = pipeline::run_pipeline(noisy, config);
      row.d0 = result.report.d0;
      row.after = metrics::evaluate(result.denoised, gt, options.tau);
      row.ok = true;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    row.time_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos)
    return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"')
      out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + '"';
}

void write_metrics(std::ostream& out, const metrics::MetricReport& m, bool ok) {
  if (!ok) {
    out << ",,,,";
    return;
  }
  out << m.rmsd << ',' << m.mads << ',' << m.chamfer_l1 << ',';
  if (m.normal_consistency)
    out << *m.normal_consistency;
  out << ',' << m.f_score;
}

} // namespace

void write_benchmark_csv(std::ostream& out, const std::vector<BenchmarkRow>& rows,
                         bool include_timing) {
  out << "# altrec-bench-csv v" << kBenchCsvVersion << '\n';
  out << "shape,status,n_points,d0,rmsd_before,mads_before,chamfer_before,nc_before,"
         "fscore_before,rmsd_after,mads_after,chamfer_after,nc_after,fscore_after,error";
  if (include_timing)
    out << ",time_ms";
  out << '\n';
  out.precision(17);
  for (const auto& r : rows) {
    out << csv_field(r.shape) << ',' << (r.ok ? "ok" : "error") << ',' << r.n_points << ','
        << r.d0 << ',';
    write_metrics(out, r.before, r.n_points > 0);
    out << ',';
    write_metrics(out, r.after, r.ok);
    out << ',' << csv_field(r.error);
    if (include_timing)
      out << ',' << r.time_ms;
    out << '\n';
  }
}

void write_benchmark_csv(const std::filesystem::path& path, const std::vector<BenchmarkRow>& rows,
                         bool include_timing) {
  std::ofstream f(path);
  if (!f)
    throw Error(ErrorKind::IoError, "cannot write " + path.string());
  write_benchmark_csv(f, rows, include_timing);
  if (!f)
    throw Error(ErrorKind::IoError, "failed writing " + path.string());
}

} // namespace altrec::bench
