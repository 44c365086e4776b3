#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "altrec/features.hpp"
#include "altrec/ipsr.hpp"
#include "altrec/metrics.hpp"
#include "altrec/parallel.hpp"
#include "altrec/pipeline.hpp"
#include "altrec/poisson.hpp"

namespace py = pybind11;
using namespace altrec;

namespace {

using Rows = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using FaceRows = Eigen::Matrix<std::int32_t, Eigen::Dynamic, 3, Eigen::RowMajor>;

std::vector<Point3> to_points(const Rows& m) {
  std::vector<Point3> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    out[static_cast<std::size_t>(i)] = m.row(i).transpose();
  return out;
}

Rows from_points(const std::vector<Point3>& pts) {
  Rows m(static_cast<Eigen::Index>(pts.size()), 3);
  for (std::size_t i = 0; i < pts.size(); ++i)
    m.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
  return m;
}

Rows from_normals(const std::vector<UnitVector3>& ns) {
  Rows m(static_cast<Eigen::Index>(ns.size()), 3);
  for (std::size_t i = 0; i < ns.size(); ++i)
    m.row(static_cast<Eigen::Index>(i)) << ns[i].x(), ns[i].y(), ns[i].z();
  return m;
}

PointCloud to_cloud(const Rows& points, const std::optional<Rows>& normals) {
  PointCloud c;
  c.points = to_points(points);
  if (normals) {
    if (normals->rows() != points.rows())
      throw Error(ErrorKind::LengthMismatch, "normals and points differ in length");
    for (Eigen::Index i = 0; i < normals->rows(); ++i)
      c.normals.emplace_back(normals->row(i).transpose());
  }
  return c;
}

std::pair<Rows, FaceRows> mesh_arrays(const TriangleMesh& mesh) {
  FaceRows f(static_cast<Eigen::Index>(mesh.faces.size()), 3);
  for (std::size_t i = 0; i < mesh.faces.size(); ++i)
    f.row(static_cast<Eigen::Index>(i)) << mesh.faces[i][0], mesh.faces[i][1], mesh.faces[i][2];
  return {from_points(mesh.vertices), f};
}

py::dict report_dict(const pipeline::PipelineReport& r) {
  py::list records;
  for (const auto& rec : r.records) {
    py::dict d;
    d["iter"] = rec.iter;
    d["depth"] = rec.depth;
    d["projection_depth"] = rec.projection_depth;
    d["ipsr_iterations"] = rec.ipsr_iterations;
    d["final_v"] = rec.final_v;
    d["mean_displacement"] = rec.mean_displacement;
    d["min_lambda"] = rec.min_lambda;
    d["max_lambda"] = rec.max_lambda;
    d["rmsd"] = rec.rmsd;
    d["time_ms"] = rec.time_ms;
    records.append(d);
  }
  py::dict d;
  d["d0"] = r.d0;
  d["schedule"] = r.schedule;
  d["initial_rmsd"] = r.initial_rmsd;
  d["max_residual"] = r.max_residual;
  d["records"] = records;
  return d;
}

} // namespace

PYBIND11_MODULE(_altrec, m) {
  m.doc() = "Point cloud denoising by alternating iPSR and lambda-projection";

  py::register_exception<Error>(m, "AltrecError", PyExc_RuntimeError);

  m.def("set_threads", &set_thread_count, py::arg("n"));
  m.def("thread_count", &thread_count);

  m.def("depth_schedule", &pipeline::depth_schedule, py::arg("d0"), py::arg("d_max") = 8,
        py::arg("count") = 5);
  m.def("lambda_coefficient", &features::lambda_coefficient, py::arg("r"), py::arg("c"),
        py::arg("sigma"));

  m.def(
      "reconstruct",
      [](const Rows& points, const Rows& normals, int depth, double point_weight) {
        poisson::PoissonParams p;
        p.depth = depth;
        p.point_weight = point_weight;
        py::gil_scoped_release release;
        auto r = poisson::reconstruct(to_cloud(points, normals), p);
        py::gil_scoped_acquire acquire;
        return mesh_arrays(r.mesh);
      },
      py::arg("points"), py::arg("normals"), py::arg("depth") = 6, py::arg("point_weight") = 1.0,
      "Screened Poisson surface of an oriented cloud as (vertices, faces).");

  m.def(
      "ipsr",
      [](const Rows& points, int depth, int max_iters, std::uint64_t seed) {
        ipsr::IpsrConfig cfg;
        cfg.depth = depth;
        cfg.max_iters = max_iters;
        cfg.seed = seed;
        py::gil_scoped_release release;
        auto r = ipsr::run_ipsr(to_cloud(points, std::nullopt), cfg);
        py::gil_scoped_acquire acquire;
        auto [v, f] = mesh_arrays(r.mesh);
        py::dict d;
        d["vertices"] = v;
        d["faces"] = f;
        d["normals"] = from_normals(r.normals);
        d["iterations"] = r.iterations;
        d["converged"] = r.converged;
        d["variation_history"] = r.variation_history;
        return d;
      },
      py::arg("points"), py::arg("depth") = 6, py::arg("max_iters") = 30, py::arg("seed") = 0,
      "Surface and normals of an unoriented cloud.");

  m.def(
      "denoise",
      [](const Rows& points, int d_min, int d_max, int outer_iters, int d_sharp,
         std::optional<std::pair<double, double>> threshold, std::optional<double> uniform,
         double percentile, std::uint64_t seed, std::optional<Rows> gt) {
        pipeline::PipelineConfig cfg;
        cfg.d_min = d_min;
        cfg.d_max = d_max;
        cfg.outer_iters = outer_iters;
        cfg.d_sharp = d_sharp;
        cfg.seed = seed;
        if (threshold && uniform)
          throw Error(ErrorKind::PreconditionViolation, "threshold and uniform are exclusive");
        if (threshold)
          cfg.lambda_mode = pipeline::FixedLambda{threshold->first, threshold->second};
        else if (uniform)
          cfg.lambda_mode = pipeline::UniformLambda{*uniform};
        else
          cfg.lambda_mode = pipeline::PercentileLambda{percentile};
        const PointCloud cloud = to_cloud(points, std::nullopt);
        std::optional<PointCloud> dense;
        if (gt)
          dense = to_cloud(*gt, std::nullopt);
        py::gil_scoped_release release;
        auto r = pipeline::run_pipeline(cloud, cfg, dense ? &*dense : nullptr);
        py::gil_scoped_acquire acquire;
        auto [v, f] = mesh_arrays(r.mesh);
        py::dict d;
        d["points"] = from_points(r.denoised.points);
        d["vertices"] = v;
        d["faces"] = f;
        d["report"] = report_dict(r.report);
        return d;
      },
      py::arg("points"), py::arg("d_min") = 6, py::arg("d_max") = 8, py::arg("outer_iters") = 5,
      py::arg("d_sharp") = 8, py::arg("threshold") = std::nullopt,
      py::arg("uniform") = std::nullopt, py::arg("percentile") = 0.9, py::arg("seed") = 0,
      py::arg("gt") = std::nullopt,
      "Denoised points, final surface and per-iteration report.");

  m.def("rmsd", [](const Rows& a, const Rows& b) { return metrics::rmsd(to_points(a), to_points(b)); },
        py::arg("pred"), py::arg("gt"));
  m.def("mads", [](const Rows& a, const Rows& b) { return metrics::mads(to_points(a), to_points(b)); },
        py::arg("pred"), py::arg("gt"));
  m.def("chamfer_l1",
        [](const Rows& a, const Rows& b) { return metrics::chamfer_l1(to_points(a), to_points(b)); },
        py::arg("a"), py::arg("b"));
  m.def("f_score",
        [](const Rows& a, const Rows& b, double tau) {
          return metrics::f_score(to_points(a), to_points(b), tau);
        },
        py::arg("pred"), py::arg("gt"), py::arg("tau") = 5e-3);
}
