#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "altrec/bench.hpp"
#include "altrec/features.hpp"
#include "altrec/io.hpp"
#include "altrec/ipsr.hpp"
#include "altrec/metrics.hpp"
#include "altrec/parallel.hpp"
#include "altrec/pipeline.hpp"

namespace fs = std::filesystem;
using namespace altrec;

namespace {

void fail(std::string_view kind, const std::string& message) {
  nlohmann::json line{{"error", kind}, {"message", message}};
  std::cerr << line.dump() << '\n';
}

/// Meshes are sampled; files without faces are taken as point sets.
PointCloud load_samples(const fs::path& path, std::size_t samples, std::uint64_t seed) {
  if (io::format_of(path) != io::Format::Xyz) {
    TriangleMesh mesh = io::read_mesh(path);
    if (!mesh.faces.empty())
      return sample_mesh_uniform(mesh, samples, seed);
  }
  return io::read_points(path);
}

struct LambdaFlags {
  std::string c = "auto";
  std::optional<double> sigma;
  std::optional<double> uniform;
  double percentile = 0.9;

  pipeline::LambdaMode mode() const {
    if (uniform)
      return pipeline::UniformLambda{*uniform};
    if (c == "auto")
      return pipeline::PercentileLambda{percentile};
    double value = 0.0;
    try {
      std::size_t used = 0;
      value = std::stod(c, &used);
      if (used != c.size())
        throw std::invalid_argument(c);
    } catch (const std::exception&) {
      throw Error(ErrorKind::ParseError, "--lambda-c expects 'auto' or a number, got '" + c + "'");
    }
    return pipeline::FixedLambda{value, sigma.value_or(0.5 * value)};
  }
};

void add_pipeline_flags(CLI::App* cmd, pipeline::PipelineConfig& cfg, LambdaFlags& lambda) {
  cmd->add_option("--dmin", cfg.d_min, "Smallest candidate depth")->capture_default_str();
  cmd->add_option("--dmax", cfg.d_max, "Largest candidate depth")->capture_default_str();
  cmd->add_option("--iters", cfg.outer_iters, "Outer iterations")->capture_default_str();
  cmd->add_option("--dsharp", cfg.d_sharp, "Depth from which sharp features are kept")
      ->capture_default_str();
  cmd->add_option("--point-weight", cfg.point_weight, "Screening weight")->capture_default_str();
  cmd->add_option("--early-lambda", cfg.early_lambda, "Coefficient below --dsharp")
      ->capture_default_str();
  cmd->add_option("--lambda-c", lambda.c, "Threshold c, or 'auto' for the percentile rule")
      ->capture_default_str();
  cmd->add_option("--lambda-sigma", lambda.sigma, "Deviation sigma (default c/2)");
  cmd->add_option("--lambda-percentile", lambda.percentile, "Percentile used by 'auto'")
      ->capture_default_str();
  cmd->add_option("--uniform-lambda", lambda.uniform, "Same coefficient at sharp depths");
  cmd->add_option("--ipsr-max-iters", cfg.ipsr.max_iters, "iPSR iteration limit")
      ->capture_default_str();
  cmd->add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
}

int run(int argc, char** argv) {
  CLI::App app{"Alternating denoising and reconstruction of unoriented point clouds"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (0 keeps the default)");

  // denoise
  auto* denoise = app.add_subcommand("denoise", "Denoise a point cloud and reconstruct a mesh");
  fs::path d_in, d_out, d_mesh, d_report, d_gt;
  pipeline::PipelineConfig d_cfg;
  LambdaFlags d_lambda;
  denoise->add_option("--in", d_in, "Input points")->required();
  denoise->add_option("--out", d_out, "Denoised points")->required();
  denoise->add_option("--mesh", d_mesh, "Reconstructed mesh");
  denoise->add_option("--report", d_report, "Per-iteration CSV report");
  denoise->add_option("--gt", d_gt, "Ground-truth mesh for per-iteration RMSD");
  add_pipeline_flags(denoise, d_cfg, d_lambda);

  // ipsr
  auto* ipsr_cmd = app.add_subcommand("ipsr", "Single iPSR reconstruction at a fixed depth");
  fs::path i_in, i_out, i_normals;
  ipsr::IpsrConfig i_cfg;
  ipsr_cmd->add_option("--in", i_in, "Input points")->required();
  ipsr_cmd->add_option("--depth", i_cfg.depth, "Lattice depth")->required();
  ipsr_cmd->add_option("--out", i_out, "Output mesh");
  ipsr_cmd->add_option("--normals", i_normals, "Output oriented points");
  ipsr_cmd->add_option("--point-weight", i_cfg.point_weight, "Screening weight")
      ->capture_default_str();
  ipsr_cmd->add_option("--max-iters", i_cfg.max_iters, "Iteration limit")->capture_default_str();
  ipsr_cmd->add_option("--seed", i_cfg.seed, "Random seed")->capture_default_str();

  // eval
  auto* eval = app.add_subcommand("eval", "Compare a prediction with ground truth");
  fs::path e_pred, e_gt;
  std::size_t e_samples = 100000;
  double e_tau = 5e-3;
  std::uint64_t e_seed = 0;
  eval->add_option("--pred", e_pred, "Predicted mesh or points")->required();
  eval->add_option("--gt", e_gt, "Ground-truth mesh or points")->required();
  eval->add_option("--samples", e_samples, "Samples drawn from meshes")->capture_default_str();
  eval->add_option("--tau", e_tau, "F-score threshold")->capture_default_str();
  eval->add_option("--seed", e_seed, "Sampling seed")->capture_default_str();

  // synth
  auto* synth = app.add_subcommand("synth", "Sample and corrupt a mesh");
  fs::path s_in, s_out;
  std::size_t s_n = 50000;
  bench::CorruptionSpec s_spec;
  synth->add_option("--in", s_in, "Input mesh")->required();
  synth->add_option("--out", s_out, "Output points")->required();
  synth->add_option("--n", s_n, "Sample count")->capture_default_str();
  synth->add_option("--noise-std", s_spec.gaussian_std, "Gaussian noise deviation")
      ->capture_default_str();
  synth->add_option("--outliers", s_spec.outlier_count, "Uniform outliers in the unit cube")
      ->capture_default_str();
  synth->add_option("--density-ratio", s_spec.density_ratio, "Kept fraction of one half")
      ->capture_default_str();
  synth->add_option("--split-axis", s_spec.split_axis, "Axis of the density split")
      ->capture_default_str();
  synth->add_option("--misalignment", s_spec.misalignment,
                    "Offset of every other point (experimental)");
  synth->add_option("--seed", s_spec.seed, "Random seed")->capture_default_str();
  bool s_normalize = true;
  synth->add_flag("--normalize,!--no-normalize", s_normalize,
                  "Scale the mesh to unit max extent first");

  // vcm
  auto* vcm = app.add_subcommand("vcm", "Dump per-point sharpness and coefficients");
  fs::path v_in, v_out;
  features::VcmParams v_params;
  LambdaFlags v_lambda;
  vcm->add_option("--in", v_in, "Input points")->required();
  vcm->add_option("--out", v_out, "Output CSV")->required();
  vcm->add_option("--offset-r", v_params.offset_radius, "Offset radius R");
  vcm->add_option("--conv-r", v_params.convolution_radius, "Convolution radius r");
  vcm->add_option("--mc-samples", v_params.integration_samples, "Samples per point")
      ->capture_default_str();
  vcm->add_option("--seed", v_params.seed, "Random seed")->capture_default_str();
  vcm->add_option("--lambda-c", v_lambda.c, "Threshold c, or 'auto'")->capture_default_str();
  vcm->add_option("--lambda-sigma", v_lambda.sigma, "Deviation sigma (default c/2)");
  vcm->add_option("--lambda-percentile", v_lambda.percentile, "Percentile used by 'auto'")
      ->capture_default_str();

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "Run the corruption benchmark over meshes");
  std::vector<fs::path> b_shapes;
  fs::path b_out;
  bench::CorruptionSpec b_spec;
  bench::BenchmarkOptions b_opts;
  pipeline::PipelineConfig b_cfg;
  LambdaFlags b_lambda;
  bench_cmd->add_option("--shapes", b_shapes, "Ground-truth meshes")->required();
  bench_cmd->add_option("--out", b_out, "Output CSV")->required();
  bench_cmd->add_option("--n", b_opts.samples, "Points sampled per shape")->capture_default_str();
  bench_cmd->add_option("--gt-samples", b_opts.gt_samples, "Ground-truth samples")
      ->capture_default_str();
  bench_cmd->add_option("--tau", b_opts.tau, "F-score threshold")->capture_default_str();
  bench_cmd->add_option("--noise-std", b_spec.gaussian_std, "Gaussian noise deviation")
      ->capture_default_str();
  bench_cmd->add_option("--outliers", b_spec.outlier_count, "Uniform outliers in the unit cube")
      ->capture_default_str();
  bench_cmd->add_option("--density-ratio", b_spec.density_ratio, "Kept fraction of one half")
      ->capture_default_str();
  bench_cmd->add_flag("--timing", b_opts.include_timing, "Add a wall-time column");
  add_pipeline_flags(bench_cmd, b_cfg, b_lambda);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    fail("UsageError", e.what());
    return 2;
  }
  if (threads > 0)
    set_thread_count(threads);

  if (*denoise) {
    d_cfg.lambda_mode = d_lambda.mode();
    const PointCloud input = io::read_points(d_in);
    pipeline::PipelineResult result;
    try {
      if (!d_gt.empty())
        result = pipeline::run_pipeline(input, d_cfg, io::read_mesh(d_gt));
      else
        result = pipeline::run_pipeline(input, d_cfg);
    } catch (const pipeline::PipelineFailure& e) {
      if (!d_report.empty())
        pipeline::write_report_csv(d_report, e.partial_report());
      throw;
    }
    io::write_points(d_out, result.denoised);
    if (!d_mesh.empty())
      io::write_mesh(d_mesh, result.mesh);
    if (!d_report.empty())
      pipeline::write_report_csv(d_report, result.report);
    std::printf("d0=%d schedule=", result.report.d0);
    for (std::size_t i = 0; i < result.report.schedule.size(); ++i)
      std::printf("%s%d", i ? "," : "", result.report.schedule[i]);
    std::printf(" points=%zu faces=%zu\n", result.denoised.size(), result.mesh.faces.size());
  } else if (*ipsr_cmd) {
    PointCloud input = io::read_points(i_in);
    const ipsr::IpsrResult r = ipsr::run_ipsr(PointCloud{input.points, {}}, i_cfg);
    if (!i_out.empty())
      io::write_mesh(i_out, r.mesh);
    if (!i_normals.empty())
      io::write_points(i_normals, PointCloud{input.points, r.normals});
    std::printf("iterations=%d converged=%d final_v=%.6f faces=%zu\n", r.iterations,
                r.converged ? 1 : 0, r.variation_history.back(), r.mesh.faces.size());
  } else if (*eval) {
    const PointCloud pred = load_samples(e_pred, e_samples, e_seed);
    const PointCloud gt = load_samples(e_gt, e_samples, e_seed + 1);
    const metrics::MetricReport m = metrics::evaluate(pred, gt, e_tau);
    std::printf("rmsd,mads,chamfer_l1,nc,f_score,n_pred,n_gt,tau\n");
    std::printf("%.10g,%.10g,%.10g,", m.rmsd, m.mads, m.chamfer_l1);
    if (m.normal_consistency)
      std::printf("%.10g", *m.normal_consistency);
    std::printf(",%.10g,%zu,%zu,%.10g\n", m.f_score, m.n_pred, m.n_gt, m.tau);
  } else if (*synth) {
    TriangleMesh mesh = io::read_mesh(s_in);
    if (s_normalize)
      mesh = transform_mesh(mesh, unit_transform_for(Aabb::of(mesh.vertices)));
    const PointCloud clean = sample_mesh_uniform(mesh, s_n, s_spec.seed);
    io::write_points(s_out, bench::corrupt(clean, s_spec));
  } else if (*vcm) {
    const PointCloud input = io::read_points(v_in);
    features::SharpnessField field;
    field.ratios = features::sharpness_ratios(input.points, v_params);
    const pipeline::LambdaMode mode = v_lambda.mode();
    features::Threshold t;
    if (const auto* f = std::get_if<pipeline::FixedLambda>(&mode))
      t = features::Threshold{f->c, f->sigma};
    else
      t = features::select_threshold_percentile(field.ratios, v_lambda.percentile);
    field.c = t.c;
    field.sigma = t.sigma;
    const features::LambdaField lambdas = features::lambda_field(field);
    std::ofstream out(v_out);
    if (!out)
      throw Error(ErrorKind::IoError, "cannot write " + v_out.string());
    out << "index,x,y,z,ratio,lambda\n";
    out.precision(10);
    for (std::size_t i = 0; i < input.size(); ++i) {
      const Point3& p = input.points[i];
      out << i << ',' << p.x() << ',' << p.y() << ',' << p.z() << ',' << field.ratios[i] << ','
          << lambdas.lambdas[i] << '\n';
    }
    std::printf("c=%.6g sigma=%.6g\n", t.c, t.sigma);
  } else if (*bench_cmd) {
    b_cfg.lambda_mode = b_lambda.mode();
    b_spec.seed = b_cfg.seed;
    b_opts.seed = b_cfg.seed;
    const auto rows = bench::run_benchmark(b_shapes, b_spec, b_cfg, b_opts);
    bench::write_benchmark_csv(b_out, rows, b_opts.include_timing);
    std::size_t failed = 0;
    for (const auto& r : rows)
      failed += !r.ok;
    std::printf("shapes=%zu failed=%zu\n", rows.size(), failed);
  }
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    std::string message = e.what();
    const std::string prefix = std::string(to_string(e.kind())) + ": ";
    if (message.starts_with(prefix))
      message.erase(0, prefix.size());
    fail(to_string(e.kind()), message);
  } catch (const std::exception& e) {
    fail("InternalError", e.what());
  }
  return 1;
}
