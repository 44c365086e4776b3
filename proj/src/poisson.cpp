#include "altrec/poisson.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_map>

#include <Eigen/Dense>

#include "altrec/parallel.hpp"

namespace altrec::poisson {

void PoissonParams::validate() const {
  if (depth < 1 || depth > 10)
    throw Error(ErrorKind::OutOfRange, "depth must lie in [1, 10], got " + std::to_string(depth));
  if (!(point_weight >= 0.0))
    throw Error(ErrorKind::OutOfRange, "point weight must be non-negative");
  if (!(cg_tolerance > 0.0) || cg_max_iters < 1)
    throw Error(ErrorKind::OutOfRange, "invalid solver tolerance or iteration cap");
  if (!(pad_fraction >= 0.0))
    throw Error(ErrorKind::OutOfRange, "pad fraction must be non-negative");
}

Lattice::Lattice(const Aabb& domain, int depth) : domain_(domain), depth_(depth) {
  if (depth < 0 || depth > 10)
    throw Error(ErrorKind::OutOfRange, "lattice depth must lie in [0, 10]");
  const double side = domain.max_extent();
  if (!(side > 0.0))
    throw Error(ErrorKind::DegenerateExtent, "lattice domain has zero extent");
  domain_.max = domain_.min.array() + side;
  cells_ = 1 << depth;
  h_ = side / cells_;
}

bool Lattice::locate(const Point3& p, std::array<int, 3>& cell,
                     std::array<double, 8>& weights) const {
  double frac[3];
  for (int a = 0; a < 3; ++a) {
    const double t = (p[a] - domain_.min[a]) / h_;
    if (!(t >= -1e-9 * cells_) || !(t <= cells_ * (1.0 + 1e-9)))
      return false;
    const int c = std::clamp(static_cast<int>(std::floor(t)), 0, cells_ - 1);
    cell[a] = c;
    frac[a] = std::clamp(t - c, 0.0, 1.0);
  }
  for (int corner = 0; corner < 8; ++corner) {
    double w = 1.0;
    for (int a = 0; a < 3; ++a)
      w *= (corner >> a & 1) ? frac[a] : 1.0 - frac[a];
    weights[corner] = w;
  }
  return true;
}

std::array<std::size_t, 8> Lattice::corners(const std::array<int, 3>& cell) const noexcept {
  std::array<std::size_t, 8> out{};
  for (int corner = 0; corner < 8; ++corner)
    out[corner] = index(cell[0] + (corner & 1), cell[1] + (corner >> 1 & 1),
                        cell[2] + (corner >> 2 & 1));
  return out;
}

double ScalarGrid::sample(const Point3& p) const {
  std::array<int, 3> cell;
  std::array<double, 8> w;
  if (!lattice.locate(p, cell, w))
    throw Error(ErrorKind::PointOutsideDomain, "sample point outside the lattice domain");
  const auto idx = lattice.corners(cell);
  double s = 0.0;
  for (int c = 0; c < 8; ++c)
    s += w[c] * values[idx[c]];
  return s;
}

VectorGrid splat_vector_field(const PointCloud& cloud, const Aabb& domain, int depth) {
  if (!cloud.has_normals())
    throw Error(ErrorKind::PreconditionViolation, "splatting requires oriented points");
  cloud.validate();
  if (cloud.empty())
    throw Error(ErrorKind::EmptyInput, "no points to splat");
  VectorGrid field{Lattice(domain, depth), {}};
  field.values.assign(field.lattice.node_count(), Vec3::Zero());
  const double inv_n = 1.0 / static_cast<double>(cloud.size());
  std::array<int, 3> cell;
  std::array<double, 8> w;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (!field.lattice.locate(cloud.points[i], cell, w))
      throw Error(ErrorKind::PointOutsideDomain,
                  "point " + std::to_string(i) + " lies outside the domain", i);
    const auto idx = field.lattice.corners(cell);
    const Vec3& n = cloud.normals[i];
    for (int c = 0; c < 8; ++c)
      field.values[idx[c]] += (w[c] * inv_n) * n;
  }
  return field;
}

namespace {

using Vector = std::vector<double>;

double dot(const Vector& a, const Vector& b) {
  return deterministic_sum(a.size(), [&](std::size_t i) { return a[i] * b[i]; });
}

struct SampleStamp {
  std::array<std::size_t, 8> nodes;
  std::array<double, 8> weights;
};

/// One level of the multigrid hierarchy: operator h * graph Laplacian plus
/// the screening stamps of the samples on this lattice.
struct Level {
  Lattice lattice;
  double screening = 0.0;  // alpha / N
  std::vector<SampleStamp> stamps;
  Vector inv_diag;

  // V-cycle work vectors.
  Vector rhs, x, r;

  void build(const Lattice& lat, std::span<const Point3> samples, double alpha) {
    lattice = lat;
    screening = samples.empty() ? 0.0 : alpha / static_cast<double>(samples.size());
    stamps.clear();
    if (screening > 0.0) {
      stamps.reserve(samples.size());
      std::array<int, 3> cell;
      std::array<double, 8> w;
      for (std::size_t i = 0; i < samples.size(); ++i) {
        if (!lattice.locate(samples[i], cell, w))
          throw Error(ErrorKind::PointOutsideDomain,
                      "sample " + std::to_string(i) + " lies outside the domain", i);
        stamps.push_back(SampleStamp{lattice.corners(cell), w});
      }
    }
    // Damped-Jacobi diagonal: the Laplacian part is scaled by 1/omega and
    // the screening part uses its row l1-norm, which keeps 2D - A positive
    // definite and the smoother convergent for any screening weight.
    constexpr double kOmega = 0.8;
    const int n = lattice.nodes();
    const double h = lattice.spacing();
    inv_diag.assign(lattice.node_count(), 0.0);
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t kk) {
      const int k = static_cast<int>(kk);
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
          const int deg = (i > 0) + (i < n - 1) + (j > 0) + (j < n - 1) + (k > 0) + (k < n - 1);
          inv_diag[lattice.index(i, j, k)] = h * deg / kOmega;
        }
    });
    for (const auto& s : stamps) {
      double row = 0.0;
      for (double w : s.weights)
        row += w;
      for (int c = 0; c < 8; ++c)
        inv_diag[s.nodes[c]] += screening * s.weights[c] * row;
    }
    for (double& d : inv_diag)
      d = 1.0 / d;
  }

  void allocate_work() {
    rhs.assign(lattice.node_count(), 0.0);
    x.assign(lattice.node_count(), 0.0);
    r.assign(lattice.node_count(), 0.0);
  }

  /// Calls emit(v, (h * graph Laplacian * in)[v]) for every node.
  template <class Emit>
  void for_each_laplacian(const Vector& in, Emit&& emit) const {
    const int n = lattice.nodes();
    const double h = lattice.spacing();
    const std::size_t sy = static_cast<std::size_t>(n);
    const std::size_t sz = sy * sy;
    const double* x = in.data();
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t kk) {
      const int k = static_cast<int>(kk);
      for (int j = 0; j < n; ++j) {
        const std::size_t row = lattice.index(0, j, k);
        const bool ylo = j > 0, yhi = j < n - 1, zlo = k > 0, zhi = k < n - 1;
        const auto general = [&](int i) {
          const std::size_t v = row + static_cast<std::size_t>(i);
          const double xv = x[v];
          double acc = 0.0;
          if (i > 0) acc += xv - x[v - 1];
          if (i < n - 1) acc += xv - x[v + 1];
          if (ylo) acc += xv - x[v - sy];
          if (yhi) acc += xv - x[v + sy];
          if (zlo) acc += xv - x[v - sz];
          if (zhi) acc += xv - x[v + sz];
          emit(v, h * acc);
        };
        if (!(ylo && yhi && zlo && zhi) || n < 3) {
          for (int i = 0; i < n; ++i)
            general(i);
          continue;
        }
        general(0);
        for (std::size_t v = row + 1; v < row + sy - 1; ++v)
          emit(v, h * (6.0 * x[v] - x[v - 1] - x[v + 1] - x[v - sy] - x[v + sy] - x[v - sz] -
                       x[v + sz]));
        general(n - 1);
      }
    });
  }

  /// Calls emit(node, value) with value = (screening * M * in) restricted to
  /// the nodes of each stamp; nodes may repeat.
  template <class Emit>
  void for_each_screening(const Vector& in, Emit&& emit) const {
    for (const auto& s : stamps) {
      double value = 0.0;
      for (int c = 0; c < 8; ++c)
        value += s.weights[c] * in[s.nodes[c]];
      value *= screening;
      for (int c = 0; c < 8; ++c)
        emit(s.nodes[c], value * s.weights[c]);
    }
  }

  /// out = A in.
  void apply(const Vector& in, Vector& out) const {
    for_each_laplacian(in, [&](std::size_t v, double lap) { out[v] = lap; });
    for_each_screening(in, [&](std::size_t v, double m) { out[v] += m; });
  }

  /// out = b - A in.
  void residual(const Vector& b, const Vector& in, Vector& out) const {
    for_each_laplacian(in, [&](std::size_t v, double lap) { out[v] = b[v] - lap; });
    for_each_screening(in, [&](std::size_t v, double m) { out[v] -= m; });
  }

  /// One damped-Jacobi sweep: out = in + D^-1 (b - A in).
  void jacobi(const Vector& b, const Vector& in, Vector& out) const {
    for_each_laplacian(in, [&](std::size_t v, double lap) {
      out[v] = in[v] + inv_diag[v] * (b[v] - lap);
    });
    for_each_screening(in, [&](std::size_t v, double m) { out[v] -= inv_diag[v] * m; });
  }
};

/// Vertex-centred trilinear prolongation and its transpose. Both are tensor
/// products of the 1-d stencil (1/2, 1, 1/2) and are applied one axis at a
/// time on coarse-plane buffers.
void prolong_add(const Lattice& coarse, const Vector& xc, const Lattice& fine, Vector& xf) {
  const std::size_t nc = static_cast<std::size_t>(coarse.nodes());
  const std::size_t nf = static_cast<std::size_t>(fine.nodes());
  parallel_for(nf, [&](std::size_t k) {
    thread_local Vector plane, row;
    plane.resize(nc * nc);
    row.resize(nc);
    // Interpolate along z into a coarse-resolution plane.
    const double* p0 = xc.data() + (k / 2) * nc * nc;
    const double* p1 = xc.data() + ((k + 1) / 2) * nc * nc;
    for (std::size_t t = 0; t < nc * nc; ++t)
      plane[t] = 0.5 * (p0[t] + p1[t]);
    for (std::size_t j = 0; j < nf; ++j) {
      const double* r0 = plane.data() + (j / 2) * nc;
      const double* r1 = plane.data() + ((j + 1) / 2) * nc;
      for (std::size_t i = 0; i < nc; ++i)
        row[i] = 0.5 * (r0[i] + r1[i]);
      double* out = xf.data() + (k * nf + j) * nf;
      for (std::size_t i = 0; i + 1 < nc; ++i) {
        out[2 * i] += row[i];
        out[2 * i + 1] += 0.5 * (row[i] + row[i + 1]);
      }
      out[nf - 1] += row[nc - 1];
    }
  });
}

void restrict_to(const Lattice& fine, const Vector& rf, const Lattice& coarse, Vector& rc) {
  const std::size_t nc = static_cast<std::size_t>(coarse.nodes());
  const std::size_t nf = static_cast<std::size_t>(fine.nodes());
  parallel_for(nc, [&](std::size_t K) {
    thread_local Vector plane, rows;
    plane.resize(nf * nf);
    rows.resize(nc * nf);
    // Fine planes 2K-1, 2K, 2K+1 with weights 1/2, 1, 1/2.
    const double* mid = rf.data() + 2 * K * nf * nf;
    for (std::size_t t = 0; t < nf * nf; ++t)
      plane[t] = mid[t];
    for (std::size_t side : {std::size_t{0}, std::size_t{1}}) {
      if (side == 0 && K == 0) continue;
      if (side == 1 && K + 1 == nc) continue;
      const double* q = side == 0 ? mid - nf * nf : mid + nf * nf;
      for (std::size_t t = 0; t < nf * nf; ++t)
        plane[t] += 0.5 * q[t];
    }
    for (std::size_t J = 0; J < nc; ++J) {
      double* out = rows.data() + J * nf;
      const double* m = plane.data() + 2 * J * nf;
      for (std::size_t i = 0; i < nf; ++i)
        out[i] = m[i];
      if (J > 0)
        for (std::size_t i = 0; i < nf; ++i)
          out[i] += 0.5 * m[i - nf];
      if (J + 1 < nc)
        for (std::size_t i = 0; i < nf; ++i)
          out[i] += 0.5 * m[i + nf];
    }
    double* dst = rc.data() + K * nc * nc;
    for (std::size_t J = 0; J < nc; ++J) {
      const double* in = rows.data() + J * nf;
      for (std::size_t I = 0; I < nc; ++I) {
        double s = in[2 * I];
        if (I > 0) s += 0.5 * in[2 * I - 1];
        if (I + 1 < nc) s += 0.5 * in[2 * I + 1];
        dst[J * nc + I] = s;
      }
    }
  });
}

class Multigrid {
public:
  Multigrid(const Lattice& finest, std::span<const Point3> samples, double alpha) {
    constexpr int kCoarsest = 2;
    const int coarsest = std::min(kCoarsest, finest.depth());
    levels_.resize(static_cast<std::size_t>(finest.depth() - coarsest + 1));
    for (std::size_t l = 0; l < levels_.size(); ++l) {
      const int depth = coarsest + static_cast<int>(l);
      levels_[l].build(Lattice(finest.domain(), depth), samples, alpha);
      if (l + 1 < levels_.size())
        levels_[l].allocate_work();
    }
    levels_.back().r.assign(finest.node_count(), 0.0);
    build_coarse_inverse();
  }

  const Level& finest() const { return levels_.back(); }

  /// z = B r, one symmetric V-cycle.
  void precondition(const Vector& r, Vector& z) {
    cycle(levels_.size() - 1, r, z);
  }

private:
  void build_coarse_inverse() {
    const Level& c = levels_.front();
    const auto n = static_cast<Eigen::Index>(c.lattice.node_count());
    Eigen::MatrixXd a(n, n);
    Vector e(static_cast<std::size_t>(n), 0.0), col(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
      e[static_cast<std::size_t>(i)] = 1.0;
      c.apply(e, col);
      e[static_cast<std::size_t>(i)] = 0.0;
      for (Eigen::Index r = 0; r < n; ++r)
        a(r, i) = col[static_cast<std::size_t>(r)];
    }
    a = 0.5 * (a + a.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
    const Eigen::VectorXd& lambda = eig.eigenvalues();
    const double cutoff = 1e-10 * lambda.cwiseAbs().maxCoeff();
    Eigen::VectorXd inv = lambda.unaryExpr([&](double l) { return l > cutoff ? 1.0 / l : 0.0; });
    coarse_inverse_ = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
  }

  /// `sweeps` Jacobi sweeps on x, using `tmp` as the second buffer.
  static void smooth(const Level& lv, const Vector& b, Vector& x, Vector& tmp, int sweeps) {
    for (int s = 0; s < sweeps; ++s) {
      lv.jacobi(b, x, tmp);
      x.swap(tmp);
    }
  }

  void cycle(std::size_t l, const Vector& b, Vector& x) {
    Level& lv = levels_[l];
    if (l == 0) {
      Eigen::Map<const Eigen::VectorXd> bb(b.data(), static_cast<Eigen::Index>(b.size()));
      Eigen::Map<Eigen::VectorXd> xx(x.data(), static_cast<Eigen::Index>(x.size()));
      xx = coarse_inverse_ * bb;
      return;
    }
    constexpr int kSweeps = 2;
    // First sweep from a zero guess is just D^-1 b.
    parallel_for(x.size(), [&](std::size_t i) { x[i] = lv.inv_diag[i] * b[i]; });
    smooth(lv, b, x, lv.r, kSweeps - 1);
    lv.residual(b, x, lv.r);
    Level& coarse = levels_[l - 1];
    restrict_to(lv.lattice, lv.r, coarse.lattice, coarse.rhs);
    cycle(l - 1, coarse.rhs, coarse.x);
    prolong_add(coarse.lattice, coarse.x, lv.lattice, x);
    smooth(lv, b, x, lv.r, kSweeps);
  }

  std::vector<Level> levels_;
  Eigen::MatrixXd coarse_inverse_;
};

Vector divergence(const VectorGrid& field) {
  const Lattice& lat = field.lattice;
  const int n = lat.nodes();
  const double h2 = lat.spacing() * lat.spacing();
  Vector b(lat.node_count(), 0.0);
  const std::size_t stride[3] = {1, static_cast<std::size_t>(n),
                                 static_cast<std::size_t>(n) * static_cast<std::size_t>(n)};
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t kk) {
    const int k = static_cast<int>(kk);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const std::size_t v = lat.index(i, j, k);
        const int coord[3] = {i, j, k};
        double s = 0.0;
        for (int a = 0; a < 3; ++a) {
          const double va = field.values[v][a];
          if (coord[a] > 0)
            s += 0.5 * (field.values[v - stride[a]][a] + va);
          if (coord[a] < n - 1)
            s -= 0.5 * (va + field.values[v + stride[a]][a]);
        }
        b[v] = h2 * s;
      }
  });
  return b;
}

} // namespace

struct ScreenedPoissonSolver::Impl {
  PoissonParams params;
  Lattice lattice;
  std::vector<SampleStamp> samples;  // finest-level stamps of every sample
  Multigrid mg;
  Vector b, r, z, p, ap;

  Impl(const Lattice& lat, std::span<const Point3> points, const PoissonParams& prm)
      : params(prm), lattice(lat), mg(lat, points, prm.point_weight) {
    samples.reserve(points.size());
    std::array<int, 3> cell;
    std::array<double, 8> w;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (!lattice.locate(points[i], cell, w))
        throw Error(ErrorKind::PointOutsideDomain,
                    "point " + std::to_string(i) + " lies outside the domain", i);
      samples.push_back(SampleStamp{lattice.corners(cell), w});
    }
    const std::size_t n = lattice.node_count();
    for (Vector* v : {&b, &r, &z, &p, &ap})
      v->assign(n, 0.0);
  }

  /// Divergence of the splatted normal field, accumulated point by point
  /// without materializing the field.
  void divergence_from_normals(std::span<const UnitVector3> normals) {
    std::fill(b.begin(), b.end(), 0.0);
    const int n = lattice.nodes();
    const double h = lattice.spacing();
    const double scale = 0.5 * h * h / static_cast<double>(normals.size());
    const std::size_t stride[3] = {1, static_cast<std::size_t>(n),
                                   static_cast<std::size_t>(n) * static_cast<std::size_t>(n)};
    for (std::size_t s = 0; s < samples.size(); ++s) {
      const SampleStamp& st = samples[s];
      const Vec3& nrm = normals[s];
      for (int c = 0; c < 8; ++c) {
        const std::size_t u = st.nodes[c];
        const std::size_t i = u % n, j = u / n % n, k = u / stride[2];
        const std::size_t coord[3] = {i, j, k};
        for (int a = 0; a < 3; ++a) {
          const double q = scale * st.weights[c] * nrm[a];
          if (coord[a] > 0) {
            b[u] += q;
            b[u - stride[a]] -= q;
          }
          if (coord[a] + 1 < static_cast<std::size_t>(n)) {
            b[u] -= q;
            b[u + stride[a]] += q;
          }
        }
      }
    }
  }

  SolveResult run(const ScalarGrid* initial_guess) {
    const std::size_t n = lattice.node_count();
    SolveResult result{ScalarGrid{lattice, Vector(n, 0.0)}, {}};
    const double bnorm = std::sqrt(dot(b, b));
    if (bnorm == 0.0)
      return result;
    const Level& A = mg.finest();
    Vector& x = result.grid.values;
    if (initial_guess && initial_guess->values.size() == n &&
        initial_guess->lattice.depth() == lattice.depth())
      x = initial_guess->values;

    A.residual(b, x, r);
    double rel = std::sqrt(dot(r, r)) / bnorm;
    int iters = 0;
    while (rel > params.cg_tolerance && iters < params.cg_max_iters) {
      const double rel_at_start = rel;
      mg.precondition(r, z);
      p = z;
      double rz = dot(r, z);
      while (iters < params.cg_max_iters) {
        A.apply(p, ap);
        const double pap = dot(p, ap);
        if (!(pap > 0.0))
          break;
        const double step = rz / pap;
        parallel_for(n, [&](std::size_t i) {
          x[i] += step * p[i];
          r[i] -= step * ap[i];
        });
        ++iters;
        if (std::sqrt(dot(r, r)) / bnorm <= params.cg_tolerance)
          break;
        mg.precondition(r, z);
        const double rz_next = dot(r, z);
        const double beta = rz_next / rz;
        rz = rz_next;
        parallel_for(n, [&](std::size_t i) { p[i] = z[i] + beta * p[i]; });
      }
      // The recurrence residual drifts; confirm against the true one and
      // restart from it when needed.
      A.residual(b, x, r);
      rel = std::sqrt(dot(r, r)) / bnorm;
      if (!std::isfinite(rel))
        throw SolverDiverged(rel, iters);
      if (!(rel < 0.999 * rel_at_start))
        break;
    }
    result.stats = SolveStats{iters, rel};
    if (rel > params.cg_tolerance)
      throw SolverDiverged(rel, iters);
    return result;
  }
};

ScreenedPoissonSolver::ScreenedPoissonSolver(const Lattice& lattice,
                                             std::span<const Point3> samples,
                                             const PoissonParams& params) {
  params.validate();
  if (lattice.depth() != params.depth)
    throw Error(ErrorKind::PreconditionViolation,
                "lattice depth " + std::to_string(lattice.depth()) +
                    " differs from requested depth " + std::to_string(params.depth));
  impl_ = std::make_unique<Impl>(lattice, samples, params);
}

ScreenedPoissonSolver::~ScreenedPoissonSolver() = default;
ScreenedPoissonSolver::ScreenedPoissonSolver(ScreenedPoissonSolver&&) noexcept = default;
ScreenedPoissonSolver& ScreenedPoissonSolver::operator=(ScreenedPoissonSolver&&) noexcept = default;

const Lattice& ScreenedPoissonSolver::lattice() const noexcept { return impl_->lattice; }
std::size_t ScreenedPoissonSolver::sample_count() const noexcept { return impl_->samples.size(); }

SolveResult ScreenedPoissonSolver::solve(const VectorGrid& field, const ScalarGrid* initial_guess) {
  if (field.lattice.depth() != impl_->lattice.depth() ||
      field.values.size() != impl_->lattice.node_count())
    throw Error(ErrorKind::PreconditionViolation, "field lattice does not match the solver");
  impl_->b = divergence(field);
  return impl_->run(initial_guess);
}

SolveResult ScreenedPoissonSolver::solve_oriented(std::span<const UnitVector3> normals,
                                                  const ScalarGrid* initial_guess) {
  if (normals.size() != impl_->samples.size())
    throw Error(ErrorKind::LengthMismatch, std::to_string(normals.size()) + " normals for " +
                                               std::to_string(impl_->samples.size()) +
                                               " samples");
  impl_->divergence_from_normals(normals);
  return impl_->run(initial_guess);
}

SolveResult solve_screened_poisson(const VectorGrid& field, const PointCloud& samples,
                                   const PoissonParams& params, const ScalarGrid* initial_guess) {
  ScreenedPoissonSolver solver(field.lattice, samples.points, params);
  return solver.solve(field, initial_guess);
}

// ------------------------------------------------------------ marching cubes

namespace {

/// Triangle lists over the 12 local cube edges, generated from face-by-face
/// contour segments. A face whose corners alternate around iso is split
/// according to bit (2 axis + side) of a mask: set when the corners above iso
/// are joined through the face, clear when they are separated.
struct CaseTable {
  std::array<std::array<int, 2>, 12> edge_corners{};
  std::array<int, 12> edge_axis{};
  /// Corners of face 2 a + side in ring order.
  std::array<std::array<int, 4>, 6> face_ring{};
  /// Faces of each configuration whose corners alternate around iso.
  std::array<std::uint8_t, 256> ambiguous{};
  std::vector<std::vector<std::array<int, 3>>> triangles;  // [config * 64 + mask]

  CaseTable() {
    // Edges along axis a from each corner lacking bit a.
    int e = 0;
    for (int a = 0; a < 3; ++a)
      for (int c = 0; c < 8; ++c)
        if (!(c >> a & 1)) {
          edge_corners[e] = {c, c | (1 << a)};
          edge_axis[e] = a;
          ++e;
        }
    const int uv[4][2] = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    for (int a = 0; a < 3; ++a)
      for (int side = 0; side < 2; ++side) {
        const int u = (a + 1) % 3, v = (a + 2) % 3;
        for (int m = 0; m < 4; ++m)
          face_ring[2 * a + side][m] = (side << a) | (uv[m][0] << u) | (uv[m][1] << v);
      }
    triangles.resize(256 * 64);
    for (int config = 0; config < 256; ++config) {
      const auto above = [&](int c) { return (config >> c & 1) != 0; };
      for (int f = 0; f < 6; ++f) {
        const auto& r = face_ring[f];
        if (above(r[0]) == above(r[2]) && above(r[1]) == above(r[3]) && above(r[0]) != above(r[1]))
          ambiguous[config] |= static_cast<std::uint8_t>(1 << f);
      }
      for (int mask = 0; mask < 64; ++mask)
        if ((mask & ~ambiguous[config]) == 0)
          triangles[static_cast<std::size_t>(config * 64 + mask)] = build(config, mask);
    }
  }

  const std::vector<std::array<int, 3>>& lookup(int config, int mask) const {
    return triangles[static_cast<std::size_t>(config * 64 + mask)];
  }

  int edge_between(int c0, int c1) const {
    for (int e = 0; e < 12; ++e)
      if ((edge_corners[e][0] == c0 && edge_corners[e][1] == c1) ||
          (edge_corners[e][0] == c1 && edge_corners[e][1] == c0))
        return e;
    return -1;
  }

  static Vec3 corner_pos(int c) { return Vec3(c & 1, c >> 1 & 1, c >> 2 & 1); }

  Vec3 edge_mid(int e) const {
    return 0.5 * (corner_pos(edge_corners[e][0]) + corner_pos(edge_corners[e][1]));
  }

  std::vector<std::array<int, 3>> build(int config, int mask) const {
    const auto above = [&](int c) { return (config >> c & 1) != 0; };
    std::array<int, 12> next;
    next.fill(-1);
    for (int f = 0; f < 6; ++f) {
      const int a = f / 2, side = f % 2;
      const auto& ring = face_ring[f];
      Vec3 outward = Vec3::Zero();
      outward[a] = side ? 1.0 : -1.0;

      int crossing[4];
      int count = 0;
      for (int m = 0; m < 4; ++m)
        crossing[m] = above(ring[m]) != above(ring[(m + 1) % 4]) ? edge_between(ring[m], ring[(m + 1) % 4]) : -1;
      for (int m = 0; m < 4; ++m)
        count += crossing[m] >= 0;

      std::vector<std::array<int, 2>> segments;
      if (count == 2) {
        std::array<int, 2> seg{};
        int s = 0;
        for (int m = 0; m < 4; ++m)
          if (crossing[m] >= 0)
            seg[s++] = crossing[m];
        segments.push_back(seg);
      } else if (count == 4) {
        // Cut off each corner on the separated side.
        const bool cut_above = !(mask >> f & 1);
        for (int m = 0; m < 4; ++m)
          if (above(ring[m]) == cut_above)
            segments.push_back({crossing[(m + 3) % 4], crossing[m]});
      }
      for (auto seg : segments) {
        const int ea = seg[0];
        const int c0 = edge_corners[ea][0], c1 = edge_corners[ea][1];
        const Vec3 g = above(c0) ? corner_pos(c1) - corner_pos(c0)
                                 : corner_pos(c0) - corner_pos(c1);
        const Vec3 d = edge_mid(seg[1]) - edge_mid(seg[0]);
        if (g.cross(d).dot(outward) > 0.0)
          std::swap(seg[0], seg[1]);
        if (next[seg[0]] != -1)
          throw std::logic_error("inconsistent marching cubes contour");
        next[seg[0]] = seg[1];
      }
    }

    std::vector<std::array<int, 3>> tris;
    std::array<bool, 12> used{};
    for (int start = 0; start < 12; ++start) {
      if (next[start] < 0 || used[start])
        continue;
      std::vector<int> loop;
      for (int e = start; !used[e]; e = next[e]) {
        if (e < 0)
          throw std::logic_error("open marching cubes contour");
        used[e] = true;
        loop.push_back(e);
      }
      for (std::size_t i = 1; i + 1 < loop.size(); ++i)
        tris.push_back({loop[0], loop[i], loop[i + 1]});
    }
    return tris;
  }
};

const CaseTable& case_table() {
  static const CaseTable table;
  return table;
}

TriangleMesh extract_impl(const ScalarGrid& grid, double iso, bool toward_increasing) {
  const Lattice& lat = grid.lattice;
  const CaseTable& table = case_table();
  const int cells = lat.cells();
  const auto& val = grid.values;
  for (double v : val)
    if (!std::isfinite(v))
      throw Error(ErrorKind::PreconditionViolation, "implicit function is not finite");

  TriangleMesh mesh;
  std::unordered_map<std::uint64_t, std::int32_t> vertex_of_edge;
  vertex_of_edge.reserve(1 << 16);
  const auto vertex = [&](std::size_t node, int axis, std::size_t other) -> std::int32_t {
    const std::uint64_t key = static_cast<std::uint64_t>(node) * 3 + static_cast<std::uint64_t>(axis);
    auto [it, inserted] = vertex_of_edge.try_emplace(key, static_cast<std::int32_t>(mesh.vertices.size()));
    if (inserted) {
      const int n = lat.nodes();
      const std::size_t i = node % n, j = node / n % n, k = node / (static_cast<std::size_t>(n) * n);
      Point3 pa = lat.position(static_cast<int>(i), static_cast<int>(j), static_cast<int>(k));
      Point3 pb = pa;
      pb[axis] += lat.spacing();
      const double a = val[node], b = val[other];
      const double t = (iso - a) / (b - a);
      mesh.vertices.push_back(pa + t * (pb - pa));
    }
    return it->second;
  };

  std::array<std::size_t, 8> idx;
  for (int k = 0; k < cells; ++k)
    for (int j = 0; j < cells; ++j)
      for (int i = 0; i < cells; ++i) {
        idx = lat.corners({i, j, k});
        int config = 0;
        for (int c = 0; c < 8; ++c)
          if (val[idx[c]] > iso)
            config |= 1 << c;
        if (config == 0 || config == 255)
          continue;
        int mask = 0;
        for (int f = 0; f < 6; ++f) {
          if (!(table.ambiguous[config] >> f & 1))
            continue;
          // Bilinear saddle value relative to iso.
          const auto& r = table.face_ring[f];
          const double a0 = val[idx[r[0]]] - iso, a1 = val[idx[r[1]]] - iso;
          const double a2 = val[idx[r[2]]] - iso, a3 = val[idx[r[3]]] - iso;
          const double saddle = (a0 * a2 - a1 * a3) / (a0 + a2 - a1 - a3);
          if (saddle > 0.0)
            mask |= 1 << f;
        }
        for (const auto& tri : table.lookup(config, mask)) {
          Face f;
          for (int m = 0; m < 3; ++m) {
            const auto& ec = table.edge_corners[tri[m]];
            f[m] = vertex(idx[ec[0]], table.edge_axis[tri[m]], idx[ec[1]]);
          }
          if (toward_increasing)
            std::swap(f[1], f[2]);
          mesh.faces.push_back(f);
        }
      }
  if (mesh.faces.empty())
    throw Error(ErrorKind::EmptySurface, "no lattice edge crosses the isovalue");
  return mesh;
}

} // namespace

TriangleMesh extract_isosurface(const ScalarGrid& grid, double iso) {
  return extract_impl(grid, iso, false);
}

Reconstructor::Reconstructor(std::span<const Point3> points, const Aabb& domain,
                             const PoissonParams& params)
    : points_(points.begin(), points.end()),
      solver_((params.validate(), Lattice(domain, params.depth)), points, params) {
  if (points_.size() < 4)
    throw Error(ErrorKind::PreconditionViolation, "reconstruction needs at least four points");
}

Reconstructor::Reconstructor(std::span<const Point3> points, const PoissonParams& params)
    : Reconstructor(points,
                    points.size() < 4 ? Aabb{} : bounding_cube(points, params.pad_fraction),
                    params) {}

ReconstructResult Reconstructor::run(std::span<const UnitVector3> normals,
                                     const ScalarGrid* initial_guess) {
  SolveResult solved = solver_.solve_oriented(normals, initial_guess);
  const double iso = deterministic_sum(points_.size(), [&](std::size_t i) {
                       return solved.grid.sample(points_[i]);
                     }) /
                     static_cast<double>(points_.size());
  // The field follows the normals, so the implicit function increases along
  // them; winding toward increasing values keeps faces aligned with the input
  // orientation.
  TriangleMesh mesh = extract_impl(solved.grid, iso, true);
  return ReconstructResult{std::move(mesh), std::move(solved.grid), iso, solved.stats};
}

ReconstructResult reconstruct_in(const PointCloud& cloud, const Aabb& domain,
                                 const PoissonParams& params, const ScalarGrid* initial_guess) {
  params.validate();
  if (!cloud.has_normals())
    throw Error(ErrorKind::PreconditionViolation, "reconstruction requires oriented points");
  if (cloud.size() < 4)
    throw Error(ErrorKind::PreconditionViolation, "reconstruction needs at least four points");
  cloud.validate();
  return Reconstructor(cloud.points, domain, params).run(cloud.normals, initial_guess);
}

ReconstructResult reconstruct(const PointCloud& cloud, const PoissonParams& params,
                              const ScalarGrid* initial_guess) {
  if (cloud.size() < 4)
    throw Error(ErrorKind::PreconditionViolation, "reconstruction needs at least four points");
  return reconstruct_in(cloud, bounding_cube(cloud, params.pad_fraction), params, initial_guess);
}

void write_grid_raw(const std::filesystem::path& path, const ScalarGrid& grid) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
  const std::int32_t depth = grid.lattice.depth();
  out.write(reinterpret_cast<const char*>(&depth), sizeof depth);
  const Aabb& d = grid.lattice.domain();
  for (const Point3* p : {&d.min, &d.max})
    for (int a = 0; a < 3; ++a) {
      const double v = (*p)[a];
      out.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
  for (double v : grid.values) {
    const auto f = static_cast<float>(v);
    out.write(reinterpret_cast<const char*>(&f), sizeof f);
  }
  if (!out)
    throw Error(ErrorKind::IoError, "write failed: " + path.string());
}

ScalarGrid read_grid_raw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorKind::IoError, "cannot open " + path.string() + " for reading");
  std::int32_t depth = 0;
  in.read(reinterpret_cast<char*>(&depth), sizeof depth);
  Aabb d;
  for (Point3* p : {&d.min, &d.max})
    for (int a = 0; a < 3; ++a) {
      double v = 0.0;
      in.read(reinterpret_cast<char*>(&v), sizeof v);
      (*p)[a] = v;
    }
  if (!in || depth < 0 || depth > 10)
    throw Error(ErrorKind::ParseError, path.string() + ": bad grid header", 0);
  ScalarGrid grid{Lattice(d, depth), {}};
  grid.values.resize(grid.lattice.node_count());
  for (auto& v : grid.values) {
    float f = 0.0f;
    in.read(reinterpret_cast<char*>(&f), sizeof f);
    v = f;
  }
  if (!in)
    throw Error(ErrorKind::ParseError, path.string() + ": truncated grid body", 0);
  return grid;
}

} // namespace altrec::poisson
