#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <vector>

#include "altrec/core.hpp"

namespace altrec::poisson {

struct PoissonParams {
  /// Lattice resolution: 2^depth cells per axis.
  int depth = 6;
  /// Screening weight (alpha) of the sample data term.
  double point_weight = 1.0;
  double cg_tolerance = 1e-6;
  int cg_max_iters = 2000;
  /// Padding of the bounding cube used by `reconstruct`.
  double pad_fraction = 0.1;

  void validate() const;
};

/// Node lattice of a cube at a given depth: (2^depth + 1)^3 nodes with
/// spacing h = side / 2^depth.
class Lattice {
public:
  Lattice() = default;
  Lattice(const Aabb& domain, int depth);

  const Aabb& domain() const noexcept { return domain_; }
  int depth() const noexcept { return depth_; }
  /// Cells per axis.
  int cells() const noexcept { return cells_; }
  /// Nodes per axis.
  int nodes() const noexcept { return cells_ + 1; }
  std::size_t node_count() const noexcept {
    const auto n = static_cast<std::size_t>(nodes());
    return n * n * n;
  }
  double spacing() const noexcept { return h_; }

  std::size_t index(int i, int j, int k) const noexcept {
    const auto n = static_cast<std::size_t>(nodes());
    return (static_cast<std::size_t>(k) * n + static_cast<std::size_t>(j)) * n +
           static_cast<std::size_t>(i);
  }
  Point3 position(int i, int j, int k) const noexcept {
    return domain_.min + h_ * Vec3(i, j, k);
  }

  /// Cell containing p and the eight trilinear weights of its corners, in
  /// corner order (bit 0 = +x, bit 1 = +y, bit 2 = +z). Returns false when p
  /// is outside the domain.
  bool locate(const Point3& p, std::array<int, 3>& cell, std::array<double, 8>& weights) const;

  /// Node indices of the corners of `cell`, in the same order as `locate`.
  std::array<std::size_t, 8> corners(const std::array<int, 3>& cell) const noexcept;

private:
  Aabb domain_;
  int depth_ = 0;
  int cells_ = 0;
  double h_ = 0.0;
};

struct ScalarGrid {
  Lattice lattice;
  std::vector<double> values;

  /// Trilinear interpolation. p must be inside the domain.
  double sample(const Point3& p) const;
};

struct VectorGrid {
  Lattice lattice;
  std::vector<Vec3> values;
};

/// Trilinear splat of the normals onto the lattice, divided by the point
/// count. Throws PreconditionViolation without normals and
/// PointOutsideDomain(index) for a point outside `domain`.
VectorGrid splat_vector_field(const PointCloud& cloud, const Aabb& domain, int depth);

struct SolveStats {
  int iterations = 0;
  double relative_residual = 0.0;
};

struct SolveResult {
  ScalarGrid grid;
  SolveStats stats;
};

/// Minimizes  sum_edges h^3 (dchi/dx - V)^2 + (point_weight / N) sum_i chi(p_i)^2
/// over the lattice: (L + alpha M) x = b with L the 7-point Neumann Laplacian
/// scaled by h, M the trilinear sample stamps and b the discrete divergence
/// of V. Solved by conjugate gradients preconditioned with a geometric
/// multigrid V-cycle. `initial_guess`, when given, must live on the same
/// lattice. Throws SolverDiverged when the tolerance is not reached.
SolveResult solve_screened_poisson(const VectorGrid& field, const PointCloud& samples,
                                   const PoissonParams& params,
                                   const ScalarGrid* initial_guess = nullptr);

/// Reusable screened Poisson solver for a fixed lattice and fixed sample
/// positions. The multigrid hierarchy and work buffers are built once, so
/// repeated solves with new normals only pay for the iterations.
class ScreenedPoissonSolver {
public:
  /// Throws PointOutsideDomain(index) for a sample outside the lattice and
  /// PreconditionViolation when params.depth differs from the lattice depth.
  ScreenedPoissonSolver(const Lattice& lattice, std::span<const Point3> samples,
                        const PoissonParams& params);
  ~ScreenedPoissonSolver();
  ScreenedPoissonSolver(ScreenedPoissonSolver&&) noexcept;
  ScreenedPoissonSolver& operator=(ScreenedPoissonSolver&&) noexcept;

  const Lattice& lattice() const noexcept;
  std::size_t sample_count() const noexcept;

  SolveResult solve(const VectorGrid& field, const ScalarGrid* initial_guess = nullptr);

  /// Same as solving with splat_vector_field of (samples, normals), without
  /// building the intermediate field. Throws LengthMismatch.
  SolveResult solve_oriented(std::span<const UnitVector3> normals,
                             const ScalarGrid* initial_guess = nullptr);

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Marching cubes on the level set grid == iso with linear interpolation
/// along lattice edges. Triangles are wound so their normals point toward
/// decreasing grid values. Ambiguous cube faces are split by the sign of the
/// bilinear saddle value, so neighbouring cubes agree and the mesh is closed
/// and edge-manifold; negating grid and iso only reverses the winding.
/// Throws EmptySurface if no lattice edge crosses iso.
TriangleMesh extract_isosurface(const ScalarGrid& grid, double iso);

struct ReconstructResult {
  TriangleMesh mesh;
  ScalarGrid grid;
  double iso = 0.0;
  SolveStats stats;
};

/// Full Poisson reconstruction of an oriented cloud: bounding cube, splat,
/// screened solve, and isosurface at the mean implicit value over the
/// samples. The returned mesh is wound so that face normals agree with the
/// orientation of the input normals (outward normals in, outward faces out).
ReconstructResult reconstruct(const PointCloud& cloud, const PoissonParams& params,
                              const ScalarGrid* initial_guess = nullptr);

/// Same, on a caller-chosen cubic domain.
ReconstructResult reconstruct_in(const PointCloud& cloud, const Aabb& domain,
                                 const PoissonParams& params,
                                 const ScalarGrid* initial_guess = nullptr);

/// Repeated reconstructions of one point set with changing normals, as in
/// iterative orientation schemes.
class Reconstructor {
public:
  Reconstructor(std::span<const Point3> points, const PoissonParams& params);
  Reconstructor(std::span<const Point3> points, const Aabb& domain, const PoissonParams& params);

  const Lattice& lattice() const noexcept { return solver_.lattice(); }

  ReconstructResult run(std::span<const UnitVector3> normals,
                        const ScalarGrid* initial_guess = nullptr);

private:
  std::vector<Point3> points_;
  ScreenedPoissonSolver solver_;
};

/// Debug dump: int32 depth, 6 float64 domain min/max, then float32 values in
/// lattice order, all little-endian.
void write_grid_raw(const std::filesystem::path& path, const ScalarGrid& grid);
ScalarGrid read_grid_raw(const std::filesystem::path& path);

} // namespace altrec::poisson
