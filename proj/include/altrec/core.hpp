#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "altrec/error.hpp"

namespace altrec {

using Vec3 = Eigen::Vector3d;
using Point3 = Eigen::Vector3d;

/// Direction of unit length. Construction normalizes; a zero vector yields
/// std::nullopt from `try_from`.
class UnitVector3 {
public:
  UnitVector3() : v_(0.0, 0.0, 1.0) {}
  explicit UnitVector3(const Vec3& v);
  UnitVector3(double x, double y, double z) : UnitVector3(Vec3(x, y, z)) {}

  static std::optional<UnitVector3> try_from(const Vec3& v, double min_norm = 1e-300);

  const Vec3& vec() const noexcept { return v_; }
  operator const Vec3&() const noexcept { return v_; }
  double x() const noexcept { return v_.x(); }
  double y() const noexcept { return v_.y(); }
  double z() const noexcept { return v_.z(); }
  double dot(const Vec3& o) const noexcept { return v_.dot(o); }
  UnitVector3 operator-() const { return UnitVector3(Tag{}, -v_); }

  bool operator==(const UnitVector3& o) const noexcept { return v_ == o.v_; }

private:
  struct Tag {};
  UnitVector3(Tag, const Vec3& v) : v_(v) {}
  Vec3 v_;
};

struct Aabb {
  Point3 min = Point3::Zero();
  Point3 max = Point3::Zero();

  static Aabb of(std::span<const Point3> points);

  Vec3 extent() const { return max - min; }
  Point3 center() const { return 0.5 * (min + max); }
  double max_extent() const { return extent().maxCoeff(); }
  double diagonal() const { return extent().norm(); }
  bool contains(const Point3& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
  void expand(const Point3& p) {
    min = min.cwiseMin(p);
    max = max.cwiseMax(p);
  }
};

struct PointCloud {
  std::vector<Point3> points;
  /// Either empty or exactly one normal per point.
  std::vector<UnitVector3> normals;

  std::size_t size() const noexcept { return points.size(); }
  bool empty() const noexcept { return points.empty(); }
  bool has_normals() const noexcept { return !normals.empty(); }
  /// Throws LengthMismatch when normals are present with the wrong count.
  void validate() const;
};

using Face = std::array<std::int32_t, 3>;

struct TriangleMesh {
  std::vector<Point3> vertices;
  /// Counterclockwise vertex order defines the face normal.
  std::vector<Face> faces;

  bool empty() const noexcept { return faces.empty(); }
  /// Unnormalized (b - a) x (c - a); its norm is twice the face area.
  Vec3 face_cross(std::size_t f) const;
  double face_area(std::size_t f) const { return 0.5 * face_cross(f).norm(); }
  /// Unit normal of a non-degenerate face.
  std::optional<UnitVector3> face_normal(std::size_t f) const;
  Point3 face_centroid(std::size_t f) const;
  /// Throws OutOfRange on bad indices or repeated vertex indices in a face.
  void validate() const;
};

/// Uniform scaling about `offset`: p' = offset + scale * (p - offset).
struct UnitTransform {
  double scale = 1.0;
  Point3 offset = Point3::Zero();

  Point3 apply(const Point3& p) const { return offset + scale * (p - offset); }
  Point3 invert(const Point3& p) const { return offset + (p - offset) / scale; }
};

struct NormalizedCloud {
  PointCloud cloud;
  UnitTransform transform;
};

/// Scales the cloud about its bounding-box minimum so that the largest axis
/// extent becomes exactly 1. Normals are untouched.
NormalizedCloud normalize_to_unit(const PointCloud& cloud);

/// Transform that brings `box` to unit max extent (scaling about box.min).
UnitTransform unit_transform_for(const Aabb& box);
PointCloud transform_cloud(const PointCloud& cloud, const UnitTransform& t);
TriangleMesh transform_mesh(const TriangleMesh& mesh, const UnitTransform& t);

/// Cube centred on the bounding box of `points` with side
/// (1 + pad_fraction) * max extent.
Aabb bounding_cube(std::span<const Point3> points, double pad_fraction = 0.1);
inline Aabb bounding_cube(const PointCloud& cloud, double pad_fraction = 0.1) {
  return bounding_cube(cloud.points, pad_fraction);
}

/// Area-proportional uniform sampling. Each sample carries its face normal.
/// Zero-area faces are never chosen.
PointCloud sample_mesh_uniform(const TriangleMesh& mesh, std::size_t n,
                               std::uint64_t seed);

/// Same as above, also returning the source face of every sample.
PointCloud sample_mesh_uniform(const TriangleMesh& mesh, std::size_t n,
                               std::uint64_t seed,
                               std::vector<std::int32_t>& source_faces);

/// Closest point on triangle (a, b, c) to p.
Point3 closest_point_on_triangle(const Point3& p, const Point3& a,
                                 const Point3& b, const Point3& c);

struct ClosestPoint {
  Point3 point;
  std::int32_t face = -1;
  UnitVector3 normal;
  double dist = 0.0;
};

/// Bounding-volume hierarchy over the non-degenerate faces of a mesh.
/// Immutable after construction; concurrent queries are safe.
class MeshIndex {
public:
  /// Throws EmptyMesh when the mesh has no face of positive area.
  static MeshIndex build(const TriangleMesh& mesh);

  /// Exact closest point over all indexed faces; ties go to the lowest face
  /// index.
  ClosestPoint closest(const Point3& p) const;

  std::size_t face_count() const noexcept { return tris_.size(); }

private:
  struct Tri {
    Point3 a, b, c;
    UnitVector3 normal;
    std::int32_t face;
  };
  struct Node {
    Aabb box;
    std::uint32_t first = 0;  // leaf: first triangle; inner: left child
    std::uint32_t count = 0;  // leaf: triangle count; inner: 0
    std::uint32_t right = 0;
  };

  std::uint32_t build_node(std::uint32_t first, std::uint32_t count,
                           std::vector<Point3>& centroids);

  std::vector<Tri> tris_;
  std::vector<Node> nodes_;
};

/// Static 3-d tree over a point set. Queries are exact; equal distances are
/// broken toward the lower point index.
class KdTree {
public:
  KdTree() = default;
  explicit KdTree(std::span<const Point3> points, std::uint32_t leaf_size = 12);

  struct Neighbor {
    std::uint32_t index;
    double dist2;
  };

  std::size_t size() const noexcept { return points_.size(); }

  /// Nearest point. The tree must be nonempty.
  Neighbor nearest(const Point3& q) const;

  /// Nearest point strictly closer than sqrt(bound2), if any.
  std::optional<Neighbor> nearest_within(const Point3& q, double bound2) const;

  /// Whether some point lies strictly closer than sqrt(bound2).
  bool any_within(const Point3& q, double bound2) const;

  /// k nearest points sorted by (dist2, index).
  std::vector<Neighbor> knn(const Point3& q, std::size_t k) const;
  /// Same, reusing the storage of `out`.
  void knn(const Point3& q, std::size_t k, std::vector<Neighbor>& out) const;

  /// Indices of all points with |p - q| <= radius, ascending by index.
  std::vector<std::uint32_t> radius(const Point3& q, double radius) const;

  const Point3& point(std::uint32_t i) const { return points_[i]; }

private:
  struct Node {
    Aabb box;
    std::uint32_t begin = 0, end = 0;
    std::int32_t left = -1, right = -1;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end, std::uint32_t leaf);
  void nearest_rec(std::int32_t node, const Point3& q, Neighbor& best) const;
  bool any_within_rec(std::int32_t node, const Point3& q, double bound2) const;
  void knn_rec(std::int32_t node, const Point3& q, std::size_t k,
               std::vector<Neighbor>& heap) const;
  void radius_rec(std::int32_t node, const Point3& q, double r2,
                  std::vector<std::uint32_t>& out) const;

  std::vector<Point3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Point3> sorted_;  // points_ permuted by order_
  std::vector<Node> nodes_;
};

} // namespace altrec
