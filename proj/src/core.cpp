#include "altrec/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace altrec {

UnitVector3::UnitVector3(const Vec3& v) {
  const double n = v.norm();
  if (!(n > 0.0) || !std::isfinite(n))
    throw Error(ErrorKind::PreconditionViolation, "cannot normalize a zero or non-finite vector");
  v_ = v / n;
}

std::optional<UnitVector3> UnitVector3::try_from(const Vec3& v, double min_norm) {
  const double n = v.norm();
  if (!(n >= min_norm) || n == 0.0 || !std::isfinite(n))
    return std::nullopt;
  return UnitVector3(Tag{}, v / n);
}

Aabb Aabb::of(std::span<const Point3> points) {
  if (points.empty())
    throw Error(ErrorKind::EmptyInput, "bounding box of an empty point set");
  Aabb box{points[0], points[0]};
  for (const auto& p : points)
    box.expand(p);
  return box;
}

void PointCloud::validate() const {
  if (!normals.empty() && normals.size() != points.size())
    throw Error(ErrorKind::LengthMismatch,
                std::to_string(normals.size()) + " normals for " +
                    std::to_string(points.size()) + " points");
}

Vec3 TriangleMesh::face_cross(std::size_t f) const {
  const Face& t = faces[f];
  const Point3& a = vertices[t[0]];
  return (vertices[t[1]] - a).cross(vertices[t[2]] - a);
}

std::optional<UnitVector3> TriangleMesh::face_normal(std::size_t f) const {
  return UnitVector3::try_from(face_cross(f));
}

Point3 TriangleMesh::face_centroid(std::size_t f) const {
  const Face& t = faces[f];
  return (vertices[t[0]] + vertices[t[1]] + vertices[t[2]]) / 3.0;
}

void TriangleMesh::validate() const {
  const auto nv = static_cast<std::int64_t>(vertices.size());
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const Face& t = faces[f];
    for (auto v : t)
      if (v < 0 || v >= nv)
        throw Error(ErrorKind::OutOfRange, "face " + std::to_string(f) + " references vertex " +
                                               std::to_string(v), f);
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2])
      throw Error(ErrorKind::OutOfRange, "face " + std::to_string(f) + " repeats a vertex", f);
  }
}

UnitTransform unit_transform_for(const Aabb& box) {
  const double extent = box.max_extent();
  if (!(extent > 0.0))
    throw Error(ErrorKind::DegenerateExtent, "all points coincide");
  return UnitTransform{1.0 / extent, box.min};
}

PointCloud transform_cloud(const PointCloud& cloud, const UnitTransform& t) {
  PointCloud out;
  out.points.reserve(cloud.size());
  for (const auto& p : cloud.points)
    out.points.push_back(t.apply(p));
  out.normals = cloud.normals;
  return out;
}

TriangleMesh transform_mesh(const TriangleMesh& mesh, const UnitTransform& t) {
  TriangleMesh out;
  out.vertices.reserve(mesh.vertices.size());
  for (const auto& v : mesh.vertices)
    out.vertices.push_back(t.apply(v));
  out.faces = mesh.faces;
  return out;
}

NormalizedCloud normalize_to_unit(const PointCloud& cloud) {
  if (cloud.size() < 2)
    throw Error(ErrorKind::PreconditionViolation, "normalization needs at least two points");
  const UnitTransform t = unit_transform_for(Aabb::of(cloud.points));
  NormalizedCloud out{transform_cloud(cloud, t), t};
  // Pin the largest extent to exactly 1 against rounding in the scale.
  const Aabb box = Aabb::of(out.cloud.points);
  Eigen::Index axis = 0;
  box.extent().maxCoeff(&axis);
  for (auto& p : out.cloud.points)
    if (p[axis] == box.max[axis])
      p[axis] = box.min[axis] + 1.0;
  return out;
}

Aabb bounding_cube(std::span<const Point3> points, double pad_fraction) {
  if (pad_fraction < 0.0)
    throw Error(ErrorKind::PreconditionViolation, "negative pad fraction");
  const Aabb box = Aabb::of(points);
  const double extent = box.max_extent();
  if (!(extent > 0.0))
    throw Error(ErrorKind::DegenerateExtent, "all points coincide");
  const double half = 0.5 * (1.0 + pad_fraction) * extent;
  const Point3 c = box.center();
  Aabb cube{c.array() - half, c.array() + half};
  // Rounding in the centre can leave an extreme point a few ulps outside.
  cube.min = cube.min.cwiseMin(box.min);
  cube.max = cube.max.cwiseMax(box.max);
  return cube;
}

PointCloud sample_mesh_uniform(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed,
                               std::vector<std::int32_t>& source_faces) {
  if (n == 0)
    throw Error(ErrorKind::PreconditionViolation, "sample count must be positive");
  std::vector<double> cumulative(mesh.faces.size());
  double total = 0.0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    total += mesh.face_area(f);
    cumulative[f] = total;
  }
  if (!(total > 0.0))
    throw Error(ErrorKind::EmptyMesh, "mesh has no face of positive area");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  PointCloud out;
  out.points.reserve(n);
  out.normals.reserve(n);
  source_faces.clear();
  source_faces.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = uni(rng) * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    std::size_t f = std::min<std::size_t>(it - cumulative.begin(), cumulative.size() - 1);
    // upper_bound never lands on a zero-area face unless u hits its
    // cumulative value exactly; step forward to the next real face.
    while (mesh.face_area(f) <= 0.0 && f + 1 < mesh.faces.size())
      ++f;
    const double s = std::sqrt(uni(rng));
    const double t = uni(rng);
    const Face& tri = mesh.faces[f];
    const Point3& a = mesh.vertices[tri[0]];
    const Point3& b = mesh.vertices[tri[1]];
    const Point3& c = mesh.vertices[tri[2]];
    out.points.push_back((1.0 - s) * a + s * (1.0 - t) * b + s * t * c);
    out.normals.push_back(*mesh.face_normal(f));
    source_faces.push_back(static_cast<std::int32_t>(f));
  }
  return out;
}

PointCloud sample_mesh_uniform(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed) {
  std::vector<std::int32_t> faces;
  return sample_mesh_uniform(mesh, n, seed, faces);
}

// Region-based closest point (Ericson, Real-Time Collision Detection 5.1.5).
Point3 closest_point_on_triangle(const Point3& p, const Point3& a, const Point3& b,
                                 const Point3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0)
    return a;
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3)
    return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0)
    return a + (d1 / (d1 - d3)) * ab;
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6)
    return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0)
    return a + (d2 / (d2 - d6)) * ac;
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0)
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

namespace {

double box_dist2(const Aabb& box, const Point3& p) {
  const Vec3 d = (box.min - p).cwiseMax(p - box.max).cwiseMax(0.0);
  return d.squaredNorm();
}

} // namespace

MeshIndex MeshIndex::build(const TriangleMesh& mesh) {
  MeshIndex index;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto normal = mesh.face_normal(f);
    if (!normal || mesh.face_area(f) <= 0.0)
      continue;
    const Face& t = mesh.faces[f];
    index.tris_.push_back(Tri{mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]],
                              *normal, static_cast<std::int32_t>(f)});
  }
  if (index.tris_.empty())
    throw Error(ErrorKind::EmptyMesh, "mesh has no face of positive area");
  std::vector<Point3> centroids;
  centroids.reserve(index.tris_.size());
  for (const auto& t : index.tris_)
    centroids.push_back((t.a + t.b + t.c) / 3.0);
  index.nodes_.reserve(2 * index.tris_.size() / 4 + 1);
  index.build_node(0, static_cast<std::uint32_t>(index.tris_.size()), centroids);
  return index;
}

std::uint32_t MeshIndex::build_node(std::uint32_t first, std::uint32_t count,
                                    std::vector<Point3>& centroids) {
  const auto id = static_cast<std::uint32_t>(nodes_.size());
  nodes_.emplace_back();
  Aabb box{tris_[first].a, tris_[first].a};
  Aabb cbox{centroids[first], centroids[first]};
  for (std::uint32_t i = first; i < first + count; ++i) {
    box.expand(tris_[i].a);
    box.expand(tris_[i].b);
    box.expand(tris_[i].c);
    cbox.expand(centroids[i]);
  }
  nodes_[id].box = box;
  constexpr std::uint32_t kLeaf = 4;
  if (count <= kLeaf) {
    nodes_[id].first = first;
    nodes_[id].count = count;
    return id;
  }
  Eigen::Index axis = 0;
  cbox.extent().maxCoeff(&axis);
  std::vector<std::uint32_t> order(count);
  std::iota(order.begin(), order.end(), first);
  const std::uint32_t half = count / 2;
  std::nth_element(order.begin(), order.begin() + half, order.end(),
                   [&](std::uint32_t l, std::uint32_t r) {
                     if (centroids[l][axis] != centroids[r][axis])
                       return centroids[l][axis] < centroids[r][axis];
                     return tris_[l].face < tris_[r].face;
                   });
  std::vector<Tri> tris;
  std::vector<Point3> cents;
  tris.reserve(count);
  cents.reserve(count);
  for (auto i : order) {
    tris.push_back(tris_[i]);
    cents.push_back(centroids[i]);
  }
  std::copy(tris.begin(), tris.end(), tris_.begin() + first);
  std::copy(cents.begin(), cents.end(), centroids.begin() + first);

  const std::uint32_t left = build_node(first, half, centroids);
  const std::uint32_t right = build_node(first + half, count - half, centroids);
  nodes_[id].first = left;
  nodes_[id].right = right;
  nodes_[id].count = 0;
  return id;
}

ClosestPoint MeshIndex::closest(const Point3& p) const {
  double best_d2 = std::numeric_limits<double>::infinity();
  std::uint32_t best = 0;
  Point3 best_q = Point3::Zero();

  std::uint32_t stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (box_dist2(node.box, p) > best_d2)
      continue;
    if (node.count > 0) {
      for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
        const Tri& t = tris_[i];
        const Point3 q = closest_point_on_triangle(p, t.a, t.b, t.c);
        const double d2 = (q - p).squaredNorm();
        if (d2 < best_d2 || (d2 == best_d2 && t.face < tris_[best].face)) {
          best_d2 = d2;
          best = i;
          best_q = q;
        }
      }
      continue;
    }
    const double dl = box_dist2(nodes_[node.first].box, p);
    const double dr = box_dist2(nodes_[node.right].box, p);
    // Push the farther child first so the nearer one is visited next.
    if (dl <= dr) {
      stack[top++] = node.right;
      stack[top++] = node.first;
    } else {
      stack[top++] = node.first;
      stack[top++] = node.right;
    }
  }
  const Tri& t = tris_[best];
  return ClosestPoint{best_q, t.face, t.normal, std::sqrt(best_d2)};
}

KdTree::KdTree(std::span<const Point3> points, std::uint32_t leaf_size)
    : points_(points.begin(), points.end()), order_(points.size()) {
  std::iota(order_.begin(), order_.end(), 0u);
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / std::max<std::uint32_t>(leaf_size, 1) + 1);
    build(0, static_cast<std::uint32_t>(points_.size()), std::max<std::uint32_t>(leaf_size, 1));
    sorted_.resize(points_.size());
    for (std::size_t i = 0; i < order_.size(); ++i)
      sorted_[i] = points_[order_[i]];
  }
}

std::int32_t KdTree::build(std::uint32_t begin, std::uint32_t end, std::uint32_t leaf) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  Aabb box{points_[order_[begin]], points_[order_[begin]]};
  for (std::uint32_t i = begin; i < end; ++i)
    box.expand(points_[order_[i]]);
  nodes_.push_back(Node{box, begin, end, -1, -1});
  if (end - begin <= leaf)
    return id;
  Eigen::Index axis = 0;
  box.extent().maxCoeff(&axis);
  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t l, std::uint32_t r) {
                     if (points_[l][axis] != points_[r][axis])
                       return points_[l][axis] < points_[r][axis];
                     return l < r;
                   });
  const std::int32_t left = build(begin, mid, leaf);
  const std::int32_t right = build(mid, end, leaf);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

namespace {

inline bool before(double d2, std::uint32_t i, const KdTree::Neighbor& other) {
  return d2 < other.dist2 || (d2 == other.dist2 && i < other.index);
}

} // namespace

void KdTree::nearest_rec(std::int32_t id, const Point3& q, Neighbor& best) const {
  const Node& node = nodes_[id];
  if (node.left < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const double d2 = (sorted_[i] - q).squaredNorm();
      if (before(d2, order_[i], best))
        best = Neighbor{order_[i], d2};
    }
    return;
  }
  const double dl = box_dist2(nodes_[node.left].box, q);
  const double dr = box_dist2(nodes_[node.right].box, q);
  const bool left_first = dl <= dr;
  const std::int32_t first = left_first ? node.left : node.right;
  const std::int32_t second = left_first ? node.right : node.left;
  if ((left_first ? dl : dr) <= best.dist2)
    nearest_rec(first, q, best);
  if ((left_first ? dr : dl) <= best.dist2)
    nearest_rec(second, q, best);
}

KdTree::Neighbor KdTree::nearest(const Point3& q) const {
  if (points_.empty())
    throw Error(ErrorKind::EmptyInput, "nearest-neighbour query on an empty tree");
  Neighbor best{std::numeric_limits<std::uint32_t>::max(),
                std::numeric_limits<double>::infinity()};
  nearest_rec(0, q, best);
  return best;
}

std::optional<KdTree::Neighbor> KdTree::nearest_within(const Point3& q, double bound2) const {
  if (points_.empty())
    return std::nullopt;
  Neighbor best{std::numeric_limits<std::uint32_t>::max(), bound2};
  nearest_rec(0, q, best);
  if (best.index == std::numeric_limits<std::uint32_t>::max() || !(best.dist2 < bound2))
    return std::nullopt;
  return best;
}

bool KdTree::any_within_rec(std::int32_t id, const Point3& q, double bound2) const {
  const Node& node = nodes_[id];
  if (box_dist2(node.box, q) >= bound2)
    return false;
  if (node.left < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i)
      if ((sorted_[i] - q).squaredNorm() < bound2)
        return true;
    return false;
  }
  return any_within_rec(node.left, q, bound2) || any_within_rec(node.right, q, bound2);
}

bool KdTree::any_within(const Point3& q, double bound2) const {
  return !points_.empty() && any_within_rec(0, q, bound2);
}

void KdTree::knn_rec(std::int32_t id, const Point3& q, std::size_t k,
                     std::vector<Neighbor>& best) const {
  const Node& node = nodes_[id];
  if (node.left < 0) {
    // `best` stays sorted by (dist2, index); k is small, so insertion wins
    // over a heap.
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const double d2 = (sorted_[i] - q).squaredNorm();
      const std::uint32_t idx = order_[i];
      if (best.size() == k) {
        if (!before(d2, idx, best.back()))
          continue;
        best.pop_back();
      }
      auto pos = best.end();
      while (pos != best.begin() && before(d2, idx, *(pos - 1)))
        --pos;
      best.insert(pos, Neighbor{idx, d2});
    }
    return;
  }
  const double dl = box_dist2(nodes_[node.left].box, q);
  const double dr = box_dist2(nodes_[node.right].box, q);
  const bool left_first = dl <= dr;
  const std::int32_t first = left_first ? node.left : node.right;
  const std::int32_t second = left_first ? node.right : node.left;
  const auto worth = [&](double d) { return best.size() < k || d <= best.back().dist2; };
  if (worth(left_first ? dl : dr))
    knn_rec(first, q, k, best);
  if (worth(left_first ? dr : dl))
    knn_rec(second, q, k, best);
}

std::vector<KdTree::Neighbor> KdTree::knn(const Point3& q, std::size_t k) const {
  std::vector<Neighbor> out;
  knn(q, k, out);
  return out;
}

void KdTree::knn(const Point3& q, std::size_t k, std::vector<Neighbor>& out) const {
  out.clear();
  if (points_.empty() || k == 0)
    return;
  out.reserve(k + 1);
  knn_rec(0, q, k, out);
}

void KdTree::radius_rec(std::int32_t id, const Point3& q, double r2,
                        std::vector<std::uint32_t>& out) const {
  const Node& node = nodes_[id];
  if (box_dist2(node.box, q) > r2)
    return;
  if (node.left < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i)
      if ((sorted_[i] - q).squaredNorm() <= r2)
        out.push_back(order_[i]);
    return;
  }
  radius_rec(node.left, q, r2, out);
  radius_rec(node.right, q, r2, out);
}

std::vector<std::uint32_t> KdTree::radius(const Point3& q, double r) const {
  std::vector<std::uint32_t> out;
  if (points_.empty() || r < 0.0)
    return out;
  radius_rec(0, q, r * r, out);
  std::sort(out.begin(), out.end());
  return out;
}

} // namespace altrec
