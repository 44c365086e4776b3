#pragma once

#include <array>
#include <cmath>
#include <map>
#include <random>
#include <utility>
#include <vector>

#include "altrec/core.hpp"

namespace altrec::testing {

inline const Point3 kCenter(0.5, 0.5, 0.5);
inline constexpr double kRadius = 0.4;

inline Vec3 random_direction(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  for (;;) {
    Vec3 v(g(rng), g(rng), g(rng));
    if (v.norm() > 1e-12)
      return v.normalized();
  }
}

/// Points on the sphere (center, radius) with outward normals.
inline PointCloud sphere_cloud(std::size_t n, std::uint64_t seed, double radius = kRadius,
                               const Point3& center = kCenter) {
  std::mt19937_64 rng(seed);
  PointCloud c;
  c.points.reserve(n);
  c.normals.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 d = random_direction(rng);
    c.points.push_back(center + radius * d);
    c.normals.emplace_back(d);
  }
  return c;
}

inline PointCloud with_noise(const PointCloud& c, double stddev, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, stddev);
  PointCloud out;
  out.points = c.points;
  for (auto& p : out.points)
    p += Vec3(g(rng), g(rng), g(rng));
  return out;
}

/// Subdivided icosahedron projected onto the sphere; faces wound outward.
inline TriangleMesh icosphere(int subdivisions, double radius = 1.0,
                              const Point3& center = Point3::Zero()) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0},
                         {0, -1, t}, {0, 1, t}, {0, -1, -t}, {0, 1, -t},
                         {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  std::vector<Face> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                         {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                         {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                         {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (auto& p : v)
    p.normalize();
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> mid;
    auto midpoint = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = mid.find(key);
      if (it != mid.end())
        return it->second;
      v.push_back((v[a] + v[b]).normalized());
      const int id = static_cast<int>(v.size()) - 1;
      mid.emplace(key, id);
      return id;
    };
    std::vector<Face> next;
    for (const auto& tri : f) {
      const int a = midpoint(tri[0], tri[1]);
      const int b = midpoint(tri[1], tri[2]);
      const int c = midpoint(tri[2], tri[0]);
      next.push_back({tri[0], a, c});
      next.push_back({tri[1], b, a});
      next.push_back({tri[2], c, b});
      next.push_back({a, b, c});
    }
    f = std::move(next);
  }
  TriangleMesh m;
  for (const auto& p : v)
    m.vertices.push_back(center + radius * p);
  m.faces = std::move(f);
  return m;
}

/// Axis-aligned unit cube [0,1]^3 with outward faces.
inline TriangleMesh unit_cube_mesh() {
  TriangleMesh m;
  for (int i = 0; i < 8; ++i)
    m.vertices.emplace_back(i & 1, (i >> 1) & 1, (i >> 2) & 1);
  m.faces = {{0, 2, 3}, {0, 3, 1}, {4, 5, 7}, {4, 7, 6}, {0, 1, 5}, {0, 5, 4},
             {2, 6, 7}, {2, 7, 3}, {0, 4, 6}, {0, 6, 2}, {1, 3, 7}, {1, 7, 5}};
  return m;
}

/// Whether every undirected edge is shared by exactly two faces traversing it
/// in opposite directions.
inline bool closed_oriented_manifold(const TriangleMesh& m) {
  std::map<std::pair<int, int>, int> directed;
  for (const auto& f : m.faces)
    for (int e = 0; e < 3; ++e)
      ++directed[{f[e], f[(e + 1) % 3]}];
  for (const auto& [edge, count] : directed) {
    if (count != 1)
      return false;
    auto it = directed.find({edge.second, edge.first});
    if (it == directed.end() || it->second != 1)
      return false;
  }
  return !m.faces.empty();
}

inline int euler_characteristic(const TriangleMesh& m) {
  std::map<std::pair<int, int>, int> edges;
  for (const auto& f : m.faces)
    for (int e = 0; e < 3; ++e)
      edges[std::minmax(f[e], f[(e + 1) % 3])] = 1;
  return static_cast<int>(m.vertices.size()) - static_cast<int>(edges.size()) +
         static_cast<int>(m.faces.size());
}

} // namespace altrec::testing
