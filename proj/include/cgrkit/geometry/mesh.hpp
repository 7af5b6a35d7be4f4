#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "cgrkit/common.hpp"
#include "cgrkit/geometry/transform.hpp"

namespace cgrkit {

using Triangle = std::array<std::uint32_t, 3>;

struct Aabb {
  Vec3 min = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 max = Vec3::Constant(-std::numeric_limits<double>::infinity());

  void extend(const Vec3& p) {
    min = min.cwiseMin(p);
    max = max.cwiseMax(p);
  }
  void extend(const Aabb& b) {
    min = min.cwiseMin(b.min);
    max = max.cwiseMax(b.max);
  }
  bool empty() const { return (min.array() > max.array()).any(); }
  Vec3 center() const { return 0.5 * (min + max); }
  Vec3 extent() const { return max - min; }
};

class Bvh;

struct RayHit {
  double t = 0.0;
  Vec3 normal = Vec3::Zero();
  std::uint32_t triangle = 0;
};

/// Indexed triangle mesh in meters. Face normals are always recomputed from
/// the winding order (counter-clockwise seen from outside); a triangle with
/// zero area keeps a zero normal and is ignored by every query. The
/// acceleration structure is built at construction and the mesh is
/// immutable afterwards, so one instance can be shared across threads.
class TriangleMesh {
 public:
  TriangleMesh();
  TriangleMesh(std::vector<Vec3> vertices, std::vector<Triangle> triangles);

  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<Triangle>& triangles() const { return triangles_; }
  const std::vector<Vec3>& normals() const { return normals_; }
  std::size_t triangle_count() const { return triangles_.size(); }
  bool empty() const { return triangles_.empty(); }

  /// Every undirected edge is shared by exactly two triangles with opposite
  /// orientation.
  bool is_watertight() const { return watertight_; }
  bool is_degenerate(std::size_t tri) const { return degenerate_[tri] != 0; }

  double triangle_area(std::size_t tri) const;
  double surface_area() const;
  const Aabb& bounds() const { return bounds_; }
  std::array<Vec3, 3> corners(std::size_t tri) const {
    const auto& t = triangles_[tri];
    return {vertices_[t[0]], vertices_[t[1]], vertices_[t[2]]};
  }

  TriangleMesh transformed(const RigidTransform& tf) const;
  static TriangleMesh merge(std::span<const TriangleMesh> parts);

  const Bvh& bvh() const { return *bvh_; }

 private:
  std::vector<Vec3> vertices_;
  std::vector<Triangle> triangles_;
  std::vector<Vec3> normals_;
  std::vector<std::uint8_t> degenerate_;
  Aabb bounds_;
  bool watertight_ = false;
  std::shared_ptr<const Bvh> bvh_;
};

/// Möller–Trumbore test shared by the accelerated and exhaustive paths, so
/// both produce bit-identical results. Returns t when the hit lies in
/// (1e-9, t_max].
std::optional<double> intersect_triangle(const Vec3& v0, const Vec3& v1, const Vec3& v2,
                                         const Vec3& origin, const Vec3& dir, double t_max);

/// Nearest hit along the ray within (1e-9, t_max]. Equal distances resolve
/// to the lowest triangle index.
std::optional<RayHit> ray_mesh_intersect(const TriangleMesh& mesh, const Vec3& origin,
                                         const Vec3& direction, double t_max);

/// Same contract as ray_mesh_intersect, visiting every triangle.
std::optional<RayHit> ray_mesh_intersect_exhaustive(const TriangleMesh& mesh, const Vec3& origin,
                                                    const Vec3& direction, double t_max);

/// Number of distinct surface crossings along an unbounded ray.
int ray_crossings(const TriangleMesh& mesh, const Vec3& origin, const Vec3& direction);

/// Ray-parity containment test for closed meshes.
bool point_inside(const TriangleMesh& mesh, const Vec3& p);

/// Splits a mesh into vertex-connected pieces, in order of first triangle.
std::vector<TriangleMesh> split_components(const TriangleMesh& mesh);

/// Closest point on a triangle (Ericson's region test).
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

/// Euclidean distance from p to the mesh surface (exhaustive).
double point_mesh_distance(const TriangleMesh& mesh, const Vec3& p);

// Simple solids used by fixtures and tests. All are watertight with outward
// winding.
TriangleMesh make_box(const Vec3& min, const Vec3& max);
TriangleMesh make_box(const Vec3& dims);  // centered at the origin
TriangleMesh make_cylinder(double radius, double height, int segments);  // base on z = 0
TriangleMesh make_icosphere(double radius, int subdivisions);

}  // namespace cgrkit
