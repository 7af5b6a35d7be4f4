#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cgrkit/geometry/mesh.hpp"

namespace cgrkit {

/// Binary bounding-volume hierarchy over triangle boxes. Node boxes are
/// padded so that pruning is conservative; the per-triangle test decides
/// every hit, which keeps results identical to the exhaustive scan.
class Bvh {
 public:
  Bvh(const std::vector<Vec3>& vertices, const std::vector<Triangle>& triangles,
      const std::vector<std::uint8_t>& degenerate);

  std::optional<RayHit> nearest(const Vec3& origin, const Vec3& dir, double t_max,
                                const std::vector<Vec3>& normals) const;

  /// All hit distances along the ray in (1e-9, t_max], unsorted.
  void all_hits(const Vec3& origin, const Vec3& dir, double t_max, std::vector<double>& out) const;

  /// Candidate triangles near the query box: every triangle whose box
  /// overlaps it is reported, possibly along with a few others.
  void query_box(const Aabb& box, std::vector<std::uint32_t>& out) const;

 private:
  struct Node {
    Aabb box;
    std::uint32_t first = 0;  // leaf: first index into order_; inner: left child
    std::uint32_t count = 0;  // 0 for inner nodes
    std::uint32_t right = 0;
  };

  std::uint32_t build(std::uint32_t first, std::uint32_t count, std::vector<Aabb>& tri_boxes,
                      std::vector<Vec3>& centroids);
  template <typename Visit>
  void traverse(const Vec3& origin, const Vec3& dir, double& t_max, Visit&& visit) const;

  std::vector<Node> nodes_;
  std::vector<std::uint32_t> order_;
  std::vector<Vec3> v0_, v1_, v2_;
};

}  // namespace cgrkit
