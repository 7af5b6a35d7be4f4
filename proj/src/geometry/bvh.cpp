#include "cgrkit/geometry/bvh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cgrkit {

namespace {

constexpr std::uint32_t kLeafSize = 4;

Aabb padded(Aabb b) {
  const double scale = std::max(b.min.cwiseAbs().maxCoeff(), b.max.cwiseAbs().maxCoeff());
  const double pad = 1e-9 * (1.0 + scale);
  b.min.array() -= pad;
  b.max.array() += pad;
  return b;
}

// Slab test returning the entry distance, or +inf when the ray misses.
double ray_box_entry(const Aabb& box, const Vec3& origin, const Vec3& inv_dir, const Vec3& dir, double t_max) {
  double t0 = 0.0;
  double t1 = t_max;
  for (int i = 0; i < 3; ++i) {
    if (dir[i] == 0.0) {
      if (origin[i] < box.min[i] || origin[i] > box.max[i]) return std::numeric_limits<double>::infinity();
      continue;
    }
    double a = (box.min[i] - origin[i]) * inv_dir[i];
    double b = (box.max[i] - origin[i]) * inv_dir[i];
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
  }
  const double slack = 1e-12 * (1.0 + std::abs(t1));
  return t0 <= t1 + slack ? t0 : std::numeric_limits<double>::infinity();
}

bool boxes_overlap(const Aabb& a, const Aabb& b) {
  return (a.min.array() <= b.max.array()).all() && (b.min.array() <= a.max.array()).all();
}

}  // namespace

Bvh::Bvh(const std::vector<Vec3>& vertices, const std::vector<Triangle>& triangles,
         const std::vector<std::uint8_t>& degenerate) {
  const auto n = triangles.size();
  v0_.resize(n);
  v1_.resize(n);
  v2_.resize(n);
  std::vector<Aabb> boxes(n);
  std::vector<Vec3> centroids(n);
  for (std::size_t i = 0; i < n; ++i) {
    v0_[i] = vertices[triangles[i][0]];
    v1_[i] = vertices[triangles[i][1]];
    v2_[i] = vertices[triangles[i][2]];
    if (degenerate[i]) continue;
    Aabb b;
    b.extend(v0_[i]);
    b.extend(v1_[i]);
    b.extend(v2_[i]);
    boxes[i] = padded(b);
    centroids[i] = (v0_[i] + v1_[i] + v2_[i]) / 3.0;
    order_.push_back(static_cast<std::uint32_t>(i));
  }
  if (order_.empty()) return;
  nodes_.reserve(2 * order_.size() / kLeafSize + 2);
  build(0, static_cast<std::uint32_t>(order_.size()), boxes, centroids);
}

std::uint32_t Bvh::build(std::uint32_t first, std::uint32_t count, std::vector<Aabb>& tri_boxes,
                         std::vector<Vec3>& centroids) {
  const auto id = static_cast<std::uint32_t>(nodes_.size());
  nodes_.emplace_back();
  Aabb box, cbox;
  for (std::uint32_t k = first; k < first + count; ++k) {
    box.extend(tri_boxes[order_[k]]);
    cbox.extend(centroids[order_[k]]);
  }
  nodes_[id].box = box;
  if (count <= kLeafSize) {
    nodes_[id].first = first;
    nodes_[id].count = count;
    return id;
  }
  int axis = 0;
  const Vec3 ext = cbox.extent();
  if (ext[1] > ext[axis]) axis = 1;
  if (ext[2] > ext[axis]) axis = 2;
  const std::uint32_t mid = first + count / 2;
  std::nth_element(order_.begin() + first, order_.begin() + mid, order_.begin() + first + count,
                   [&](std::uint32_t a, std::uint32_t b) {
                     if (centroids[a][axis] != centroids[b][axis]) return centroids[a][axis] < centroids[b][axis];
                     return a < b;
                   });
  const auto left = build(first, mid - first, tri_boxes, centroids);
  const auto right = build(mid, first + count - mid, tri_boxes, centroids);
  nodes_[id].first = left;
  nodes_[id].count = 0;
  nodes_[id].right = right;
  return id;
}

template <typename Visit>
void Bvh::traverse(const Vec3& origin, const Vec3& dir, double& t_max, Visit&& visit) const {
  if (nodes_.empty()) return;
  const Vec3 inv(1.0 / dir.x(), 1.0 / dir.y(), 1.0 / dir.z());
  std::uint32_t stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (ray_box_entry(node.box, origin, inv, dir, t_max) == std::numeric_limits<double>::infinity()) continue;
    if (node.count > 0) {
      for (std::uint32_t k = node.first; k < node.first + node.count; ++k) visit(order_[k]);
      continue;
    }
    const double tl = ray_box_entry(nodes_[node.first].box, origin, inv, dir, t_max);
    const double tr = ray_box_entry(nodes_[node.right].box, origin, inv, dir, t_max);
    // push the farther child first so the nearer one is visited next
    if (tl <= tr) {
      if (tr != std::numeric_limits<double>::infinity()) stack[top++] = node.right;
      if (tl != std::numeric_limits<double>::infinity()) stack[top++] = node.first;
    } else {
      if (tl != std::numeric_limits<double>::infinity()) stack[top++] = node.first;
      if (tr != std::numeric_limits<double>::infinity()) stack[top++] = node.right;
    }
  }
}

std::optional<RayHit> Bvh::nearest(const Vec3& origin, const Vec3& dir, double t_max,
                                   const std::vector<Vec3>& normals) const {
  double best_t = std::numeric_limits<double>::infinity();
  std::uint32_t best_tri = std::numeric_limits<std::uint32_t>::max();
  // Pruning uses a slightly enlarged bound so equal-distance hits in other
  // subtrees are still visited for the index tie-break.
  double bound = t_max;
  traverse(origin, dir, bound, [&](std::uint32_t tri) {
    const auto t = intersect_triangle(v0_[tri], v1_[tri], v2_[tri], origin, dir, t_max);
    if (!t) return;
    if (*t < best_t || (*t == best_t && tri < best_tri)) {
      best_t = *t;
      best_tri = tri;
      bound = std::min(t_max, best_t * (1.0 + 1e-9) + 1e-9);
    }
  });
  if (best_tri == std::numeric_limits<std::uint32_t>::max()) return std::nullopt;
  return RayHit{best_t, normals[best_tri], best_tri};
}

void Bvh::all_hits(const Vec3& origin, const Vec3& dir, double t_max, std::vector<double>& out) const {
  double bound = t_max;
  traverse(origin, dir, bound, [&](std::uint32_t tri) {
    if (const auto t = intersect_triangle(v0_[tri], v1_[tri], v2_[tri], origin, dir, t_max)) out.push_back(*t);
  });
}

void Bvh::query_box(const Aabb& box, std::vector<std::uint32_t>& out) const {
  if (nodes_.empty()) return;
  std::vector<std::uint32_t> stack{0};
  while (!stack.empty()) {
    const Node& node = nodes_[stack.back()];
    stack.pop_back();
    if (!boxes_overlap(node.box, box)) continue;
    if (node.count > 0) {
      for (std::uint32_t k = node.first; k < node.first + node.count; ++k) out.push_back(order_[k]);
      continue;
    }
    stack.push_back(node.first);
    stack.push_back(node.right);
  }
}

}  // namespace cgrkit
