#include "cgrkit/geometry/voxel.hpp"

#include <algorithm>
#include <cmath>

namespace cgrkit {

namespace {

// Half-open voxels are modelled as closed boxes whose upper faces are pulled
// in by kShrink lattice units; kTouch absorbs rounding on exact contact.
constexpr double kShrink = 1e-9;
constexpr double kTouch = 1e-10;

int floor_key(double u) { return static_cast<int>(std::floor(u)); }

bool separated_on_axis(const Vec3& axis, const Vec3& v0, const Vec3& v1, const Vec3& v2, const Vec3& h) {
  const double p0 = v0.dot(axis);
  const double p1 = v1.dot(axis);
  const double p2 = v2.dot(axis);
  const double r = h.x() * std::abs(axis.x()) + h.y() * std::abs(axis.y()) + h.z() * std::abs(axis.z());
  const double tol = kTouch * (1.0 + axis.cwiseAbs().sum());
  return std::min({p0, p1, p2}) > r + tol || std::max({p0, p1, p2}) < -r - tol;
}

}  // namespace

VoxelGrid::VoxelGrid(const Vec3& origin, double voxel_size, std::vector<VoxelKey> occupied)
    : origin_(origin), voxel_size_(voxel_size), occupied_(std::move(occupied)) {
  if (!(voxel_size > 0)) throw Error("voxel grid: voxel size must be positive");
  std::sort(occupied_.begin(), occupied_.end());
  occupied_.erase(std::unique(occupied_.begin(), occupied_.end()), occupied_.end());
}

VoxelKey VoxelGrid::key_of(const Vec3& p) const {
  const Vec3 u = (p - origin_) / voxel_size_;
  return {floor_key(u.x()), floor_key(u.y()), floor_key(u.z())};
}

Vec3 VoxelGrid::center(const VoxelKey& k) const {
  return origin_ + voxel_size_ * Vec3(k[0] + 0.5, k[1] + 0.5, k[2] + 0.5);
}

bool VoxelGrid::contains(const VoxelKey& k) const {
  return std::binary_search(occupied_.begin(), occupied_.end(), k);
}

bool triangle_box_overlap(const Vec3& box_center, const Vec3& h, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 v0 = a - box_center;
  const Vec3 v1 = b - box_center;
  const Vec3 v2 = c - box_center;
  const Vec3 e[3] = {v1 - v0, v2 - v1, v0 - v2};
  for (int i = 0; i < 3; ++i) {
    Vec3 axis = Vec3::Zero();
    axis[i] = 1.0;
    if (separated_on_axis(axis, v0, v1, v2, h)) return false;
  }
  const Vec3 n = e[0].cross(e[1]);
  if (n.squaredNorm() > 0 && separated_on_axis(n, v0, v1, v2, h)) return false;
  for (const auto& edge : e) {
    for (int i = 0; i < 3; ++i) {
      Vec3 basis = Vec3::Zero();
      basis[i] = 1.0;
      const Vec3 axis = basis.cross(edge);
      if (axis.squaredNorm() == 0) continue;
      if (separated_on_axis(axis, v0, v1, v2, h)) return false;
    }
  }
  return true;
}

VoxelGrid voxelize_mesh(const TriangleMesh& mesh, double voxel_size) {
  if (!(voxel_size > 0)) throw Error("voxelize: voxel size must be positive");
  if (mesh.empty()) return VoxelGrid(Vec3::Zero(), voxel_size, {});
  const Vec3 origin = mesh.bounds().min;
  const Vec3 half = Vec3::Constant(0.5 - 0.5 * kShrink);
  std::vector<VoxelKey> keys;
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    if (mesh.is_degenerate(t)) continue;
    const auto c = mesh.corners(t);
    // work in lattice units so voxel boundaries are exact integers
    const Vec3 a = (c[0] - origin) / voxel_size;
    const Vec3 b = (c[1] - origin) / voxel_size;
    const Vec3 d = (c[2] - origin) / voxel_size;
    const Vec3 lo = a.cwiseMin(b).cwiseMin(d);
    const Vec3 hi = a.cwiseMax(b).cwiseMax(d);
    VoxelKey kl, kh;
    for (int i = 0; i < 3; ++i) {
      kl[i] = floor_key(lo[i] - 1e-6);
      kh[i] = floor_key(hi[i] + 1e-6);
    }
    for (int x = kl[0]; x <= kh[0]; ++x)
      for (int y = kl[1]; y <= kh[1]; ++y)
        for (int z = kl[2]; z <= kh[2]; ++z) {
          const Vec3 center(x + 0.5 - 0.5 * kShrink, y + 0.5 - 0.5 * kShrink, z + 0.5 - 0.5 * kShrink);
          if (triangle_box_overlap(center, half, a, b, d)) keys.push_back({x, y, z});
        }
  }
  return VoxelGrid(origin, voxel_size, std::move(keys));
}

VoxelGrid voxelize_mesh_solid(const TriangleMesh& mesh, double voxel_size) {
  VoxelGrid surface = voxelize_mesh(mesh, voxel_size);
  if (surface.empty()) return surface;
  std::vector<VoxelKey> keys = surface.occupied();
  VoxelKey lo = keys.front(), hi = keys.front();
  for (const auto& k : keys)
    for (int i = 0; i < 3; ++i) {
      lo[i] = std::min(lo[i], k[i]);
      hi[i] = std::max(hi[i], k[i]);
    }
  // parity is evaluated per connected piece so overlapping or touching
  // closed parts still fill as their union
  const auto pieces = split_components(mesh);
  for (int x = lo[0]; x <= hi[0]; ++x)
    for (int y = lo[1]; y <= hi[1]; ++y)
      for (int z = lo[2]; z <= hi[2]; ++z) {
        const VoxelKey k{x, y, z};
        if (surface.contains(k)) continue;
        const Vec3 c = surface.center(k);
        for (const auto& piece : pieces) {
          const auto& b = piece.bounds();
          if ((c.array() < b.min.array()).any() || (c.array() > b.max.array()).any()) continue;
          if (point_inside(piece, c)) {
            keys.push_back(k);
            break;
          }
        }
      }
  return VoxelGrid(surface.origin(), voxel_size, std::move(keys));
}

DenseOccupancy::DenseOccupancy(const VoxelGrid& grid) : origin_(grid.origin()), size_(grid.voxel_size()) {
  if (grid.empty()) return;
  std::array<int, 3> hi{};
  lo_ = grid.occupied().front();
  hi = lo_;
  for (const auto& k : grid.occupied())
    for (int i = 0; i < 3; ++i) {
      lo_[i] = std::min(lo_[i], k[i]);
      hi[i] = std::max(hi[i], k[i]);
    }
  for (int i = 0; i < 3; ++i) dims_[i] = hi[i] - lo_[i] + 1;
  bits_.assign(static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2], 0);
  Aabb box;
  for (const auto& k : grid.occupied()) {
    bits_[(static_cast<std::size_t>(k[0] - lo_[0]) * dims_[1] + (k[1] - lo_[1])) * dims_[2] + (k[2] - lo_[2])] = 1;
    box.extend(grid.center(k));
  }
  center_ = box.center();
  radius_ = 0.0;
  for (const auto& k : grid.occupied()) radius_ = std::max(radius_, (grid.center(k) - center_).norm());
  radius_ += 0.5 * std::sqrt(3.0) * size_;
}

bool DenseOccupancy::contains_point(const Vec3& p) const {
  if (bits_.empty()) return false;
  const Vec3 u = (p - origin_) / size_;
  std::array<int, 3> k{};
  for (int i = 0; i < 3; ++i) {
    if (!(std::abs(u[i]) < 1e9)) return false;
    k[i] = floor_key(u[i]) - lo_[i];
    if (k[i] < 0 || k[i] >= dims_[i]) return false;
  }
  return bits_[(static_cast<std::size_t>(k[0]) * dims_[1] + k[1]) * dims_[2] + k[2]] != 0;
}

}  // namespace cgrkit
