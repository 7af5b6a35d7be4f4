#pragma once

#include <array>
#include <vector>

#include "cgrkit/common.hpp"
#include "cgrkit/geometry/mesh.hpp"

namespace cgrkit {

using VoxelKey = std::array<int, 3>;

/// Sparse occupancy on a regular lattice. Voxel k covers the half-open box
/// [origin + k*size, origin + (k+1)*size). The occupied list is kept sorted
/// and deduplicated.
class VoxelGrid {
 public:
  VoxelGrid() = default;
  VoxelGrid(const Vec3& origin, double voxel_size, std::vector<VoxelKey> occupied);

  const Vec3& origin() const { return origin_; }
  double voxel_size() const { return voxel_size_; }
  const std::vector<VoxelKey>& occupied() const { return occupied_; }
  std::size_t size() const { return occupied_.size(); }
  bool empty() const { return occupied_.empty(); }

  VoxelKey key_of(const Vec3& p) const;
  Vec3 center(const VoxelKey& k) const;
  bool contains(const VoxelKey& k) const;
  bool contains_point(const Vec3& p) const { return contains(key_of(p)); }

  bool operator==(const VoxelGrid& other) const = default;

 private:
  Vec3 origin_ = Vec3::Zero();
  double voxel_size_ = 1.0;
  std::vector<VoxelKey> occupied_;
};

/// Marks every voxel that any triangle touches. The lattice origin is the
/// mesh's bounding-box minimum, so the result does not depend on vertex or
/// triangle order.
VoxelGrid voxelize_mesh(const TriangleMesh& mesh, double voxel_size);

/// Surface voxels plus every voxel whose center lies inside one of the
/// mesh's closed connected pieces.
VoxelGrid voxelize_mesh_solid(const TriangleMesh& mesh, double voxel_size);

/// Separating-axis overlap test between a triangle and a closed box.
bool triangle_box_overlap(const Vec3& box_center, const Vec3& half_extent, const Vec3& a,
                          const Vec3& b, const Vec3& c);

/// Dense bitmap over the bounding box of a voxel grid, for fast repeated
/// point lookups.
class DenseOccupancy {
 public:
  DenseOccupancy() = default;
  explicit DenseOccupancy(const VoxelGrid& grid);

  bool contains_point(const Vec3& p) const;
  bool empty() const { return bits_.empty(); }
  /// Bounding sphere of the occupied region.
  const Vec3& center() const { return center_; }
  double radius() const { return radius_; }

 private:
  Vec3 origin_ = Vec3::Zero();
  double size_ = 1.0;
  std::array<int, 3> lo_{}, dims_{};
  std::vector<std::uint8_t> bits_;
  Vec3 center_ = Vec3::Zero();
  double radius_ = 0.0;
};

}  // namespace cgrkit
