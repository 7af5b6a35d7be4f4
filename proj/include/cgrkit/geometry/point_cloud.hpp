#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "cgrkit/common.hpp"
#include "cgrkit/geometry/mesh.hpp"

namespace cgrkit {

struct PointCloud {
  std::vector<Vec3> points;
  std::optional<std::vector<Vec3>> normals;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_normals() const { return normals.has_value(); }
  PointCloud transformed(const RigidTransform& tf) const;
};

/// Static 3-d tree for exact nearest-neighbour queries.
class KdTree {
 public:
  KdTree() = default;
  explicit KdTree(std::span<const Vec3> points);

  /// Index and Euclidean distance of the nearest stored point.
  std::pair<std::size_t, double> nearest(const Vec3& q) const;
  std::size_t size() const { return points_.size(); }

 private:
  struct Node {
    std::uint32_t index;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::uint8_t axis = 0;
  };
  std::int32_t build(std::vector<std::uint32_t>& idx, std::size_t lo, std::size_t hi, int depth);
  void search(std::int32_t node, const Vec3& q, std::size_t& best, double& best_d2) const;

  std::vector<Vec3> points_;
  std::vector<Node> nodes_;
  std::int32_t root_ = -1;
};

/// Symmetric chamfer distance: the average of the two directed
/// mean-nearest-neighbour distances. Throws "empty cloud".
double chamfer_distance(const PointCloud& a, const PointCloud& b);
double chamfer_distance(std::span<const Vec3> a, std::span<const Vec3> b);

/// Mean over a of the distance to the nearest point of b.
double directed_mean_distance(std::span<const Vec3> a, const KdTree& b);

/// Area-weighted uniform samples with face normals, deterministic for a
/// fixed seed. Throws when the mesh has no area.
PointCloud sample_surface_points(const TriangleMesh& mesh, std::size_t count, std::uint64_t seed);

struct CameraIntrinsics {
  int width = 64;
  int height = 64;
  double focal = 64.0;  // pixels
  double cx = 32.0;
  double cy = 32.0;
};

/// Pinhole ray casting: one ray through each pixel center. The camera looks
/// along its local +z with +x right and +y down; camera is the
/// camera-to-world transform. Hit points carry the hit triangle's normal.
PointCloud render_partial_cloud(const TriangleMesh& scene_mesh, const RigidTransform& camera,
                                const CameraIntrinsics& intrinsics);

/// Keeps one point per occupied voxel: the first point, in input order, that
/// falls into it.
PointCloud voxel_downsample(const PointCloud& cloud, double voxel_size);

// "CGRKPC1\0" | u64 count | count*3 f32 | u8 has_normals | [count*3 f32]
void write_point_cloud(std::ostream& os, const PointCloud& cloud);
PointCloud read_point_cloud(std::istream& is);
void write_point_cloud(const std::filesystem::path& path, const PointCloud& cloud);
PointCloud read_point_cloud(const std::filesystem::path& path);

}  // namespace cgrkit
