#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cgrkit/cgr/cgr.hpp"
#include "cgrkit/contact/force_closure.hpp"
#include "cgrkit/geometry/mesh.hpp"
#include "cgrkit/geometry/point_cloud.hpp"
#include "cgrkit/geometry/voxel.hpp"

namespace cgrkit {

struct FingertipRay {
  Vec3 origin;     // hand frame
  Vec3 direction;  // unit, hand frame
};

/// One pre-shaped hand configuration. The hand frame has its origin at the
/// grasp center; fingers close along their rays.
struct GraspTypeSpec {
  int id = 0;
  std::string name;
  Vec3 principal_closing_axis = Vec3::UnitX();
  Vec3 approach_axis = Vec3::UnitZ();
  std::vector<FingertipRay> fingertip_rays;
  TriangleMesh collision_mesh;
  double max_close_travel = 0.1;

  /// Solid occupancy of the collision mesh at occupancy_voxel_size, built at
  /// load time.
  double occupancy_voxel_size = 0.005;
  DenseOccupancy occupancy;
  std::vector<Vec3> occupied_centers;

  /// Rotation B with B^T e_x = closing (made orthogonal to approach) and
  /// B^T e_z = approach.
  Mat3 axis_basis() const;
};

struct HandSpec {
  std::string name;
  std::string tag;
  std::vector<GraspTypeSpec> grasp_types;
};

/// Checks axis lengths, |closing . approach| < 0.999, at least two unit
/// fingertip rays and positive travel. Errors name the offending field.
void validate_grasp_type(const GraspTypeSpec& gt);

/// Builds the type's solid occupancy grid at the given voxel size.
void build_occupancy(GraspTypeSpec& gt, double voxel_size);

/// JSON hand file; collision mesh paths are relative to the file.
HandSpec load_hand_spec(const std::filesystem::path& path);
HandSpec parse_hand_spec(const std::string& text, const std::filesystem::path& base_dir);

/// Hand pose whose approach axis lands on the antipodal pose's z and whose
/// closing axis lands on its x; translation is kept.
Pose6D align_to_antipodal(const Pose6D& antipodal_pose, const GraspTypeSpec& gt);

struct GraspCandidate {
  RigidTransform pose;  // hand frame in world
  int grasp_type = 0;
  std::size_t source = 0;  // index of the CGR the candidate came from
  double antipodal_score = 0.0;
  std::optional<double> decision_score;
};

/// One candidate per grasp type, all sharing the CGR's best antipodal pose.
/// Propagates "no antipodal contact".
std::vector<GraspCandidate> candidates_from_cgr(const Cgr& cgr, const HandSpec& hand, std::size_t source = 0);
std::vector<GraspCandidate> candidates_from_pose(const Pose6D& pose, double antipodal_score, const HandSpec& hand,
                                                 std::size_t source);

/// True when any scene point falls in an occupied voxel of the posed hand.
bool hand_scene_collision(const GraspCandidate& candidate, const GraspTypeSpec& gt, const PointCloud& scene_cloud,
                          double voxel_size = 0.005);

/// True when any occupied hand voxel center lies on or below the plane
/// (point, upward normal).
bool hand_plane_collision(const GraspCandidate& candidate, const GraspTypeSpec& gt, const Vec3& plane_point,
                          const Vec3& plane_normal);

struct FingerContact {
  Contact contact;
  std::uint32_t triangle = 0;  // hit triangle in the scene mesh
  int ray = 0;
};

/// Closes each fingertip ray up to max_close_travel; the first hit becomes a
/// contact whose normal opposes the ray (points into the object).
std::vector<FingerContact> fingertip_contacts(const GraspCandidate& candidate, const GraspTypeSpec& gt,
                                              const TriangleMesh& scene_mesh);

}  // namespace cgrkit
