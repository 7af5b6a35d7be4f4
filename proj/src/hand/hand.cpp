#include "cgrkit/hand/hand.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "cgrkit/geometry/mesh_io.hpp"

namespace cgrkit {

namespace {

using nlohmann::json;

Vec3 read_vec3(const json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 3) throw Error("hand spec: " + field + " must be a 3-vector");
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number()) throw Error("hand spec: " + field + " must be numeric");
    v[i] = j[i].get<double>();
  }
  return v;
}

const json& require(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw Error("hand spec: " + where + " missing " + key);
  return j.at(key);
}

}  // namespace

Mat3 GraspTypeSpec::axis_basis() const {
  const Vec3 a = approach_axis.normalized();
  const Vec3 c = (principal_closing_axis - principal_closing_axis.dot(a) * a).normalized();
  Mat3 b;
  b.row(0) = c.transpose();
  b.row(1) = a.cross(c).transpose();
  b.row(2) = a.transpose();
  return b;
}

void validate_grasp_type(const GraspTypeSpec& gt) {
  const std::string where = "grasp type '" + gt.name + "': ";
  if (std::abs(gt.principal_closing_axis.norm() - 1.0) > 1e-6)
    throw Error("hand spec: " + where + "principal_closing_axis not unit length");
  if (std::abs(gt.approach_axis.norm() - 1.0) > 1e-6) throw Error("hand spec: " + where + "approach_axis not unit length");
  if (std::abs(gt.principal_closing_axis.dot(gt.approach_axis)) >= 0.999) throw Error("hand spec: " + where + "axes parallel");
  if (gt.fingertip_rays.size() < 2) throw Error("hand spec: " + where + "fingertip_rays needs at least 2 rays");
  for (const auto& r : gt.fingertip_rays)
    if (std::abs(r.direction.norm() - 1.0) > 1e-6) throw Error("hand spec: " + where + "fingertip ray direction not unit");
  if (!(gt.max_close_travel > 0)) throw Error("hand spec: " + where + "max_close_travel must be positive");
  if (gt.collision_mesh.empty()) throw Error("hand spec: " + where + "collision_mesh is empty");
}

void build_occupancy(GraspTypeSpec& gt, double voxel_size) {
  const VoxelGrid grid = voxelize_mesh_solid(gt.collision_mesh, voxel_size);
  gt.occupancy_voxel_size = voxel_size;
  gt.occupancy = DenseOccupancy(grid);
  gt.occupied_centers.clear();
  for (const auto& k : grid.occupied()) gt.occupied_centers.push_back(grid.center(k));
}

HandSpec parse_hand_spec(const std::string& text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("hand spec: parse error: ") + e.what());
  }
  HandSpec hand;
  try {
    hand.name = require(j, "name", "file").get<std::string>();
    hand.tag = j.value("tag", hand.name);
    const double voxel = j.value("collision_voxel_size", 0.005);
    if (!(voxel > 0)) throw Error("hand spec: collision_voxel_size must be positive");
    const auto& types = require(j, "grasp_types", "file");
    if (!types.is_array() || types.empty()) throw Error("grasp_types empty");
    for (const auto& t : types) {
      GraspTypeSpec gt;
      gt.id = static_cast<int>(hand.grasp_types.size());
      gt.name = require(t, "name", "grasp type").get<std::string>();
      const std::string where = "grasp type '" + gt.name + "'";
      gt.principal_closing_axis = read_vec3(require(t, "principal_closing_axis", where), "principal_closing_axis");
      gt.approach_axis = read_vec3(require(t, "approach_axis", where), "approach_axis");
      gt.max_close_travel = require(t, "max_close_travel", where).get<double>();
      for (const auto& r : require(t, "fingertip_rays", where))
        gt.fingertip_rays.push_back(
            {read_vec3(require(r, "origin", where), "fingertip_rays.origin"),
             read_vec3(require(r, "direction", where), "fingertip_rays.direction")});
      // check axes and rays before touching the filesystem
      if (std::abs(gt.principal_closing_axis.dot(gt.approach_axis)) >= 0.999) throw Error("axes parallel");
      gt.collision_mesh = load_mesh(base_dir / require(t, "collision_mesh", where).get<std::string>());
      validate_grasp_type(gt);
      build_occupancy(gt, voxel);
      hand.grasp_types.push_back(std::move(gt));
    }
  } catch (const json::exception& e) {
    throw Error(std::string("hand spec: bad field type: ") + e.what());
  }
  return hand;
}

HandSpec load_hand_spec(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_hand_spec(ss.str(), path.parent_path());
}

Pose6D align_to_antipodal(const Pose6D& antipodal_pose, const GraspTypeSpec& gt) {
  Pose6D out = antipodal_pose;
  const Mat3 r = nearest_rotation(antipodal_pose.pose.rotation() * gt.axis_basis());
  out.pose = RigidTransform(r, antipodal_pose.pose.translation());
  return out;
}

std::vector<GraspCandidate> candidates_from_pose(const Pose6D& pose, double antipodal_score, const HandSpec& hand,
                                                 std::size_t source) {
  std::vector<GraspCandidate> out;
  out.reserve(hand.grasp_types.size());
  for (const auto& gt : hand.grasp_types)
    out.push_back({align_to_antipodal(pose, gt).pose, gt.id, source, antipodal_score, std::nullopt});
  return out;
}

std::vector<GraspCandidate> candidates_from_cgr(const Cgr& cgr, const HandSpec& hand, std::size_t source) {
  const auto rep = antipodal_rep(cgr);
  const auto pose = query_grasp_pose(cgr, rep);
  return candidates_from_pose(pose, max_antipodal_score(rep), hand, source);
}

bool hand_scene_collision(const GraspCandidate& candidate, const GraspTypeSpec& gt, const PointCloud& scene_cloud,
                          double voxel_size) {
  if (!(voxel_size > 0)) throw Error("hand collision: voxel size must be positive");
  if (scene_cloud.empty()) return false;
  const DenseOccupancy* occ = &gt.occupancy;
  DenseOccupancy local;
  if (voxel_size != gt.occupancy_voxel_size) {
    local = DenseOccupancy(voxelize_mesh_solid(gt.collision_mesh, voxel_size));
    occ = &local;
  }
  if (occ->empty()) return false;
  const RigidTransform& pose = candidate.pose;
  const Vec3 center = pose.apply(occ->center());
  const double r2 = occ->radius() * occ->radius();
  for (const auto& p : scene_cloud.points) {
    if ((p - center).squaredNorm() > r2) continue;
    if (occ->contains_point(pose.apply_inverse(p))) return true;
  }
  return false;
}

bool hand_plane_collision(const GraspCandidate& candidate, const GraspTypeSpec& gt, const Vec3& plane_point,
                          const Vec3& plane_normal) {
  const Vec3 n = plane_normal.normalized();
  for (const auto& c : gt.occupied_centers)
    if ((candidate.pose.apply(c) - plane_point).dot(n) <= 0.0) return true;
  return false;
}

std::vector<FingerContact> fingertip_contacts(const GraspCandidate& candidate, const GraspTypeSpec& gt,
                                              const TriangleMesh& scene_mesh) {
  std::vector<FingerContact> out;
  for (std::size_t i = 0; i < gt.fingertip_rays.size(); ++i) {
    const auto& ray = gt.fingertip_rays[i];
    const Vec3 o = candidate.pose.apply(ray.origin);
    const Vec3 d = candidate.pose.rotate(ray.direction);
    const auto hit = ray_mesh_intersect(scene_mesh, o, d, gt.max_close_travel);
    if (!hit) continue;
    out.push_back({Contact{o + hit->t * d, -hit->normal}, hit->triangle, static_cast<int>(i)});
  }
  return out;
}

}  // namespace cgrkit
