#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "cgrkit/cgr/cgr.hpp"
#include "cgrkit/scene/scene.hpp"

namespace cgrkit {

struct AnnotationParams {
  double voxel_size = 0.005;
  int directions = 300;
  double cylinder_radius = 0.06;
  double cylinder_length = 0.25;
  /// Surface samples per square meter used by the collision filter.
  double filter_density = 40000.0;
  CgrGridParams grid;

  void validate() const;
};

/// One representative surface point per occupied surface voxel: the mesh
/// point closest to the voxel center. Ordered by voxel key.
std::vector<Vec3> surface_points(const TriangleMesh& object, double voxel_size);

/// Unit directions on a Fibonacci spiral; seed != 0 applies one seeded
/// global rotation so different seeds give different but equally even sets.
std::vector<Vec3> spiral_directions(int count, std::uint64_t seed);

/// surface_points x spiral_directions, point-major. Each frame has its origin
/// on the surface, z along the direction and x from frame_from_z.
std::vector<RigidTransform> candidate_frames(const TriangleMesh& object, const AnnotationParams& params,
                                             std::uint64_t seed = 0);

/// Surface samples of every instance, tagged with the owning instance.
struct SceneSamples {
  std::vector<Vec3> points;
  std::vector<std::uint32_t> instance;
};
SceneSamples sample_scene(const Scene& scene, double density, std::uint64_t seed);

/// Closed cylinder of the given radius from the frame origin back along -z
/// for `length`.
bool in_approach_cylinder(const RigidTransform& frame, const Vec3& p, double radius, double length);

/// True when the cylinder dips below the table plane.
bool cylinder_hits_table(const RigidTransform& frame, const TablePlane& table, double radius, double length);

/// True when any sample not owned by `skip_instance` lies in the approach
/// cylinder or the cylinder reaches the table halfspace. The grasped
/// object's own surface is skipped: the frame origin lies on it by
/// construction.
bool approach_collision_filter(const RigidTransform& frame, const SceneSamples& samples, const TablePlane& table,
                               double radius, double length, std::int64_t skip_instance = -1);
bool approach_collision_filter(const RigidTransform& frame, const Scene& scene, double radius, double length,
                               std::int64_t skip_instance = -1);

struct CgrRecord {
  Cgr cgr;
  std::uint32_t scene_id = 0;
  bool valid = true;
};

/// Invalid records carry a zero grid (frame kept). Their grid must never be
/// scored: a zero grid reads as a perfect antipodal hit.
struct CgrDataset {
  CgrGridParams params;
  std::string manifest = "{}";  // JSON metadata
  std::vector<CgrRecord> records;
};

/// Annotation of a single object in its own frame, with no filter applied.
std::vector<Cgr> annotate_object(const TriangleMesh& object, const AnnotationParams& params, std::uint64_t seed = 0);

/// Object-frame CGRs per mesh, reusable while params and seed stay fixed.
/// Holding the mesh keeps its address from being reused by another mesh.
using ObjectCgrCache = std::map<std::shared_ptr<const TriangleMesh>, std::vector<Cgr>>;

/// Annotates every instance: frames and CGRs in the object frame are mapped
/// through the instance pose, then the approach filter sets validity.
/// Records are instance-major in the order of candidate_frames.
CgrDataset annotate_scene(const Scene& scene, const AnnotationParams& params, std::uint32_t scene_id = 0,
                          std::uint64_t seed = 0, ObjectCgrCache* cache = nullptr);

/// Appends `more` (same grid params) to `into`.
void append_dataset(CgrDataset& into, const CgrDataset& more);

void write_dataset(std::ostream& os, const CgrDataset& ds);
CgrDataset read_dataset(std::istream& is);
void write_dataset(const std::filesystem::path& path, const CgrDataset& ds);
CgrDataset read_dataset(const std::filesystem::path& path);

}  // namespace cgrkit
