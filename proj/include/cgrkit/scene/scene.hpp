#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "cgrkit/geometry/mesh.hpp"
#include "cgrkit/geometry/transform.hpp"

namespace cgrkit {

struct Instance {
  std::string mesh_id;
  RigidTransform pose;  // object frame -> world
};

struct TablePlane {
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();

  /// Signed height of p above the plane.
  double height(const Vec3& p) const { return (p - point).dot(normal); }
};

/// World-frame union of all instances; triangles are laid out instance by
/// instance.
struct SceneMesh {
  TriangleMesh mesh;
  std::vector<std::size_t> first_triangle;  // per instance, plus a final end marker

  /// Instance owning a merged-mesh triangle.
  std::size_t instance_of(std::uint32_t triangle) const;
};

using MeshRegistry = std::map<std::string, std::shared_ptr<const TriangleMesh>>;

class Scene {
 public:
  Scene() = default;
  /// Throws when an instance names an unknown mesh or the table normal is not
  /// unit length.
  Scene(MeshRegistry meshes, std::vector<Instance> instances, TablePlane table);

  const MeshRegistry& meshes() const { return meshes_; }
  const std::vector<Instance>& instances() const { return instances_; }
  const TablePlane& table() const { return table_; }
  const TriangleMesh& object_mesh(std::size_t instance) const { return *meshes_.at(instances_[instance].mesh_id); }

  TriangleMesh instance_mesh(std::size_t instance) const;
  SceneMesh merged() const;

  /// Copy without the given instance (used when a grasped object is removed).
  Scene without(std::size_t instance) const;

 private:
  MeshRegistry meshes_;
  std::vector<Instance> instances_;
  TablePlane table_;
};

/// Scene file (JSON):
///   meshes: { id: "path.obj" | {"box": [dx,dy,dz]} | {"cylinder": [r,h,segments]}
///             | {"sphere": [r, subdivisions]} }   (boxes are centered, cylinders
///             stand on z = 0, spheres are centered)
///   instances: [ { "mesh": id, "pose": { "quat_wxyz": [w,x,y,z], "t": [x,y,z] } } ]
///   table: { "point": [x,y,z], "normal": [x,y,z] }   (optional, default z = 0 plane)
/// Paths are relative to the file.
Scene compose_scene(const std::filesystem::path& path);
Scene parse_scene(const std::string& text, const std::filesystem::path& base_dir);

/// Writes a scene file; meshes given as primitives are kept as primitives,
/// everything else is written as OBJ next to the file.
struct MeshSource {
  std::string kind;  // "box", "cylinder", "sphere" or "mesh"
  std::vector<double> params;
};
void save_scene(const std::filesystem::path& path, const Scene& scene, const std::map<std::string, MeshSource>& sources);

/// Mesh of a "box", "cylinder" or "sphere" source.
TriangleMesh primitive_mesh(const MeshSource& source);

}  // namespace cgrkit
