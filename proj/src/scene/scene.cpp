#include "cgrkit/scene/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "cgrkit/geometry/mesh_io.hpp"
#include "json.hpp"

namespace cgrkit {

namespace {

using nlohmann::json;

Vec3 vec3_field(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) throw Error("scene: " + what + " must be a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

std::shared_ptr<const TriangleMesh> mesh_from_json(const json& j, const std::filesystem::path& base_dir,
                                                   const std::string& id) {
  if (j.is_string()) return std::make_shared<const TriangleMesh>(load_mesh(base_dir / j.get<std::string>()));
  if (!j.is_object() || j.size() != 1) throw Error("scene: mesh '" + id + "' must be a path or one primitive");
  const MeshSource source{j.begin().key(), j.begin().value().get<std::vector<double>>()};
  try {
    return std::make_shared<const TriangleMesh>(primitive_mesh(source));
  } catch (const Error&) {
    throw Error("scene: mesh '" + id + "' has an unknown primitive '" + source.kind + "'");
  }
}

}  // namespace

TriangleMesh primitive_mesh(const MeshSource& source) {
  const auto& p = source.params;
  if (source.kind == "box" && p.size() == 3) return make_box(Vec3(p[0], p[1], p[2]));
  if (source.kind == "cylinder" && p.size() == 3) return make_cylinder(p[0], p[1], static_cast<int>(p[2]));
  if (source.kind == "sphere" && p.size() == 2) return make_icosphere(p[0], static_cast<int>(p[1]));
  throw Error("unknown primitive '" + source.kind + "' with " + std::to_string(p.size()) + " parameters");
}

std::size_t SceneMesh::instance_of(std::uint32_t triangle) const {
  const auto it = std::upper_bound(first_triangle.begin(), first_triangle.end(), static_cast<std::size_t>(triangle));
  return static_cast<std::size_t>(it - first_triangle.begin()) - 1;
}

Scene::Scene(MeshRegistry meshes, std::vector<Instance> instances, TablePlane table)
    : meshes_(std::move(meshes)), instances_(std::move(instances)), table_(table) {
  for (std::size_t i = 0; i < instances_.size(); ++i) {
    auto it = meshes_.find(instances_[i].mesh_id);
    if (it == meshes_.end() || !it->second)
      throw Error("scene: instance " + std::to_string(i) + " refers to unknown mesh '" + instances_[i].mesh_id + "'");
  }
  if (std::abs(table_.normal.norm() - 1.0) > 1e-9) throw Error("scene: table normal must be unit length");
}

TriangleMesh Scene::instance_mesh(std::size_t instance) const {
  return object_mesh(instance).transformed(instances_[instance].pose);
}

SceneMesh Scene::merged() const {
  std::vector<TriangleMesh> parts;
  SceneMesh out;
  std::size_t count = 0;
  for (std::size_t i = 0; i < instances_.size(); ++i) {
    parts.push_back(instance_mesh(i));
    out.first_triangle.push_back(count);
    count += parts.back().triangle_count();
  }
  out.first_triangle.push_back(count);
  out.mesh = TriangleMesh::merge(parts);
  return out;
}

Scene Scene::without(std::size_t instance) const {
  std::vector<Instance> rest;
  for (std::size_t i = 0; i < instances_.size(); ++i)
    if (i != instance) rest.push_back(instances_[i]);
  return {meshes_, std::move(rest), table_};
}

Scene parse_scene(const std::string& text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("scene: parse error: ") + e.what());
  }
  try {
    if (!j.contains("meshes") || !j.contains("instances")) throw Error("scene: file needs 'meshes' and 'instances'");
    const auto& mesh_specs = j.at("meshes");
    MeshRegistry registry;
    std::vector<Instance> instances;
    for (std::size_t i = 0; i < j.at("instances").size(); ++i) {
      const auto& inst = j.at("instances")[i];
      const std::string id = inst.at("mesh").get<std::string>();
      const std::string who = "instance " + std::to_string(i) + " (mesh '" + id + "')";
      if (!mesh_specs.contains(id)) throw Error("scene: " + who + " refers to an undefined mesh");
      if (!registry.count(id)) {
        try {
          registry[id] = mesh_from_json(mesh_specs.at(id), base_dir, id);
        } catch (const Error& e) {
          throw Error("scene: " + who + ": " + e.what());
        }
      }
      RigidTransform pose;
      if (inst.contains("pose")) {
        const auto& p = inst.at("pose");
        const auto q = p.value("quat_wxyz", std::vector<double>{1, 0, 0, 0});
        if (q.size() != 4) throw Error("scene: " + who + ": quat_wxyz needs 4 values");
        const Vec3 t = p.contains("t") ? vec3_field(p.at("t"), "t") : Vec3::Zero();
        try {
          pose = RigidTransform::from_quaternion({q[0], q[1], q[2], q[3]}, t);
        } catch (const Error& e) {
          throw Error("scene: " + who + ": " + e.what());
        }
      }
      instances.push_back({id, pose});
    }
    TablePlane table;
    if (j.contains("table")) {
      table.point = vec3_field(j.at("table").at("point"), "table.point");
      table.normal = vec3_field(j.at("table").at("normal"), "table.normal");
      if (std::abs(table.normal.norm() - 1.0) > 1e-6) throw Error("scene: table normal must be unit length");
      table.normal.normalize();
    }
    return {std::move(registry), std::move(instances), table};
  } catch (const json::exception& e) {
    throw Error(std::string("scene: bad field: ") + e.what());
  }
}

Scene compose_scene(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_scene(ss.str(), path.parent_path());
}

void save_scene(const std::filesystem::path& path, const Scene& scene, const std::map<std::string, MeshSource>& sources) {
  json j;
  j["meshes"] = json::object();
  for (const auto& [id, mesh] : scene.meshes()) {
    const auto it = sources.find(id);
    if (it != sources.end() && it->second.kind != "mesh") {
      j["meshes"][id] = {{it->second.kind, it->second.params}};
    } else {
      const std::string file = id + ".obj";
      write_obj(path.parent_path() / file, *mesh);
      j["meshes"][id] = file;
    }
  }
  j["instances"] = json::array();
  for (const auto& inst : scene.instances()) {
    const Eigen::Quaterniond q(inst.pose.rotation());
    const Vec3& t = inst.pose.translation();
    j["instances"].push_back({{"mesh", inst.mesh_id},
                              {"pose", {{"quat_wxyz", {q.w(), q.x(), q.y(), q.z()}}, {"t", {t.x(), t.y(), t.z()}}}}});
  }
  const auto& tb = scene.table();
  j["table"] = {{"point", {tb.point.x(), tb.point.y(), tb.point.z()}},
                {"normal", {tb.normal.x(), tb.normal.y(), tb.normal.z()}}};
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os << std::setw(2) << j << '\n';
}

}  // namespace cgrkit
