#include "cgrkit/scene/annotation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <random>

#include "cgrkit/binary_io.hpp"
#include "cgrkit/geometry/bvh.hpp"
#include "cgrkit/geometry/point_cloud.hpp"
#include "cgrkit/geometry/voxel.hpp"

namespace cgrkit {

namespace {

constexpr io::Magic kDatasetMagic = io::make_magic("CGRKDS1");

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Uniformly distributed rotation from three uniforms (Shoemake).
Mat3 seeded_rotation(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double u1 = unit(rng), u2 = unit(rng), u3 = unit(rng);
  const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
  const Eigen::Quaterniond q(a * std::sin(2 * kPi * u2), a * std::cos(2 * kPi * u2), b * std::sin(2 * kPi * u3),
                             b * std::cos(2 * kPi * u3));
  return q.normalized().toRotationMatrix();
}

}  // namespace

void AnnotationParams::validate() const {
  if (!(voxel_size > 0)) throw Error("annotation: voxel size must be positive");
  if (directions < 1) throw Error("annotation: directions must be positive");
  if (!(cylinder_radius > 0) || !(cylinder_length > 0)) throw Error("annotation: cylinder dimensions must be positive");
  if (!(filter_density > 0)) throw Error("annotation: filter density must be positive");
  grid.validate();
}

std::vector<Vec3> surface_points(const TriangleMesh& object, double voxel_size) {
  const VoxelGrid grid = voxelize_mesh(object, voxel_size);
  if (grid.empty()) throw Error("candidate frames: object has no surface");
  // the closest point to an occupied voxel's center lies within half a
  // diagonal of it, so a box of that radius holds every competitor
  const double reach = 0.5 * std::sqrt(3.0) * voxel_size * (1.0 + 1e-9);
  std::vector<Vec3> out;
  out.reserve(grid.size());
  std::vector<std::uint32_t> cand;
  for (const auto& key : grid.occupied()) {
    const Vec3 c = grid.center(key);
    Aabb box;
    box.extend(c - Vec3::Constant(reach));
    box.extend(c + Vec3::Constant(reach));
    cand.clear();
    object.bvh().query_box(box, cand);
    std::sort(cand.begin(), cand.end());
    double best = std::numeric_limits<double>::infinity();
    Vec3 best_p = c;
    for (auto t : cand) {
      if (object.is_degenerate(t)) continue;
      const auto v = object.corners(t);
      const Vec3 p = closest_point_on_triangle(c, v[0], v[1], v[2]);
      const double d2 = (p - c).squaredNorm();
      if (d2 < best) {
        best = d2;
        best_p = p;
      }
    }
    if (!std::isfinite(best)) throw Error("candidate frames: occupied voxel without a nearby triangle");
    out.push_back(best_p);
  }
  return out;
}

std::vector<Vec3> spiral_directions(int count, std::uint64_t seed) {
  if (count < 1) throw Error("spiral directions: count must be positive");
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  const Mat3 r = seed == 0 ? Mat3::Identity() : seeded_rotation(seed);
  std::vector<Vec3> out;
  out.reserve(count);
  for (int k = 0; k < count; ++k) {
    const double z = 1.0 - (2.0 * k + 1.0) / count;
    const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * k;
    out.push_back((r * Vec3(rho * std::cos(phi), rho * std::sin(phi), z)).normalized());
  }
  return out;
}

std::vector<RigidTransform> candidate_frames(const TriangleMesh& object, const AnnotationParams& params,
                                             std::uint64_t seed) {
  params.validate();
  const auto points = surface_points(object, params.voxel_size);
  const auto dirs = spiral_directions(params.directions, seed);
  std::vector<Mat3> rotations;
  rotations.reserve(dirs.size());
  for (const auto& z : dirs) rotations.push_back(frame_from_z(z));
  std::vector<RigidTransform> out;
  out.reserve(points.size() * rotations.size());
  for (const auto& p : points)
    for (const auto& r : rotations) out.emplace_back(r, p);
  return out;
}

SceneSamples sample_scene(const Scene& scene, double density, std::uint64_t seed) {
  if (!(density > 0)) throw Error("sample_scene: density must be positive");
  SceneSamples out;
  for (std::size_t i = 0; i < scene.instances().size(); ++i) {
    const TriangleMesh world = scene.instance_mesh(i);
    const auto count = static_cast<std::size_t>(std::ceil(world.surface_area() * density));
    const auto cloud = sample_surface_points(world, std::max<std::size_t>(count, 1), seed + i);
    out.points.insert(out.points.end(), cloud.points.begin(), cloud.points.end());
    out.instance.insert(out.instance.end(), cloud.points.size(), static_cast<std::uint32_t>(i));
  }
  return out;
}

bool in_approach_cylinder(const RigidTransform& frame, const Vec3& p, double radius, double length) {
  const Vec3 d = p - frame.translation();
  const Vec3 z = frame.axis(2);
  const double s = d.dot(z);
  if (s > 0.0 || s < -length) return false;
  return (d - s * z).squaredNorm() <= radius * radius;
}

bool cylinder_hits_table(const RigidTransform& frame, const TablePlane& table, double radius, double length) {
  // the lowest point of a cylinder lies on the rim of one end cap
  const Vec3 z = frame.axis(2);
  const double c = z.dot(table.normal);
  const double rim = radius * std::sqrt(std::max(0.0, 1.0 - c * c));
  const double h0 = table.height(frame.translation());
  const double h1 = h0 - length * c;
  return std::min(h0, h1) - rim <= 0.0;
}

bool approach_collision_filter(const RigidTransform& frame, const SceneSamples& samples, const TablePlane& table,
                               double radius, double length, std::int64_t skip_instance) {
  if (!(radius > 0) || !(length > 0)) throw Error("approach filter: radius and length must be positive");
  if (cylinder_hits_table(frame, table, radius, length)) return true;
  for (std::size_t k = 0; k < samples.points.size(); ++k) {
    if (static_cast<std::int64_t>(samples.instance[k]) == skip_instance) continue;
    if (in_approach_cylinder(frame, samples.points[k], radius, length)) return true;
  }
  return false;
}

bool approach_collision_filter(const RigidTransform& frame, const Scene& scene, double radius, double length,
                               std::int64_t skip_instance) {
  const AnnotationParams defaults;
  return approach_collision_filter(frame, sample_scene(scene, defaults.filter_density, 0), scene.table(), radius,
                                   length, skip_instance);
}

std::vector<Cgr> annotate_object(const TriangleMesh& object, const AnnotationParams& params, std::uint64_t seed) {
  const auto frames = candidate_frames(object, params, seed);
  return compute_cgrs(object, frames, params.grid);
}

CgrDataset annotate_scene(const Scene& scene, const AnnotationParams& params, std::uint32_t scene_id,
                          std::uint64_t seed, ObjectCgrCache* cache) {
  params.validate();
  CgrDataset ds;
  ds.params = params.grid;
  ObjectCgrCache local;
  ObjectCgrCache& per_mesh = cache ? *cache : local;
  for (const auto& inst : scene.instances()) {
    const auto& mesh = scene.meshes().at(inst.mesh_id);
    if (!per_mesh.count(mesh)) per_mesh.emplace(mesh, annotate_object(*mesh, params, seed));
  }
  const SceneSamples samples = sample_scene(scene, params.filter_density, seed);

  std::vector<std::pair<std::size_t, const Cgr*>> jobs;
  for (std::size_t i = 0; i < scene.instances().size(); ++i)
    for (const auto& c : per_mesh.at(scene.meshes().at(scene.instances()[i].mesh_id))) jobs.emplace_back(i, &c);
  std::vector<std::optional<CgrRecord>> out(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t k) {
    const auto [i, local] = jobs[k];
    const RigidTransform frame = scene.instances()[i].pose * local->frame();
    const bool clear = !approach_collision_filter(frame, samples, scene.table(), params.cylinder_radius,
                                                  params.cylinder_length, static_cast<std::int64_t>(i));
    Cgr world(frame, local->params(), clear ? local->grid() : std::vector<CgrCell>(local->params().cell_count()));
    out[k] = CgrRecord{std::move(world), scene_id, clear};
  });
  ds.records.reserve(out.size());
  for (auto& r : out) ds.records.push_back(std::move(*r));
  return ds;
}

void append_dataset(CgrDataset& into, const CgrDataset& more) {
  if (!(into.params == more.params)) throw Error("dataset: grid params differ");
  into.records.insert(into.records.end(), more.records.begin(), more.records.end());
}

void write_dataset(std::ostream& os, const CgrDataset& ds) {
  ds.params.validate();
  io::Writer w(os);
  w.magic(kDatasetMagic);
  write_grid_params(w, ds.params);
  w.u32(static_cast<std::uint32_t>(ds.manifest.size()));
  w.bytes(ds.manifest);
  w.u64(ds.records.size());
  for (const auto& rec : ds.records) {
    if (!(rec.cgr.params() == ds.params)) throw Error("dataset: record grid does not match params");
    if (rec.valid)
      write_cgr_record(w, rec.cgr);
    else
      write_zero_cgr_record(w, rec.cgr.frame(), ds.params);
    w.u32(rec.scene_id);
    w.u8(rec.valid ? 1 : 0);
  }
  w.check();
}

CgrDataset read_dataset(std::istream& is) {
  io::Reader r(is);
  r.expect_magic(kDatasetMagic);
  CgrDataset ds;
  ds.params = read_grid_params(r);
  const auto manifest_len = r.u32();
  if (manifest_len > (1u << 26)) throw Error("dataset: implausible manifest length");
  ds.manifest = r.bytes(manifest_len);
  const auto count = r.u64();
  if (count > (1ull << 36)) throw Error("dataset: implausible record count");
  ds.records.reserve(std::min<std::uint64_t>(count, 1u << 20));
  for (std::uint64_t k = 0; k < count; ++k) {
    Cgr cgr = read_cgr_record(r, ds.params);
    const auto scene_id = r.u32();
    const auto valid = r.u8();
    if (valid > 1) throw Error("dataset: bad validity flag");
    ds.records.push_back({std::move(cgr), scene_id, valid == 1});
  }
  return ds;
}

void write_dataset(const std::filesystem::path& path, const CgrDataset& ds) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  write_dataset(os, ds);
}

CgrDataset read_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path.string());
  return read_dataset(is);
}

}  // namespace cgrkit
