#include "cgrkit/geometry/point_cloud.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <unordered_set>

#include "cgrkit/binary_io.hpp"
#include "cgrkit/geometry/voxel.hpp"

namespace cgrkit {

namespace {

constexpr io::Magic kCloudMagic = io::make_magic("CGRKPC1");

// Uniform double in [0, 1) from the top 53 bits, identical on every platform.
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

struct KeyHash {
  std::size_t operator()(const VoxelKey& k) const {
    std::size_t h = static_cast<std::uint32_t>(k[0]);
    h = h * 0x9E3779B97F4A7C15ull ^ static_cast<std::uint32_t>(k[1]);
    h = h * 0x9E3779B97F4A7C15ull ^ static_cast<std::uint32_t>(k[2]);
    return h;
  }
};

}  // namespace

PointCloud PointCloud::transformed(const RigidTransform& tf) const {
  PointCloud out;
  out.points.reserve(points.size());
  for (const auto& p : points) out.points.push_back(tf.apply(p));
  if (normals) {
    out.normals.emplace();
    out.normals->reserve(normals->size());
    for (const auto& n : *normals) out.normals->push_back(tf.rotate(n));
  }
  return out;
}

KdTree::KdTree(std::span<const Vec3> points) : points_(points.begin(), points.end()) {
  if (points_.empty()) return;
  std::vector<std::uint32_t> idx(points_.size());
  std::iota(idx.begin(), idx.end(), 0u);
  nodes_.reserve(points_.size());
  root_ = build(idx, 0, idx.size(), 0);
}

std::int32_t KdTree::build(std::vector<std::uint32_t>& idx, std::size_t lo, std::size_t hi, int depth) {
  if (lo >= hi) return -1;
  Aabb box;
  for (std::size_t k = lo; k < hi; ++k) box.extend(points_[idx[k]]);
  const Vec3 ext = box.extent();
  int axis = 0;
  if (ext[1] > ext[axis]) axis = 1;
  if (ext[2] > ext[axis]) axis = 2;
  (void)depth;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::nth_element(idx.begin() + static_cast<std::ptrdiff_t>(lo), idx.begin() + static_cast<std::ptrdiff_t>(mid),
                   idx.begin() + static_cast<std::ptrdiff_t>(hi), [&](std::uint32_t a, std::uint32_t b) {
                     if (points_[a][axis] != points_[b][axis]) return points_[a][axis] < points_[b][axis];
                     return a < b;
                   });
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(Node{idx[mid], -1, -1, static_cast<std::uint8_t>(axis)});
  const auto left = build(idx, lo, mid, depth + 1);
  const auto right = build(idx, mid + 1, hi, depth + 1);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void KdTree::search(std::int32_t node, const Vec3& q, std::size_t& best, double& best_d2) const {
  while (node >= 0) {
    const Node& n = nodes_[node];
    const Vec3& p = points_[n.index];
    const double d2 = (p - q).squaredNorm();
    if (d2 < best_d2 || (d2 == best_d2 && n.index < best)) {
      best_d2 = d2;
      best = n.index;
    }
    const double diff = q[n.axis] - p[n.axis];
    const std::int32_t near = diff < 0 ? n.left : n.right;
    const std::int32_t far = diff < 0 ? n.right : n.left;
    if (far >= 0 && diff * diff <= best_d2) search(far, q, best, best_d2);
    node = near;
  }
}

std::pair<std::size_t, double> KdTree::nearest(const Vec3& q) const {
  if (root_ < 0) throw Error("empty cloud");
  std::size_t best = std::numeric_limits<std::size_t>::max();
  double best_d2 = std::numeric_limits<double>::infinity();
  search(root_, q, best, best_d2);
  return {best, std::sqrt(best_d2)};
}

double directed_mean_distance(std::span<const Vec3> a, const KdTree& b) {
  if (a.empty() || b.size() == 0) throw Error("empty cloud");
  double sum = 0.0;
  for (const auto& p : a) sum += b.nearest(p).second;
  return sum / static_cast<double>(a.size());
}

double chamfer_distance(std::span<const Vec3> a, std::span<const Vec3> b) {
  if (a.empty() || b.empty()) throw Error("empty cloud");
  const KdTree ta(a);
  const KdTree tb(b);
  return 0.5 * (directed_mean_distance(a, tb) + directed_mean_distance(b, ta));
}

double chamfer_distance(const PointCloud& a, const PointCloud& b) { return chamfer_distance(a.points, b.points); }

PointCloud sample_surface_points(const TriangleMesh& mesh, std::size_t count, std::uint64_t seed) {
  std::vector<double> cumulative(mesh.triangle_count());
  double total = 0.0;
  for (std::size_t i = 0; i < mesh.triangle_count(); ++i) {
    if (!mesh.is_degenerate(i)) total += mesh.triangle_area(i);
    cumulative[i] = total;
  }
  if (!(total > 0)) throw Error("sample_surface_points: mesh has no area");
  std::mt19937_64 rng(seed);
  PointCloud out;
  out.points.reserve(count);
  out.normals.emplace();
  out.normals->reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    const double pick = unit(rng) * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
    if (it == cumulative.end()) --it;
    const auto tri = static_cast<std::size_t>(it - cumulative.begin());
    const double r1 = std::sqrt(unit(rng));
    const double r2 = unit(rng);
    const auto c = mesh.corners(tri);
    out.points.push_back((1.0 - r1) * c[0] + r1 * (1.0 - r2) * c[1] + r1 * r2 * c[2]);
    out.normals->push_back(mesh.normals()[tri]);
  }
  return out;
}

PointCloud render_partial_cloud(const TriangleMesh& scene_mesh, const RigidTransform& camera,
                                const CameraIntrinsics& k) {
  if (k.width <= 0 || k.height <= 0 || !(k.focal > 0)) throw Error("render: bad intrinsics");
  PointCloud out;
  out.normals.emplace();
  const Vec3 origin = camera.translation();
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      const Vec3 local((u + 0.5 - k.cx) / k.focal, (v + 0.5 - k.cy) / k.focal, 1.0);
      const Vec3 dir = camera.rotate(local.normalized());
      const auto hit = ray_mesh_intersect(scene_mesh, origin, dir, std::numeric_limits<double>::infinity());
      if (!hit) continue;
      out.points.push_back(origin + hit->t * dir);
      out.normals->push_back(hit->normal);
    }
  }
  return out;
}

PointCloud voxel_downsample(const PointCloud& cloud, double voxel_size) {
  if (!(voxel_size > 0)) throw Error("voxel_downsample: voxel size must be positive");
  std::unordered_set<VoxelKey, KeyHash> seen;
  PointCloud out;
  if (cloud.normals) out.normals.emplace();
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const Vec3& p = cloud.points[i];
    const VoxelKey key{static_cast<int>(std::floor(p.x() / voxel_size)), static_cast<int>(std::floor(p.y() / voxel_size)),
                       static_cast<int>(std::floor(p.z() / voxel_size))};
    if (!seen.insert(key).second) continue;
    out.points.push_back(p);
    if (cloud.normals) out.normals->push_back((*cloud.normals)[i]);
  }
  return out;
}

void write_point_cloud(std::ostream& os, const PointCloud& cloud) {
  if (cloud.normals && cloud.normals->size() != cloud.points.size())
    throw Error("point cloud: normals count does not match points");
  io::Writer w(os);
  w.magic(kCloudMagic);
  w.u64(cloud.points.size());
  for (const auto& p : cloud.points)
    for (int i = 0; i < 3; ++i) w.f32(p[i]);
  w.u8(cloud.normals ? 1 : 0);
  if (cloud.normals)
    for (const auto& n : *cloud.normals)
      for (int i = 0; i < 3; ++i) w.f32(n[i]);
  w.check();
}

PointCloud read_point_cloud(std::istream& is) {
  io::Reader r(is);
  r.expect_magic(kCloudMagic);
  const auto count = r.u64();
  if (count > (1ull << 32)) throw Error("point cloud: implausible point count");
  PointCloud out;
  out.points.resize(count);
  for (auto& p : out.points)
    for (int i = 0; i < 3; ++i) p[i] = r.f32();
  const auto has_normals = r.u8();
  if (has_normals > 1) throw Error("point cloud: bad normals flag");
  if (has_normals) {
    out.normals.emplace(count);
    for (auto& n : *out.normals)
      for (int i = 0; i < 3; ++i) n[i] = r.f32();
  }
  return out;
}

void write_point_cloud(const std::filesystem::path& path, const PointCloud& cloud) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  write_point_cloud(os, cloud);
}

PointCloud read_point_cloud(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path.string());
  return read_point_cloud(is);
}

}  // namespace cgrkit
