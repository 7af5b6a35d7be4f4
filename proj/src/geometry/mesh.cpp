#include "cgrkit/geometry/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <utility>

#include "cgrkit/geometry/bvh.hpp"

namespace cgrkit {

namespace {

constexpr double kRayEpsilon = 1e-9;
constexpr double kBaryTolerance = 1e-12;

}  // namespace

TriangleMesh::TriangleMesh() : TriangleMesh({}, {}) {}

TriangleMesh::TriangleMesh(std::vector<Vec3> vertices, std::vector<Triangle> triangles)
    : vertices_(std::move(vertices)), triangles_(std::move(triangles)) {
  for (const auto& v : vertices_) {
    if (!v.allFinite()) throw Error("mesh: non-finite vertex");
    bounds_.extend(v);
  }
  normals_.resize(triangles_.size(), Vec3::Zero());
  degenerate_.resize(triangles_.size(), 0);
  for (std::size_t i = 0; i < triangles_.size(); ++i) {
    const auto& t = triangles_[i];
    for (auto idx : t)
      if (idx >= vertices_.size()) throw Error("mesh: triangle index out of range");
    const Vec3 n = (vertices_[t[1]] - vertices_[t[0]]).cross(vertices_[t[2]] - vertices_[t[0]]);
    const double len = n.norm();
    if (!(len > 1e-20)) {
      degenerate_[i] = 1;
    } else {
      normals_[i] = n / len;
    }
  }

  std::map<std::pair<std::uint32_t, std::uint32_t>, int> edges;
  for (const auto& t : triangles_) {
    for (int k = 0; k < 3; ++k) {
      const std::uint32_t a = t[k];
      const std::uint32_t b = t[(k + 1) % 3];
      // +1 for a<b direction, +100 for the reverse direction
      if (a < b)
        edges[{a, b}] += 1;
      else
        edges[{b, a}] += 100;
    }
  }
  watertight_ = !triangles_.empty() &&
                std::all_of(edges.begin(), edges.end(), [](const auto& e) { return e.second == 101; });

  bvh_ = std::make_shared<const Bvh>(vertices_, triangles_, degenerate_);
}

double TriangleMesh::triangle_area(std::size_t tri) const {
  const auto c = corners(tri);
  return 0.5 * (c[1] - c[0]).cross(c[2] - c[0]).norm();
}

double TriangleMesh::surface_area() const {
  double a = 0.0;
  for (std::size_t i = 0; i < triangles_.size(); ++i) a += triangle_area(i);
  return a;
}

TriangleMesh TriangleMesh::transformed(const RigidTransform& tf) const {
  std::vector<Vec3> v;
  v.reserve(vertices_.size());
  for (const auto& p : vertices_) v.push_back(tf.apply(p));
  return {std::move(v), triangles_};
}

TriangleMesh TriangleMesh::merge(std::span<const TriangleMesh> parts) {
  std::vector<Vec3> v;
  std::vector<Triangle> t;
  for (const auto& part : parts) {
    const auto offset = static_cast<std::uint32_t>(v.size());
    v.insert(v.end(), part.vertices().begin(), part.vertices().end());
    for (const auto& tri : part.triangles()) t.push_back({tri[0] + offset, tri[1] + offset, tri[2] + offset});
  }
  return {std::move(v), std::move(t)};
}

std::optional<double> intersect_triangle(const Vec3& v0, const Vec3& v1, const Vec3& v2,
                                         const Vec3& origin, const Vec3& dir, double t_max) {
  const Vec3 e1 = v1 - v0;
  const Vec3 e2 = v2 - v0;
  const Vec3 pvec = dir.cross(e2);
  const double det = e1.dot(pvec);
  if (std::abs(det) <= 1e-14 * (e1.squaredNorm() + e2.squaredNorm())) return std::nullopt;
  const double inv = 1.0 / det;
  const Vec3 tvec = origin - v0;
  const double u = tvec.dot(pvec) * inv;
  if (u < -kBaryTolerance || u > 1.0 + kBaryTolerance) return std::nullopt;
  const Vec3 qvec = tvec.cross(e1);
  const double v = dir.dot(qvec) * inv;
  if (v < -kBaryTolerance || u + v > 1.0 + kBaryTolerance) return std::nullopt;
  const double t = e2.dot(qvec) * inv;
  if (!(t > kRayEpsilon) || t > t_max) return std::nullopt;
  return t;
}

std::optional<RayHit> ray_mesh_intersect(const TriangleMesh& mesh, const Vec3& origin,
                                         const Vec3& direction, double t_max) {
  if (mesh.empty()) return std::nullopt;
  return mesh.bvh().nearest(origin, direction, t_max, mesh.normals());
}

std::optional<RayHit> ray_mesh_intersect_exhaustive(const TriangleMesh& mesh, const Vec3& origin,
                                                    const Vec3& direction, double t_max) {
  std::optional<RayHit> best;
  for (std::size_t i = 0; i < mesh.triangle_count(); ++i) {
    if (mesh.is_degenerate(i)) continue;
    const auto c = mesh.corners(i);
    const auto t = intersect_triangle(c[0], c[1], c[2], origin, direction, t_max);
    if (!t) continue;
    if (!best || *t < best->t) best = RayHit{*t, mesh.normals()[i], static_cast<std::uint32_t>(i)};
  }
  return best;
}

int ray_crossings(const TriangleMesh& mesh, const Vec3& origin, const Vec3& direction) {
  if (mesh.empty()) return 0;
  std::vector<double> hits;
  mesh.bvh().all_hits(origin, direction, std::numeric_limits<double>::infinity(), hits);
  std::sort(hits.begin(), hits.end());
  int count = 0;
  double last = -1.0;
  for (double t : hits) {
    if (count == 0 || t - last > 1e-9) ++count;
    last = t;
  }
  return count;
}

bool point_inside(const TriangleMesh& mesh, const Vec3& p) {
  static const Vec3 kDir = Vec3(0.5773502691896258, 0.5773502691896258 + 1.3e-3, 0.5773502691896258 - 2.1e-3).normalized();
  return (ray_crossings(mesh, p, kDir) % 2) == 1;
}

std::vector<TriangleMesh> split_components(const TriangleMesh& mesh) {
  std::vector<std::uint32_t> parent(mesh.vertices().size());
  std::iota(parent.begin(), parent.end(), 0u);
  auto find = [&](std::uint32_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& t : mesh.triangles()) {
    parent[find(t[1])] = find(t[0]);
    parent[find(t[2])] = find(t[0]);
  }
  std::map<std::uint32_t, std::size_t> piece_of_root;
  std::vector<std::vector<Triangle>> pieces;
  for (const auto& t : mesh.triangles()) {
    const auto root = find(t[0]);
    auto [it, inserted] = piece_of_root.emplace(root, pieces.size());
    if (inserted) pieces.emplace_back();
    pieces[it->second].push_back(t);
  }
  std::vector<TriangleMesh> out;
  for (const auto& tris : pieces) {
    std::map<std::uint32_t, std::uint32_t> remap;
    std::vector<Vec3> v;
    std::vector<Triangle> local;
    for (const auto& t : tris) {
      Triangle lt{};
      for (int k = 0; k < 3; ++k) {
        auto [it, inserted] = remap.emplace(t[k], static_cast<std::uint32_t>(v.size()));
        if (inserted) v.push_back(mesh.vertices()[t[k]]);
        lt[k] = it->second;
      }
      local.push_back(lt);
    }
    out.emplace_back(std::move(v), std::move(local));
  }
  return out;
}

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  const Vec3 ap = p - a;
  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return a;
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return a + (d1 / (d1 - d3)) * ab;
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return a + (d2 / (d2 - d6)) * ac;
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0)
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

double point_mesh_distance(const TriangleMesh& mesh, const Vec3& p) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < mesh.triangle_count(); ++i) {
    const auto c = mesh.corners(i);
    best = std::min(best, (closest_point_on_triangle(p, c[0], c[1], c[2]) - p).norm());
  }
  return best;
}

namespace {

class MeshBuilder {
 public:
  std::uint32_t vertex(const Vec3& p) {
    v_.push_back(p);
    return static_cast<std::uint32_t>(v_.size() - 1);
  }
  /// Adds a triangle oriented so its normal agrees with the outward hint.
  void tri(std::uint32_t a, std::uint32_t b, std::uint32_t c, const Vec3& outward) {
    const Vec3 n = (v_[b] - v_[a]).cross(v_[c] - v_[a]);
    if (n.dot(outward) < 0)
      t_.push_back({a, c, b});
    else
      t_.push_back({a, b, c});
  }
  void quad(std::uint32_t a, std::uint32_t b, std::uint32_t c, std::uint32_t d, const Vec3& outward) {
    tri(a, b, c, outward);
    tri(a, c, d, outward);
  }
  const Vec3& at(std::uint32_t i) const { return v_[i]; }
  TriangleMesh build() { return {std::move(v_), std::move(t_)}; }

 private:
  std::vector<Vec3> v_;
  std::vector<Triangle> t_;
};

}  // namespace

TriangleMesh make_box(const Vec3& min, const Vec3& max) {
  if (!((max - min).array() > 0).all()) throw Error("make_box: non-positive extent");
  MeshBuilder mb;
  std::uint32_t idx[8];
  for (int i = 0; i < 8; ++i)
    idx[i] = mb.vertex(Vec3((i & 1) ? max.x() : min.x(), (i & 2) ? max.y() : min.y(), (i & 4) ? max.z() : min.z()));
  mb.quad(idx[0], idx[2], idx[6], idx[4], Vec3(-1, 0, 0));
  mb.quad(idx[1], idx[3], idx[7], idx[5], Vec3(1, 0, 0));
  mb.quad(idx[0], idx[1], idx[5], idx[4], Vec3(0, -1, 0));
  mb.quad(idx[2], idx[3], idx[7], idx[6], Vec3(0, 1, 0));
  mb.quad(idx[0], idx[1], idx[3], idx[2], Vec3(0, 0, -1));
  mb.quad(idx[4], idx[5], idx[7], idx[6], Vec3(0, 0, 1));
  return mb.build();
}

TriangleMesh make_box(const Vec3& dims) { return make_box(-0.5 * dims, 0.5 * dims); }

TriangleMesh make_cylinder(double radius, double height, int segments) {
  if (radius <= 0 || height <= 0 || segments < 3) throw Error("make_cylinder: bad parameters");
  MeshBuilder mb;
  std::vector<std::uint32_t> bottom, top;
  for (int i = 0; i < segments; ++i) {
    const double a = 2.0 * kPi * i / segments;
    bottom.push_back(mb.vertex(Vec3(radius * std::cos(a), radius * std::sin(a), 0.0)));
  }
  for (int i = 0; i < segments; ++i) {
    const double a = 2.0 * kPi * i / segments;
    top.push_back(mb.vertex(Vec3(radius * std::cos(a), radius * std::sin(a), height)));
  }
  const auto cb = mb.vertex(Vec3(0, 0, 0));
  const auto ct = mb.vertex(Vec3(0, 0, height));
  for (int i = 0; i < segments; ++i) {
    const int j = (i + 1) % segments;
    const double a = 2.0 * kPi * (i + 0.5) / segments;
    mb.quad(bottom[i], bottom[j], top[j], top[i], Vec3(std::cos(a), std::sin(a), 0));
    mb.tri(cb, bottom[j], bottom[i], Vec3(0, 0, -1));
    mb.tri(ct, top[i], top[j], Vec3(0, 0, 1));
  }
  return mb.build();
}

TriangleMesh make_icosphere(double radius, int subdivisions) {
  if (radius <= 0 || subdivisions < 0) throw Error("make_icosphere: bad parameters");
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {{-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0}, {0, -1, phi}, {0, 1, phi},
                         {0, -1, -phi}, {0, 1, -phi}, {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
  for (auto& p : v) p.normalize();
  std::vector<Triangle> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                             {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                             {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> mid;
    auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
      const auto key = std::minmax(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      v.push_back((v[a] + v[b]).normalized());
      const auto id = static_cast<std::uint32_t>(v.size() - 1);
      mid.emplace(key, id);
      return id;
    };
    std::vector<Triangle> next;
    next.reserve(f.size() * 4);
    for (const auto& t : f) {
      const auto a = midpoint(t[0], t[1]);
      const auto b = midpoint(t[1], t[2]);
      const auto c = midpoint(t[2], t[0]);
      next.push_back({t[0], a, c});
      next.push_back({t[1], b, a});
      next.push_back({t[2], c, b});
      next.push_back({a, b, c});
    }
    f = std::move(next);
  }
  for (auto& p : v) p *= radius;
  for (auto& t : f) {
    const Vec3 n = (v[t[1]] - v[t[0]]).cross(v[t[2]] - v[t[0]]);
    if (n.dot(v[t[0]] + v[t[1]] + v[t[2]]) < 0) std::swap(t[1], t[2]);
  }
  return {std::move(v), std::move(f)};
}

}  // namespace cgrkit
