#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "cgrkit/geometry/mesh.hpp"
#include "cgrkit/geometry/mesh_io.hpp"
#include "cgrkit/geometry/point_cloud.hpp"
#include "cgrkit/geometry/transform.hpp"
#include "cgrkit/geometry/voxel.hpp"
#include "test_util.hpp"

using namespace cgrkit;

namespace {

// Plane-then-inside-test intersection written independently of the library's
// Möller–Trumbore routine.
std::optional<std::pair<double, std::size_t>> oracle_ray(const TriangleMesh& mesh, const Vec3& o, const Vec3& d,
                                                         double t_max) {
  std::optional<std::pair<double, std::size_t>> best;
  for (std::size_t i = 0; i < mesh.triangle_count(); ++i) {
    const auto c = mesh.corners(i);
    const Vec3 n = (c[1] - c[0]).cross(c[2] - c[0]);
    const double denom = n.dot(d);
    if (std::abs(denom) < 1e-15) continue;
    const double t = n.dot(c[0] - o) / denom;
    if (t <= 1e-9 || t > t_max) continue;
    const Vec3 p = o + t * d;
    bool inside = true;
    for (int k = 0; k < 3; ++k)
      if (n.dot((c[(k + 1) % 3] - c[k]).cross(p - c[k])) < -1e-12 * n.squaredNorm()) inside = false;
    if (!inside) continue;
    if (!best || t < best->first) best = std::make_pair(t, i);
  }
  return best;
}

}  // namespace

TEST_CASE("ray hits the unit cube face") {
  const auto cube = make_box(Vec3(1, 1, 1));
  const auto hit = ray_mesh_intersect(cube, Vec3::Zero(), Vec3(1, 0, 0), 10.0);
  REQUIRE(hit);
  CHECK(hit->t == doctest::Approx(0.5).epsilon(1e-12));
  CHECK((hit->normal - Vec3(1, 0, 0)).norm() < 1e-12);
  CHECK_FALSE(ray_mesh_intersect(cube, Vec3::Zero(), Vec3(1, 0, 0), 0.4));
}

TEST_CASE("ray from icosphere center lands near the radius") {
  const auto sphere = make_icosphere(1.0, 4);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    const Vec3 d = test::random_unit(rng);
    const auto hit = ray_mesh_intersect(sphere, Vec3::Zero(), d, 5.0);
    REQUIRE(hit);
    CHECK(std::abs(hit->t - 1.0) < 0.01);
  }
}

TEST_CASE("accelerated ray casting matches the exhaustive scan bit for bit") {
  std::vector<TriangleMesh> meshes;
  meshes.push_back(make_box(Vec3(1, 1, 1)));
  meshes.push_back(make_icosphere(0.3, 3));
  meshes.push_back(make_cylinder(0.2, 0.5, 40));
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int hits = 0;
  for (const auto& mesh : meshes) {
    for (int i = 0; i < 4000; ++i) {
      const Vec3 o(u(rng), u(rng), u(rng));
      const Vec3 d = test::random_unit(rng);
      const double t_max = 0.2 + 2.0 * (u(rng) + 1.0);
      const auto fast = ray_mesh_intersect(mesh, o, d, t_max);
      const auto slow = ray_mesh_intersect_exhaustive(mesh, o, d, t_max);
      REQUIRE(fast.has_value() == slow.has_value());
      if (fast) {
        ++hits;
        CHECK(fast->t == slow->t);
        CHECK(fast->triangle == slow->triangle);
      }
      const auto oracle = oracle_ray(mesh, o, d, t_max);
      REQUIRE(fast.has_value() == oracle.has_value());
      if (fast) CHECK(std::abs(fast->t - oracle->first) < 1e-9);
    }
  }
  CHECK(hits > 1000);
}

TEST_CASE("degenerate triangles are skipped") {
  std::vector<Vec3> v = {{0, 0, 1}, {1, 0, 1}, {2, 0, 1}, {-1, -1, 2}, {1, -1, 2}, {0, 1, 2}};
  TriangleMesh mesh(v, {{0, 1, 2}, {3, 4, 5}});
  CHECK(mesh.is_degenerate(0));
  CHECK(mesh.normals()[0].norm() == 0.0);
  const auto hit = ray_mesh_intersect(mesh, Vec3(0.5, 0, 0), Vec3(0, 0, 1), 10.0);
  REQUIRE(hit);
  CHECK(hit->triangle == 1);
  CHECK(hit->t == doctest::Approx(2.0));
}

TEST_CASE("primitives are watertight with unit outward normals") {
  for (const auto& mesh : {make_box(Vec3(1, 2, 3)), make_cylinder(0.1, 0.3, 24), make_icosphere(0.5, 2)}) {
    CHECK(mesh.is_watertight());
    const Vec3 c = mesh.bounds().center();
    for (std::size_t i = 0; i < mesh.triangle_count(); ++i) {
      CHECK(std::abs(mesh.normals()[i].norm() - 1.0) < 1e-9);
      const auto k = mesh.corners(i);
      CHECK(mesh.normals()[i].dot((k[0] + k[1] + k[2]) / 3.0 - c) > 0);
    }
  }
  TriangleMesh open({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, {{0, 1, 2}});
  CHECK_FALSE(open.is_watertight());
}

TEST_CASE("point containment by ray parity") {
  const auto cube = make_box(Vec3(1, 1, 1));
  CHECK(point_inside(cube, Vec3(0.1, -0.2, 0.3)));
  CHECK_FALSE(point_inside(cube, Vec3(0.6, 0, 0)));
  const auto sphere = make_icosphere(0.5, 3);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-0.6, 0.6);
  for (int i = 0; i < 500; ++i) {
    const Vec3 p(u(rng), u(rng), u(rng));
    if (std::abs(p.norm() - 0.5) < 0.01) continue;
    CHECK(point_inside(sphere, p) == (p.norm() < 0.5));
  }
}

TEST_CASE("voxelizing the unit cube at half-unit size gives a 26-cell shell") {
  const auto grid = voxelize_mesh(make_box(Vec3(1, 1, 1)), 0.5);
  CHECK(grid.size() == 26);
  CHECK_FALSE(grid.contains({1, 1, 1}));
}

TEST_CASE("a small triangle occupies exactly one voxel") {
  TriangleMesh tri({{0.011, 0.012, 0.013}, {0.012, 0.012, 0.013}, {0.011, 0.014, 0.0135}}, {{0, 1, 2}});
  CHECK(voxelize_mesh(tri, 0.005).size() == 1);
  CHECK(voxelize_mesh(TriangleMesh(), 0.005).empty());
}

TEST_CASE("fine cube voxelization agrees with surface point binning") {
  const auto cube = make_box(Vec3(1, 1, 1));
  const auto grid = voxelize_mesh(cube, 0.005);
  CHECK(grid.size() == 240002);
  const auto samples = sample_surface_points(cube, 1000000, 17);
  std::set<VoxelKey> binned;
  for (Vec3 p : samples.points) {
    // interpolation can leave a sample an ulp off its face plane
    for (int i = 0; i < 3; ++i)
      if (std::abs(std::abs(p[i]) - 0.5) < 1e-12) p[i] = std::copysign(0.5, p[i]);
    const VoxelKey k = grid.key_of(p);
    binned.insert(k);
  }
  const double ratio = static_cast<double>(binned.size()) / static_cast<double>(grid.size());
  CHECK(ratio > 0.98);
  CHECK(ratio <= 1.0);
  // every sampled point's voxel must be occupied
  for (const auto& k : binned) CHECK(grid.contains(k));
}

TEST_CASE("occupied voxels stay within a voxel diagonal of the surface") {
  const auto sphere = make_icosphere(0.05, 2);
  const double size = 0.004;
  const auto grid = voxelize_mesh(sphere, size);
  for (const auto& k : grid.occupied())
    CHECK(point_mesh_distance(sphere, grid.center(k)) <= size * std::sqrt(3.0));
}

TEST_CASE("voxelization ignores vertex and triangle order") {
  const auto mesh = make_icosphere(0.07, 2);
  const auto base = voxelize_mesh(mesh, 0.006);
  std::mt19937_64 rng(8);
  std::vector<std::uint32_t> perm(mesh.vertices().size());
  std::iota(perm.begin(), perm.end(), 0u);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<Vec3> v(mesh.vertices().size());
  for (std::size_t i = 0; i < perm.size(); ++i) v[perm[i]] = mesh.vertices()[i];
  std::vector<Triangle> t;
  for (const auto& tri : mesh.triangles()) t.push_back({perm[tri[1]], perm[tri[2]], perm[tri[0]]});
  std::shuffle(t.begin(), t.end(), rng);
  CHECK(voxelize_mesh(TriangleMesh(v, t), 0.006) == base);
}

TEST_CASE("solid voxelization fills the interior") {
  const auto box = make_box(Vec3(0.04, 0.04, 0.04));
  const auto solid = voxelize_mesh_solid(box, 0.005);
  CHECK(solid.contains_point(Vec3::Zero()));
  CHECK(solid.size() > voxelize_mesh(box, 0.005).size());
  DenseOccupancy dense(solid);
  CHECK(dense.contains_point(Vec3(0.001, 0.002, -0.003)));
  CHECK_FALSE(dense.contains_point(Vec3(0.05, 0, 0)));
}

TEST_CASE("chamfer distance basics") {
  std::vector<Vec3> a = {{0, 0, 0}};
  std::vector<Vec3> b = {{0, 0, 0.003}};
  CHECK(chamfer_distance(a, b) == doctest::Approx(0.003).epsilon(1e-12));
  CHECK(chamfer_distance(a, a) == 0.0);
  CHECK_THROWS_WITH(chamfer_distance(a, std::vector<Vec3>{}), "empty cloud");
}

TEST_CASE("chamfer distance matches the all-pairs computation") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> g(0.0, 0.05);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<Vec3> a(200), b(200);
    for (auto& p : a) p = Vec3(g(rng), g(rng), g(rng));
    for (auto& p : b) p = Vec3(g(rng), g(rng), g(rng));
    const double fast = chamfer_distance(a, b);
    CHECK(std::abs(fast - test::brute_chamfer(a, b)) < 1e-12);
    CHECK(fast == chamfer_distance(b, a));
    const auto tf = test::random_transform(rng, 0.5);
    std::vector<Vec3> ta, tb;
    for (const auto& p : a) ta.push_back(tf.apply(p));
    for (const auto& p : b) tb.push_back(tf.apply(p));
    CHECK(std::abs(chamfer_distance(ta, tb) - fast) < 1e-9);
  }
}

TEST_CASE("surface sampling spreads points by area") {
  const auto cube = make_box(Vec3(1, 1, 1));
  const auto cloud = sample_surface_points(cube, 6000, 99);
  REQUIRE(cloud.size() == 6000);
  std::array<int, 6> faces{};
  for (const auto& p : cloud.points) {
    int axis = 0;
    for (int i = 1; i < 3; ++i)
      if (std::abs(p[i]) > std::abs(p[axis])) axis = i;
    CHECK(std::abs(std::abs(p[axis]) - 0.5) < 1e-12);
    faces[2 * axis + (p[axis] > 0 ? 1 : 0)]++;
  }
  for (int f : faces) CHECK(std::abs(f - 1000) <= 100);

  const auto again = sample_surface_points(cube, 6000, 99);
  CHECK(again.points == cloud.points);
  CHECK(*again.normals == *cloud.normals);

  const auto one = sample_surface_points(cube, 1, 4);
  REQUIRE(one.size() == 1);
  double best = 1.0;
  for (std::size_t i = 0; i < cube.triangle_count(); ++i) {
    const auto c = cube.corners(i);
    best = std::min(best, (closest_point_on_triangle(one.points[0], c[0], c[1], c[2]) - one.points[0]).norm());
  }
  CHECK(best < 1e-12);
  CHECK_THROWS(sample_surface_points(TriangleMesh(), 3, 1));
}

TEST_CASE("rendering a frontal plane fills every pixel") {
  const auto plane = make_box(Vec3(-5, -5, 1.0), Vec3(5, 5, 1.1));
  CameraIntrinsics k;
  const auto cloud = render_partial_cloud(plane, RigidTransform::identity(), k);
  CHECK(cloud.size() == 4096);
  for (const auto& n : *cloud.normals) CHECK((n - Vec3(0, 0, -1)).norm() < 1e-12);
  CHECK(render_partial_cloud(TriangleMesh(), RigidTransform::identity(), k).empty());
}

TEST_CASE("rendered points all face the camera") {
  const auto sphere = make_icosphere(0.1, 3).transformed(RigidTransform::from_translation(Vec3(0.02, -0.01, 0.5)));
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 4; ++trial) {
    const auto cam = RigidTransform(axis_angle(test::random_unit(rng), 0.1), Vec3(0.01 * trial, 0, 0));
    const auto cloud = render_partial_cloud(sphere, cam, {48, 40, 60.0, 24.0, 20.0});
    CHECK(cloud.size() > 100);
    for (std::size_t i = 0; i < cloud.size(); ++i)
      CHECK((*cloud.normals)[i].dot(cam.translation() - cloud.points[i]) > 0);
  }
}

TEST_CASE("voxel downsampling keeps the first point per cell") {
  PointCloud c;
  c.points = {{0.001, 0.001, 0.001}, {0.002, 0.002, 0.002}, {0.011, 0, 0}, {-0.001, 0, 0}};
  const auto d = voxel_downsample(c, 0.01);
  REQUIRE(d.size() == 3);
  CHECK(d.points[0] == c.points[0]);
  CHECK(d.points[1] == c.points[2]);
}

TEST_CASE("point cloud files round-trip") {
  const auto cloud = sample_surface_points(make_icosphere(0.2, 1), 50, 3);
  std::stringstream first;
  write_point_cloud(first, cloud);
  const auto back = read_point_cloud(first);
  std::stringstream second;
  write_point_cloud(second, back);
  CHECK(first.str() == second.str());
  for (std::size_t i = 0; i < cloud.size(); ++i)
    for (int k = 0; k < 3; ++k) CHECK(back.points[i][k] == static_cast<double>(static_cast<float>(cloud.points[i][k])));

  std::string bytes = first.str();
  bytes[6] = '2';
  std::stringstream bad(bytes);
  CHECK_THROWS_WITH(read_point_cloud(bad), "version mismatch");
  std::stringstream cut(first.str().substr(0, 30));
  CHECK_THROWS_WITH(read_point_cloud(cut), "truncated file");
}

TEST_CASE("mesh files round-trip through OBJ and STL") {
  const auto mesh = make_cylinder(0.05, 0.1, 16);
  std::stringstream obj;
  write_obj(obj, mesh);
  const auto from_obj = read_obj(obj);
  CHECK(from_obj.vertices() == mesh.vertices());
  CHECK(from_obj.triangles() == mesh.triangles());
  CHECK(from_obj.is_watertight());

  std::stringstream stl;
  write_stl(stl, mesh);
  const auto from_stl = read_stl(stl);
  CHECK(from_stl.triangle_count() == mesh.triangle_count());
  CHECK(from_stl.is_watertight());
  CHECK(from_stl.surface_area() == doctest::Approx(mesh.surface_area()).epsilon(1e-5));

  std::stringstream quad("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1 2/2 3/3 -1\n");
  CHECK(read_obj(quad).triangle_count() == 2);
  std::stringstream broken("v 0 0 0\nf 1 2 3\n");
  CHECK_THROWS(read_obj(broken));
}

TEST_CASE("rigid transforms validate and compose") {
  std::mt19937_64 rng(4);
  const auto a = test::random_transform(rng, 1.0);
  const auto b = test::random_transform(rng, 1.0);
  const Vec3 p(0.3, -0.2, 0.1);
  CHECK(((a * b).apply(p) - a.apply(b.apply(p))).norm() < 1e-12);
  CHECK((a.inverse().apply(a.apply(p)) - p).norm() < 1e-12);
  Mat3 skew = Mat3::Identity();
  skew(0, 1) = 1e-3;
  CHECK_THROWS(RigidTransform(skew, Vec3::Zero()));
  Mat3 mirror = Mat3::Identity();
  mirror(2, 2) = -1;
  CHECK_THROWS(RigidTransform(mirror, Vec3::Zero()));
  CHECK(orthonormality_error(nearest_rotation(skew)) < 1e-12);
  const Mat3 f = frame_from_z(Vec3(0.2, 0.3, 0.9));
  CHECK(orthonormality_error(f) < 1e-12);
  CHECK((f.col(2) - Vec3(0.2, 0.3, 0.9).normalized()).norm() < 1e-12);
}
