#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "cgrkit/binary_io.hpp"
#include "cgrkit/geometry/mesh_io.hpp"
#include "cgrkit/scene/annotation.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace cgrkit;

namespace {

std::shared_ptr<const TriangleMesh> shared(TriangleMesh m) { return std::make_shared<const TriangleMesh>(std::move(m)); }

Scene one_object(const TriangleMesh& mesh, const RigidTransform& pose, TablePlane table = {Vec3(0, 0, -10), Vec3::UnitZ()}) {
  return Scene({{"obj", shared(mesh)}}, {{"obj", pose}}, table);
}

AnnotationParams small_params() {
  AnnotationParams p;
  p.voxel_size = 0.01;
  p.directions = 12;
  p.filter_density = 20000;
  return p;
}

// Membership in the local frame: behind the origin and within the radius.
bool cylinder_oracle(const RigidTransform& f, const Vec3& p, double r, double len) {
  const Vec3 q = f.apply_inverse(p);
  return q.z() <= 0 && q.z() >= -len && q.x() * q.x() + q.y() * q.y() <= r * r;
}

std::string bytes_of(const CgrDataset& ds) {
  std::ostringstream os;
  write_dataset(os, ds);
  return os.str();
}

}  // namespace

TEST_CASE("identity-posed single cube merges to the input mesh") {
  const auto cube = make_box(Vec3(0.04, 0.04, 0.04));
  const Scene scene = one_object(cube, RigidTransform::identity());
  const auto merged = scene.merged();
  CHECK(merged.mesh.vertices() == cube.vertices());
  CHECK(merged.mesh.triangles() == cube.triangles());
}

TEST_CASE("disjoint cubes merge with summed triangle counts and instance lookup") {
  const auto cube = make_box(Vec3(0.04, 0.04, 0.04));
  const Scene scene({{"c", shared(cube)}}, {{"c", RigidTransform::identity()}, {"c", RigidTransform::from_translation(Vec3(0.2, 0, 0))}}, {});
  const auto merged = scene.merged();
  CHECK(merged.mesh.triangle_count() == 2 * cube.triangle_count());
  CHECK(merged.instance_of(0) == 0);
  CHECK(merged.instance_of(static_cast<std::uint32_t>(cube.triangle_count())) == 1);
  CHECK(merged.mesh.is_watertight());
}

TEST_CASE("posed instance vertices equal the transformed originals") {
  std::mt19937_64 rng(4);
  const auto cyl = make_cylinder(0.03, 0.08, 16);
  const RigidTransform pose = test::random_transform(rng, 0.3);
  const auto merged = one_object(cyl, pose).merged();
  for (std::size_t v = 0; v < cyl.vertices().size(); ++v) {
    const Vec3 expect = pose.rotation() * cyl.vertices()[v] + pose.translation();
    CHECK((merged.mesh.vertices()[v] - expect).norm() <= 1e-12);
  }
}

TEST_CASE("scene file parsing, errors and save round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "cgrkit_scene_test";
  std::filesystem::create_directories(dir);
  write_obj(dir / "cube.obj", make_box(Vec3(0.04, 0.04, 0.04)));
  const std::string text = R"({
    "meshes": {"cube": "cube.obj", "can": {"cylinder": [0.03, 0.1, 12]}},
    "instances": [
      {"mesh": "cube", "pose": {"quat_wxyz": [0.7071067811865476, 0, 0, 0.7071067811865476], "t": [0.1, 0, 0.02]}},
      {"mesh": "can", "pose": {"t": [-0.1, 0, 0]}}
    ],
    "table": {"point": [0, 0, 0], "normal": [0, 0, 1]}
  })";
  const Scene scene = parse_scene(text, dir);
  REQUIRE(scene.instances().size() == 2);
  CHECK(scene.object_mesh(1).triangle_count() == make_cylinder(0.03, 0.1, 12).triangle_count());
  CHECK((scene.instances()[0].pose.apply(Vec3(1, 0, 0)) - Vec3(0.1, 1, 0.02)).norm() < 1e-12);

  save_scene(dir / "saved.json", scene, {{"can", {"cylinder", {0.03, 0.1, 12}}}});
  const Scene back = compose_scene(dir / "saved.json");
  CHECK(back.merged().mesh.triangle_count() == scene.merged().mesh.triangle_count());
  for (std::size_t i = 0; i < 2; ++i)
    CHECK((back.instances()[i].pose.rotation() - scene.instances()[i].pose.rotation()).norm() < 1e-12);

  std::string missing = text;
  missing.replace(missing.find("cube.obj"), 8, "gone.obj");
  try {
    parse_scene(missing, dir);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("instance 0") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_scene(R"({"meshes": {}, "instances": [{"mesh": "x"}]})", dir), Error);
  CHECK_THROWS_AS(parse_scene(R"({"meshes": {"b": {"box": [1,1,1]}}, "instances": [{"mesh": "b", "pose": {"quat_wxyz": [2,0,0,0]}}]})", dir), Error);
  CHECK_THROWS_AS(parse_scene(R"({"meshes": {"b": {"box": [1,1,1]}}, "instances": [], "table": {"point": [0,0,0], "normal": [0,0,2]}})", dir), Error);
  CHECK_THROWS_AS(parse_scene("{", dir), Error);
}

TEST_CASE("unit cube at 0.5 m yields 26 surface points") {
  AnnotationParams p;
  p.voxel_size = 0.5;
  p.directions = 7;
  const auto cube = make_box(Vec3(1, 1, 1));
  const auto frames = candidate_frames(cube, p, 0);
  CHECK(frames.size() == 26u * 7u);
  const auto pts = surface_points(cube, 0.5);
  CHECK(pts.size() == 26u);
  for (const auto& q : pts) CHECK(point_mesh_distance(cube, q) <= 1e-12);
}

TEST_CASE("candidate frames are valid, deterministic and seed dependent") {
  const auto sphere = make_icosphere(0.03, 2);
  AnnotationParams p;
  p.voxel_size = 0.01;
  p.directions = 50;
  const auto a = candidate_frames(sphere, p, 3);
  const auto b = candidate_frames(sphere, p, 3);
  const auto c = candidate_frames(sphere, p, 4);
  REQUIRE(a.size() == b.size());
  CHECK(a == b);
  CHECK(!(a == c));
  for (const auto& f : a) {
    CHECK(orthonormality_error(f.rotation()) < 1e-9);
    CHECK(point_mesh_distance(sphere, f.translation()) < 1e-12);
  }
}

TEST_CASE("spiral directions are unit and evenly spread") {
  for (std::uint64_t seed : {0ull, 9ull}) {
    const auto dirs = spiral_directions(300, seed);
    Vec3 mean = Vec3::Zero();
    for (const auto& d : dirs) {
      CHECK(std::abs(d.norm() - 1.0) < 1e-12);
      mean += d;
    }
    CHECK((mean / 300.0).norm() < 0.01);
    // every direction has a neighbour within the spacing of an even 300-point set
    double worst = 0.0;
    for (std::size_t i = 0; i < dirs.size(); ++i) {
      double best = 10.0;
      for (std::size_t j = 0; j < dirs.size(); ++j)
        if (i != j) best = std::min(best, (dirs[i] - dirs[j]).norm());
      worst = std::max(worst, best);
    }
    CHECK(worst < 2.0 * std::sqrt(4.0 * kPi / 300.0));
  }
}

TEST_CASE("point-in-cylinder test agrees with the local-frame oracle on 1e5 points") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  std::size_t inside = 0;
  for (int f = 0; f < 100; ++f) {
    const RigidTransform frame = test::random_transform(rng, 0.1);
    for (int k = 0; k < 1000; ++k) {
      const Vec3 p(u(rng), u(rng), u(rng));
      const bool want = cylinder_oracle(frame, p, 0.06, 0.25);
      inside += want;
      CHECK(in_approach_cylinder(frame, p, 0.06, 0.25) == want);
    }
  }
  CHECK(inside > 100);
}

TEST_CASE("filter over a sampled scene equals any() of the per-point oracle") {
  std::mt19937_64 rng(22);
  const Scene scene({{"b", shared(make_box(Vec3(0.05, 0.05, 0.05)))}, {"s", shared(make_icosphere(0.04, 2))}},
                    {{"b", RigidTransform::from_translation(Vec3(0.1, 0, 0.025))},
                     {"s", RigidTransform::from_translation(Vec3(-0.1, 0.05, 0.04))}},
                    {Vec3(0, 0, -5), Vec3::UnitZ()});
  const SceneSamples samples = sample_scene(scene, 40000, 1);
  int hits = 0;
  for (int f = 0; f < 200; ++f) {
    const RigidTransform frame = test::random_transform(rng, 0.2);
    bool want = false;
    for (const auto& p : samples.points) want = want || cylinder_oracle(frame, p, 0.06, 0.25);
    hits += want;
    CHECK(approach_collision_filter(frame, samples, scene.table(), 0.06, 0.25) == want);
  }
  CHECK(hits > 10);
  CHECK(hits < 190);
}

TEST_CASE("table check matches a dense rim sampling") {
  std::mt19937_64 rng(23);
  const TablePlane table{Vec3(0, 0, 0.01), Vec3(0.1, 0.2, 1).normalized()};
  int agree = 0, total = 0;
  for (int f = 0; f < 500; ++f) {
    const RigidTransform frame = test::random_transform(rng, 0.2);
    double lowest = 1e9;
    for (int cap = 0; cap < 2; ++cap)
      for (int a = 0; a < 3600; ++a) {
        const double ang = 2 * kPi * a / 3600;
        const Vec3 q(0.06 * std::cos(ang), 0.06 * std::sin(ang), cap ? -0.25 : 0.0);
        lowest = std::min(lowest, table.height(frame.apply(q)));
      }
    if (std::abs(lowest) < 1e-5) continue;
    ++total;
    agree += cylinder_hits_table(frame, table, 0.06, 0.25) == (lowest <= 0);
  }
  CHECK(agree == total);
  CHECK(total > 450);
}

TEST_CASE("lone object: top-down approach is clear, low side approach hits the table") {
  const auto cube = make_box(Vec3(-0.02, -0.02, 0), Vec3(0.02, 0.02, 0.04));
  const Scene scene = one_object(cube, RigidTransform::identity(), {});
  const SceneSamples samples = sample_scene(scene, 40000, 0);
  const Mat3 down = frame_from_z(Vec3(0, 0, -1));
  CHECK_FALSE(approach_collision_filter(RigidTransform(down, Vec3(0, 0, 0.04)), samples, scene.table(), 0.06, 0.25, 0));
  CHECK_FALSE(approach_collision_filter(RigidTransform(down, Vec3(0, 0, 0.04)), scene, 0.06, 0.25, 0));
  const Mat3 side = frame_from_z(Vec3(-1, 0, 0));
  CHECK(approach_collision_filter(RigidTransform(side, Vec3(0.02, 0, 0.02)), samples, scene.table(), 0.06, 0.25, 0));
}

TEST_CASE("enlarging the radius never clears a colliding frame") {
  std::mt19937_64 rng(24);
  const Scene scene({{"b", shared(make_box(Vec3(0.05, 0.05, 0.05)))}},
                    {{"b", RigidTransform::from_translation(Vec3(0, 0, 0.025))}}, {});
  const SceneSamples samples = sample_scene(scene, 40000, 2);
  for (int f = 0; f < 200; ++f) {
    const RigidTransform frame = test::random_transform(rng, 0.2);
    bool before = false;
    for (double r : {0.01, 0.02, 0.04, 0.06, 0.1}) {
      const bool now = approach_collision_filter(frame, samples, scene.table(), r, 0.25);
      CHECK((!before || now));
      before = now;
    }
  }
}

TEST_CASE("identity annotation equals the object-frame annotation") {
  const auto box = make_box(Vec3(0.04, 0.03, 0.05));
  const auto p = small_params();
  const auto local = annotate_object(box, p, 5);
  const auto ds = annotate_scene(one_object(box, RigidTransform::identity()), p, 0, 5);
  REQUIRE(ds.records.size() == local.size());
  for (std::size_t k = 0; k < local.size(); ++k) {
    CHECK(ds.records[k].valid);
    CHECK(ds.records[k].cgr.grid() == local[k].grid());
    CHECK(ds.records[k].cgr.frame() == local[k].frame());
  }
}

TEST_CASE("annotation is equivariant under a rigid pose") {
  std::mt19937_64 rng(25);
  const auto can = make_cylinder(0.025, 0.06, 24);
  const auto p = small_params();
  const RigidTransform pose = test::random_transform(rng, 0.2);
  const auto ref = annotate_scene(one_object(can, RigidTransform::identity()), p);
  const Scene posed = one_object(can, pose);
  const auto ds = annotate_scene(posed, p);
  REQUIRE(ds.records.size() == ref.records.size());
  for (std::size_t k = 0; k < ds.records.size(); ++k) {
    CHECK(ds.records[k].cgr.grid() == ref.records[k].cgr.grid());
    const RigidTransform expect = pose * ref.records[k].cgr.frame();
    CHECK((ds.records[k].cgr.frame().rotation() - expect.rotation()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((ds.records[k].cgr.frame().translation() - expect.translation()).norm() < 1e-12);
  }
  // recompute a subset directly against the world-frame mesh; distances must
  // agree everywhere, normal angles except where a ray lands exactly on a
  // facet edge and rounding picks the other facet
  const TriangleMesh world = posed.instance_mesh(0);
  double worst_d = 0.0;
  std::size_t cells = 0, theta_off = 0;
  for (std::size_t k = 0; k < ds.records.size(); k += 7) {
    const Cgr direct = compute_cgr(world, ds.records[k].cgr.frame(), p.grid);
    for (int c = 0; c < p.grid.cell_count(); ++c) {
      worst_d = std::max(worst_d, std::abs(direct.grid()[c].d - ds.records[k].cgr.grid()[c].d));
      theta_off += std::abs(direct.grid()[c].theta - ds.records[k].cgr.grid()[c].theta) > 1e-6;
      ++cells;
    }
  }
  CHECK(worst_d <= 1e-6);
  CHECK(theta_off * 100 < cells);
}

TEST_CASE("two-object scene record count is the sum of per-object counts") {
  const auto p = small_params();
  const auto a = make_box(Vec3(0.04, 0.04, 0.04));
  const auto b = make_icosphere(0.025, 2);
  const Scene scene({{"a", shared(a)}, {"b", shared(b)}},
                    {{"a", RigidTransform::from_translation(Vec3(0.1, 0, 0.02))},
                     {"b", RigidTransform::from_translation(Vec3(-0.1, 0, 0.025))}},
                    {});
  const auto ds = annotate_scene(scene, p, 3);
  CHECK(ds.records.size() == candidate_frames(a, p).size() + candidate_frames(b, p).size());
  std::size_t invalid = 0;
  for (const auto& r : ds.records) {
    CHECK(r.scene_id == 3u);
    if (!r.valid) {
      ++invalid;
      for (const auto& c : r.cgr.grid()) CHECK((c.d == 0.0 && c.theta == 0.0));
    }
  }
  CHECK(invalid > 0);
  CHECK(invalid < ds.records.size());
  CHECK(annotate_scene(scene, p, 3).records.size() == ds.records.size());
}

TEST_CASE("dataset round trip is bitwise identical and invalid grids are zero") {
  const auto p = small_params();
  const Scene scene({{"a", shared(make_box(Vec3(0.04, 0.04, 0.04)))}},
                    {{"a", RigidTransform::from_translation(Vec3(0, 0, 0.02))}}, {});
  CgrDataset ds = annotate_scene(scene, p, 1);
  ds.manifest = R"({"scenes":["unit"]})";
  const std::string first = bytes_of(ds);
  std::istringstream is(first);
  const CgrDataset back = read_dataset(is);
  CHECK(bytes_of(back) == first);
  REQUIRE(back.records.size() == ds.records.size());
  CHECK(back.manifest == ds.manifest);
  for (std::size_t k = 0; k < ds.records.size(); ++k) {
    CHECK(back.records[k].valid == ds.records[k].valid);
    CHECK(back.records[k].scene_id == ds.records[k].scene_id);
    for (int c = 0; c < p.grid.cell_count(); ++c)
      CHECK(back.records[k].cgr.grid()[c].d == static_cast<double>(static_cast<float>(ds.records[k].cgr.grid()[c].d)));
  }

  // locate an invalid record's payload: header, then fixed-size records
  std::size_t bad = 0;
  while (bad < ds.records.size() && ds.records[bad].valid) ++bad;
  REQUIRE(bad < ds.records.size());
  const std::size_t header = 8 + 8 + 4 * 5 + 4 + 4 + 4 + ds.manifest.size() + 8;
  const std::size_t record = 4 * 12 + 4 * 480 + 4 + 1;
  const std::size_t grid_at = header + bad * record + 48;
  int zeros = 0;
  for (int k = 0; k < 480; ++k) {
    float f;
    std::memcpy(&f, first.data() + grid_at + 4 * k, 4);
    zeros += f == 0.0f && !std::signbit(f);
  }
  CHECK(zeros == 480);
  CHECK(first.size() == header + ds.records.size() * record);

  std::string corrupt = first;
  corrupt[0] = 'X';
  std::istringstream c1(corrupt);
  CHECK_THROWS_WITH_AS(read_dataset(c1), "bad magic", Error);
  std::string version = first;
  version[6] = '2';
  std::istringstream c2(version);
  CHECK_THROWS_WITH_AS(read_dataset(c2), "version mismatch", Error);
  std::istringstream c3(first.substr(0, first.size() - 3));
  CHECK_THROWS_WITH_AS(read_dataset(c3), "truncated file", Error);
}
