#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cgrkit/cgr/cgr.hpp"
#include "cgrkit/geometry/mesh.hpp"
#include "cgrkit/geometry/point_cloud.hpp"

namespace cgrkit {

/// A local patch enclosed by an antipodal grasp, in its grasp-box frame:
/// x closing, y width, z approach, origin midway between the two contacts.
struct LocalGeometry {
  std::vector<Vec3> points;
  std::string object_id;
  RigidTransform box_frame;  // box frame -> object coordinates
  Pose6D source;             // the antipodal pose the box was built from
};

struct SamplingParams {
  int directions = 100;  // V
  int angles = 12;       // A, in-plane closing angles over [0, pi)
  double box_closing = 0.04;
  double box_approach = 0.08;
  double box_width = 0.04;
  int points_per_patch = 512;
  /// Minimum distance between grasp points picked from the surface samples.
  double grasp_spacing = 0.02;
  /// Surface samples per square meter from which grasp points are picked.
  double sample_density = 2e5;
  /// Depth of the single section used to test antipodal contact.
  double section_depth = 0.01;
  /// Rays per box face along each axis; the patch is built from 2 faces.
  int rays_per_axis = 16;
  /// Patches with fewer ray hits are dropped.
  int min_hits = 16;

  static SamplingParams dense() { return {}; }
  static SamplingParams sparse() {
    SamplingParams p;
    p.directions = 50;
    p.angles = 6;
    return p;
  }
  void validate() const;
};

/// Surface samples kept greedily so that no two are closer than
/// grasp_spacing; the order follows the seeded sample sequence.
std::vector<Vec3> grasp_points(const TriangleMesh& object, const SamplingParams& params, std::uint64_t seed);

/// Grasp points are picked greedily at grasp_spacing from seeded surface
/// samples. At each point, V spiral approach directions are laid out in a
/// frame built from the surface normal and the triangle's first edge, so the
/// pose set moves with the object. A single-section CGR with 2A rays gives A
/// closing axes; poses with a positive antipodal score and a contact width
/// within the box are kept. The patch is the ray grid cast from both closing
/// faces of the box, resampled to points_per_patch.
std::vector<LocalGeometry> sample_local_geometries(const TriangleMesh& object, const SamplingParams& params,
                                                   std::uint64_t seed, const std::string& object_id = "");

/// Immutable pool of training patches answering "is any patch within tau".
class PatchPool {
 public:
  explicit PatchPool(std::vector<LocalGeometry> patches);

  std::size_t size() const { return patches_.size(); }
  const std::vector<LocalGeometry>& patches() const { return patches_; }

  /// Exact: true iff min over the pool of chamfer_distance < tau. Pool
  /// entries are skipped only when a lower bound already reaches tau.
  bool covers(const LocalGeometry& patch, double tau) const;

 private:
  // Points in a cell that is not next to any occupied cell of the other
  // patch are at least one cell size from all of its points.
  struct Level {
    double cell = 0.0;
    Vec3 origin = Vec3::Zero();
    std::array<int, 3> dims{};
    std::size_t words = 0;
  };
  struct Occupancy {
    std::vector<std::uint64_t> occupied, dilated;
    std::vector<std::uint32_t> rank;    // set bits before each word
    std::vector<std::uint16_t> counts;  // points per occupied cell, in bit order
    std::uint32_t outside = 0;          // points beyond the level's grid
  };
  // Patches cast from one ray grid share their (y, z) values exactly. A point
  // can then only be closer than the lattice spacing to points on its own
  // node, which bounds its nearest-neighbour distance from one lookup.
  struct Lattice {
    std::vector<double> ys, zs;
    double spacing = 0.0;
  };
  struct NodeTable {
    // as the near side: x range per node, empty nodes at +inf
    std::vector<double> lo, hi;
    bool pairs = true;  // at most two x values per node, so lo and hi are all of them
    // as the far side: distinct points with multiplicity
    std::vector<std::uint32_t> node;
    std::vector<double> x, weight;
    // every point's node, and the points on each node
    std::vector<std::uint32_t> node_of, start, members;
  };
  struct Summary {
    Aabb box;
    Vec3 centroid;
    std::vector<Occupancy> levels;
    std::optional<NodeTable> nodes;
  };
  Occupancy occupancy(const Level& level, const std::vector<Vec3>& points) const;
  /// Empty when some point is off the lattice.
  std::optional<NodeTable> node_table(const std::vector<Vec3>& points) const;
  double lattice_bound(const NodeTable& a, const NodeTable& b, double stop) const;
  /// Nearest distances from `from` to `to` summed in point order, as
  /// chamfer_distance does; returns early once the sum reaches `stop`.
  double nearest_sum(const std::vector<Vec3>& from, const std::optional<NodeTable>& from_nodes,
                     const std::vector<Vec3>& to, const std::optional<NodeTable>& to_nodes,
                     const std::function<const KdTree&()>& to_tree, double stop) const;

  std::optional<Lattice> lattice_;
  std::vector<LocalGeometry> patches_;
  std::vector<Level> levels_;
  std::vector<Summary> summaries_;
};

bool is_covered(const LocalGeometry& test_patch, const std::vector<LocalGeometry>& pool, double tau = 0.001);

struct NamedObject {
  std::string id;
  TriangleMesh mesh;
};

struct CoverageRow {
  std::string test_object_id;
  std::size_t patch_count = 0;
  std::size_t covered_count = 0;
};

/// Per test object, how many of its patches the pooled training patches
/// cover; rows sorted by covered count ascending, then by id.
std::vector<CoverageRow> coverage_curve(const std::vector<NamedObject>& train, const std::vector<NamedObject>& test,
                                        const SamplingParams& train_params, const SamplingParams& test_params,
                                        double tau, std::uint64_t seed);

/// Same, against an already built pool.
std::vector<CoverageRow> coverage_against(const PatchPool& pool, const std::vector<NamedObject>& test,
                                          const SamplingParams& test_params, double tau, std::uint64_t seed);

void write_coverage_csv(std::ostream& os, const std::vector<CoverageRow>& rows);

}  // namespace cgrkit
