#include "cgrkit/coverage/coverage.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>

namespace cgrkit {

namespace {

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

struct SurfaceSample {
  Vec3 point;
  std::size_t triangle;
};

std::vector<SurfaceSample> sample_with_triangles(const TriangleMesh& mesh, std::size_t count, std::uint64_t seed) {
  std::vector<double> cumulative(mesh.triangle_count());
  double total = 0.0;
  for (std::size_t i = 0; i < mesh.triangle_count(); ++i) {
    if (!mesh.is_degenerate(i)) total += mesh.triangle_area(i);
    cumulative[i] = total;
  }
  if (!(total > 0)) throw Error("local geometries: object has no surface");
  std::mt19937_64 rng(seed);
  std::vector<SurfaceSample> out;
  out.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), unit(rng) * total);
    if (it == cumulative.end()) --it;
    const auto tri = static_cast<std::size_t>(it - cumulative.begin());
    const double r1 = std::sqrt(unit(rng));
    const double r2 = unit(rng);
    const auto c = mesh.corners(tri);
    out.push_back({(1.0 - r1) * c[0] + r1 * (1.0 - r2) * c[1] + r1 * r2 * c[2], tri});
  }
  return out;
}

// Normal plus first edge: a frame that moves rigidly with the mesh.
Mat3 intrinsic_frame(const TriangleMesh& mesh, std::size_t tri) {
  const auto c = mesh.corners(tri);
  const Vec3 n = mesh.normals()[tri];
  const Vec3 t = (c[1] - c[0]).normalized();
  Mat3 r;
  r.col(0) = t;
  r.col(1) = n.cross(t);
  r.col(2) = n;
  return r;
}

std::vector<Mat3> spiral_rotations(int count) {
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  std::vector<Mat3> out;
  for (int k = 0; k < count; ++k) {
    const double z = 1.0 - (2.0 * k + 1.0) / count;
    const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    out.push_back(frame_from_z(Vec3(rho * std::cos(golden * k), rho * std::sin(golden * k), z).normalized()));
  }
  return out;
}

struct RayGridPatch {
  std::vector<Vec3> hits;
};

RayGridPatch cast_patch(const TriangleMesh& mesh, const RigidTransform& box, const SamplingParams& p) {
  RayGridPatch out;
  const int r = p.rays_per_axis;
  const double half_c = 0.5 * p.box_closing;
  for (int side : {1, -1}) {
    const Vec3 dir = box.rotate(Vec3(-side, 0, 0));
    for (int iz = 0; iz < r; ++iz) {
      const double z = (-0.5 + (iz + 0.5) / r) * p.box_approach;
      for (int iy = 0; iy < r; ++iy) {
        const double y = (-0.5 + (iy + 0.5) / r) * p.box_width;
        const auto hit = ray_mesh_intersect(mesh, box.apply(Vec3(side * half_c, y, z)), dir, p.box_closing);
        if (hit) out.hits.emplace_back(side * (half_c - hit->t), y, z);
      }
    }
  }
  return out;
}

std::vector<SurfaceSample> pick_grasp_points(const TriangleMesh& object, const SamplingParams& params,
                                             std::uint64_t seed) {
  const auto count = static_cast<std::size_t>(std::ceil(object.surface_area() * params.sample_density));
  const auto samples = sample_with_triangles(object, std::max<std::size_t>(count, 1), seed);
  std::vector<SurfaceSample> grasp_points;
  const double s2 = params.grasp_spacing * params.grasp_spacing;
  for (const auto& s : samples) {
    bool far = true;
    for (const auto& g : grasp_points)
      if ((g.point - s.point).squaredNorm() < s2) {
        far = false;
        break;
      }
    if (far) grasp_points.push_back(s);
  }
  return grasp_points;
}

}  // namespace

void SamplingParams::validate() const {
  if (directions < 1 || angles < 1) throw Error("sampling: directions and angles must be positive");
  if (!(box_closing > 0) || !(box_approach > 0) || !(box_width > 0)) throw Error("sampling: box dims must be positive");
  if (points_per_patch < 1 || rays_per_axis < 1 || min_hits < 1) throw Error("sampling: counts must be positive");
  if (!(grasp_spacing > 0) || !(sample_density > 0) || !(section_depth > 0))
    throw Error("sampling: spacing, density and depth must be positive");
}

std::vector<Vec3> grasp_points(const TriangleMesh& object, const SamplingParams& params, std::uint64_t seed) {
  params.validate();
  if (object.empty()) throw Error("local geometries: empty object");
  std::vector<Vec3> out;
  for (const auto& g : pick_grasp_points(object, params, seed)) out.push_back(g.point);
  return out;
}

std::vector<LocalGeometry> sample_local_geometries(const TriangleMesh& object, const SamplingParams& params,
                                                   std::uint64_t seed, const std::string& object_id) {
  params.validate();
  if (object.empty()) throw Error("local geometries: empty object");
  const auto grasp_points = pick_grasp_points(object, params, seed);

  // A = 1 still needs four rays for a valid grid; only pair 0 is used then.
  const int stride = params.angles >= 2 ? 1 : 2;
  CgrGridParams grid;
  grid.n_angles = 2 * params.angles * stride;
  grid.n_sections = 1;
  grid.section_depths = {params.section_depth};
  grid.d_max = params.box_closing;
  const auto rotations = spiral_rotations(params.directions);

  std::vector<std::vector<LocalGeometry>> per_point(grasp_points.size());
  parallel_for(grasp_points.size(), [&](std::size_t g) {
    const Mat3 local = intrinsic_frame(object, grasp_points[g].triangle);
    for (const auto& rot : rotations) {
      const RigidTransform frame(local * rot, grasp_points[g].point);
      const Cgr cgr = compute_cgr(object, frame, grid);
      const AntipodalRep rep = antipodal_rep(cgr);
      for (int k = 0; k < params.angles; ++k) {
        const int i = k * stride;
        if (!(rep.score[rep.index(0, i)] > 0)) continue;
        const double d_pos = cgr.at(0, i).d;
        const double d_neg = cgr.at(0, i + grid.n_angles / 2).d;
        if (d_pos + d_neg > params.box_closing) continue;
        const Mat3 r_box = frame.rotation() * rot_z(grid.angle(i));
        const Vec3 pole = frame.apply(Vec3(0, 0, params.section_depth));
        const RigidTransform box(r_box, pole + 0.5 * (d_pos - d_neg) * r_box.col(0));
        const RayGridPatch patch = cast_patch(object, box, params);
        if (static_cast<int>(patch.hits.size()) < params.min_hits) continue;
        LocalGeometry lg;
        lg.object_id = object_id;
        lg.box_frame = box;
        lg.source = Pose6D{RigidTransform(r_box, pole), grid.angle(i), i, 0};
        const std::size_t h = patch.hits.size();
        lg.points.reserve(params.points_per_patch);
        for (int q = 0; q < params.points_per_patch; ++q)
          lg.points.push_back(patch.hits[static_cast<std::size_t>(q) * h / params.points_per_patch]);
        per_point[g].push_back(std::move(lg));
      }
    }
  });
  std::vector<LocalGeometry> out;
  for (auto& v : per_point)
    for (auto& lg : v) out.push_back(std::move(lg));
  return out;
}

PatchPool::PatchPool(std::vector<LocalGeometry> patches) : patches_(std::move(patches)) {
  Aabb all;
  for (const auto& p : patches_) {
    if (p.points.empty()) throw Error("patch pool: empty patch");
    for (const auto& q : p.points) all.extend(q);
  }
  if (!patches_.empty()) {
    for (double cell : {0.008, 0.004, 0.002}) {
      Level lv;
      lv.cell = cell;
      lv.origin = all.min - Vec3::Constant(cell);
      std::size_t total = 1;
      for (int k = 0; k < 3; ++k) {
        lv.dims[k] = static_cast<int>(std::ceil((all.max[k] - all.min[k]) / cell)) + 3;
        total *= static_cast<std::size_t>(lv.dims[k]);
      }
      if (total > (1u << 22)) continue;  // spread too wide for a dense grid
      lv.words = (total + 63) / 64;
      levels_.push_back(lv);
    }
  }
  {
    std::vector<double> ys, zs;
    for (const auto& p : patches_)
      for (const auto& q : p.points) {
        ys.push_back(q.y());
        zs.push_back(q.z());
      }
    const auto distinct = [](std::vector<double>& v) {
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
    };
    distinct(ys);
    distinct(zs);
    if (!ys.empty() && ys.size() * zs.size() <= 4096) {
      Lattice lat;
      lat.spacing = std::numeric_limits<double>::infinity();
      for (std::size_t i = 1; i < ys.size(); ++i) lat.spacing = std::min(lat.spacing, ys[i] - ys[i - 1]);
      for (std::size_t i = 1; i < zs.size(); ++i) lat.spacing = std::min(lat.spacing, zs[i] - zs[i - 1]);
      lat.ys = std::move(ys);
      lat.zs = std::move(zs);
      lattice_ = std::move(lat);
    }
  }
  summaries_.reserve(patches_.size());
  for (const auto& p : patches_) {
    Summary s;
    Vec3 sum = Vec3::Zero();
    for (const auto& q : p.points) {
      s.box.extend(q);
      sum += q;
    }
    s.centroid = sum / static_cast<double>(p.points.size());
    for (const auto& lv : levels_) s.levels.push_back(occupancy(lv, p.points));
    s.nodes = node_table(p.points);
    summaries_.push_back(std::move(s));
  }
}

PatchPool::Occupancy PatchPool::occupancy(const Level& lv, const std::vector<Vec3>& points) const {
  Occupancy occ;
  occ.occupied.assign(lv.words, 0);
  std::vector<std::uint32_t> cells;
  const auto index = [&](int x, int y, int z) {
    return (static_cast<std::size_t>(x) * lv.dims[1] + y) * lv.dims[2] + z;
  };
  for (const auto& q : points) {
    const Vec3 u = (q - lv.origin) / lv.cell;
    std::array<int, 3> k{};
    bool inside = true;
    for (int i = 0; i < 3; ++i) {
      // pool points sit at least one cell inside the grid, so a point off
      // the grid is at least one cell from every pool point
      if (!(u[i] >= 0.0 && u[i] < lv.dims[i])) inside = false;
      else k[i] = static_cast<int>(std::floor(u[i]));
    }
    if (!inside) {
      ++occ.outside;
      continue;
    }
    const auto c = index(k[0], k[1], k[2]);
    occ.occupied[c / 64] |= 1ull << (c % 64);
    cells.push_back(static_cast<std::uint32_t>(c));
  }
  std::sort(cells.begin(), cells.end());
  for (std::size_t i = 0; i < cells.size();) {
    std::size_t j = i;
    while (j < cells.size() && cells[j] == cells[i]) ++j;
    occ.counts.push_back(static_cast<std::uint16_t>(std::min<std::size_t>(j - i, 65535)));
    i = j;
  }
  occ.rank.assign(lv.words, 0);
  std::uint32_t seen = 0;
  for (std::size_t w = 0; w < lv.words; ++w) {
    occ.rank[w] = seen;
    seen += static_cast<std::uint32_t>(std::popcount(occ.occupied[w]));
  }
  occ.dilated.assign(lv.words, 0);
  for (auto c : cells) {
    const int x = static_cast<int>(c / (static_cast<std::size_t>(lv.dims[1]) * lv.dims[2]));
    const int y = static_cast<int>((c / lv.dims[2]) % lv.dims[1]);
    const int z = static_cast<int>(c % lv.dims[2]);
    for (int dx = -1; dx <= 1; ++dx)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dz = -1; dz <= 1; ++dz) {
          if (x + dx < 0 || y + dy < 0 || z + dz < 0 || x + dx >= lv.dims[0] || y + dy >= lv.dims[1] ||
              z + dz >= lv.dims[2])
            continue;
          const auto d = index(x + dx, y + dy, z + dz);
          occ.dilated[d / 64] |= 1ull << (d % 64);
        }
  }
  return occ;
}

std::optional<PatchPool::NodeTable> PatchPool::node_table(const std::vector<Vec3>& points) const {
  if (!lattice_) return std::nullopt;
  const auto& ys = lattice_->ys;
  const auto& zs = lattice_->zs;
  std::vector<std::pair<std::uint32_t, double>> keyed;
  keyed.reserve(points.size());
  for (const auto& q : points) {
    const auto iy = std::lower_bound(ys.begin(), ys.end(), q.y());
    const auto iz = std::lower_bound(zs.begin(), zs.end(), q.z());
    if (iy == ys.end() || *iy != q.y() || iz == zs.end() || *iz != q.z()) return std::nullopt;
    keyed.emplace_back(static_cast<std::uint32_t>((iy - ys.begin()) * zs.size() + (iz - zs.begin())), q.x());
  }
  std::sort(keyed.begin(), keyed.end());
  NodeTable t;
  const double inf = std::numeric_limits<double>::infinity();
  t.lo.assign(ys.size() * zs.size(), inf);
  t.hi.assign(ys.size() * zs.size(), inf);
  std::vector<int> distinct(t.lo.size(), 0);
  for (std::size_t i = 0; i < keyed.size();) {
    std::size_t j = i;
    while (j < keyed.size() && keyed[j] == keyed[i]) ++j;
    const auto [n, x] = keyed[i];
    t.node.push_back(n);
    t.x.push_back(x);
    t.weight.push_back(static_cast<double>(j - i));
    if (distinct[n]++ == 0) t.lo[n] = x;
    t.hi[n] = x;
    i = j;
  }
  for (int d : distinct) t.pairs = t.pairs && d <= 2;
  t.node_of.reserve(points.size());
  t.start.assign(t.lo.size() + 1, 0);
  for (const auto& q : points) {
    const auto iy = std::lower_bound(ys.begin(), ys.end(), q.y()) - ys.begin();
    const auto iz = std::lower_bound(zs.begin(), zs.end(), q.z()) - zs.begin();
    t.node_of.push_back(static_cast<std::uint32_t>(iy * static_cast<std::ptrdiff_t>(zs.size()) + iz));
    ++t.start[t.node_of.back() + 1];
  }
  for (std::size_t n = 0; n + 1 < t.start.size(); ++n) t.start[n + 1] += t.start[n];
  t.members.resize(points.size());
  auto fill = t.start;
  for (std::size_t i = 0; i < points.size(); ++i) t.members[fill[t.node_of[i]]++] = static_cast<std::uint32_t>(i);
  return t;
}

double PatchPool::lattice_bound(const NodeTable& a, const NodeTable& b, double stop) const {
  const double g = lattice_->spacing;
  double sum = 0.0;
  for (std::size_t i = 0; i < a.node.size(); ++i) {
    const auto n = a.node[i];
    const double x = a.x[i];
    double d = std::min(std::abs(x - b.lo[n]), std::abs(x - b.hi[n]));
    // with more than two values per node one may lie between lo and hi
    if (!b.pairs && x > b.lo[n] && x < b.hi[n]) d = 0.0;
    sum += a.weight[i] * std::min(d, g);
    if ((i & 31) == 31 && sum >= stop) break;
  }
  return sum;
}

double PatchPool::nearest_sum(const std::vector<Vec3>& from, const std::optional<NodeTable>& from_nodes,
                              const std::vector<Vec3>& to, const std::optional<NodeTable>& to_nodes,
                              const std::function<const KdTree&()>& to_tree, double stop) const {
  const bool lattice = from_nodes && to_nodes;
  // a same-node neighbour closer than one lattice step is the nearest point
  const double step2 = lattice ? lattice_->spacing * lattice_->spacing : 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < from.size(); ++i) {
    double d2 = std::numeric_limits<double>::infinity();
    if (lattice) {
      const auto n = from_nodes->node_of[i];
      for (auto k = to_nodes->start[n]; k < to_nodes->start[n + 1]; ++k)
        d2 = std::min(d2, (to[to_nodes->members[k]] - from[i]).squaredNorm());
    }
    sum += d2 < step2 ? std::sqrt(d2) : to_tree().nearest(from[i]).second;
    if (sum >= stop) return sum;
  }
  return sum;
}

namespace {

// Points of `a` lying in cells outside the dilation of `b`.
std::uint32_t far_count(const std::vector<std::uint64_t>& a_occ, const std::vector<std::uint32_t>& a_rank,
                        const std::vector<std::uint16_t>& a_counts, std::uint32_t a_outside,
                        const std::vector<std::uint64_t>& b_dilated) {
  std::uint32_t far = a_outside;
  for (std::size_t w = 0; w < a_occ.size(); ++w) {
    std::uint64_t bits = a_occ[w] & ~b_dilated[w];
    while (bits) {
      const int bit = std::countr_zero(bits);
      const std::uint64_t below = a_occ[w] & ((1ull << bit) - 1);
      far += a_counts[a_rank[w] + static_cast<std::uint32_t>(std::popcount(below))];
      bits &= bits - 1;
    }
  }
  return far;
}

}  // namespace

namespace {

// Per-axis sorted coordinates with prefix sums: total excess of the patch
// beyond any interval in O(log n).
struct AxisProfile {
  std::vector<double> sorted;
  std::vector<double> prefix;

  double excess(double lo, double hi) const {
    const auto n = sorted.size();
    const auto a = static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), lo) - sorted.begin());
    const auto b = static_cast<std::size_t>(std::upper_bound(sorted.begin(), sorted.end(), hi) - sorted.begin());
    const double below = lo * static_cast<double>(a) - prefix[a];
    const double above = (prefix[n] - prefix[b]) - hi * static_cast<double>(n - b);
    return std::max(0.0, below) + std::max(0.0, above);
  }
};

double box_distance(const Vec3& p, const Aabb& b) {
  return (p.cwiseMax(b.min).cwiseMin(b.max) - p).norm();
}

}  // namespace

bool PatchPool::covers(const LocalGeometry& patch, double tau) const {
  if (patches_.empty()) throw Error("is_covered: empty pool");
  if (!(tau > 0)) throw Error("is_covered: tau must be positive");
  if (patch.points.empty()) throw Error("is_covered: empty patch");
  const auto& a = patch.points;
  const double na = static_cast<double>(a.size());
  std::array<AxisProfile, 3> prof;
  Aabb a_box;
  for (const auto& q : a) a_box.extend(q);
  for (int k = 0; k < 3; ++k) {
    auto& pr = prof[k];
    for (const auto& q : a) pr.sorted.push_back(q[k]);
    std::sort(pr.sorted.begin(), pr.sorted.end());
    pr.prefix.assign(pr.sorted.size() + 1, 0.0);
    for (std::size_t i = 0; i < pr.sorted.size(); ++i) pr.prefix[i + 1] = pr.prefix[i] + pr.sorted[i];
  }
  std::vector<Occupancy> a_levels;  // built on first use
  const auto a_nodes = node_table(a);
  const KdTree a_tree(a);
  // chamfer < tau  <=>  S_ab / n_a + S_ba / n_b < 2 tau
  const double limit = 2.0 * tau * (1.0 + 1e-12);
  Vec3 a_centroid = Vec3::Zero();
  for (const auto& q : a) a_centroid += q;
  a_centroid /= na;

  struct Candidate {
    double lb_ab, lb_ba, order;
    std::size_t index;
  };
  std::vector<Candidate> survivors;
  for (std::size_t k = 0; k < patches_.size(); ++k) {
    const auto& s = summaries_[k];
    // sum_a dist(a, box_b) >= |(per-axis excess sums)|, and the mean
    // distance of b to box_a is at least that of its centroid
    const Vec3 ex(prof[0].excess(s.box.min.x(), s.box.max.x()), prof[1].excess(s.box.min.y(), s.box.max.y()),
                  prof[2].excess(s.box.min.z(), s.box.max.z()));
    const double lb_ab = ex.norm() / na;
    const double lb_ba = box_distance(s.centroid, a_box);
    if (lb_ab + lb_ba >= limit) continue;
    survivors.push_back({lb_ab, lb_ba, lb_ab + lb_ba + (s.centroid - a_centroid).norm(), k});
  }
  // likely matches first: a covered patch usually stops after a few checks
  std::sort(survivors.begin(), survivors.end(), [](const Candidate& x, const Candidate& y) {
    return x.order != y.order ? x.order < y.order : x.index < y.index;
  });

  for (auto cand : survivors) {
    const auto& s = summaries_[cand.index];
    const double nb = static_cast<double>(patches_[cand.index].points.size());
    if (a_nodes && s.nodes) {
      // off-node points are at least one lattice step away
      cand.lb_ab = std::max(cand.lb_ab, lattice_bound(*a_nodes, *s.nodes, (limit - cand.lb_ba) * na) / na);
      if (cand.lb_ab + cand.lb_ba >= limit) continue;
      cand.lb_ba = std::max(cand.lb_ba, lattice_bound(*s.nodes, *a_nodes, (limit - cand.lb_ab) * nb) / nb);
      if (cand.lb_ab + cand.lb_ba >= limit) continue;
    }
    bool far = false;
    if (a_levels.empty())
      for (const auto& lv : levels_) a_levels.push_back(occupancy(lv, a));
    for (std::size_t l = 0; l < levels_.size() && !far; ++l) {
      const auto& ao = a_levels[l];
      const auto& bo = s.levels[l];
      const double c = levels_[l].cell;
      cand.lb_ab = std::max(cand.lb_ab, c * far_count(ao.occupied, ao.rank, ao.counts, ao.outside, bo.dilated) / na);
      cand.lb_ba = std::max(cand.lb_ba, c * far_count(bo.occupied, bo.rank, bo.counts, bo.outside, ao.dilated) / nb);
      far = cand.lb_ab + cand.lb_ba >= limit;
    }
    if (far) continue;
    const auto& b = patches_[cand.index].points;
    const double s_ba =
        nearest_sum(b, s.nodes, a, a_nodes, [&]() -> const KdTree& { return a_tree; }, (limit - cand.lb_ab) * nb);
    if (s_ba / nb + cand.lb_ab >= limit) continue;
    std::optional<KdTree> b_tree;
    const auto tree = [&]() -> const KdTree& {
      if (!b_tree) b_tree.emplace(b);
      return *b_tree;
    };
    const double s_ab = nearest_sum(a, a_nodes, b, s.nodes, tree, (limit - s_ba / nb) * na);
    if (s_ab / na + s_ba / nb >= limit) continue;
    // same summation order as chamfer_distance, so the decision is identical
    if (0.5 * (s_ab / na + s_ba / nb) < tau) return true;
  }
  return false;
}

bool is_covered(const LocalGeometry& test_patch, const std::vector<LocalGeometry>& pool, double tau) {
  return PatchPool(pool).covers(test_patch, tau);
}

std::vector<CoverageRow> coverage_against(const PatchPool& pool, const std::vector<NamedObject>& test,
                                          const SamplingParams& test_params, double tau, std::uint64_t seed) {
  std::vector<CoverageRow> rows;
  for (const auto& obj : test) {
    const auto patches = sample_local_geometries(obj.mesh, test_params, seed, obj.id);
    std::vector<std::uint8_t> hit(patches.size(), 0);
    if (pool.size() > 0) parallel_for(patches.size(), [&](std::size_t i) { hit[i] = pool.covers(patches[i], tau); });
    CoverageRow row{obj.id, patches.size(), 0};
    for (auto h : hit) row.covered_count += h;
    rows.push_back(row);
  }
  std::stable_sort(rows.begin(), rows.end(), [](const CoverageRow& x, const CoverageRow& y) {
    if (x.covered_count != y.covered_count) return x.covered_count < y.covered_count;
    return x.test_object_id < y.test_object_id;
  });
  return rows;
}

std::vector<CoverageRow> coverage_curve(const std::vector<NamedObject>& train, const std::vector<NamedObject>& test,
                                        const SamplingParams& train_params, const SamplingParams& test_params,
                                        double tau, std::uint64_t seed) {
  if (train.empty() || test.empty()) throw Error("coverage: train and test sets must be non-empty");
  std::vector<LocalGeometry> pool;
  for (const auto& obj : train) {
    auto patches = sample_local_geometries(obj.mesh, train_params, seed, obj.id);
    for (auto& p : patches) pool.push_back(std::move(p));
  }
  return coverage_against(PatchPool(std::move(pool)), test, test_params, tau, seed);
}

void write_coverage_csv(std::ostream& os, const std::vector<CoverageRow>& rows) {
  os << "test_object_id,patch_count,covered_count\n";
  for (const auto& r : rows) os << r.test_object_id << ',' << r.patch_count << ',' << r.covered_count << '\n';
  if (!os) throw Error("write failed");
}

}  // namespace cgrkit
