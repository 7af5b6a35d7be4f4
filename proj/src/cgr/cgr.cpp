#include "cgrkit/cgr/cgr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace cgrkit {

void CgrGridParams::validate() const {
  if (n_angles < 4 || n_angles % 2 != 0) throw Error("cgr params: n_angles must be even and at least 4");
  if (n_sections < 1) throw Error("cgr params: n_sections must be at least 1");
  if (static_cast<int>(section_depths.size()) != n_sections)
    throw Error("cgr params: section_depths must list one depth per section");
  for (std::size_t j = 1; j < section_depths.size(); ++j)
    if (!(section_depths[j] > section_depths[j - 1])) throw Error("cgr params: section depths must increase");
  if (!(d_max > 0)) throw Error("cgr params: d_max must be positive");
  if (!(theta_sentinel >= 0 && theta_sentinel <= kPi)) throw Error("cgr params: theta_sentinel outside [0, pi]");
}

Cgr::Cgr(RigidTransform frame, CgrGridParams params, std::vector<CgrCell> grid)
    : frame_(std::move(frame)), params_(std::move(params)), grid_(std::move(grid)) {
  params_.validate();
  if (static_cast<int>(grid_.size()) != params_.cell_count()) throw Error("cgr: grid size does not match params");
}

bool Cgr::all_miss() const {
  return std::all_of(grid_.begin(), grid_.end(), [&](const CgrCell& c) { return !(c.d < params_.d_max); });
}

std::vector<float> Cgr::flatten() const {
  std::vector<float> out(grid_.size() * 2);
  for (std::size_t k = 0; k < grid_.size(); ++k) {
    out[2 * k] = static_cast<float>(grid_[k].d);
    out[2 * k + 1] = static_cast<float>(grid_[k].theta);
  }
  return out;
}

std::vector<CgrCell> unflatten_grid(std::span<const float> flat, const CgrGridParams& params) {
  if (flat.size() != static_cast<std::size_t>(params.flat_size()))
    throw Error("unflatten: expected " + std::to_string(params.flat_size()) + " values");
  std::vector<CgrCell> grid(flat.size() / 2);
  for (std::size_t k = 0; k < grid.size(); ++k) grid[k] = {flat[2 * k], flat[2 * k + 1]};
  return grid;
}

Cgr compute_cgr(const TriangleMesh& mesh, const RigidTransform& frame, const CgrGridParams& params) {
  params.validate();
  const int n = params.n_angles;
  std::vector<Vec3> dirs(n);
  for (int i = 0; i < n; ++i) {
    const double a = params.angle(i);
    dirs[i] = frame.rotate(Vec3(std::cos(a), std::sin(a), 0.0));
  }
  std::vector<CgrCell> grid(params.cell_count(), CgrCell{params.d_max, params.theta_sentinel});
  for (int j = 0; j < params.n_sections; ++j) {
    const Vec3 pole = frame.apply(Vec3(0, 0, params.section_depths[j]));
    for (int i = 0; i < n; ++i) {
      const auto hit = ray_mesh_intersect(mesh, pole, dirs[i], params.d_max);
      if (!hit || !(hit->t < params.d_max)) continue;
      const double c = std::clamp(dirs[i].dot(hit->normal), -1.0, 1.0);
      grid[j * n + i] = {hit->t, std::acos(c)};
    }
  }
  return {frame, params, std::move(grid)};
}

std::vector<Cgr> compute_cgrs(const TriangleMesh& mesh, std::span<const RigidTransform> frames,
                              const CgrGridParams& params) {
  params.validate();
  std::vector<std::optional<Cgr>> slots(frames.size());
  parallel_for(frames.size(), [&](std::size_t k) { slots[k].emplace(compute_cgr(mesh, frames[k], params)); });
  std::vector<Cgr> out;
  out.reserve(frames.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

double side_friction(const CgrCell& cell, double d_max) {
  if (!(cell.d < d_max) || !(cell.theta < kPi / 2)) return std::numeric_limits<double>::infinity();
  return std::tan(cell.theta);
}

AntipodalRep antipodal_rep(const Cgr& cgr) {
  const auto& p = cgr.params();
  AntipodalRep rep;
  rep.n_pairs = p.n_angles / 2;
  rep.n_sections = p.n_sections;
  const std::size_t size = static_cast<std::size_t>(rep.n_pairs) * rep.n_sections;
  rep.width.resize(size);
  rep.friction.resize(size);
  rep.score.resize(size);
  for (int j = 0; j < p.n_sections; ++j) {
    for (int i = 0; i < rep.n_pairs; ++i) {
      const CgrCell& a = cgr.at(j, i);
      const CgrCell& b = cgr.at(j, i + rep.n_pairs);
      const auto k = rep.index(j, i);
      rep.width[k] = 2.0 * std::max(a.d, b.d);
      rep.friction[k] = std::max(side_friction(a, p.d_max), side_friction(b, p.d_max));
      rep.score[k] = std::isinf(rep.friction[k]) ? 0.0 : std::clamp(1.0 - rep.friction[k], 0.0, 1.0);
    }
  }
  return rep;
}

double graspness(const Cgr& cgr, const AntipodalRep& rep, const GraspnessParams& gp) {
  const auto& p = cgr.params();
  int low_theta = 0;
  for (int j = 0; j < p.n_sections; ++j)
    for (int i = 0; i < p.n_angles; ++i)
      if (cgr.is_hit(j, i) && cgr.at(j, i).theta < gp.theta_threshold) ++low_theta;
  const auto good_pairs = std::count_if(rep.score.begin(), rep.score.end(),
                                        [&](double s) { return s > 0 && s >= gp.score_threshold; });
  return static_cast<double>(low_theta) / p.cell_count() +
         static_cast<double>(good_pairs) / (static_cast<double>(p.cell_count()) / 2.0);
}

double graspness(const Cgr& cgr, const GraspnessParams& params) { return graspness(cgr, antipodal_rep(cgr), params); }

double max_antipodal_score(const AntipodalRep& rep) {
  double best = 0.0;
  for (double s : rep.score) best = std::max(best, s);
  return best;
}

Pose6D query_grasp_pose(const Cgr& cgr, const AntipodalRep& rep) {
  // scores tied up to rounding go to the shallowest section, then the lowest
  // angle, so the choice survives rigid motion of the frame and geometry
  const double best = *std::max_element(rep.score.begin(), rep.score.end());
  if (!(best > 0.0)) throw Error("no antipodal contact");
  int best_j = -1;
  int best_i = -1;
  for (int j = 0; j < rep.n_sections && best_j < 0; ++j)
    for (int i = 0; i < rep.n_pairs; ++i)
      if (rep.score[rep.index(j, i)] >= best - kScoreTieTolerance) {
        best_j = j;
        best_i = i;
        break;
      }
  const auto& p = cgr.params();
  const double alpha = p.angle(best_i);
  const Mat3& r = cgr.frame().rotation();
  const Mat3 rg = r * rot_z(alpha);
  const Vec3 tg = cgr.frame().translation() + p.section_depths[best_j] * rg.col(2);
  return {RigidTransform(rg, tg, 1e-6), alpha, best_i, best_j};
}

Pose6D query_grasp_pose(const Cgr& cgr) { return query_grasp_pose(cgr, antipodal_rep(cgr)); }

void write_frame(io::Writer& w, const RigidTransform& frame) {
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) w.f32(frame.rotation()(r, c));
  for (int k = 0; k < 3; ++k) w.f32(frame.translation()[k]);
}

RigidTransform read_frame(io::Reader& r) {
  Mat3 rot;
  Vec3 t;
  for (int i = 0; i < 3; ++i)
    for (int c = 0; c < 3; ++c) rot(i, c) = r.f32();
  for (int k = 0; k < 3; ++k) t[k] = r.f32();
  return {rot, t, RigidTransform::kStoredTolerance};
}

void write_cgr_record(io::Writer& w, const Cgr& cgr) {
  write_frame(w, cgr.frame());
  for (const auto& c : cgr.grid()) {
    w.f32(c.d);
    w.f32(c.theta);
  }
}

void write_zero_cgr_record(io::Writer& w, const RigidTransform& frame, const CgrGridParams& params) {
  write_frame(w, frame);
  for (int k = 0; k < params.flat_size(); ++k) w.f32_raw(0.0f);
}

Cgr read_cgr_record(io::Reader& r, const CgrGridParams& params) {
  RigidTransform frame = read_frame(r);
  std::vector<CgrCell> grid(params.cell_count());
  for (auto& c : grid) {
    c.d = r.f32();
    c.theta = r.f32();
    if (!std::isfinite(c.d) || !std::isfinite(c.theta)) throw Error("cgr record: non-finite entry");
  }
  return {std::move(frame), params, std::move(grid)};
}

void write_grid_params(io::Writer& w, const CgrGridParams& params) {
  w.u32(static_cast<std::uint32_t>(params.n_angles));
  w.u32(static_cast<std::uint32_t>(params.n_sections));
  for (double d : params.section_depths) w.f32(d);
  w.f32(params.d_max);
  w.f32(params.theta_sentinel);
}

CgrGridParams read_grid_params(io::Reader& r) {
  CgrGridParams p;
  p.n_angles = static_cast<int>(r.u32());
  p.n_sections = static_cast<int>(r.u32());
  if (p.n_sections < 1 || p.n_sections > 1024 || p.n_angles < 4 || p.n_angles > 4096)
    throw Error("cgr params: implausible grid size in file");
  p.section_depths.resize(p.n_sections);
  for (auto& d : p.section_depths) d = r.f32();
  p.d_max = r.f32();
  p.theta_sentinel = r.f32();
  p.validate();
  return p;
}

}  // namespace cgrkit
