#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cgrkit/binary_io.hpp"
#include "cgrkit/common.hpp"
#include "cgrkit/geometry/mesh.hpp"
#include "cgrkit/geometry/transform.hpp"

namespace cgrkit {

struct CgrGridParams {
  int n_angles = 48;
  int n_sections = 5;
  std::vector<double> section_depths = {0.005, 0.01, 0.02, 0.03, 0.04};
  double d_max = 0.05;
  double theta_sentinel = kPi / 2;

  /// Throws when N is odd or < 4, M < 1, depths are not strictly increasing
  /// or do not number M, or d_max <= 0.
  void validate() const;
  int cell_count() const { return n_angles * n_sections; }
  /// Length of the flattened (d, theta) vector fed to the decision model.
  int flat_size() const { return 2 * cell_count(); }
  double angle(int i) const { return 2.0 * kPi * i / n_angles; }

  bool operator==(const CgrGridParams&) const = default;
};

struct CgrCell {
  double d = 0.0;
  double theta = 0.0;
  bool operator==(const CgrCell&) const = default;
};

/// Section-major grid of (distance, normal angle) samples around a local
/// frame. A cell whose d equals d_max is a miss.
class Cgr {
 public:
  Cgr(RigidTransform frame, CgrGridParams params, std::vector<CgrCell> grid);

  const RigidTransform& frame() const { return frame_; }
  const CgrGridParams& params() const { return params_; }
  const std::vector<CgrCell>& grid() const { return grid_; }
  const CgrCell& at(int section, int angle) const { return grid_[section * params_.n_angles + angle]; }
  bool is_hit(int section, int angle) const { return at(section, angle).d < params_.d_max; }
  bool all_miss() const;

  /// (j*N + i)*2 + {0: d, 1: theta}.
  std::vector<float> flatten() const;

 private:
  RigidTransform frame_;
  CgrGridParams params_;
  std::vector<CgrCell> grid_;
};

/// Inverse of Cgr::flatten for a grid of the given shape.
std::vector<CgrCell> unflatten_grid(std::span<const float> flat, const CgrGridParams& params);

/// Casts one ray per (section, angle) in the section plane at depth_j along
/// the frame's z-axis. Hits closer than d_max store the distance and the
/// angle between the ray and the outward surface normal; anything else is
/// stored as (d_max, theta_sentinel).
Cgr compute_cgr(const TriangleMesh& mesh, const RigidTransform& frame, const CgrGridParams& params = {});

/// One CGR per frame, computed in parallel; output order follows the input.
std::vector<Cgr> compute_cgrs(const TriangleMesh& mesh, std::span<const RigidTransform> frames,
                              const CgrGridParams& params = {});

/// Opposing-ray pairs (alpha_i, alpha_i + pi) for i < N/2, per section.
struct AntipodalRep {
  int n_pairs = 0;
  int n_sections = 0;
  std::vector<double> width;     // 2 * max(d_a, d_{a+pi})
  std::vector<double> friction;  // required friction, +inf when unusable
  std::vector<double> score;     // clamp(1 - friction, 0, 1)

  std::size_t index(int section, int pair) const { return static_cast<std::size_t>(section) * n_pairs + pair; }
};

/// Per-side friction is tan(theta) for theta < pi/2. A side hit at or beyond
/// pi/2 faces away from the ray and cannot be squeezed, so it needs
/// unbounded friction; a miss does too.
double side_friction(const CgrCell& cell, double d_max);

AntipodalRep antipodal_rep(const Cgr& cgr);

struct GraspnessParams {
  double theta_threshold = 0.3;
  double score_threshold = 0.5;
};

/// Fraction of hit cells with theta below the threshold plus the fraction
/// of antipodal pairs scoring at least score_threshold.
double graspness(const Cgr& cgr, const GraspnessParams& params = {});
double graspness(const Cgr& cgr, const AntipodalRep& rep, const GraspnessParams& params);

/// Best antipodal score over the grid (0 when nothing qualifies).
double max_antipodal_score(const AntipodalRep& rep);

struct Pose6D {
  RigidTransform pose;
  double source_alpha = 0.0;
  int source_angle = 0;
  int source_section = 0;
};

/// Scores this close to the best one count as tied in the pose query.
inline constexpr double kScoreTieTolerance = 1e-9;

/// Highest-scoring antipodal pair; ties go to the shallowest section, then
/// the lowest angle index. Rotation R * Rz(alpha*), translation
/// t + depth(j*) * R z. Throws "no antipodal contact" when every score is 0.
Pose6D query_grasp_pose(const Cgr& cgr);
Pose6D query_grasp_pose(const Cgr& cgr, const AntipodalRep& rep);

// Binary record: frame as 9 + 3 f32 (row-major R, then t), then M*N (d, theta)
// f32 pairs section-major. Rotations are re-validated on read with the
// float-storage tolerance.
void write_frame(io::Writer& w, const RigidTransform& frame);
RigidTransform read_frame(io::Reader& r);
void write_cgr_record(io::Writer& w, const Cgr& cgr);
/// Writes the frame followed by an all-zero grid (used for invalid samples).
void write_zero_cgr_record(io::Writer& w, const RigidTransform& frame, const CgrGridParams& params);
Cgr read_cgr_record(io::Reader& r, const CgrGridParams& params);
void write_grid_params(io::Writer& w, const CgrGridParams& params);
CgrGridParams read_grid_params(io::Reader& r);

}  // namespace cgrkit
