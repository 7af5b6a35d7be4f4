#pragma once

#include <Eigen/Core>

#include <span>
#include <vector>

#include "cgrkit/common.hpp"

namespace cgrkit {

/// Point contact; the normal points into the object (the direction the
/// finger pushes).
struct Contact {
  Vec3 position;
  Vec3 normal;
};

struct ForceClosureParams {
  double friction = 0.5;
  double rank_epsilon = 1e-3;
  int cone_edges = 8;
  double torque_scale = 0.1;  // meters

  void validate() const;
};

/// 6 x 3m matrix whose block i is [I; [p_i / lambda]x].
Eigen::MatrixXd grasp_matrix(std::span<const Contact> contacts, double torque_scale);

/// k unit edges of the inscribed polyhedral cone around n with half-angle
/// atan(mu). Every edge has e . n = 1 / sqrt(1 + mu^2). The first edge leans
/// toward the tangential part of `reference`; when that part vanishes the
/// world axis least aligned with n is used instead.
std::vector<Vec3> friction_cone_edges(const Vec3& n, double mu, int k, const Vec3& reference = Vec3::Zero());

struct ForceClosureResult {
  bool closure = false;
  bool rank_ok = false;
  bool feasible = false;
  double min_eigenvalue = 0.0;
};

/// rank_ok: smallest eigenvalue of G G^T exceeds epsilon. feasible: some
/// convex combination of the cone-edge wrenches sums to zero.
/// Torques are taken about the contact centroid and each cone is oriented by
/// its contact's offset from that centroid, so the verdict does not depend on
/// where the object frame sits.
ForceClosureResult force_closure(std::span<const Contact> contacts, const ForceClosureParams& params);

struct LpResult {
  bool feasible = false;
  Eigen::VectorXd x;
  int iterations = 0;
};

/// Phase-one simplex for {x >= 0, A x = b}. Entering and leaving variables
/// follow Bland's rule, so the method terminates on degenerate problems.
LpResult simplex_feasibility(const Eigen::MatrixXd& a, const Eigen::VectorXd& b);

}  // namespace cgrkit
