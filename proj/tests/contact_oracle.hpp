#pragma once

// Exhaustive feasibility check for {w >= 0, sum w = 1, sum w_c W_c = 0}:
// a nonempty polytope has a vertex supported on at most rank(A) <= 7
// linearly independent columns, so trying every such column subset decides
// feasibility exactly (up to the solve tolerance).

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "cgrkit/contact/force_closure.hpp"

namespace cgrkit::test {

inline Eigen::MatrixXd oracle_wrench_columns(const std::vector<Contact>& contacts, double mu, int k, double lambda) {
  Eigen::MatrixXd a(7, static_cast<Eigen::Index>(contacts.size()) * k);
  Vec3 centroid = Vec3::Zero();
  for (const auto& c : contacts) centroid += c.position / static_cast<double>(contacts.size());
  for (std::size_t i = 0; i < contacts.size(); ++i) {
    const Vec3 n = contacts[i].normal.normalized();
    const Vec3 arm = contacts[i].position - centroid;
    // same tangent convention as the library: the contact's offset from the
    // centroid, else the least-aligned world axis
    Vec3 u = arm - n.dot(arm) * n;
    if (u.norm() > 1e-9 * std::max(1.0, arm.norm()) && u.norm() > 1e-12) {
      u.normalize();
    } else {
      int axis = 0;
      for (int d = 1; d < 3; ++d)
        if (std::abs(n[d]) < std::abs(n[axis])) axis = d;
      Vec3 ref = Vec3::Zero();
      ref[axis] = 1;
      u = (ref - n.dot(ref) * n).normalized();
    }
    const Vec3 v = n.cross(u);
    for (int j = 0; j < k; ++j) {
      const double ang = 2 * 3.14159265358979323846 * j / k;
      const Vec3 e = (n + mu * (std::cos(ang) * u + std::sin(ang) * v)).normalized();
      const auto c = static_cast<Eigen::Index>(i) * k + j;
      a.block<3, 1>(0, c) = e;
      a.block<3, 1>(3, c) = (arm / lambda).cross(e);
      a(6, c) = 1.0;
    }
  }
  return a;
}

inline bool subset_feasible(const Eigen::MatrixXd& a, const std::vector<int>& cols) {
  Eigen::MatrixXd sub(a.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) sub.col(static_cast<Eigen::Index>(c)) = a.col(cols[c]);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(a.rows());
  b[a.rows() - 1] = 1.0;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(sub);
  if (qr.rank() < static_cast<Eigen::Index>(cols.size())) return false;
  const Eigen::VectorXd w = qr.solve(b);
  if ((sub * w - b).cwiseAbs().maxCoeff() > 1e-9) return false;
  return w.minCoeff() >= -1e-10;
}

inline bool brute_force_feasible(const std::vector<Contact>& contacts, double mu, int k, double lambda) {
  const Eigen::MatrixXd a = oracle_wrench_columns(contacts, mu, k, lambda);
  const int n = static_cast<int>(a.cols());
  std::vector<int> cols;
  // depth-first enumeration of column subsets up to size 7
  bool found = false;
  auto recurse = [&](auto&& self, int start) -> void {
    if (found) return;
    if (!cols.empty() && subset_feasible(a, cols)) {
      found = true;
      return;
    }
    if (cols.size() == 7) return;
    for (int c = start; c < n && !found; ++c) {
      cols.push_back(c);
      self(self, c + 1);
      cols.pop_back();
    }
  };
  recurse(recurse, 0);
  return found;
}

}  // namespace cgrkit::test
