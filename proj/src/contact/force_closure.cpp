#include "cgrkit/contact/force_closure.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <sstream>

#include "cgrkit/geometry/transform.hpp"

namespace cgrkit {

namespace {

constexpr double kPivotTol = 1e-11;
constexpr int kMaxIterations = 20000;

Mat3 cross_matrix(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

}  // namespace

void ForceClosureParams::validate() const {
  if (!(friction > 0)) throw Error("force closure: friction must be positive");
  if (!(rank_epsilon > 0)) throw Error("force closure: rank epsilon must be positive");
  if (cone_edges < 3) throw Error("force closure: need at least 3 cone edges");
  if (!(torque_scale > 0)) throw Error("force closure: torque scale must be positive");
}

Eigen::MatrixXd grasp_matrix(std::span<const Contact> contacts, double torque_scale) {
  if (contacts.empty()) throw Error("grasp matrix: no contacts");
  Eigen::MatrixXd g(6, 3 * contacts.size());
  for (std::size_t i = 0; i < contacts.size(); ++i) {
    g.block<3, 3>(0, 3 * i) = Mat3::Identity();
    g.block<3, 3>(3, 3 * i) = cross_matrix(contacts[i].position / torque_scale);
  }
  return g;
}

std::vector<Vec3> friction_cone_edges(const Vec3& n_in, double mu, int k, const Vec3& reference) {
  if (k < 3) throw Error("friction cone: need at least 3 edges");
  const double len = n_in.norm();
  if (!(len > 1e-12) || !n_in.allFinite()) throw Error("friction cone: degenerate normal");
  const Vec3 n = n_in / len;
  Vec3 u = reference - reference.dot(n) * n;
  if (u.norm() > 1e-9 * std::max(1.0, reference.norm()) && u.norm() > 1e-12)
    u.normalize();
  else
    u = frame_from_z(n).col(0);
  const Vec3 v = n.cross(u);
  const double scale = 1.0 / std::sqrt(1.0 + mu * mu);
  std::vector<Vec3> edges;
  edges.reserve(k);
  for (int j = 0; j < k; ++j) {
    const double a = 2.0 * kPi * j / k;
    edges.push_back(scale * (n + mu * (std::cos(a) * u + std::sin(a) * v)));
  }
  return edges;
}

LpResult simplex_feasibility(const Eigen::MatrixXd& a_in, const Eigen::VectorXd& b_in) {
  const int m = static_cast<int>(a_in.rows());
  const int n = static_cast<int>(a_in.cols());
  Eigen::MatrixXd a = a_in;
  Eigen::VectorXd b = b_in;
  for (int i = 0; i < m; ++i)
    if (b[i] < 0) {
      a.row(i) *= -1.0;
      b[i] = -b[i];
    }
  // tableau columns: n structural, m artificial, rhs; last row is the
  // reduced-cost row of "minimize sum of artificials"
  const int cols = n + m + 1;
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m + 1, cols);
  t.topLeftCorner(m, n) = a;
  t.block(0, n, m, m) = Eigen::MatrixXd::Identity(m, m);
  t.col(cols - 1).head(m) = b;
  for (int i = 0; i < m; ++i) t.row(m) -= t.row(i);
  for (int i = 0; i < m; ++i) t(m, n + i) = 0.0;
  std::vector<int> basis(m);
  for (int i = 0; i < m; ++i) basis[i] = n + i;

  LpResult result;
  for (;;) {
    int enter = -1;
    for (int j = 0; j < n + m; ++j)
      if (t(m, j) < -kPivotTol) {
        enter = j;
        break;
      }
    if (enter < 0) break;
    int leave = -1;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (int i = 0; i < m; ++i) {
      if (t(i, enter) <= kPivotTol) continue;
      const double ratio = t(i, cols - 1) / t(i, enter);
      if (ratio < best_ratio - 1e-15 || (std::abs(ratio - best_ratio) <= 1e-15 && basis[i] < basis[leave])) {
        best_ratio = ratio;
        leave = i;
      }
    }
    if (leave < 0) throw Error("simplex: phase one unbounded (numerical failure)");
    t.row(leave) /= t(leave, enter);
    for (int i = 0; i <= m; ++i)
      if (i != leave && t(i, enter) != 0.0) t.row(i) -= t(i, enter) * t.row(leave);
    basis[leave] = enter;
    if (++result.iterations > kMaxIterations) throw Error("simplex: iteration limit reached");
  }
  const double infeasibility = -t(m, cols - 1);
  result.x = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < m; ++i)
    if (basis[i] < n) result.x[basis[i]] = std::max(0.0, t(i, cols - 1));
  result.feasible = infeasibility <= 1e-9 * (1.0 + b.cwiseAbs().sum());
  // long pivot sequences accumulate rounding in the tableau; re-solve the
  // final basis against the original rows and keep whichever fits better
  std::vector<int> structural;
  for (int i = 0; i < m; ++i)
    if (basis[i] < n) structural.push_back(basis[i]);
  if (result.feasible && !structural.empty()) {
    Eigen::MatrixXd ab(m, static_cast<Eigen::Index>(structural.size()));
    for (std::size_t k = 0; k < structural.size(); ++k) ab.col(static_cast<Eigen::Index>(k)) = a.col(structural[k]);
    const Eigen::VectorXd xb = ab.colPivHouseholderQr().solve(b);
    Eigen::VectorXd refined = Eigen::VectorXd::Zero(n);
    for (std::size_t k = 0; k < structural.size(); ++k)
      refined[structural[k]] = std::max(0.0, xb[static_cast<Eigen::Index>(k)]);
    if (xb.allFinite() && (a * refined - b).cwiseAbs().maxCoeff() < (a * result.x - b).cwiseAbs().maxCoeff())
      result.x = refined;
  }
  return result;
}

ForceClosureResult force_closure(std::span<const Contact> contacts, const ForceClosureParams& params) {
  params.validate();
  if (contacts.empty()) throw Error("force closure: no contacts");
  Vec3 centroid = Vec3::Zero();
  for (const auto& c : contacts) centroid += c.position;
  centroid /= static_cast<double>(contacts.size());
  std::vector<Contact> local;
  local.reserve(contacts.size());
  for (const auto& c : contacts) local.push_back({c.position - centroid, c.normal});

  const Eigen::MatrixXd g = grasp_matrix(local, params.torque_scale);
  ForceClosureResult out;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 6, 6>> eig(g * g.transpose(), Eigen::EigenvaluesOnly);
  out.min_eigenvalue = eig.eigenvalues().minCoeff();
  out.rank_ok = out.min_eigenvalue > params.rank_epsilon;

  const int k = params.cone_edges;
  const auto cols = static_cast<Eigen::Index>(contacts.size()) * k;
  Eigen::MatrixXd a(7, cols);
  for (std::size_t i = 0; i < contacts.size(); ++i) {
    const auto edges = friction_cone_edges(local[i].normal, params.friction, k, local[i].position);
    const Vec3 arm = local[i].position / params.torque_scale;
    for (int j = 0; j < k; ++j) {
      const auto c = static_cast<Eigen::Index>(i) * k + j;
      a.block<3, 1>(0, c) = edges[j];
      a.block<3, 1>(3, c) = arm.cross(edges[j]);
      a(6, c) = 1.0;
    }
  }
  Eigen::VectorXd b = Eigen::VectorXd::Zero(7);
  b[6] = 1.0;
  const auto lp = simplex_feasibility(a, b);
  if (lp.feasible) {
    const double residual = (a * lp.x - b).cwiseAbs().maxCoeff();
    if (residual > 1e-7) {
      std::ostringstream msg;
      msg << "force closure: LP solution residual " << residual << " exceeds tolerance";
      throw Error(msg.str());
    }
  }
  out.feasible = lp.feasible;
  out.closure = out.rank_ok && out.feasible;
  return out;
}

}  // namespace cgrkit
