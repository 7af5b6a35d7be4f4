#include "cgrkit/geometry/transform.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <sstream>

namespace cgrkit {

double orthonormality_error(const Mat3& r) {
  const double ortho = (r * r.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff();
  return ortho + std::abs(r.determinant() - 1.0);
}

RigidTransform::RigidTransform(const Mat3& rotation, const Vec3& translation, double tolerance)
    : rotation_(rotation), translation_(translation) {
  if (!rotation.allFinite() || !translation.allFinite()) throw Error("transform: non-finite entry");
  const double err = orthonormality_error(rotation);
  if (err > tolerance) {
    std::ostringstream msg;
    msg << "transform: rotation not orthonormal (error " << err << ")";
    throw Error(msg.str());
  }
}

RigidTransform RigidTransform::from_quaternion(const std::array<double, 4>& wxyz, const Vec3& t) {
  Eigen::Quaterniond q(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
  if (std::abs(q.norm() - 1.0) > 1e-6) throw Error("transform: quaternion not unit length");
  q.normalize();
  return {q.toRotationMatrix(), t};
}

RigidTransform RigidTransform::inverse() const {
  const Mat3 rt = rotation_.transpose();
  return {rt, -(rt * translation_), 1e-6};
}

RigidTransform RigidTransform::operator*(const RigidTransform& rhs) const {
  return {rotation_ * rhs.rotation_, rotation_ * rhs.translation_ + translation_, 1e-6};
}

Mat3 rot_z(double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Mat3 r;
  r << c, -s, 0, s, c, 0, 0, 0, 1;
  return r;
}

Mat3 frame_from_z(const Vec3& z_in) {
  const Vec3 z = z_in.normalized();
  int least = 0;
  for (int i = 1; i < 3; ++i)
    if (std::abs(z[i]) < std::abs(z[least])) least = i;
  Vec3 ref = Vec3::Zero();
  ref[least] = 1.0;
  const Vec3 x = (ref - ref.dot(z) * z).normalized();
  const Vec3 y = z.cross(x);
  Mat3 r;
  r.col(0) = x;
  r.col(1) = y;
  r.col(2) = z;
  return r;
}

Mat3 axis_angle(const Vec3& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

Mat3 nearest_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0) u.col(2) *= -1.0;
  return u * v.transpose();
}

}  // namespace cgrkit
