#pragma once

#include <array>

#include "cgrkit/common.hpp"

namespace cgrkit {

/// Proper rigid motion x -> R x + t. Construction checks orthonormality and
/// det(R) = +1 to the given tolerance.
class RigidTransform {
 public:
  static constexpr double kTolerance = 1e-9;
  /// Looser bound for rotations that went through 32-bit float storage.
  static constexpr double kStoredTolerance = 1e-5;

  RigidTransform() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}
  RigidTransform(const Mat3& rotation, const Vec3& translation, double tolerance = kTolerance);

  static RigidTransform identity() { return {}; }
  static RigidTransform from_translation(const Vec3& t) { return {Mat3::Identity(), t}; }
  /// Quaternion in (w, x, y, z) order; must be unit length within 1e-6.
  static RigidTransform from_quaternion(const std::array<double, 4>& wxyz, const Vec3& t);

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }
  Vec3 axis(int i) const { return rotation_.col(i); }

  Vec3 apply(const Vec3& p) const { return rotation_ * p + translation_; }
  Vec3 rotate(const Vec3& v) const { return rotation_ * v; }
  Vec3 apply_inverse(const Vec3& p) const { return rotation_.transpose() * (p - translation_); }

  RigidTransform inverse() const;
  RigidTransform operator*(const RigidTransform& rhs) const;

  bool operator==(const RigidTransform& other) const = default;

 private:
  Mat3 rotation_;
  Vec3 translation_;
};

/// Largest deviation of R from orthonormality, |RR^T - I|_max, plus |det R - 1|.
double orthonormality_error(const Mat3& r);

/// Rotation about the z-axis by angle radians.
Mat3 rot_z(double angle);

/// A deterministic orthonormal frame whose third column is z (unit). The
/// first column is the world axis least aligned with z, projected onto the
/// plane orthogonal to z.
Mat3 frame_from_z(const Vec3& z);

/// Rodrigues rotation for a unit axis.
Mat3 axis_angle(const Vec3& axis, double angle);

/// Re-orthonormalizes a nearly orthonormal matrix (nearest rotation).
Mat3 nearest_rotation(const Mat3& m);

}  // namespace cgrkit
