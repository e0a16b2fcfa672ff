// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>
#include <vector>

#include "reorient/rng.hpp"

namespace reorient::so3 {

using RotationMatrix = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;

constexpr double kUnitNormTolerance = 1e-6;

// Scalar-first unit quaternion (w, x, y, z). q and -q denote the same
// rotation; rotation_distance treats them as equal.
struct UnitQuaternion {
  double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

  UnitQuaternion() = default;
  UnitQuaternion(double w_, double x_, double y_, double z_)
      : w(w_), x(x_), y(y_), z(z_) {}

  static UnitQuaternion identity() { return {}; }
  static UnitQuaternion from_axis_angle(const Vec3& axis, double angle);
  static UnitQuaternion from_matrix(const RotationMatrix& R);

  double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }
  bool is_unit(double tol = 1e-9) const { return std::abs(norm() - 1.0) <= tol; }

  UnitQuaternion normalized() const;
  UnitQuaternion conjugate() const { return {w, -x, -y, -z}; }
  UnitQuaternion operator-() const { return {-w, -x, -y, -z}; }

  // Hamilton product; (a * b) rotates first by b, then by a.
  UnitQuaternion operator*(const UnitQuaternion& rhs) const;

  double dot(const UnitQuaternion& rhs) const {
    return w * rhs.w + x * rhs.x + y * rhs.y + z * rhs.z;
  }

  Vec3 rotate(const Vec3& v) const;
  RotationMatrix to_matrix() const;

  // Rotation angle from identity, in [0, pi].
  double angle() const;
  Vec3 axis() const;
};

// Finite set of rotations closed under composition; element 0 is the identity.
class SymmetryGroup {
 public:
  explicit SymmetryGroup(std::vector<UnitQuaternion> elements);

  const std::vector<UnitQuaternion>& elements() const { return elements_; }
  std::size_t order() const { return elements_.size(); }

  static SymmetryGroup trivial();
  // Rotations of a square cuboid that keep its long axis (z) in place.
  static SymmetryGroup cuboid_order4();
  // Full proper rotation group of a square cuboid.
  static SymmetryGroup cuboid_order8();
  // Full proper rotation group of a cube.
  static SymmetryGroup cube_order24();

  // JSON file holding a list of [w, x, y, z] quadruples.
  static SymmetryGroup load_json(const std::string& path);
  void save_json(const std::string& path) const;

 private:
  std::vector<UnitQuaternion> elements_;
};

// Geodesic angle 2*acos(|<a,b>|) in [0, pi]. Throws std::invalid_argument on
// non-unit input (norm deviation > 1e-6).
double rotation_distance(const UnitQuaternion& a, const UnitQuaternion& b);

// Rotation r with r * current = goal.
UnitQuaternion relative_rotation(const UnitQuaternion& current,
                                 const UnitQuaternion& goal);

// Haar-uniform rotation via a normalized 4D Gaussian.
UnitQuaternion sample_uniform_rotation(Rng& rng);

// min over group elements s of rotation_distance(pose, s * goal).
double symmetric_min_distance(const UnitQuaternion& pose,
                              const UnitQuaternion& goal,
                              const SymmetryGroup& group);

// First two columns of R, stacked: (R00, R10, R20, R01, R11, R21).
using SixD = Eigen::Matrix<double, 6, 1>;
SixD sixd_encode(const RotationMatrix& R);
// Gram-Schmidt on the two 3-blocks, third column by cross product. Throws
// std::invalid_argument for zero or parallel blocks.
RotationMatrix sixd_decode(const SixD& v);

bool is_rotation_matrix(const RotationMatrix& R, double tol = 1e-9);

}  // namespace reorient::so3
