// SPDX-License-Identifier: Apache-2.0
#include "reorient/so3.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace reorient::so3 {

namespace {

void require_unit(const UnitQuaternion& q, const char* what) {
  if (std::abs(q.norm() - 1.0) > kUnitNormTolerance) {
    throw std::invalid_argument(std::string(what) +
                                ": quaternion is not unit norm");
  }
}

}  // namespace

UnitQuaternion UnitQuaternion::from_axis_angle(const Vec3& axis, double angle) {
  const double n = axis.norm();
  if (n == 0.0) throw std::invalid_argument("from_axis_angle: zero axis");
  const double half = 0.5 * angle;
  const double s = std::sin(half) / n;
  return {std::cos(half), s * axis.x(), s * axis.y(), s * axis.z()};
}

UnitQuaternion UnitQuaternion::normalized() const {
  const double n = norm();
  if (n == 0.0) throw std::invalid_argument("normalized: zero quaternion");
  return {w / n, x / n, y / n, z / n};
}

UnitQuaternion UnitQuaternion::operator*(const UnitQuaternion& r) const {
  return {w * r.w - x * r.x - y * r.y - z * r.z,
          w * r.x + x * r.w + y * r.z - z * r.y,
          w * r.y - x * r.z + y * r.w + z * r.x,
          w * r.z + x * r.y - y * r.x + z * r.w};
}

Vec3 UnitQuaternion::rotate(const Vec3& v) const {
  // v' = v + 2*u x (u x v + w*v), u = (x,y,z)
  const Vec3 u(x, y, z);
  const Vec3 t = 2.0 * u.cross(v);
  return v + w * t + u.cross(t);
}

RotationMatrix UnitQuaternion::to_matrix() const {
  RotationMatrix R;
  const double xx = x * x, yy = y * y, zz = z * z;
  const double xy = x * y, xz = x * z, yz = y * z;
  const double wx = w * x, wy = w * y, wz = w * z;
  R << 1 - 2 * (yy + zz), 2 * (xy - wz), 2 * (xz + wy),
       2 * (xy + wz), 1 - 2 * (xx + zz), 2 * (yz - wx),
       2 * (xz - wy), 2 * (yz + wx), 1 - 2 * (xx + yy);
  return R;
}

UnitQuaternion UnitQuaternion::from_matrix(const RotationMatrix& R) {
  if (!is_rotation_matrix(R, 1e-6)) {
    throw std::invalid_argument("from_matrix: not a rotation matrix");
  }
  // Shepperd's method: pick the largest diagonal combination for stability.
  UnitQuaternion q;
  const double tr = R.trace();
  if (tr > 0.0) {
    double s = std::sqrt(tr + 1.0) * 2.0;
    q.w = 0.25 * s;
    q.x = (R(2, 1) - R(1, 2)) / s;
    q.y = (R(0, 2) - R(2, 0)) / s;
    q.z = (R(1, 0) - R(0, 1)) / s;
  } else if (R(0, 0) > R(1, 1) && R(0, 0) > R(2, 2)) {
    double s = std::sqrt(1.0 + R(0, 0) - R(1, 1) - R(2, 2)) * 2.0;
    q.w = (R(2, 1) - R(1, 2)) / s;
    q.x = 0.25 * s;
    q.y = (R(0, 1) + R(1, 0)) / s;
    q.z = (R(0, 2) + R(2, 0)) / s;
  } else if (R(1, 1) > R(2, 2)) {
    double s = std::sqrt(1.0 + R(1, 1) - R(0, 0) - R(2, 2)) * 2.0;
    q.w = (R(0, 2) - R(2, 0)) / s;
    q.x = (R(0, 1) + R(1, 0)) / s;
    q.y = 0.25 * s;
    q.z = (R(1, 2) + R(2, 1)) / s;
  } else {
    double s = std::sqrt(1.0 + R(2, 2) - R(0, 0) - R(1, 1)) * 2.0;
    q.w = (R(1, 0) - R(0, 1)) / s;
    q.x = (R(0, 2) + R(2, 0)) / s;
    q.y = (R(1, 2) + R(2, 1)) / s;
    q.z = 0.25 * s;
  }
  return q.normalized();
}

double UnitQuaternion::angle() const {
  const double c = std::clamp(std::abs(w), 0.0, 1.0);
  return 2.0 * std::acos(c);
}

Vec3 UnitQuaternion::axis() const {
  Vec3 u(x, y, z);
  const double n = u.norm();
  if (n < 1e-12) return Vec3::UnitZ();
  u /= n;
  return w < 0.0 ? Vec3(-u) : u;
}

double rotation_distance(const UnitQuaternion& a, const UnitQuaternion& b) {
  require_unit(a, "rotation_distance");
  require_unit(b, "rotation_distance");
  // Stable form of the geodesic angle 2*acos(|<a,b>|): with sum and
  // difference norms d+ = |a+b|, d- = |a-b| (sign-aligned so the pair sits in
  // the same hemisphere), theta = 4*atan2(min, max). Exact at 0 and pi where
  // the acos form loses half the significand.
  const double sign = a.dot(b) < 0.0 ? -1.0 : 1.0;
  double sum_sq = 0.0, diff_sq = 0.0;
  const double av[4] = {a.w, a.x, a.y, a.z};
  const double bv[4] = {sign * b.w, sign * b.x, sign * b.y, sign * b.z};
  for (int i = 0; i < 4; ++i) {
    sum_sq += (av[i] + bv[i]) * (av[i] + bv[i]);
    diff_sq += (av[i] - bv[i]) * (av[i] - bv[i]);
  }
  return std::min(4.0 * std::atan2(std::sqrt(diff_sq), std::sqrt(sum_sq)),
                  M_PI);
}

UnitQuaternion relative_rotation(const UnitQuaternion& current,
                                 const UnitQuaternion& goal) {
  require_unit(current, "relative_rotation");
  require_unit(goal, "relative_rotation");
  return (goal * current.conjugate()).normalized();
}

UnitQuaternion sample_uniform_rotation(Rng& rng) {
  double w, x, y, z, n;
  do {
    w = rng.normal();
    x = rng.normal();
    y = rng.normal();
    z = rng.normal();
    n = std::sqrt(w * w + x * x + y * y + z * z);
  } while (n < 1e-12);
  return {w / n, x / n, y / n, z / n};
}

SymmetryGroup::SymmetryGroup(std::vector<UnitQuaternion> elements)
    : elements_(std::move(elements)) {
  if (elements_.empty()) {
    throw std::invalid_argument("SymmetryGroup: empty element list");
  }
  for (const auto& q : elements_) require_unit(q, "SymmetryGroup");
  const auto dist_to_identity = [](const UnitQuaternion& q) {
    return rotation_distance(q, UnitQuaternion::identity());
  };
  bool has_identity = false;
  for (const auto& q : elements_) {
    if (dist_to_identity(q) < 1e-6) has_identity = true;
  }
  if (!has_identity) {
    throw std::invalid_argument("SymmetryGroup: missing identity element");
  }
  // Closure within 1e-6 (up to quaternion sign).
  for (const auto& a : elements_) {
    for (const auto& b : elements_) {
      const UnitQuaternion ab = a * b;
      double best = M_PI;
      for (const auto& c : elements_) {
        best = std::min(best, rotation_distance(ab, c));
      }
      if (best > 1e-6) {
        throw std::invalid_argument(
            "SymmetryGroup: element set not closed under composition");
      }
    }
  }
}

SymmetryGroup SymmetryGroup::trivial() {
  return SymmetryGroup({UnitQuaternion::identity()});
}

SymmetryGroup SymmetryGroup::cuboid_order4() {
  std::vector<UnitQuaternion> el;
  for (int k = 0; k < 4; ++k) {
    el.push_back(UnitQuaternion::from_axis_angle(Vec3::UnitZ(), k * M_PI_2));
  }
  return SymmetryGroup(std::move(el));
}

SymmetryGroup SymmetryGroup::cuboid_order8() {
  std::vector<UnitQuaternion> el = cuboid_order4().elements();
  el.push_back(UnitQuaternion::from_axis_angle(Vec3::UnitX(), M_PI));
  el.push_back(UnitQuaternion::from_axis_angle(Vec3::UnitY(), M_PI));
  el.push_back(UnitQuaternion::from_axis_angle(Vec3(1, 1, 0), M_PI));
  el.push_back(UnitQuaternion::from_axis_angle(Vec3(1, -1, 0), M_PI));
  return SymmetryGroup(std::move(el));
}

SymmetryGroup SymmetryGroup::cube_order24() {
  std::vector<UnitQuaternion> el;
  // Identity + 9 face rotations.
  el.push_back(UnitQuaternion::identity());
  const Vec3 axes[3] = {Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()};
  for (const auto& ax : axes) {
    for (int k = 1; k < 4; ++k) {
      el.push_back(UnitQuaternion::from_axis_angle(ax, k * M_PI_2));
    }
  }
  // 6 edge rotations (180 degrees).
  const Vec3 edges[6] = {Vec3(1, 1, 0),  Vec3(1, -1, 0), Vec3(1, 0, 1),
                         Vec3(1, 0, -1), Vec3(0, 1, 1),  Vec3(0, 1, -1)};
  for (const auto& ax : edges) {
    el.push_back(UnitQuaternion::from_axis_angle(ax, M_PI));
  }
  // 8 vertex rotations (+-120 degrees).
  const Vec3 corners[4] = {Vec3(1, 1, 1), Vec3(1, 1, -1), Vec3(1, -1, 1),
                           Vec3(1, -1, -1)};
  for (const auto& ax : corners) {
    el.push_back(UnitQuaternion::from_axis_angle(ax, 2.0 * M_PI / 3.0));
    el.push_back(UnitQuaternion::from_axis_angle(ax, -2.0 * M_PI / 3.0));
  }
  return SymmetryGroup(std::move(el));
}

SymmetryGroup SymmetryGroup::load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("SymmetryGroup: cannot open " + path);
  nlohmann::json j;
  in >> j;
  if (!j.is_array()) {
    throw std::runtime_error("SymmetryGroup: expected a JSON array in " + path);
  }
  std::vector<UnitQuaternion> el;
  for (const auto& item : j) {
    if (!item.is_array() || item.size() != 4) {
      throw std::runtime_error(
          "SymmetryGroup: each element must be [w, x, y, z]");
    }
    el.push_back(UnitQuaternion(item[0].get<double>(), item[1].get<double>(),
                                item[2].get<double>(), item[3].get<double>())
                     .normalized());
  }
  return SymmetryGroup(std::move(el));
}

void SymmetryGroup::save_json(const std::string& path) const {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& q : elements_) {
    j.push_back({q.w, q.x, q.y, q.z});
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("SymmetryGroup: cannot write " + path);
  out << j.dump(2) << "\n";
}

double symmetric_min_distance(const UnitQuaternion& pose,
                              const UnitQuaternion& goal,
                              const SymmetryGroup& group) {
  require_unit(pose, "symmetric_min_distance");
  require_unit(goal, "symmetric_min_distance");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : group.elements()) {
    best = std::min(best, rotation_distance(pose, (s * goal).normalized()));
  }
  return best;
}

SixD sixd_encode(const RotationMatrix& R) {
  if (!is_rotation_matrix(R, 1e-6)) {
    throw std::invalid_argument("sixd_encode: not a rotation matrix");
  }
  SixD v;
  v << R(0, 0), R(1, 0), R(2, 0), R(0, 1), R(1, 1), R(2, 1);
  return v;
}

RotationMatrix sixd_decode(const SixD& v) {
  const Vec3 a = v.head<3>();
  const Vec3 b = v.tail<3>();
  constexpr double kDegenerate = 1e-9;
  if (a.norm() < kDegenerate) {
    throw std::invalid_argument("sixd_decode: first block is zero");
  }
  const Vec3 c0 = a.normalized();
  const Vec3 b_orth = b - b.dot(c0) * c0;
  if (b_orth.norm() < kDegenerate) {
    throw std::invalid_argument(
        "sixd_decode: blocks are parallel or second block is zero");
  }
  const Vec3 c1 = b_orth.normalized();
  const Vec3 c2 = c0.cross(c1);
  RotationMatrix R;
  R.col(0) = c0;
  R.col(1) = c1;
  R.col(2) = c2;
  return R;
}

bool is_rotation_matrix(const RotationMatrix& R, double tol) {
  const RotationMatrix err = R * R.transpose() - RotationMatrix::Identity();
  return err.cwiseAbs().maxCoeff() <= tol && std::abs(R.determinant() - 1.0) <= tol;
}

}  // namespace reorient::so3
