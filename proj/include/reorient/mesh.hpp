// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>
#include <vector>

namespace reorient::cloud {

using Vec3 = Eigen::Vector3d;

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;

  // Throws std::invalid_argument if indices are out of range or no triangle
  // has positive area.
  void validate() const;

  double total_area() const;
  double triangle_area(std::size_t t) const;

  Vec3 bbox_min() const;
  Vec3 bbox_max() const;

  // Scales the mesh about its bounding-box center so the longest side lands
  // inside [lo, hi]; returns the applied factor (1.0 if already inside).
  double scale_longest_side_into(double lo, double hi);

  TriangleMesh transformed(const Eigen::Matrix3d& R, const Vec3& t) const;
};

TriangleMesh load_obj(const std::string& path);
TriangleMesh load_off(const std::string& path);
// Dispatches on the file extension.
TriangleMesh load_mesh(const std::string& path);

// Procedural shapes used by the reference environments and tests.
TriangleMesh make_box_mesh(const Vec3& size);
TriangleMesh make_icosphere_mesh(double radius, int subdivisions);
// Asymmetric shapes so orientation is observable from geometry alone.
TriangleMesh make_lblock_mesh(double unit = 0.04);
TriangleMesh make_tblock_mesh(double unit = 0.04);
TriangleMesh make_sblock_mesh(double unit = 0.04);
TriangleMesh make_wedge_mesh(const Vec3& size);

}  // namespace reorient::cloud
