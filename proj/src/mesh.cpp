// SPDX-License-Identifier: Apache-2.0
#include "reorient/mesh.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace reorient::cloud {

void TriangleMesh::validate() const {
  const int n = int(vertices.size());
  bool any_positive = false;
  for (const auto& tri : triangles) {
    for (int idx : tri) {
      if (idx < 0 || idx >= n) {
        throw std::invalid_argument("TriangleMesh: vertex index out of range");
      }
    }
  }
  for (std::size_t t = 0; t < triangles.size(); ++t) {
    if (triangle_area(t) > 0.0) {
      any_positive = true;
      break;
    }
  }
  if (!any_positive) {
    throw std::invalid_argument(
        "TriangleMesh: no triangle with positive area");
  }
}

double TriangleMesh::triangle_area(std::size_t t) const {
  const auto& tri = triangles[t];
  const Vec3& a = vertices[tri[0]];
  const Vec3& b = vertices[tri[1]];
  const Vec3& c = vertices[tri[2]];
  return 0.5 * (b - a).cross(c - a).norm();
}

double TriangleMesh::total_area() const {
  double sum = 0.0;
  for (std::size_t t = 0; t < triangles.size(); ++t) sum += triangle_area(t);
  return sum;
}

Vec3 TriangleMesh::bbox_min() const {
  Vec3 m = Vec3::Constant(std::numeric_limits<double>::infinity());
  for (const auto& v : vertices) m = m.cwiseMin(v);
  return m;
}

Vec3 TriangleMesh::bbox_max() const {
  Vec3 m = Vec3::Constant(-std::numeric_limits<double>::infinity());
  for (const auto& v : vertices) m = m.cwiseMax(v);
  return m;
}

double TriangleMesh::scale_longest_side_into(double lo, double hi) {
  const Vec3 extent = bbox_max() - bbox_min();
  const double longest = extent.maxCoeff();
  if (longest <= 0.0) {
    throw std::invalid_argument("TriangleMesh: degenerate bounding box");
  }
  double factor = 1.0;
  if (longest < lo) factor = lo / longest;
  if (longest > hi) factor = hi / longest;
  if (factor != 1.0) {
    const Vec3 center = 0.5 * (bbox_min() + bbox_max());
    for (auto& v : vertices) v = center + factor * (v - center);
  }
  return factor;
}

TriangleMesh TriangleMesh::transformed(const Eigen::Matrix3d& R,
                                       const Vec3& t) const {
  TriangleMesh out = *this;
  for (auto& v : out.vertices) v = R * v + t;
  return out;
}

TriangleMesh load_obj(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_obj: cannot open " + path);
  TriangleMesh mesh;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "v") {
      Vec3 v;
      ss >> v.x() >> v.y() >> v.z();
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ss >> tok) {
        // "f 1 2 3" or "f 1/1/1 2/2/2 ..."; indices are 1-based.
        idx.push_back(std::stoi(tok.substr(0, tok.find('/'))) - 1);
      }
      for (std::size_t k = 2; k < idx.size(); ++k) {  // fan-triangulate
        mesh.triangles.push_back({idx[0], idx[k - 1], idx[k]});
      }
    }
  }
  mesh.validate();
  return mesh;
}

TriangleMesh load_off(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_off: cannot open " + path);
  std::string header;
  in >> header;
  if (header != "OFF") throw std::runtime_error("load_off: missing OFF header");
  int nv = 0, nf = 0, ne = 0;
  in >> nv >> nf >> ne;
  TriangleMesh mesh;
  mesh.vertices.resize(nv);
  for (auto& v : mesh.vertices) in >> v.x() >> v.y() >> v.z();
  for (int f = 0; f < nf; ++f) {
    int count = 0;
    in >> count;
    std::vector<int> idx(count);
    for (auto& i : idx) in >> i;
    for (int k = 2; k < count; ++k) {
      mesh.triangles.push_back({idx[0], idx[k - 1], idx[k]});
    }
  }
  mesh.validate();
  return mesh;
}

TriangleMesh load_mesh(const std::string& path) {
  const auto dot = path.rfind('.');
  const std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  if (ext == "obj" || ext == "OBJ") return load_obj(path);
  if (ext == "off" || ext == "OFF") return load_off(path);
  throw std::runtime_error("load_mesh: unsupported extension ." + ext);
}

namespace {

void append_box(TriangleMesh& mesh, const Vec3& lo, const Vec3& hi) {
  const int base = int(mesh.vertices.size());
  for (int i = 0; i < 8; ++i) {
    mesh.vertices.emplace_back(i & 1 ? hi.x() : lo.x(),
                               i & 2 ? hi.y() : lo.y(),
                               i & 4 ? hi.z() : lo.z());
  }
  static const int faces[12][3] = {
      {0, 2, 1}, {1, 2, 3},  // z = lo
      {4, 5, 6}, {5, 7, 6},  // z = hi
      {0, 1, 4}, {1, 5, 4},  // y = lo
      {2, 6, 3}, {3, 6, 7},  // y = hi
      {0, 4, 2}, {2, 4, 6},  // x = lo
      {1, 3, 5}, {3, 7, 5},  // x = hi
  };
  for (const auto& f : faces) {
    mesh.triangles.push_back({base + f[0], base + f[1], base + f[2]});
  }
}

}  // namespace

TriangleMesh make_box_mesh(const Vec3& size) {
  TriangleMesh mesh;
  append_box(mesh, -0.5 * size, 0.5 * size);
  mesh.validate();
  return mesh;
}

TriangleMesh make_icosphere_mesh(double radius, int subdivisions) {
  // Icosahedron, then midpoint subdivision projected back to the sphere.
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {
      {-1, phi, 0}, {1, phi, 0},   {-1, -phi, 0}, {1, -phi, 0},
      {0, -1, phi}, {0, 1, phi},   {0, -1, -phi}, {0, 1, -phi},
      {phi, 0, -1}, {phi, 0, 1},   {-phi, 0, -1}, {-phi, 0, 1}};
  for (auto& p : v) p.normalize();
  std::vector<std::array<int, 3>> f = {
      {0, 11, 5}, {0, 5, 1},   {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
      {1, 5, 9},  {5, 11, 4},  {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4},  {3, 4, 2},   {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
      {4, 9, 5},  {2, 4, 11},  {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      const int idx = int(v.size());
      v.push_back((v[a] + v[b]).normalized());
      midpoint.emplace(key, idx);
      return idx;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(f.size() * 4);
    for (const auto& tri : f) {
      const int ab = mid(tri[0], tri[1]);
      const int bc = mid(tri[1], tri[2]);
      const int ca = mid(tri[2], tri[0]);
      next.push_back({tri[0], ab, ca});
      next.push_back({tri[1], bc, ab});
      next.push_back({tri[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    f = std::move(next);
  }
  TriangleMesh mesh;
  mesh.vertices.reserve(v.size());
  for (const auto& p : v) mesh.vertices.push_back(radius * p);
  mesh.triangles = std::move(f);
  mesh.validate();
  return mesh;
}

TriangleMesh make_lblock_mesh(double unit) {
  // Three cells along x plus one sticking out in y; one cell thick.
  TriangleMesh mesh;
  const double u = unit;
  append_box(mesh, {0, 0, 0}, {3 * u, u, u});
  append_box(mesh, {0, u, 0}, {u, 2 * u, u});
  // Center roughly on the body.
  const Vec3 shift(-1.5 * u, -u, -0.5 * u);
  for (auto& v : mesh.vertices) v += shift;
  mesh.validate();
  return mesh;
}

TriangleMesh make_tblock_mesh(double unit) {
  TriangleMesh mesh;
  const double u = unit;
  append_box(mesh, {0, 0, 0}, {3 * u, u, u});
  append_box(mesh, {u, u, 0}, {2 * u, 2 * u, u});
  const Vec3 shift(-1.5 * u, -u, -0.5 * u);
  for (auto& v : mesh.vertices) v += shift;
  mesh.validate();
  return mesh;
}

TriangleMesh make_sblock_mesh(double unit) {
  TriangleMesh mesh;
  const double u = unit;
  append_box(mesh, {0, 0, 0}, {2 * u, u, u});
  append_box(mesh, {u, u, 0}, {3 * u, 2 * u, u});
  const Vec3 shift(-1.5 * u, -u, -0.5 * u);
  for (auto& v : mesh.vertices) v += shift;
  mesh.validate();
  return mesh;
}

TriangleMesh make_wedge_mesh(const Vec3& size) {
  // Right triangular prism: box cut along one diagonal.
  TriangleMesh mesh;
  const Vec3 h = 0.5 * size;
  mesh.vertices = {{-h.x(), -h.y(), -h.z()}, {h.x(), -h.y(), -h.z()},
                   {-h.x(), h.y(), -h.z()},  {h.x(), h.y(), -h.z()},
                   {-h.x(), -h.y(), h.z()},  {-h.x(), h.y(), h.z()}};
  mesh.triangles = {{0, 2, 1}, {1, 2, 3},              // bottom
                    {0, 1, 4}, {1, 3, 4}, {3, 5, 4},   // slanted + front
                    {2, 5, 3},                         // back
                    {0, 4, 2}, {2, 4, 5}};             // left
  mesh.validate();
  return mesh;
}

}  // namespace reorient::cloud
