// SPDX-License-Identifier: Apache-2.0
#include "reorient/cloud.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace reorient::cloud {

void PointSet::append(const PointSet& other) {
  points.insert(points.end(), other.points.begin(), other.points.end());
}

PointSet PointSet::transformed(const Eigen::Matrix3d& R, const Vec3& t) const {
  PointSet out;
  out.frame = frame;
  out.points.reserve(points.size());
  for (const auto& p : points) out.points.push_back(R * p + t);
  return out;
}

void PointSet::save_xyz(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_xyz: cannot write " + path);
  out.precision(9);
  for (const auto& p : points) {
    out << p.x() << " " << p.y() << " " << p.z() << "\n";
  }
}

PointSet PointSet::load_xyz(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_xyz: cannot open " + path);
  PointSet out;
  double x, y, z;
  while (in >> x >> y >> z) out.points.emplace_back(x, y, z);
  return out;
}

void PointSet::save_binary(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_binary: cannot write " + path);
  const std::uint32_t count = std::uint32_t(points.size());
  out.write(reinterpret_cast<const char*>(&count), sizeof(count));
  for (const auto& p : points) {
    const float xyz[3] = {float(p.x()), float(p.y()), float(p.z())};
    out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
  }
}

PointSet PointSet::load_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_binary: cannot open " + path);
  std::uint32_t count = 0;
  in.read(reinterpret_cast<char*>(&count), sizeof(count));
  if (!in) throw std::runtime_error("load_binary: truncated header");
  PointSet out;
  out.points.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    float xyz[3];
    in.read(reinterpret_cast<char*>(xyz), sizeof(xyz));
    if (!in) throw std::runtime_error("load_binary: truncated payload");
    out.points.emplace_back(xyz[0], xyz[1], xyz[2]);
  }
  return out;
}

PointSet VoxelGrid::representative_points() const {
  PointSet out;
  out.points = representatives;
  return out;
}

void CameraModel::validate() const {
  if (fx <= 0.0 || fy <= 0.0) {
    throw std::invalid_argument("CameraModel: focal lengths must be positive");
  }
}

CameraModel CameraModel::look_at(const Vec3& eye, const Vec3& target,
                                 const Vec3& up, double fx, double fy,
                                 double cx, double cy) {
  CameraModel cam;
  cam.fx = fx;
  cam.fy = fy;
  cam.cx = cx;
  cam.cy = cy;
  const Vec3 forward = (target - eye).normalized();  // +z looks forward
  Vec3 right = forward.cross(up).normalized();
  const Vec3 down = forward.cross(right);
  cam.rotation.col(0) = right;
  cam.rotation.col(1) = down;
  cam.rotation.col(2) = forward;
  cam.translation = eye;
  cam.validate();
  return cam;
}

int DepthImage::valid_count() const {
  int n = 0;
  for (float d : depth) {
    if (std::isfinite(d) && d > 0.0f) ++n;
  }
  return n;
}

PointSet sample_mesh_points(const TriangleMesh& mesh, int k, Rng& rng) {
  mesh.validate();
  if (k < 1) throw std::invalid_argument("sample_mesh_points: K must be >= 1");
  std::vector<double> cumulative(mesh.triangles.size());
  double sum = 0.0;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    sum += mesh.triangle_area(t);
    cumulative[t] = sum;
  }
  if (sum <= 0.0) {
    throw std::invalid_argument("sample_mesh_points: zero total surface area");
  }
  PointSet out;
  out.frame = Frame::kLinkLocal;
  out.points.reserve(k);
  for (int i = 0; i < k; ++i) {
    const double pick = rng.uniform() * sum;
    const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), pick);
    const std::size_t t = std::size_t(it - cumulative.begin());
    const auto& tri = mesh.triangles[std::min(t, mesh.triangles.size() - 1)];
    // Uniform barycentric sample.
    double u = rng.uniform(), v = rng.uniform();
    if (u + v > 1.0) {
      u = 1.0 - u;
      v = 1.0 - v;
    }
    const Vec3& a = mesh.vertices[tri[0]];
    const Vec3& b = mesh.vertices[tri[1]];
    const Vec3& c = mesh.vertices[tri[2]];
    out.points.push_back(a + u * (b - a) + v * (c - a));
  }
  return out;
}

VoxelGrid voxelize(const PointSet& points, double resolution) {
  if (resolution <= 0.0) {
    throw std::invalid_argument("voxelize: resolution must be positive");
  }
  VoxelGrid grid;
  grid.resolution = resolution;
  std::unordered_map<VoxelKey, std::size_t, VoxelKeyHash> seen;
  seen.reserve(points.size());
  for (const auto& p : points.points) {
    const VoxelKey key{std::int32_t(std::floor(p.x() / resolution)),
                       std::int32_t(std::floor(p.y() / resolution)),
                       std::int32_t(std::floor(p.z() / resolution))};
    if (seen.emplace(key, grid.cells.size()).second) {
      grid.cells.push_back(key);
      grid.representatives.push_back(p);
    }
  }
  return grid;
}

BackProjection depth_to_cloud(const DepthImage& depth,
                              const CameraModel& camera) {
  camera.validate();
  BackProjection out;
  for (int row = 0; row < depth.height; ++row) {
    for (int col = 0; col < depth.width; ++col) {
      const float d = depth.at(row, col);
      if (!std::isfinite(d) || d <= 0.0f) {
        ++out.dropped_pixels;
        continue;
      }
      const double z = double(d);
      const Vec3 p_cam((col - camera.cx) * z / camera.fx,
                       (row - camera.cy) * z / camera.fy, z);
      out.points.points.push_back(camera.camera_to_world(p_cam));
    }
  }
  return out;
}

namespace {

struct ScreenVertex {
  double u, v, z;
};

// Rasterizes one triangle into the z-buffer with perspective-correct depth.
void rasterize_triangle(const ScreenVertex& a, const ScreenVertex& b,
                        const ScreenVertex& c, DepthImage& img) {
  const double min_u = std::min({a.u, b.u, c.u});
  const double max_u = std::max({a.u, b.u, c.u});
  const double min_v = std::min({a.v, b.v, c.v});
  const double max_v = std::max({a.v, b.v, c.v});
  const int col0 = std::max(0, int(std::ceil(min_u)));
  const int col1 = std::min(img.width - 1, int(std::floor(max_u)));
  const int row0 = std::max(0, int(std::ceil(min_v)));
  const int row1 = std::min(img.height - 1, int(std::floor(max_v)));
  if (col0 > col1 || row0 > row1) return;

  const double denom =
      (b.v - c.v) * (a.u - c.u) + (c.u - b.u) * (a.v - c.v);
  if (std::abs(denom) < 1e-18) return;  // degenerate in screen space
  for (int row = row0; row <= row1; ++row) {
    for (int col = col0; col <= col1; ++col) {
      const double w0 =
          ((b.v - c.v) * (col - c.u) + (c.u - b.u) * (row - c.v)) / denom;
      const double w1 =
          ((c.v - a.v) * (col - c.u) + (a.u - c.u) * (row - c.v)) / denom;
      const double w2 = 1.0 - w0 - w1;
      const double eps = -1e-12;
      if (w0 < eps || w1 < eps || w2 < eps) continue;
      // 1/z interpolates linearly in screen space.
      const double inv_z = w0 / a.z + w1 / b.z + w2 / c.z;
      if (inv_z <= 0.0) continue;
      const float z = float(1.0 / inv_z);
      float& cell = img.at(row, col);
      if (cell <= 0.0f || z < cell) cell = z;
    }
  }
}

}  // namespace

DepthImage render_depth(const std::vector<PosedMesh>& scene,
                        const CameraModel& camera, int width, int height) {
  camera.validate();
  if (width <= 0 || height <= 0) {
    throw std::invalid_argument("render_depth: non-positive image size");
  }
  DepthImage img;
  img.width = width;
  img.height = height;
  img.depth.assign(std::size_t(width) * height, 0.0f);

  constexpr double kNearPlane = 1e-6;
  for (const auto& posed : scene) {
    std::vector<Vec3> cam_pts(posed.mesh.vertices.size());
    for (std::size_t i = 0; i < posed.mesh.vertices.size(); ++i) {
      cam_pts[i] = camera.world_to_camera(
          posed.rotation * posed.mesh.vertices[i] + posed.translation);
    }
    for (const auto& tri : posed.mesh.triangles) {
      const Vec3& p0 = cam_pts[tri[0]];
      const Vec3& p1 = cam_pts[tri[1]];
      const Vec3& p2 = cam_pts[tri[2]];
      // Triangles crossing the near plane are skipped rather than clipped;
      // scenes here keep geometry in front of the camera.
      if (p0.z() <= kNearPlane || p1.z() <= kNearPlane || p2.z() <= kNearPlane) {
        continue;
      }
      const auto project = [&](const Vec3& p) {
        return ScreenVertex{camera.fx * p.x() / p.z() + camera.cx,
                            camera.fy * p.y() / p.z() + camera.cy, p.z()};
      };
      rasterize_triangle(project(p0), project(p1), project(p2), img);
    }
  }
  return img;
}

DepthImage render_depth_points(const PointSet& scene, const CameraModel& camera,
                               int width, int height) {
  camera.validate();
  DepthImage img;
  img.width = width;
  img.height = height;
  img.depth.assign(std::size_t(width) * height, 0.0f);
  for (const auto& p : scene.points) {
    const Vec3 c = camera.world_to_camera(p);
    if (c.z() <= 0.0) continue;
    const int col = int(std::lround(camera.fx * c.x() / c.z() + camera.cx));
    const int row = int(std::lround(camera.fy * c.y() / c.z() + camera.cy));
    if (col < 0 || col >= width || row < 0 || row >= height) continue;
    float& cell = img.at(row, col);
    if (cell <= 0.0f || float(c.z()) < cell) cell = float(c.z());
  }
  return img;
}

PointSet augment_cloud(const PointSet& points, Rng& rng,
                       const AugmentConfig& config) {
  PointSet out = points;
  if (rng.bernoulli(config.noise_probability)) {
    for (auto& p : out.points) {
      p.x() += rng.normal(0.0, config.noise_sigma);
      p.y() += rng.normal(0.0, config.noise_sigma);
      p.z() += rng.normal(0.0, config.noise_sigma);
    }
  }
  if (rng.bernoulli(config.dropout_probability) && !out.points.empty()) {
    const double fraction = rng.uniform(0.0, config.max_dropout_fraction);
    const std::size_t drop = std::size_t(fraction * double(out.points.size()));
    // Partial Fisher-Yates: move a random survivor into each dropped slot.
    for (std::size_t i = 0; i < drop; ++i) {
      const std::size_t remaining = out.points.size() - i;
      const std::size_t pick = i + std::size_t(rng.uniform_index(remaining));
      std::swap(out.points[i], out.points[pick]);
    }
    out.points.erase(out.points.begin(), out.points.begin() + drop);
  }
  return out;
}

PointSet subsample(const PointSet& points, std::size_t k, Rng& rng) {
  if (k >= points.size()) return points;
  PointSet out = points;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t remaining = out.points.size() - i;
    const std::size_t pick = i + std::size_t(rng.uniform_index(remaining));
    std::swap(out.points[i], out.points[pick]);
  }
  out.points.resize(k);
  return out;
}

}  // namespace reorient::cloud
