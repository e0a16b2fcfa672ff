// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "reorient/mesh.hpp"
#include "reorient/rng.hpp"

namespace reorient::cloud {

enum class Frame { kLinkLocal, kWorld };

struct PointSet {
  Frame frame = Frame::kWorld;
  std::vector<Vec3> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }

  void append(const PointSet& other);
  PointSet transformed(const Eigen::Matrix3d& R, const Vec3& t) const;

  void save_xyz(const std::string& path) const;
  static PointSet load_xyz(const std::string& path);
  // Length-prefixed little-endian float32 triplets.
  void save_binary(const std::string& path) const;
  static PointSet load_binary(const std::string& path);
};

struct VoxelKey {
  std::int32_t x = 0, y = 0, z = 0;
  bool operator==(const VoxelKey&) const = default;
};

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::int64_t v : {std::int64_t(k.x), std::int64_t(k.y), std::int64_t(k.z)}) {
      h ^= std::uint64_t(v);
      h *= 0x100000001b3ULL;
    }
    return std::size_t(h);
  }
};

// Occupied cells at a fixed resolution; each keeps the first point that
// landed in it as representative.
struct VoxelGrid {
  double resolution = 0.005;
  std::vector<VoxelKey> cells;                 // insertion order
  std::vector<Vec3> representatives;           // parallel to cells

  std::size_t size() const { return cells.size(); }
  PointSet representative_points() const;
};

struct CameraModel {
  double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;  // pixels
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();  // camera-to-world
  Vec3 translation = Vec3::Zero();

  void validate() const;  // fx, fy > 0

  Vec3 camera_to_world(const Vec3& p_cam) const {
    return rotation * p_cam + translation;
  }
  Vec3 world_to_camera(const Vec3& p_world) const {
    return rotation.transpose() * (p_world - translation);
  }

  // Camera placed at `eye` looking at `target`; `up` fixes the roll.
  static CameraModel look_at(const Vec3& eye, const Vec3& target,
                             const Vec3& up, double fx, double fy, double cx,
                             double cy);
};

// Zero or non-finite entries mark invalid pixels.
struct DepthImage {
  int width = 0, height = 0;
  std::vector<float> depth;  // row-major, meters

  float at(int row, int col) const { return depth[std::size_t(row) * width + col]; }
  float& at(int row, int col) { return depth[std::size_t(row) * width + col]; }
  int valid_count() const;
};

// K points, area-weighted uniform over the mesh surface.
PointSet sample_mesh_points(const TriangleMesh& mesh, int k, Rng& rng);

VoxelGrid voxelize(const PointSet& points, double resolution);

struct BackProjection {
  PointSet points;       // world frame
  int dropped_pixels = 0;
};
BackProjection depth_to_cloud(const DepthImage& depth, const CameraModel& camera);

struct PosedMesh {
  TriangleMesh mesh;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Vec3 translation = Vec3::Zero();
};

DepthImage render_depth(const std::vector<PosedMesh>& scene,
                        const CameraModel& camera, int width, int height);
// Point-splat variant: each point lands on one pixel with a depth test.
DepthImage render_depth_points(const PointSet& scene, const CameraModel& camera,
                               int width, int height);

struct AugmentConfig {
  double noise_probability = 0.4;
  double noise_sigma = 0.004;       // meters, per coordinate
  double dropout_probability = 0.4;
  double max_dropout_fraction = 0.2;
};

PointSet augment_cloud(const PointSet& points, Rng& rng,
                       const AugmentConfig& config = {});

// Uniform subsample without replacement; returns the input when k >= size.
PointSet subsample(const PointSet& points, std::size_t k, Rng& rng);

}  // namespace reorient::cloud
