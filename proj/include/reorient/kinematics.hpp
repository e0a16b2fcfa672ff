// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "reorient/cloud.hpp"
#include "reorient/so3.hpp"

namespace reorient::cloud {

struct Link {
  std::string name;
  int parent = -1;  // -1 attaches to the world
  so3::UnitQuaternion rotation_to_parent;
  Vec3 translation_to_parent = Vec3::Zero();
  Vec3 axis = Vec3::UnitZ();  // revolute, unit norm
  double lower = -M_PI, upper = M_PI;
  TriangleMesh shape;        // link geometry, link-local
  PointSet local_cloud;      // cached sample of `shape`
};

struct LinkPose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Vec3 position = Vec3::Zero();
};

class KinematicChain {
 public:
  KinematicChain() = default;
  explicit KinematicChain(std::vector<Link> links);

  const std::vector<Link>& links() const { return links_; }
  std::size_t joint_count() const { return links_.size(); }

  std::vector<double> home_pose() const;  // mid-range of each joint
  std::vector<double> clamp_to_limits(const std::vector<double>& q) const;

  static KinematicChain load_json(const std::string& path);
  void save_json(const std::string& path) const;

 private:
  std::vector<Link> links_;
};

struct FkResult {
  std::vector<LinkPose> poses;
  int clamped_joints = 0;
};

// World pose of every link by chained composition. Throws
// std::invalid_argument on a joint-count mismatch; out-of-limit entries are
// clamped and counted.
FkResult forward_kinematics(const KinematicChain& chain,
                            const std::vector<double>& q);

struct ObjectInstance {
  PointSet local_cloud;
  so3::UnitQuaternion orientation;
  Vec3 position = Vec3::Zero();
};

struct GoalDisplay {
  Vec3 offset = Vec3(0.0, 0.0, 0.3);  // where the goal cloud is shown
};

// World-frame union of all link clouds, the object cloud at its pose, and the
// object cloud at the goal orientation placed at the display offset.
PointSet compose_scene_cloud(const KinematicChain& chain,
                             const std::vector<double>& q,
                             const ObjectInstance& object,
                             const so3::UnitQuaternion& goal_orientation,
                             const GoalDisplay& goal = {});

// G-finger hand used by the reference environments: three revolute joints per
// finger, bases on a circle, fingers curling toward the workspace center.
KinematicChain make_hand_chain(int fingers, int points_per_link = 500);

// Offset of the fingertip inside the last link frame of each finger.
Vec3 fingertip_offset();

}  // namespace reorient::cloud
