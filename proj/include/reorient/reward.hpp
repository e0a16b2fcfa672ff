// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <vector>

namespace reorient::reward {

using Vec3 = Eigen::Vector3d;

enum class TaskMode { kTable, kAir };

struct RewardConfig {
  double c1 = 800.0;   // sparse success bonus
  double c2 = 1.0;     // dense distance shaping
  double c3 = -1.0;    // fingertip-object distance penalty
  double c4 = -20.0;   // energy penalty
  double c5 = -100.0;  // push-away penalty
  double c6 = -1.0;    // object-table contact penalty (air mode)
  double c7 = -2.0;    // high-fingertip penalty (air mode)
  double eps_theta = 0.4;  // rad
  double p_bar = 0.15;     // m, push-away distance
  double p_bar_z = 0.16;   // m, fingertip height limit
  TaskMode mode = TaskMode::kTable;

  // Throws std::invalid_argument when coefficient signs are wrong.
  void validate() const;
};

struct SuccessThresholds {
  double theta_bar = 0.4;   // rad
  double qdot_bar = 0.25;   // rad/s, joint-velocity norm
  double action_bar = 0.05; // action norm; not in the paper's table
  double v_bar = 0.04;      // m/s
  double omega_bar = 0.5;   // rad/s

  void validate() const;  // all strictly positive
};

// Everything the reward terms and success criteria read from one step.
struct StepSnapshot {
  double orientation_error = 0.0;  // |delta theta|, rad
  Eigen::VectorXd joint_velocities;
  Eigen::VectorXd joint_torques;
  Eigen::VectorXd action;  // policy output this step
  std::vector<Vec3> fingertip_positions;
  Vec3 object_position = Vec3::Zero();
  Vec3 object_linear_velocity = Vec3::Zero();
  Vec3 object_angular_velocity = Vec3::Zero();
  bool object_table_contact = false;
};

struct RewardBreakdown {
  double sparse_success = 0.0;
  double dense_distance = 0.0;
  double fingertip_distance = 0.0;
  double energy = 0.0;
  double push_away = 0.0;
  double table_contact = 0.0;   // air mode only
  double high_fingertip = 0.0;  // air mode only
  double total = 0.0;
  bool success = false;
  bool pushed_away = false;
};

// All three criteria: orientation, finger motion, object motion.
bool check_success(const StepSnapshot& snapshot,
                   const SuccessThresholds& thresholds);

RewardBreakdown compute_reward(const StepSnapshot& snapshot,
                               const RewardConfig& config,
                               const SuccessThresholds& thresholds);

// Deployment stopping rule on the predicted distance.
bool should_stop(double predicted_distance, const Eigen::VectorXd& action,
                 const SuccessThresholds& thresholds);

}  // namespace reorient::reward
