// SPDX-License-Identifier: Apache-2.0
#include "reorient/reward.hpp"

#include <cmath>
#include <stdexcept>

namespace reorient::reward {

void RewardConfig::validate() const {
  if (!(c1 > 0.0) || !(c2 > 0.0)) {
    throw std::invalid_argument("RewardConfig: c1 and c2 must be positive");
  }
  for (double c : {c3, c4, c5, c6, c7}) {
    if (c > 0.0) {
      throw std::invalid_argument("RewardConfig: c3..c7 must be <= 0");
    }
  }
  if (!(eps_theta > 0.0)) {
    throw std::invalid_argument("RewardConfig: eps_theta must be positive");
  }
  if (!(p_bar > 0.0)) {
    throw std::invalid_argument("RewardConfig: p_bar must be positive");
  }
}

void SuccessThresholds::validate() const {
  for (double v : {theta_bar, qdot_bar, action_bar, v_bar, omega_bar}) {
    if (!(v > 0.0)) {
      throw std::invalid_argument(
          "SuccessThresholds: all thresholds must be positive");
    }
  }
}

bool check_success(const StepSnapshot& s, const SuccessThresholds& t) {
  const bool orientation = std::abs(s.orientation_error) < t.theta_bar;
  const bool finger_motion =
      s.joint_velocities.norm() < t.qdot_bar && s.action.norm() < t.action_bar;
  const bool object_motion = s.object_linear_velocity.norm() < t.v_bar &&
                             s.object_angular_velocity.norm() < t.omega_bar;
  return orientation && finger_motion && object_motion;
}

RewardBreakdown compute_reward(const StepSnapshot& s, const RewardConfig& c,
                               const SuccessThresholds& t) {
  RewardBreakdown out;
  out.success = check_success(s, t);
  out.sparse_success = out.success ? c.c1 : 0.0;
  out.dense_distance = c.c2 / (std::abs(s.orientation_error) + c.eps_theta);

  double fingertip_sq = 0.0;
  for (const auto& p : s.fingertip_positions) {
    fingertip_sq += (p - s.object_position).squaredNorm();
  }
  out.fingertip_distance = c.c3 * fingertip_sq;

  out.energy =
      c.c4 * s.joint_velocities.cwiseAbs().dot(s.joint_torques.cwiseAbs());

  out.pushed_away = s.object_position.norm() > c.p_bar;
  out.push_away = out.pushed_away ? c.c5 : 0.0;

  if (c.mode == TaskMode::kAir) {
    out.table_contact = s.object_table_contact ? c.c6 : 0.0;
    int high = 0;
    for (const auto& p : s.fingertip_positions) {
      if (p.z() > c.p_bar_z) ++high;
    }
    out.high_fingertip = c.c7 * high;
  }

  out.total = out.sparse_success + out.dense_distance + out.fingertip_distance +
              out.energy + out.push_away + out.table_contact +
              out.high_fingertip;
  return out;
}

bool should_stop(double predicted_distance, const Eigen::VectorXd& action,
                 const SuccessThresholds& thresholds) {
  if (predicted_distance < 0.0) {
    throw std::invalid_argument("should_stop: negative predicted distance");
  }
  return predicted_distance < thresholds.theta_bar &&
         action.norm() < thresholds.action_bar;
}

}  // namespace reorient::reward
