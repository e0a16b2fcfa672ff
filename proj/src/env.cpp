// SPDX-License-Identifier: Apache-2.0
#include "reorient/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace reorient::env {

namespace {

constexpr double kGravity = 9.81;
constexpr double kJointInertia = 5e-3;   // kg*m^2, nominal per joint
constexpr double kContactGain = 2.0;     // N*s/m, viscous patch
constexpr double kNormalStiffness = 40.0;  // N/m, bounding-sphere spring
constexpr double kAngularDrag = 2.0;     // 1/s
constexpr double kTableContactBand = 1e-3;  // m

so3::UnitQuaternion integrate_orientation(const so3::UnitQuaternion& q,
                                          const Vec3& omega, double dt) {
  const double angle = omega.norm() * dt;
  if (angle < 1e-14) return q;
  return (so3::UnitQuaternion::from_axis_angle(omega, angle) * q).normalized();
}

}  // namespace

void DynamicsParams::validate() const {
  const auto positive = [](const VecXd& v) {
    return v.size() > 0 && (v.array() > 0.0).all();
  };
  if (!positive(stiffness) || !positive(damping) || !positive(velocity_limit)) {
    throw std::invalid_argument(
        "DynamicsParams: per-joint parameters must be positive");
  }
  if (!(link_mass_scale > 0.0) || !(object_mass > 0.0) ||
      !(friction_robot > 0.0) || !(friction_table > 0.0) ||
      restitution < 0.0 || !(object_size_scale > 0.0)) {
    throw std::invalid_argument("DynamicsParams: invalid scalar parameter");
  }
}

DynamicsParams DynamicsParams::nominal(int joints) {
  DynamicsParams p;
  p.stiffness = VecXd::Constant(joints, 6.0);
  p.damping = VecXd::Constant(joints, 0.12);
  p.velocity_limit = VecXd::Constant(joints, 3.0);
  return p;
}

void DynamicsRanges::validate() const {
  const auto ordered = [](double lo, double hi) { return lo <= hi; };
  if (!ordered(stiffness_lo, stiffness_hi) || !ordered(damping_lo, damping_hi) ||
      !ordered(link_mass_lo, link_mass_hi) ||
      !ordered(friction_robot_lo, friction_robot_hi) ||
      !ordered(friction_table_lo, friction_table_hi) ||
      !ordered(restitution_lo, restitution_hi) ||
      !ordered(object_size_lo, object_size_hi) ||
      !ordered(object_mass_lo, object_mass_hi)) {
    throw std::invalid_argument("DynamicsRanges: lo must not exceed hi");
  }
}

DynamicsParams sample_dynamics(const DynamicsParams& nominal,
                               const DynamicsRanges& r, Rng& rng) {
  r.validate();
  DynamicsParams p = nominal;
  for (Eigen::Index i = 0; i < p.stiffness.size(); ++i) {
    p.stiffness[i] *= rng.uniform(r.stiffness_lo, r.stiffness_hi);
    p.damping[i] *= rng.uniform(r.damping_lo, r.damping_hi);
  }
  p.link_mass_scale = nominal.link_mass_scale * rng.uniform(r.link_mass_lo, r.link_mass_hi);
  p.friction_robot = rng.uniform(r.friction_robot_lo, r.friction_robot_hi);
  p.friction_table = rng.uniform(r.friction_table_lo, r.friction_table_hi);
  p.restitution = rng.uniform(r.restitution_lo, r.restitution_hi);
  p.object_size_scale = rng.uniform(r.object_size_lo, r.object_size_hi);
  p.object_mass = rng.uniform(r.object_mass_lo, r.object_mass_hi);
  p.validate();
  return p;
}

void EpisodeConfig::validate() const {
  if (horizon <= 0) throw std::invalid_argument("EpisodeConfig: horizon must be positive");
  if (control_period <= 0.0) {
    throw std::invalid_argument("EpisodeConfig: control period must be positive");
  }
  if (fingers != 3 && fingers != 4) {
    throw std::invalid_argument("EpisodeConfig: fingers must be 3 or 4");
  }
  thresholds.validate();
}

void EnvConfig::validate() const {
  episode.validate();
  reward.validate();
  ranges.validate();
  if (contact_radius <= 0.0) {
    throw std::invalid_argument("EnvConfig: contact radius must be positive");
  }
  if (drop_window <= 0 || physics_substeps <= 0) {
    throw std::invalid_argument("EnvConfig: counters must be positive");
  }
}

bool apply_disturbance(EnvState& state, Rng& rng, double object_mass,
                       double probability, double coefficient) {
  if (!(object_mass > 0.0)) {
    throw std::invalid_argument("apply_disturbance: unknown object mass");
  }
  if (!rng.bernoulli(probability)) return false;
  Vec3 dir;
  double n = 0.0;
  do {
    dir = Vec3(rng.normal(), rng.normal(), rng.normal());
    n = dir.norm();
  } while (n < 1e-12);
  state.pending_force += (coefficient * object_mass / n) * dir;
  return true;
}

int teacher_observation_size(int fingers) { return 19 * fingers + 21; }

VecXd teacher_observation(const EnvState& state, int fingers) {
  const int g = fingers;
  VecXd obs(teacher_observation_size(g));
  int at = 0;
  const auto put_vec3 = [&](const Vec3& v) {
    obs.segment<3>(at) = v;
    at += 3;
  };
  const auto put_quat = [&](const so3::UnitQuaternion& q) {
    obs[at++] = q.w;
    obs[at++] = q.x;
    obs[at++] = q.y;
    obs[at++] = q.z;
  };
  obs.segment(at, 3 * g) = state.joint_positions;
  at += 3 * g;
  obs.segment(at, 3 * g) = state.joint_velocities;
  at += 3 * g;
  for (int f = 0; f < g; ++f) {
    put_vec3(state.fingertips[f].position);
    put_quat(state.fingertips[f].orientation);
  }
  for (int f = 0; f < g; ++f) {
    put_vec3(state.fingertips[f].linear_velocity);
    put_vec3(state.fingertips[f].angular_velocity);
  }
  put_vec3(state.object_position);
  put_quat(state.object_orientation);
  put_vec3(state.object_linear_velocity);
  put_vec3(state.object_angular_velocity);
  put_quat(state.goal_orientation);
  put_quat(so3::relative_rotation(state.object_orientation,
                                  state.goal_orientation));
  return obs;
}

ObjectModel make_object(const std::string& name, int cloud_points, Rng& rng) {
  ObjectModel model;
  model.name = name;
  const auto names = object_library_names();
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) {
    // Paths fall through to the mesh loaders.
    model.mesh = cloud::load_mesh(name);
    model.category = -1;
  } else {
    model.category = int(it - names.begin());
    if (name == "lblock") model.mesh = cloud::make_lblock_mesh();
    if (name == "tblock") model.mesh = cloud::make_tblock_mesh();
    if (name == "sblock") model.mesh = cloud::make_sblock_mesh();
    if (name == "wedge") model.mesh = cloud::make_wedge_mesh({0.12, 0.08, 0.06});
    if (name == "box") model.mesh = cloud::make_box_mesh({0.12, 0.07, 0.05});
    if (name == "cuboid") {
      model.mesh = cloud::make_box_mesh({0.05, 0.05, 0.14});
      model.symmetry = so3::SymmetryGroup::cuboid_order8();
    }
    if (name == "cube") {
      model.mesh = cloud::make_box_mesh({0.1, 0.1, 0.1});
      model.symmetry = so3::SymmetryGroup::cube_order24();
    }
  }
  model.mesh.scale_longest_side_into(0.095, 0.165);
  model.local_cloud = cloud::sample_mesh_points(model.mesh, cloud_points, rng);
  for (const auto& v : model.mesh.vertices) {
    model.bounding_radius = std::max(model.bounding_radius, v.norm());
  }
  return model;
}

std::vector<std::string> object_library_names() {
  return {"lblock", "tblock", "sblock", "wedge", "box", "cuboid", "cube"};
}

Environment::Environment(EnvConfig config,
                         std::shared_ptr<const cloud::KinematicChain> chain,
                         std::shared_ptr<const ObjectModel> object)
    : config_(std::move(config)),
      chain_(std::move(chain)),
      object_(std::move(object)) {
  config_.validate();
  if (int(chain_->joint_count()) != 3 * config_.episode.fingers) {
    throw std::invalid_argument(
        "Environment: chain joint count must equal 3G");
  }
}

VecXd Environment::reset(Rng& rng) {
  const int joints = 3 * config_.episode.fingers;
  dynamics_ = DynamicsParams::nominal(joints);
  if (config_.randomize_dynamics) {
    dynamics_ = sample_dynamics(dynamics_, config_.ranges, rng);
  }

  state_ = EnvState{};
  const auto home = chain_->home_pose();
  state_.joint_positions =
      Eigen::Map<const VecXd>(home.data(), Eigen::Index(home.size()));
  state_.joint_velocities = VecXd::Zero(joints);
  state_.joint_torques = VecXd::Zero(joints);
  state_.object_orientation = so3::sample_uniform_rotation(rng);
  state_.goal_orientation = so3::sample_uniform_rotation(rng);
  for (int i = 0; i < 3; ++i) {
    state_.object_position[i] =
        config_.init_center[i] +
        rng.uniform(-config_.init_half_extent[i], config_.init_half_extent[i]);
  }
  if (config_.episode.mode == TaskMode::kTable) {
    // Rest the object on the table plane.
    state_.object_position.z() =
        object_->bounding_radius * dynamics_.object_size_scale;
  }
  state_.finger_contact.assign(config_.episode.fingers, false);
  episode_rng_ = rng.spawn();
  done_ = false;
  low_contact_steps_ = 0;
  raw_action_.reset();
  state_.fingertips.assign(config_.episode.fingers, FingertipState{});
  update_fingertips();
  // First frame has no history; velocities stay zero.
  for (auto& tip : state_.fingertips) {
    tip.linear_velocity.setZero();
    tip.angular_velocity.setZero();
  }
  on_reset();

  VecXd obs = teacher_observation(state_, config_.episode.fingers);
  if (config_.noise.observation_noise) {
    for (Eigen::Index i = 0; i < obs.size(); ++i) {
      obs[i] += episode_rng_.normal(config_.noise.observation_noise_mean,
                                    config_.noise.observation_noise_std);
    }
  }
  return obs;
}

void Environment::update_fingertips() {
  const auto& links = chain_->links();
  std::vector<double> q(state_.joint_positions.data(),
                        state_.joint_positions.data() + state_.joint_positions.size());
  const auto fk = cloud::forward_kinematics(*chain_, q);
  const double dt = config_.episode.control_period;
  for (int f = 0; f < config_.episode.fingers; ++f) {
    const std::size_t tip_index = std::size_t(3 * f + 2);
    (void)links;
    const auto& pose = fk.poses[tip_index];
    FingertipState next;
    next.position = pose.rotation * cloud::fingertip_offset() + pose.position;
    next.orientation = so3::UnitQuaternion::from_matrix(pose.rotation);
    const FingertipState& prev = state_.fingertips[f];
    next.linear_velocity = (next.position - prev.position) / dt;
    const auto delta =
        so3::relative_rotation(prev.orientation, next.orientation);
    next.angular_velocity = delta.axis() * (delta.angle() / dt);
    state_.fingertips[f] = next;
  }
}

reward::StepSnapshot Environment::snapshot(const VecXd& action) const {
  reward::StepSnapshot s;
  s.orientation_error = state_.orientation_error();
  s.joint_velocities = state_.joint_velocities;
  s.joint_torques = state_.joint_torques;
  s.action = action;
  s.fingertip_positions.reserve(state_.fingertips.size());
  for (const auto& tip : state_.fingertips) {
    s.fingertip_positions.push_back(tip.position);
  }
  s.object_position = state_.object_position;
  s.object_linear_velocity = state_.object_linear_velocity;
  s.object_angular_velocity = state_.object_angular_velocity;
  s.object_table_contact = state_.table_contact;
  return s;
}

StepResult Environment::step(const VecXd& smoothed_action) {
  if (done_) {
    throw std::logic_error("Environment::step called on a finished episode");
  }
  if (smoothed_action.size() != action_size()) {
    throw std::invalid_argument("Environment::step: action dimension mismatch");
  }
  VecXd command = smoothed_action;
  if (config_.noise.action_noise) {
    for (Eigen::Index i = 0; i < command.size(); ++i) {
      command[i] += episode_rng_.normal(0.0, config_.noise.action_noise_std);
    }
  }
  for (Eigen::Index i = 0; i < command.size(); ++i) {
    command[i] = std::clamp(command[i], -config_.action_limit, config_.action_limit);
  }
  if (config_.disturbance.enabled) {
    apply_disturbance(state_, episode_rng_, dynamics_.object_mass,
                      config_.disturbance.probability,
                      config_.disturbance.coefficient);
  }

  integrate(command);
  state_.pending_force.setZero();
  ++state_.step_count;

  StepResult result;
  const VecXd& success_action = raw_action_ ? *raw_action_ : smoothed_action;
  result.breakdown =
      reward::compute_reward(snapshot(success_action), config_.reward,
                             config_.episode.thresholds);
  result.reward = result.breakdown.total;
  raw_action_.reset();

  int contacts = 0;
  for (bool c : state_.finger_contact) contacts += c ? 1 : 0;
  if (config_.episode.mode == TaskMode::kAir && contacts < 2) {
    ++low_contact_steps_;
  } else {
    low_contact_steps_ = 0;
  }

  if (result.breakdown.success) {
    result.termination = StepResult::Termination::kSuccess;
  } else if (result.breakdown.pushed_away) {
    result.termination = StepResult::Termination::kPushedAway;
  } else if (config_.episode.mode == TaskMode::kAir &&
             low_contact_steps_ >= config_.drop_window) {
    result.termination = StepResult::Termination::kDropped;
  } else if (state_.step_count >= config_.episode.horizon) {
    result.termination = StepResult::Termination::kHorizon;
  }
  result.done = result.termination != StepResult::Termination::kNone;
  done_ = result.done;

  result.observation = teacher_observation(state_, config_.episode.fingers);
  if (config_.noise.observation_noise) {
    for (Eigen::Index i = 0; i < result.observation.size(); ++i) {
      result.observation[i] +=
          episode_rng_.normal(config_.noise.observation_noise_mean,
                              config_.noise.observation_noise_std);
    }
  }
  return result;
}

Eigen::MatrixXd DirectRotationEnv::mixing_matrix(int fingers) {
  Eigen::MatrixXd mix = Eigen::MatrixXd::Zero(3, 3 * fingers);
  for (int f = 0; f < fingers; ++f) {
    mix.block<3, 3>(0, 3 * f) =
        Eigen::Matrix3d::Identity() / double(fingers);
  }
  return mix;
}

void DirectRotationEnv::integrate(const VecXd& smoothed_action) {
  const double dt = config_.episode.control_period;

  // Unbounded wheel joints: q is bookkeeping for the observation, and every
  // commanded delta is both applied and paid for in the energy term.
  // Velocity and torque are reported per control step so the motion and
  // energy terms stay on the same scale as the shaping terms.
  state_.joint_velocities = smoothed_action;
  state_.joint_positions += smoothed_action;
  state_.joint_torques = dynamics_.damping.cwiseProduct(smoothed_action);

  Vec3 omega = config_.direct_rate_gain *
               (mixing_matrix(config_.episode.fingers) * smoothed_action);
  const double rate = omega.norm();
  if (rate > config_.direct_max_rate) {
    omega *= config_.direct_max_rate / rate;
  }
  state_.object_angular_velocity = omega;
  state_.object_orientation =
      integrate_orientation(state_.object_orientation, omega, dt);
  state_.object_linear_velocity.setZero();
  state_.table_contact = false;
  std::fill(state_.finger_contact.begin(), state_.finger_contact.end(), false);
  update_fingertips();
}

VecXd DirectRotationEnv::expert_action() const {
  const int joints = 3 * config_.episode.fingers;
  const auto rel = so3::relative_rotation(state_.object_orientation,
                                          state_.goal_orientation);
  const double angle = rel.angle();
  VecXd action = VecXd::Zero(joints);
  if (angle < 0.5 * config_.episode.thresholds.theta_bar) return action;
  const double dt = config_.episode.control_period;
  const double rate = std::min(angle / dt, config_.direct_max_rate);
  const Vec3 block = rel.axis() * (rate / config_.direct_rate_gain);
  for (int f = 0; f < config_.episode.fingers; ++f) {
    action.segment<3>(3 * f) = block;
  }
  for (Eigen::Index i = 0; i < action.size(); ++i) {
    action[i] = std::clamp(action[i], -config_.action_limit, config_.action_limit);
  }
  return action;
}

void SurrogateHandEnv::on_reset() {
  // Start grasped: object between the fingertips at the workspace center.
}

void SurrogateHandEnv::integrate(const VecXd& smoothed_action) {
  const double dt = config_.episode.control_period;
  const int substeps = config_.physics_substeps;
  const double h = dt / substeps;
  const int joints = action_size();
  const auto& links = chain_->links();

  VecXd target = state_.joint_positions + smoothed_action;
  for (int i = 0; i < joints; ++i) {
    target[i] = std::clamp(target[i], links[i].lower, links[i].upper);
  }

  const double radius = object_->bounding_radius * dynamics_.object_size_scale;
  const double mass = dynamics_.object_mass;
  const double inertia = 0.4 * mass * radius * radius;

  std::vector<Vec3> prev_tip(state_.fingertips.size());
  for (std::size_t f = 0; f < state_.fingertips.size(); ++f) {
    prev_tip[f] = state_.fingertips[f].position;
  }

  for (int s = 0; s < substeps; ++s) {
    // Joint PD with velocity clamping; damping handled implicitly for
    // stability at any randomized gain.
    const double inertia_j = kJointInertia * dynamics_.link_mass_scale;
    state_.joint_velocities =
        (state_.joint_velocities +
         dynamics_.stiffness.cwiseProduct(target - state_.joint_positions) *
             (h / inertia_j))
            .cwiseQuotient(VecXd::Ones(joints) +
                           dynamics_.damping * (h / inertia_j));
    state_.joint_torques =
        dynamics_.stiffness.cwiseProduct(target - state_.joint_positions) -
        dynamics_.damping.cwiseProduct(state_.joint_velocities);
    for (int i = 0; i < joints; ++i) {
      state_.joint_velocities[i] =
          std::clamp(state_.joint_velocities[i], -dynamics_.velocity_limit[i],
                     dynamics_.velocity_limit[i]);
    }
    state_.joint_positions += state_.joint_velocities * h;
    for (int i = 0; i < joints; ++i) {
      if (state_.joint_positions[i] <= links[i].lower ||
          state_.joint_positions[i] >= links[i].upper) {
        state_.joint_positions[i] =
            std::clamp(state_.joint_positions[i], links[i].lower, links[i].upper);
        state_.joint_velocities[i] = 0.0;
      }
    }

    // Fingertip kinematics for this substep.
    std::vector<double> q(state_.joint_positions.data(),
                          state_.joint_positions.data() + joints);
    const auto fk = cloud::forward_kinematics(*chain_, q);
    std::vector<Vec3> tips(state_.fingertips.size());
    for (std::size_t f = 0; f < tips.size(); ++f) {
      const auto& pose = fk.poses[3 * f + 2];
      tips[f] = pose.rotation * cloud::fingertip_offset() + pose.position;
    }

    Vec3 force = state_.pending_force;
    force.z() -= kGravity * mass;
    Vec3 torque = Vec3::Zero();

    for (std::size_t f = 0; f < tips.size(); ++f) {
      const Vec3 to_tip = tips[f] - state_.object_position;
      const double dist = to_tip.norm();
      const bool contact = dist <= radius + config_.contact_radius;
      state_.finger_contact[f] = contact;
      if (!contact || dist < 1e-9) continue;
      const Vec3 normal = to_tip / dist;
      const Vec3 contact_point = state_.object_position + radius * normal;
      const Vec3 tip_velocity = (tips[f] - prev_tip[f]) / h;
      const Vec3 surface_velocity =
          state_.object_linear_velocity +
          state_.object_angular_velocity.cross(contact_point -
                                               state_.object_position);
      const Vec3 rel = tip_velocity - surface_velocity;
      const Vec3 tangential = rel - rel.dot(normal) * normal;
      const Vec3 drag = dynamics_.friction_robot * kContactGain * tangential;
      force += drag;
      torque += (contact_point - state_.object_position).cross(drag);
      if (dist < radius) {  // bounding-sphere spring keeps the object out
        force += kNormalStiffness * (radius - dist) * (-normal);
      }
    }
    prev_tip = tips;

    state_.object_linear_velocity += (force / mass) * h;
    state_.object_angular_velocity += (torque / inertia) * h;
    state_.object_angular_velocity *= std::max(0.0, 1.0 - kAngularDrag * h);
    state_.object_position += state_.object_linear_velocity * h;
    state_.object_orientation = integrate_orientation(
        state_.object_orientation, state_.object_angular_velocity, h);

    // Table plane at z = 0 (table mode only).
    state_.table_contact = false;
    if (config_.episode.mode == TaskMode::kTable) {
      const double bottom = state_.object_position.z() - radius;
      if (bottom <= 0.0) {
        state_.object_position.z() = radius;
        if (state_.object_linear_velocity.z() < 0.0) {
          double vz = -dynamics_.restitution * state_.object_linear_velocity.z();
          if (std::abs(vz) < 0.05) vz = 0.0;
          state_.object_linear_velocity.z() = vz;
        }
        const double slow = std::max(0.0, 1.0 - dynamics_.friction_table * 5.0 * h);
        state_.object_linear_velocity.x() *= slow;
        state_.object_linear_velocity.y() *= slow;
        state_.object_angular_velocity *= slow;
      }
      state_.table_contact =
          state_.object_position.z() - radius <= kTableContactBand;
    }
  }
  update_fingertips();
}

std::unique_ptr<Environment> make_environment(
    const std::string& kind, const EnvConfig& config,
    std::shared_ptr<const cloud::KinematicChain> chain,
    std::shared_ptr<const ObjectModel> object) {
  if (kind == "direct_rotation") {
    return std::make_unique<DirectRotationEnv>(config, std::move(chain),
                                               std::move(object));
  }
  if (kind == "surrogate_hand") {
    return std::make_unique<SurrogateHandEnv>(config, std::move(chain),
                                              std::move(object));
  }
  throw std::invalid_argument("make_environment: unknown kind " + kind);
}

cloud::CameraModel default_student_camera(int width, int height) {
  return cloud::CameraModel::look_at(Vec3(0.35, 0.0, 0.45), Vec3(0, 0, 0.08),
                                     Vec3::UnitZ(), width * 1.0, width * 1.0,
                                     width / 2.0, height / 2.0);
}

namespace {

// Scene cloud without the goal: link clouds plus the object, either purely
// synthetic or depth-rendered with a proprioceptive overlay.
cloud::PointSet scene_cloud_without_goal(const Environment& env,
                                         const StudentObsConfig& config,
                                         const cloud::PointSet& scaled_cloud,
                                         Rng& rng) {
  const auto& state = env.state();
  std::vector<double> q(state.joint_positions.data(),
                        state.joint_positions.data() +
                            state.joint_positions.size());
  const auto fk = cloud::forward_kinematics(env.chain(), q);

  cloud::PointSet scene;
  if (config.mode == StudentObsMode::kSynthetic) {
    for (std::size_t i = 0; i < env.chain().links().size(); ++i) {
      const auto& link = env.chain().links()[i];
      for (const auto& p : link.local_cloud.points) {
        scene.points.push_back(fk.poses[i].rotation * p + fk.poses[i].position);
      }
    }
    const Eigen::Matrix3d rot = state.object_orientation.to_matrix();
    for (const auto& p : scaled_cloud.points) {
      scene.points.push_back(rot * p + state.object_position);
    }
  } else {
    std::vector<cloud::PosedMesh> meshes;
    for (std::size_t i = 0; i < env.chain().links().size(); ++i) {
      meshes.push_back({env.chain().links()[i].shape, fk.poses[i].rotation,
                        fk.poses[i].position});
    }
    cloud::TriangleMesh scaled_mesh = env.object().mesh;
    const double scale = env.dynamics().object_size_scale;
    for (auto& v : scaled_mesh.vertices) v *= scale;
    meshes.push_back({scaled_mesh, state.object_orientation.to_matrix(),
                      state.object_position});
    const auto depth = cloud::render_depth(meshes, config.camera,
                                           config.image_width,
                                           config.image_height);
    scene = cloud::depth_to_cloud(depth, config.camera).points;
    scene = cloud::subsample(scene, std::size_t(config.rendered_points), rng);
    // Proprioceptive overlay from joint readings.
    for (std::size_t i = 0; i < env.chain().links().size(); ++i) {
      const auto& link = env.chain().links()[i];
      for (const auto& p : link.local_cloud.points) {
        scene.points.push_back(fk.poses[i].rotation * p + fk.poses[i].position);
      }
    }
  }
  return scene;
}

cloud::PointSet goal_cloud(const Environment& env,
                           const cloud::PointSet& scaled_cloud) {
  cloud::PointSet goal;
  const Eigen::Matrix3d rot = env.state().goal_orientation.to_matrix();
  goal.points.reserve(scaled_cloud.size());
  for (const auto& p : scaled_cloud.points) {
    goal.points.push_back(rot * p + env.config().goal_display_offset);
  }
  return goal;
}

cloud::PointSet object_cloud_scaled(const Environment& env) {
  cloud::PointSet scaled = env.object().local_cloud;
  const double scale = env.dynamics().object_size_scale;
  for (auto& p : scaled.points) p *= scale;
  return scaled;
}

}  // namespace

cloud::PointSet student_observation(const Environment& env,
                                    const StudentObsConfig& config, Rng& rng) {
  const auto scaled = object_cloud_scaled(env);
  cloud::PointSet merged = scene_cloud_without_goal(env, config, scaled, rng);
  merged.append(goal_cloud(env, scaled));
  if (config.augment) {
    merged = cloud::augment_cloud(merged, rng, config.augment_config);
  }
  return cloud::voxelize(merged, config.voxel_resolution).representative_points();
}

StudentObsParts student_observation_parts(const Environment& env,
                                          const StudentObsConfig& config,
                                          Rng& rng) {
  const auto scaled = object_cloud_scaled(env);
  StudentObsParts parts;
  parts.scene = scene_cloud_without_goal(env, config, scaled, rng);
  if (config.augment) {
    parts.scene = cloud::augment_cloud(parts.scene, rng, config.augment_config);
  }
  parts.scene = cloud::voxelize(parts.scene, config.voxel_resolution)
                    .representative_points();
  parts.goal = cloud::voxelize(goal_cloud(env, scaled), config.voxel_resolution)
                   .representative_points();
  return parts;
}

}  // namespace reorient::env
