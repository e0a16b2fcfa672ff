// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "reorient/cloud.hpp"
#include "reorient/kinematics.hpp"
#include "reorient/reward.hpp"
#include "reorient/rng.hpp"
#include "reorient/so3.hpp"

namespace reorient::env {

using Vec3 = Eigen::Vector3d;
using VecXd = Eigen::VectorXd;

// Per-episode physical parameters searched by sysid and randomized per the
// published ranges.
struct DynamicsParams {
  VecXd stiffness;       // N*m/rad, per joint
  VecXd damping;         // N*m*s/rad, per joint
  VecXd velocity_limit;  // rad/s, per joint
  double link_mass_scale = 1.0;
  double object_mass = 0.1;      // kg
  double friction_robot = 0.92;  // robot/object friction
  double friction_table = 0.5;
  double restitution = 0.2;
  double object_size_scale = 1.0;

  void validate() const;  // all strictly positive (restitution may be 0)

  static DynamicsParams nominal(int joints);
};

struct DynamicsRanges {
  // Multiplicative scales.
  double stiffness_lo = 0.8, stiffness_hi = 1.2;
  double damping_lo = 0.8, damping_hi = 1.2;
  double link_mass_lo = 0.8, link_mass_hi = 1.2;
  // Absolute draws.
  double friction_robot_lo = 0.24, friction_robot_hi = 1.6;
  double friction_table_lo = 0.05, friction_table_hi = 1.0;
  double restitution_lo = 0.0, restitution_hi = 1.0;
  double object_size_lo = 0.95, object_size_hi = 1.05;
  double object_mass_lo = 0.009, object_mass_hi = 0.324;  // kg

  void validate() const;
};

DynamicsParams sample_dynamics(const DynamicsParams& nominal,
                               const DynamicsRanges& ranges, Rng& rng);

enum class TaskMode { kTable, kAir };

struct EpisodeConfig {
  int horizon = 180;                  // steps; 15 s at 12 Hz
  double control_period = 1.0 / 12.0; // s
  TaskMode mode = TaskMode::kTable;
  int fingers = 4;
  reward::SuccessThresholds thresholds;

  void validate() const;  // horizon > 0, fingers in {3, 4}
};

struct FingertipState {
  Vec3 position = Vec3::Zero();
  so3::UnitQuaternion orientation;
  Vec3 linear_velocity = Vec3::Zero();
  Vec3 angular_velocity = Vec3::Zero();
};

struct EnvState {
  so3::UnitQuaternion object_orientation;
  Vec3 object_position = Vec3::Zero();
  Vec3 object_linear_velocity = Vec3::Zero();
  Vec3 object_angular_velocity = Vec3::Zero();
  VecXd joint_positions;
  VecXd joint_velocities;
  VecXd joint_torques;
  std::vector<FingertipState> fingertips;
  so3::UnitQuaternion goal_orientation;
  int step_count = 0;
  bool table_contact = false;
  std::vector<bool> finger_contact;
  // Pending external force on the object, consumed by the next integration.
  Vec3 pending_force = Vec3::Zero();

  double orientation_error() const {
    return so3::rotation_distance(object_orientation, goal_orientation);
  }
};

// With probability `probability`, queues a force of magnitude
// coefficient * object_mass in a uniformly random direction.
bool apply_disturbance(EnvState& state, Rng& rng, double object_mass,
                       double probability = 0.2, double coefficient = 15.0);

// Teacher observation, length 19G+21: q, qdot, fingertip poses, fingertip
// velocities, object pose, object velocity, goal quaternion, relative
// rotation quaternion.
VecXd teacher_observation(const EnvState& state, int fingers);
int teacher_observation_size(int fingers);

struct NoiseConfig {
  bool observation_noise = false;
  double observation_noise_mean = -0.002;
  double observation_noise_std = 0.002;
  bool action_noise = false;
  double action_noise_std = 0.05;
};

struct DisturbanceConfig {
  bool enabled = false;
  double probability = 0.2;
  double coefficient = 15.0;  // c_d
};

struct EnvConfig {
  EpisodeConfig episode;
  reward::RewardConfig reward;
  NoiseConfig noise;
  DisturbanceConfig disturbance;
  bool randomize_dynamics = true;
  DynamicsRanges ranges;
  std::string object = "lblock";
  int object_cloud_points = 500;  // per CAD model
  int points_per_link = 500;
  // Initial object position box (uniform), centered under the palm.
  Vec3 init_center = Vec3(0.0, 0.0, 0.09);
  Vec3 init_half_extent = Vec3(0.02, 0.02, 0.01);
  Vec3 goal_display_offset = Vec3(0.0, 0.0, 0.3);
  // DirectRotation: commanded rate = clamp(gain * mix(action)).
  double direct_rate_gain = 10.0;
  double direct_max_rate = 2.0;  // rad/s
  double action_limit = 0.5;     // rad, per joint delta
  // SurrogateHand contact model.
  double contact_radius = 0.01;  // m
  int drop_window = 6;           // consecutive steps below 2 contacts
  int physics_substeps = 4;

  void validate() const;
};

struct StepResult {
  VecXd observation;  // teacher observation of the new state
  double reward = 0.0;
  reward::RewardBreakdown breakdown;
  bool done = false;
  enum class Termination { kNone, kSuccess, kHorizon, kPushedAway, kDropped };
  Termination termination = Termination::kNone;
};

// A named object from the built-in library (procedural meshes).
struct ObjectModel {
  std::string name;
  int category = 0;
  cloud::TriangleMesh mesh;
  cloud::PointSet local_cloud;
  double bounding_radius = 0.0;
  std::optional<so3::SymmetryGroup> symmetry;
};

ObjectModel make_object(const std::string& name, int cloud_points, Rng& rng);
std::vector<std::string> object_library_names();

class Environment {
 public:
  Environment(EnvConfig config, std::shared_ptr<const cloud::KinematicChain> chain,
              std::shared_ptr<const ObjectModel> object);
  virtual ~Environment() = default;

  // Samples a fresh episode; returns the first teacher observation.
  VecXd reset(Rng& rng);
  // Advances one control period with the smoothed action. Throws
  // std::logic_error when the episode is already done.
  StepResult step(const VecXd& smoothed_action);

  const EnvState& state() const { return state_; }
  const EnvConfig& config() const { return config_; }
  const DynamicsParams& dynamics() const { return dynamics_; }
  const cloud::KinematicChain& chain() const { return *chain_; }
  const ObjectModel& object() const { return *object_; }
  int action_size() const { return 3 * config_.episode.fingers; }
  bool done() const { return done_; }

  // The policy action associated with the smoothed command, used by the
  // success criterion; callers set it before step() when they track raw
  // actions separately (defaults to the smoothed action).
  void set_raw_action(const VecXd& action) { raw_action_ = action; }

 protected:
  virtual void integrate(const VecXd& smoothed_action) = 0;
  virtual void on_reset() {}

  void update_fingertips();
  reward::StepSnapshot snapshot(const VecXd& action) const;

  EnvConfig config_;
  std::shared_ptr<const cloud::KinematicChain> chain_;
  std::shared_ptr<const ObjectModel> object_;
  EnvState state_;
  DynamicsParams dynamics_;
  Rng episode_rng_;
  bool done_ = true;
  std::optional<VecXd> raw_action_;
  int low_contact_steps_ = 0;
};

// Actions command the object's angular velocity through a fixed mixing
// matrix; closed-form optimal behavior exists, which makes this environment
// the oracle for the learning stack.
class DirectRotationEnv : public Environment {
 public:
  using Environment::Environment;

  // Mixing matrix: mean of the per-finger 3-blocks.
  static Eigen::MatrixXd mixing_matrix(int fingers);
  // Geodesic expert: the action that rotates the object toward the goal at
  // the highest admissible rate, zero near the goal.
  VecXd expert_action() const;

 protected:
  void integrate(const VecXd& smoothed_action) override;
};

// Fingertips push the object around via a viscous contact patch on its
// bounding sphere; gravity pulls it when unsupported.
class SurrogateHandEnv : public Environment {
 public:
  using Environment::Environment;

 protected:
  void integrate(const VecXd& smoothed_action) override;
  void on_reset() override;
};

std::unique_ptr<Environment> make_environment(
    const std::string& kind, const EnvConfig& config,
    std::shared_ptr<const cloud::KinematicChain> chain,
    std::shared_ptr<const ObjectModel> object);

// Observation synthesis for the student policy.
enum class StudentObsMode { kSynthetic, kRendered };

struct StudentObsConfig {
  StudentObsMode mode = StudentObsMode::kSynthetic;
  double voxel_resolution = 0.005;  // m
  int rendered_points = 6000;
  bool augment = false;  // training-time noise/dropout
  cloud::AugmentConfig augment_config;
  int image_width = 160;
  int image_height = 120;
  cloud::CameraModel camera;  // defaults set by default_student_camera()
};

cloud::CameraModel default_student_camera(int width, int height);

cloud::PointSet student_observation(const Environment& env,
                                    const StudentObsConfig& config, Rng& rng);

// Scene and goal clouds kept apart for the separate-goal-encoder variant;
// augmentation applies to the scene half only.
struct StudentObsParts {
  cloud::PointSet scene;
  cloud::PointSet goal;
};
StudentObsParts student_observation_parts(const Environment& env,
                                          const StudentObsConfig& config,
                                          Rng& rng);

}  // namespace reorient::env
