// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "reorient/env.hpp"
#include "reorient/io.hpp"
#include "reorient/policy.hpp"

namespace reorient::learn {

using nn::MatX;
using nn::VecX;
using MatXf = MatX<float>;
using VecXf = VecX<float>;

// ---------------------------------------------------------------------------
// Generalized advantage estimation.

struct PpoConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_range = 0.1;
  int epochs = 12;
  int rollout_steps = 8;
  int env_count = 64;        // desk-scale default; the paper trains 32000
  int batch_size = 512;
  double actor_lr = 3e-4;
  double critic_lr = 1e-3;
  double entropy_coef = 0.0;
  bool normalize_advantages = true;
  int updates = 500;

  void validate() const;
};

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// `values` carries one bootstrap entry past the last reward; dones mark
// episode ends (no bootstrap across them).
GaeResult compute_gae(const std::vector<double>& rewards,
                      const std::vector<double>& values,
                      const std::vector<bool>& dones, double gamma,
                      double lambda);

// ---------------------------------------------------------------------------
// PPO on the teacher policy.

struct RolloutBatch {
  MatXf observations;  // obs x N
  MatXf prev_actions;  // act x N
  MatXf actions;       // act x N
  VecX<double> log_probs;
  VecX<double> advantages;
  VecX<double> returns;
  // Rollout bookkeeping.
  int episodes_finished = 0;
  int successes = 0;
  double mean_reward = 0.0;
};

struct PpoStats {
  double actor_loss = 0.0;
  double value_loss = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  double entropy = 0.0;
};

// Clipped-surrogate actor update plus value regression over the configured
// epochs. Throws on non-finite losses.
PpoStats ppo_update(policy::TeacherPolicy& teacher, const RolloutBatch& batch,
                    const PpoConfig& config, nn::AdamT<float>& actor_adam,
                    nn::AdamT<float>& critic_adam, Rng& rng);

class PpoTrainer {
 public:
  PpoTrainer(policy::TeacherPolicy* teacher, PpoConfig config,
             std::vector<std::unique_ptr<env::Environment>> envs,
             std::uint64_t seed);

  RolloutBatch collect_rollout();
  PpoStats update(const RolloutBatch& batch);

  // Greedy (mean-action) evaluation; returns the success rate.
  double evaluate(int episodes, std::uint64_t seed);

  policy::TeacherPolicy& teacher() { return *teacher_; }
  const PpoConfig& config() const { return config_; }
  env::Environment& env(int i) { return *envs_[i]; }

  void save_state(const std::string& path) const;
  void load_state(const std::string& path);

 private:
  struct EnvSlot {
    VecXf observation;
    VecXf prev_action;
    policy::ActionSmoother smoother;
    bool needs_reset = true;
  };

  void reset_slot(EnvSlot& slot, env::Environment& env);

  policy::TeacherPolicy* teacher_;
  PpoConfig config_;
  std::vector<std::unique_ptr<env::Environment>> envs_;
  std::vector<EnvSlot> slots_;
  nn::AdamT<float> actor_adam_;
  nn::AdamT<float> critic_adam_;
  Rng rng_;
};

// ---------------------------------------------------------------------------
// DAGGER distillation of the student from a teacher action source.

// Teacher action for the current state of an environment; `prev_action` is
// the action stream actually executed (the student's when it drives).
using TeacherFn =
    std::function<Eigen::VectorXd(const env::Environment&, const Eigen::VectorXd&)>;

// Wraps a trained teacher policy as a TeacherFn (mean action).
TeacherFn teacher_policy_fn(std::shared_ptr<policy::TeacherPolicy> teacher);
// The DirectRotation geodesic expert.
TeacherFn geodesic_expert_fn();

struct DaggerConfig {
  int env_count = 16;
  int rollout_steps = 80;  // per environment per iteration
  int train_steps = 40;    // minibatch updates per iteration
  int window = 6;          // BPTT window
  int batch_windows = 16;
  double learning_rate = 3e-4;
  double distance_loss_weight = 1.0;
  env::StudentObsConfig observation;

  void validate() const;
};

// Storage form of an occupied cell; grids at trainable resolutions stay well
// inside the int16 range.
struct PackedCell {
  std::int16_t x = 0, y = 0, z = 0;
};
std::vector<PackedCell> pack_cells(const std::vector<cloud::VoxelKey>& cells);

struct DaggerStepRecord {
  std::vector<PackedCell> cells;       // encoder-resolution cells
  std::vector<PackedCell> goal_cells;  // separate-goal-trunk mode only
  VecXf prev_action;
  VecXf teacher_action;
  VecXf hidden;  // recurrent state entering this step
  float true_distance = 0.0f;
};

struct DaggerEpisode {
  std::vector<DaggerStepRecord> steps;
};

// Append-only aggregate dataset.
class DaggerBuffer {
 public:
  void append(DaggerEpisode episode);
  const std::vector<DaggerEpisode>& episodes() const { return episodes_; }
  std::size_t total_steps() const { return total_steps_; }

 private:
  std::vector<DaggerEpisode> episodes_;
  std::size_t total_steps_ = 0;
};

struct DaggerStats {
  double action_loss = 0.0;
  double distance_loss = 0.0;
  int new_steps = 0;
  std::size_t buffer_steps = 0;
};

class DaggerTrainer {
 public:
  DaggerTrainer(policy::StudentPolicy* student, TeacherFn teacher,
                DaggerConfig config,
                std::vector<std::unique_ptr<env::Environment>> envs,
                std::uint64_t seed);

  // One DAGGER iteration: student-driven rollout, teacher labels appended,
  // regression on the aggregate buffer.
  DaggerStats iterate();

  // Regression only (used by tests on a frozen buffer).
  DaggerStats train_on_buffer(int steps);

  DaggerBuffer& buffer() { return buffer_; }
  const DaggerConfig& config() const { return config_; }

  // Greedy evaluation of the student; returns the success rate.
  double evaluate(int episodes, std::uint64_t seed);

 private:
  void rollout();

  policy::StudentPolicy* student_;
  TeacherFn teacher_;
  DaggerConfig config_;
  std::vector<std::unique_ptr<env::Environment>> envs_;
  DaggerBuffer buffer_;
  nn::AdamT<float> adam_;
  Rng rng_;
};

// Occupancy inputs for one recorded step.
MatXf occupancy_from_cells(const std::vector<cloud::VoxelKey>& cells,
                           const policy::VoxelBounds& bounds);
MatXf occupancy_from_cells(const std::vector<PackedCell>& cells,
                           const policy::VoxelBounds& bounds);

// The student's observation reduced to encoder cells (scene merged with the
// goal, or split when the student uses a separate goal trunk).
struct StudentCells {
  std::vector<cloud::VoxelKey> scene;
  std::vector<cloud::VoxelKey> goal;
};
StudentCells observe_cells(const env::Environment& env,
                           const env::StudentObsConfig& obs_config,
                           const policy::StudentConfig& student_config,
                           Rng& rng);

// ---------------------------------------------------------------------------
// Stage 0: supervised pretraining of the voxel encoder.

struct Stage0Config {
  int categories = 4;
  int feature = 128;        // encoder output
  bool split_embedding = false;
  bool predict_category = true;
  bool predict_distance = true;
  bool predict_joints = true;
  int batch_size = 64;
  double learning_rate = 3e-4;
  policy::VoxelBounds bounds;
  std::vector<int> conv_channels = {4, 8, 16};
  env::StudentObsConfig observation;
  Eigen::Vector3d goal_display_offset = Eigen::Vector3d(0.0, 0.0, 0.22);

  void validate() const;
};

struct Stage0Sample {
  std::vector<PackedCell> cells;
  int category = 0;
  float distance = 0.0f;  // |delta theta| in [0, pi]
  VecXf joint_positions;
};

Stage0Sample stage0_generate_scene(
    Rng& rng, const cloud::KinematicChain& chain,
    const std::vector<std::shared_ptr<const env::ObjectModel>>& library,
    const Stage0Config& config);

struct Stage0Losses {
  double category = 0.0;
  double distance = 0.0;
  double joints = 0.0;
  double total = 0.0;
};

class Stage0Trainer {
 public:
  Stage0Trainer(const Stage0Config& config, int joint_count,
                std::uint64_t seed);

  Stage0Losses train_epoch(const std::vector<Stage0Sample>& dataset);
  Stage0Losses evaluate(const std::vector<Stage0Sample>& dataset);
  // Mean absolute error of the distance prediction.
  double distance_mae(const std::vector<Stage0Sample>& dataset);

  policy::VoxelEncoder& encoder() { return encoder_; }
  nn::LinearT<float>& category_head() { return category_head_; }
  nn::LinearT<float>& distance_head() { return distance_head_; }
  nn::LinearT<float>& joints_head() { return joints_head_; }
  const Stage0Config& config() const { return config_; }

  void save(const std::string& path) const;

 private:
  Stage0Losses run_batch(const std::vector<const Stage0Sample*>& batch,
                         bool train);

  Stage0Config config_;
  policy::VoxelEncoder encoder_;
  nn::LinearT<float> category_head_;
  nn::LinearT<float> distance_head_;
  nn::LinearT<float> joints_head_;
  nn::SoftplusT<float> softplus_;
  nn::AdamT<float> adam_;
  Rng rng_;
};

// Copies pretrained encoder weights into a student whose encoder has the
// same architecture.
void initialize_student_encoder(policy::StudentPolicy& student,
                                policy::VoxelEncoder& pretrained);

}  // namespace reorient::learn
