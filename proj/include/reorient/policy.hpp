// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "reorient/cloud.hpp"
#include "reorient/nn.hpp"
#include "reorient/rng.hpp"

namespace reorient::policy {

using nn::MatX;
using nn::VecX;

// ---------------------------------------------------------------------------
// Action smoothing: a_bar = alpha * a + (1 - alpha) * a_bar_prev.

class ActionSmoother {
 public:
  explicit ActionSmoother(double alpha = 0.8) : alpha_(alpha) {
    if (alpha_ < 0.0 || alpha_ > 1.0) {
      throw std::invalid_argument("ActionSmoother: alpha must be in [0, 1]");
    }
  }

  void reset(int dim) { state_ = Eigen::VectorXd::Zero(dim); }

  Eigen::VectorXd smooth(const Eigen::VectorXd& action) {
    if (state_.size() == 0) state_ = Eigen::VectorXd::Zero(action.size());
    if (state_.size() != action.size()) {
      throw std::invalid_argument("ActionSmoother: dimension mismatch");
    }
    state_ = alpha_ * action + (1.0 - alpha_) * state_;
    return state_;
  }

  double alpha() const { return alpha_; }
  const Eigen::VectorXd& state() const { return state_; }

 private:
  double alpha_;
  Eigen::VectorXd state_;
};

// q_target = q + a_bar, clamped to the joint limits.
Eigen::VectorXd target_joints(const Eigen::VectorXd& q,
                              const Eigen::VectorXd& smoothed_action,
                              const Eigen::VectorXd& lower,
                              const Eigen::VectorXd& upper);

// ---------------------------------------------------------------------------
// Teacher: MLP actor with a state-independent log-std head, separate critic.

struct TeacherConfig {
  int observation = 97;  // 19G+21 for G=4
  int action = 12;       // 3G
  std::vector<int> hidden = {512, 256, 256};
  double log_std_init = -0.7;
  double log_std_min = -5.0;
  double log_std_max = 2.0;
  // Bound on the action mean via tanh squashing; 0 leaves the mean free.
  // Keeps the mean inside the actuator range so saturation cannot make the
  // likelihood gradient vanish.
  double mean_bound = 0.0;
};

template <typename S>
class TeacherPolicyT {
 public:
  TeacherPolicyT() = default;
  TeacherPolicyT(const TeacherConfig& config, Rng& rng) : config_(config) {
    std::vector<int> actor_sizes = {config.observation + config.action};
    actor_sizes.insert(actor_sizes.end(), config.hidden.begin(),
                       config.hidden.end());
    actor_sizes.push_back(config.action);
    actor_ = nn::MlpT<S>(actor_sizes, rng, "actor");
    std::vector<int> critic_sizes = actor_sizes;
    critic_sizes.back() = 1;
    critic_ = nn::MlpT<S>(critic_sizes, rng, "critic");
    log_std_ = MatX<S>::Constant(config.action, 1, S(config.log_std_init));
    log_std_grad_ = MatX<S>::Zero(config.action, 1);
  }

  const TeacherConfig& config() const { return config_; }

  // Inputs stacked as [observation; previous action], one column per sample.
  MatX<S> stack_input(const MatX<S>& obs, const MatX<S>& prev_action) const {
    if (obs.rows() != config_.observation ||
        prev_action.rows() != config_.action ||
        obs.cols() != prev_action.cols()) {
      throw std::invalid_argument("TeacherPolicy: input dimension mismatch");
    }
    MatX<S> x(obs.rows() + prev_action.rows(), obs.cols());
    x.topRows(obs.rows()) = obs;
    x.bottomRows(prev_action.rows()) = prev_action;
    return x;
  }

  MatX<S> actor_forward(const MatX<S>& x) {
    MatX<S> mean = actor_.forward(x);
    if (config_.mean_bound > 0.0) {
      const S bound = S(config_.mean_bound);
      mean = mean.unaryExpr(
          [bound](S v) { return bound * S(std::tanh(double(v) / double(bound))); });
      squashed_mean_ = mean;
    }
    return mean;
  }
  void actor_backward(const MatX<S>& dmean) {
    if (config_.mean_bound > 0.0) {
      const S bound = S(config_.mean_bound);
      const MatX<S> dpre =
          (dmean.array() *
           (S(1) - (squashed_mean_.array() / bound).square()))
              .matrix();
      actor_.backward(dpre);
    } else {
      actor_.backward(dmean);
    }
  }
  MatX<S> critic_forward(const MatX<S>& x) { return critic_.forward(x); }
  void critic_backward(const MatX<S>& dvalue) { critic_.backward(dvalue); }

  VecX<S> log_std() const {
    return log_std_.col(0).unaryExpr([&](S v) {
      return std::clamp(v, S(config_.log_std_min), S(config_.log_std_max));
    });
  }
  void accumulate_log_std_grad(const VecX<S>& g) { log_std_grad_.col(0) += g; }
  void clamp_log_std() {
    log_std_ = log_std_.unaryExpr([&](S v) {
      return std::clamp(v, S(config_.log_std_min), S(config_.log_std_max));
    });
  }

  void zero_grad() {
    actor_.zero_grad();
    critic_.zero_grad();
    log_std_grad_.setZero();
  }

  std::vector<nn::ParamRef<S>> actor_params() {
    auto out = actor_.params();
    out.push_back({"actor.log_std", &log_std_, &log_std_grad_});
    return out;
  }
  std::vector<nn::ParamRef<S>> critic_params() { return critic_.params(); }
  std::vector<nn::ParamRef<S>> params() {
    auto out = actor_params();
    for (auto& p : critic_params()) out.push_back(p);
    return out;
  }

  nn::MlpT<S>& actor() { return actor_; }
  nn::MlpT<S>& critic() { return critic_; }

 private:
  TeacherConfig config_;
  nn::MlpT<S> actor_, critic_;
  MatX<S> log_std_, log_std_grad_;
  MatX<S> squashed_mean_;
};

using TeacherPolicy = TeacherPolicyT<float>;

void save_teacher(const TeacherPolicy& policy, const std::string& path);
TeacherPolicy load_teacher(const std::string& path);

// ---------------------------------------------------------------------------
// Voxel grid rasterization into a dense occupancy block.

struct VoxelBounds {
  Eigen::Vector3d origin = Eigen::Vector3d(-0.16, -0.16, -0.01);  // min corner
  double resolution = 0.01;
  int dims[3] = {32, 32, 40};  // tall enough to include the goal display

  int volume() const { return dims[0] * dims[1] * dims[2]; }
  bool contains(int x, int y, int z) const {
    return x >= 0 && x < dims[0] && y >= 0 && y < dims[1] && z >= 0 &&
           z < dims[2];
  }
};

// Occupancy column (volume x 1). Cells outside the bounds are dropped and
// counted in `clipped` when provided.
template <typename S>
VecX<S> rasterize_grid(const cloud::VoxelGrid& grid, const VoxelBounds& bounds,
                       int* clipped = nullptr) {
  if (grid.cells.empty()) {
    throw std::invalid_argument("rasterize_grid: empty voxel grid");
  }
  VecX<S> occ = VecX<S>::Zero(bounds.volume());
  int dropped = 0;
  for (const auto& cell : grid.cells) {
    // Re-index the global integer cell against the bounds origin.
    const int x = cell.x - int(std::floor(bounds.origin.x() / bounds.resolution));
    const int y = cell.y - int(std::floor(bounds.origin.y() / bounds.resolution));
    const int z = cell.z - int(std::floor(bounds.origin.z() / bounds.resolution));
    if (!bounds.contains(x, y, z)) {
      ++dropped;
      continue;
    }
    occ[x + bounds.dims[0] * (y + bounds.dims[1] * z)] = S(1);
  }
  if (clipped) *clipped = dropped;
  return occ;
}

// ---------------------------------------------------------------------------
// Student: dense voxel encoder + GRU + action and distance heads.

struct StudentConfig {
  VoxelBounds bounds;
  std::vector<int> conv_channels = {4, 8, 16};  // one stride-2 conv each
  int feature = 128;
  int hidden = 128;  // GRU state
  int action = 12;
  bool separate_goal_encoder = false;
  VoxelBounds goal_bounds;  // used only with a separate goal trunk
};

template <typename S>
class VoxelEncoderT {
 public:
  VoxelEncoderT() = default;
  VoxelEncoderT(const VoxelBounds& bounds, const std::vector<int>& channels,
                int feature, Rng& rng, const std::string& name = "encoder")
      : bounds_(bounds) {
    int in_channels = 1;
    int dims[3] = {bounds.dims[0], bounds.dims[1], bounds.dims[2]};
    for (std::size_t i = 0; i < channels.size(); ++i) {
      nn::Conv3dShape shape;
      shape.in_channels = in_channels;
      shape.out_channels = channels[i];
      shape.kernel = 3;
      shape.stride = 2;
      shape.in_dims[0] = dims[0];
      shape.in_dims[1] = dims[1];
      shape.in_dims[2] = dims[2];
      shape.validate();
      convs_.emplace_back(shape, rng, name + ".conv" + std::to_string(i));
      for (int a = 0; a < 3; ++a) dims[a] = shape.out_dim(a);
      in_channels = channels[i];
    }
    elus_.resize(convs_.size() + 1);
    const int flat = in_channels * dims[0] * dims[1] * dims[2];
    head_ = nn::LinearT<S>(flat, feature, rng, name + ".head");
  }

  const VoxelBounds& bounds() const { return bounds_; }
  int feature_size() const { return head_.out_size(); }
  int input_size() const { return bounds_.volume(); }

  MatX<S> forward(const MatX<S>& occupancy) {
    MatX<S> h = occupancy;
    for (std::size_t i = 0; i < convs_.size(); ++i) {
      h = elus_[i].forward(convs_[i].forward(h));
    }
    return elus_.back().forward(head_.forward(h));
  }

  MatX<S> backward(const MatX<S>& dfeature) {
    MatX<S> g = head_.backward(elus_.back().backward(dfeature));
    for (std::size_t i = convs_.size(); i-- > 0;) {
      g = convs_[i].backward(elus_[i].backward(g));
    }
    return g;
  }

  void zero_grad() {
    for (auto& c : convs_) c.zero_grad();
    head_.zero_grad();
  }

  std::vector<nn::ParamRef<S>> params() {
    std::vector<nn::ParamRef<S>> out;
    for (auto& c : convs_) {
      for (auto& p : c.params()) out.push_back(p);
    }
    for (auto& p : head_.params()) out.push_back(p);
    return out;
  }

 private:
  VoxelBounds bounds_;
  std::vector<nn::Conv3dT<S>> convs_;
  std::vector<nn::EluT<S>> elus_;
  nn::LinearT<S> head_;
};

template <typename S>
class StudentPolicyT {
 public:
  StudentPolicyT() = default;
  StudentPolicyT(const StudentConfig& config, Rng& rng) : config_(config) {
    encoder_ = VoxelEncoderT<S>(config.bounds, config.conv_channels,
                                config.feature, rng, "student.encoder");
    int feature_total = config.feature;
    if (config.separate_goal_encoder) {
      goal_encoder_ = VoxelEncoderT<S>(config.goal_bounds, config.conv_channels,
                                       config.feature, rng, "student.goal");
      feature_total += config.feature;
    }
    gru_ = nn::GruCellT<S>(feature_total + config.action, config.hidden, rng,
                           "student.gru");
    action_head_ =
        nn::LinearT<S>(config.hidden, config.action, rng, "student.action");
    distance_head_ =
        nn::LinearT<S>(config.hidden, 1, rng, "student.distance");
  }

  const StudentConfig& config() const { return config_; }
  VoxelEncoderT<S>& encoder() { return encoder_; }
  VoxelEncoderT<S>& goal_encoder() { return goal_encoder_; }
  nn::GruCellT<S>& gru() { return gru_; }
  nn::LinearT<S>& action_head() { return action_head_; }
  nn::LinearT<S>& distance_head() { return distance_head_; }
  nn::SoftplusT<S>& softplus() { return softplus_; }

  MatX<S> initial_hidden(int batch) const {
    return MatX<S>::Zero(config_.hidden, batch);
  }

  struct StepResult {
    MatX<S> action;    // action x batch
    VecX<S> distance;  // predicted |delta theta|, nonnegative
    MatX<S> hidden;    // next recurrent state
  };

  // Inference step (no gradient bookkeeping kept across calls). With a
  // separate goal trunk, `goal_occupancy` must hold the goal cloud; in merged
  // mode it must be empty.
  StepResult step(const MatX<S>& occupancy, const MatX<S>& prev_action,
                  const MatX<S>& hidden, const MatX<S>& goal_occupancy = {}) {
    MatX<S> feature = encoder_.forward(occupancy);
    if (config_.separate_goal_encoder) {
      if (goal_occupancy.size() == 0) {
        throw std::invalid_argument(
            "StudentPolicy: goal occupancy required with a separate goal trunk");
      }
      const MatX<S> goal_feature = goal_encoder_.forward(goal_occupancy);
      MatX<S> both(feature.rows() + goal_feature.rows(), feature.cols());
      both.topRows(feature.rows()) = feature;
      both.bottomRows(goal_feature.rows()) = goal_feature;
      feature = std::move(both);
    } else if (goal_occupancy.size() != 0) {
      throw std::invalid_argument(
          "StudentPolicy: unexpected goal occupancy in merged mode");
    }
    return step_from_features(feature, prev_action, hidden);
  }

  StepResult step_from_features(const MatX<S>& feature,
                                const MatX<S>& prev_action,
                                const MatX<S>& hidden) {
    MatX<S> gated(feature.rows() + prev_action.rows(), feature.cols());
    gated.topRows(feature.rows()) = feature;
    gated.bottomRows(prev_action.rows()) = prev_action;
    if (int(gated.rows()) != gru_.input_size() ||
        int(hidden.rows()) != gru_.hidden_size()) {
      throw std::invalid_argument("StudentPolicy: input dimension mismatch");
    }
    StepResult out;
    out.hidden = gru_.forward(gated, hidden);
    out.action = action_head_.forward(out.hidden);
    out.distance = softplus_.forward(distance_head_.forward(out.hidden)).row(0);
    return out;
  }

  void zero_grad() {
    encoder_.zero_grad();
    if (config_.separate_goal_encoder) goal_encoder_.zero_grad();
    gru_.zero_grad();
    action_head_.zero_grad();
    distance_head_.zero_grad();
  }

  std::vector<nn::ParamRef<S>> params() {
    std::vector<nn::ParamRef<S>> out = encoder_.params();
    if (config_.separate_goal_encoder) {
      for (auto& p : goal_encoder_.params()) out.push_back(p);
    }
    for (auto& p : gru_.params()) out.push_back(p);
    for (auto& p : action_head_.params()) out.push_back(p);
    for (auto& p : distance_head_.params()) out.push_back(p);
    return out;
  }

 private:
  StudentConfig config_;
  VoxelEncoderT<S> encoder_;
  VoxelEncoderT<S> goal_encoder_;
  nn::GruCellT<S> gru_;
  nn::LinearT<S> action_head_;
  nn::LinearT<S> distance_head_;
  nn::SoftplusT<S> softplus_;
};

using StudentPolicy = StudentPolicyT<float>;
using VoxelEncoder = VoxelEncoderT<float>;

void save_student(const StudentPolicy& policy, const std::string& path,
                  const nlohmann::json& extra_meta = {});
StudentPolicy load_student(const std::string& path);

// Feature vector for a voxel grid through the student encoder; the spec's
// voxel-feature operation. Cells outside the bounds are clipped with a
// warning on stderr (once per process) and counted.
MatX<float> encode_voxel_features(VoxelEncoder& encoder,
                                  const cloud::VoxelGrid& grid,
                                  int* clipped = nullptr);

nlohmann::json teacher_config_to_json(const TeacherConfig& config);
TeacherConfig teacher_config_from_json(const nlohmann::json& j);
nlohmann::json student_config_to_json(const StudentConfig& config);
StudentConfig student_config_from_json(const nlohmann::json& j);

}  // namespace reorient::policy
