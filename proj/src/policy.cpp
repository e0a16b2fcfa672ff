// SPDX-License-Identifier: Apache-2.0
#include "reorient/policy.hpp"

namespace reorient::policy {

Eigen::VectorXd target_joints(const Eigen::VectorXd& q,
                              const Eigen::VectorXd& smoothed_action,
                              const Eigen::VectorXd& lower,
                              const Eigen::VectorXd& upper) {
  if (q.size() != smoothed_action.size() || q.size() != lower.size() ||
      q.size() != upper.size()) {
    throw std::invalid_argument("target_joints: dimension mismatch");
  }
  Eigen::VectorXd target = q + smoothed_action;
  for (Eigen::Index i = 0; i < target.size(); ++i) {
    target[i] = std::clamp(target[i], lower[i], upper[i]);
  }
  return target;
}

namespace {

// A fixed probe input lets checkpoint verification re-run the forward pass
// and compare outputs bitwise.
template <typename Net, typename ProbeFn>
void attach_probe(nn::Checkpoint& ck, Net& net, int probe_dim,
                  ProbeFn&& probe) {
  Rng rng(0x9bbdea50c1a5f3e7ULL);
  MatX<float> input(probe_dim, 4);
  for (Eigen::Index i = 0; i < input.size(); ++i) {
    input.data()[i] = float(rng.uniform(-1.0, 1.0));
  }
  ck.put("__probe_in", input);
  probe(ck, input);
}

}  // namespace

nlohmann::json teacher_config_to_json(const TeacherConfig& c) {
  return {{"observation", c.observation}, {"action", c.action},
          {"hidden", c.hidden},           {"log_std_init", c.log_std_init},
          {"log_std_min", c.log_std_min}, {"log_std_max", c.log_std_max},
          {"mean_bound", c.mean_bound}};
}

TeacherConfig teacher_config_from_json(const nlohmann::json& j) {
  TeacherConfig c;
  c.observation = j.at("observation").get<int>();
  c.action = j.at("action").get<int>();
  c.hidden = j.at("hidden").get<std::vector<int>>();
  c.log_std_init = j.at("log_std_init").get<double>();
  c.log_std_min = j.at("log_std_min").get<double>();
  c.log_std_max = j.at("log_std_max").get<double>();
  c.mean_bound = j.value("mean_bound", 0.0);
  return c;
}

void save_teacher(const TeacherPolicy& policy, const std::string& path) {
  nn::Checkpoint ck;
  auto& mutable_policy = const_cast<TeacherPolicy&>(policy);
  ck.meta["kind"] = "teacher";
  ck.meta["config"] = teacher_config_to_json(policy.config());
  nn::store_params(ck, mutable_policy.params());
  attach_probe(ck, mutable_policy,
               policy.config().observation + policy.config().action,
               [&](nn::Checkpoint& c, const MatX<float>& input) {
                 c.put("__probe_mean", mutable_policy.actor_forward(input));
                 c.put("__probe_value", mutable_policy.critic_forward(input));
               });
  ck.save(path);
}

TeacherPolicy load_teacher(const std::string& path) {
  const auto ck = nn::Checkpoint::load(path);
  if (ck.meta.value("kind", "") != "teacher") {
    throw std::runtime_error("load_teacher: checkpoint kind mismatch");
  }
  Rng rng(0);
  TeacherPolicy policy(teacher_config_from_json(ck.meta.at("config")), rng);
  nn::load_params(ck, policy.params());
  return policy;
}

namespace {

nlohmann::json bounds_to_json(const VoxelBounds& b) {
  return {{"origin", {b.origin.x(), b.origin.y(), b.origin.z()}},
          {"resolution", b.resolution},
          {"dims", {b.dims[0], b.dims[1], b.dims[2]}}};
}

VoxelBounds bounds_from_json(const nlohmann::json& j) {
  VoxelBounds b;
  b.origin = Eigen::Vector3d(j.at("origin").at(0).get<double>(),
                             j.at("origin").at(1).get<double>(),
                             j.at("origin").at(2).get<double>());
  b.resolution = j.at("resolution").get<double>();
  for (int a = 0; a < 3; ++a) b.dims[a] = j.at("dims").at(a).get<int>();
  return b;
}

}  // namespace

nlohmann::json student_config_to_json(const StudentConfig& c) {
  return {{"bounds", bounds_to_json(c.bounds)},
          {"conv_channels", c.conv_channels},
          {"feature", c.feature},
          {"hidden", c.hidden},
          {"action", c.action},
          {"separate_goal_encoder", c.separate_goal_encoder},
          {"goal_bounds", bounds_to_json(c.goal_bounds)}};
}

StudentConfig student_config_from_json(const nlohmann::json& j) {
  StudentConfig c;
  c.bounds = bounds_from_json(j.at("bounds"));
  c.conv_channels = j.at("conv_channels").get<std::vector<int>>();
  c.feature = j.at("feature").get<int>();
  c.hidden = j.at("hidden").get<int>();
  c.action = j.at("action").get<int>();
  c.separate_goal_encoder = j.at("separate_goal_encoder").get<bool>();
  c.goal_bounds = bounds_from_json(j.at("goal_bounds"));
  return c;
}

void save_student(const StudentPolicy& policy, const std::string& path,
                  const nlohmann::json& extra_meta) {
  nn::Checkpoint ck;
  auto& mutable_policy = const_cast<StudentPolicy&>(policy);
  ck.meta["kind"] = "student";
  ck.meta["config"] = student_config_to_json(policy.config());
  for (auto it = extra_meta.begin(); it != extra_meta.end(); ++it) {
    ck.meta[it.key()] = it.value();
  }
  nn::store_params(ck, mutable_policy.params());

  Rng rng(0x517c3b9e2d8a4f61ULL);
  const auto& cfg = policy.config();
  MatX<float> occ = MatX<float>::Zero(cfg.bounds.volume(), 2);
  for (int i = 0; i < cfg.bounds.volume() / 16; ++i) {
    occ(Eigen::Index(rng.uniform_index(std::uint64_t(occ.rows()))), 0) = 1.0f;
    occ(Eigen::Index(rng.uniform_index(std::uint64_t(occ.rows()))), 1) = 1.0f;
  }
  MatX<float> prev = MatX<float>::Zero(cfg.action, 2);
  MatX<float> goal_occ;
  if (cfg.separate_goal_encoder) {
    goal_occ = MatX<float>::Zero(cfg.goal_bounds.volume(), 2);
    for (int i = 0; i < cfg.goal_bounds.volume() / 32; ++i) {
      goal_occ(Eigen::Index(rng.uniform_index(std::uint64_t(goal_occ.rows()))), 0) = 1.0f;
      goal_occ(Eigen::Index(rng.uniform_index(std::uint64_t(goal_occ.rows()))), 1) = 1.0f;
    }
    ck.put("__probe_goal_in", goal_occ);
  }
  const auto out =
      mutable_policy.step(occ, prev, policy.initial_hidden(2), goal_occ);
  ck.put("__probe_in", occ);
  ck.put("__probe_action", out.action);
  ck.put("__probe_distance", MatX<float>(out.distance.transpose()));
  ck.put("__probe_hidden", out.hidden);
  ck.save(path);
}

StudentPolicy load_student(const std::string& path) {
  const auto ck = nn::Checkpoint::load(path);
  if (ck.meta.value("kind", "") != "student") {
    throw std::runtime_error("load_student: checkpoint kind mismatch");
  }
  Rng rng(0);
  StudentPolicy policy(student_config_from_json(ck.meta.at("config")), rng);
  nn::load_params(ck, policy.params());
  return policy;
}

MatX<float> encode_voxel_features(VoxelEncoder& encoder,
                                  const cloud::VoxelGrid& grid, int* clipped) {
  int dropped = 0;
  const auto occ = rasterize_grid<float>(grid, encoder.bounds(), &dropped);
  if (clipped) *clipped = dropped;
  if (dropped > 0) {
    static bool warned = false;
    if (!warned) {
      std::cerr << "encode_voxel_features: " << dropped
                << " cells outside the encoder bounds were clipped"
                << std::endl;
      warned = true;
    }
  }
  return encoder.forward(occ);
}

}  // namespace reorient::policy
