// SPDX-License-Identifier: Apache-2.0
#include "reorient/config.hpp"

#include <fstream>
#include <set>

namespace reorient::cli {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& path,
                const std::set<std::string>& allowed) {
  if (!j.is_object()) {
    throw ConfigError("config: expected an object at " + path);
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) {
      throw ConfigError("config: unknown key " +
                        (path.empty() ? it.key() : path + "." + it.key()));
    }
  }
}

template <typename T>
void read(const json& j, const std::string& path, const char* key, T& target) {
  if (!j.contains(key)) return;
  try {
    target = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: bad value type for " + path + "." + key);
  }
}

void read_vec3(const json& j, const std::string& path, const char* key,
               Eigen::Vector3d& target) {
  if (!j.contains(key)) return;
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != 3) {
    throw ConfigError("config: " + path + "." + key + " must be [x, y, z]");
  }
  for (int i = 0; i < 3; ++i) {
    if (!a[i].is_number()) {
      throw ConfigError("config: " + path + "." + key + " must be numeric");
    }
    target[i] = a[i].get<double>();
  }
}

void read_range(const json& j, const std::string& path, const char* key,
                double& lo, double& hi) {
  if (!j.contains(key)) return;
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != 2 || !a[0].is_number() || !a[1].is_number()) {
    throw ConfigError("config: " + path + "." + key + " must be [lo, hi]");
  }
  lo = a[0].get<double>();
  hi = a[1].get<double>();
}

policy::VoxelBounds parse_bounds(const json& j, const std::string& path,
                                 policy::VoxelBounds defaults) {
  check_keys(j, path, {"origin", "resolution", "dims"});
  policy::VoxelBounds b = defaults;
  read_vec3(j, path, "origin", b.origin);
  read(j, path, "resolution", b.resolution);
  if (j.contains("dims")) {
    const auto& d = j.at("dims");
    if (!d.is_array() || d.size() != 3) {
      throw ConfigError("config: " + path + ".dims must be [x, y, z]");
    }
    for (int i = 0; i < 3; ++i) b.dims[i] = d[i].get<int>();
  }
  if (!(b.resolution > 0.0) || b.dims[0] <= 0 || b.dims[1] <= 0 || b.dims[2] <= 0) {
    throw ConfigError("config: invalid voxel bounds at " + path);
  }
  return b;
}

void parse_environment(const json& j, GlobalConfig& config) {
  const std::string path = "environment";
  check_keys(j, path,
             {"kind", "mode", "fingers", "horizon", "control_period", "object",
              "object_cloud_points", "points_per_link", "randomize_dynamics",
              "randomization", "observation_noise", "action_noise",
              "disturbance", "init_center", "init_half_extent",
              "goal_display_offset", "direct_rate_gain", "direct_max_rate",
              "action_limit", "contact_radius", "drop_window",
              "physics_substeps"});
  read(j, path, "kind", config.env_kind);
  if (config.env_kind != "direct_rotation" && config.env_kind != "surrogate_hand") {
    throw ConfigError("config: environment.kind must be direct_rotation or "
                      "surrogate_hand");
  }
  if (j.contains("mode")) {
    const auto mode = j.at("mode").get<std::string>();
    if (mode == "table") {
      config.env.episode.mode = env::TaskMode::kTable;
      config.env.reward.mode = reward::TaskMode::kTable;
    } else if (mode == "air") {
      config.env.episode.mode = env::TaskMode::kAir;
      config.env.reward.mode = reward::TaskMode::kAir;
    } else {
      throw ConfigError("config: environment.mode must be table or air");
    }
  }
  read(j, path, "fingers", config.env.episode.fingers);
  read(j, path, "horizon", config.env.episode.horizon);
  read(j, path, "control_period", config.env.episode.control_period);
  read(j, path, "object", config.env.object);
  read(j, path, "object_cloud_points", config.env.object_cloud_points);
  read(j, path, "points_per_link", config.env.points_per_link);
  read(j, path, "randomize_dynamics", config.env.randomize_dynamics);
  if (j.contains("randomization")) {
    const auto& r = j.at("randomization");
    check_keys(r, path + ".randomization",
               {"stiffness", "damping", "link_mass", "friction_robot",
                "friction_table", "restitution", "object_size", "object_mass"});
    auto& ranges = config.env.ranges;
    read_range(r, path + ".randomization", "stiffness", ranges.stiffness_lo,
               ranges.stiffness_hi);
    read_range(r, path + ".randomization", "damping", ranges.damping_lo,
               ranges.damping_hi);
    read_range(r, path + ".randomization", "link_mass", ranges.link_mass_lo,
               ranges.link_mass_hi);
    read_range(r, path + ".randomization", "friction_robot",
               ranges.friction_robot_lo, ranges.friction_robot_hi);
    read_range(r, path + ".randomization", "friction_table",
               ranges.friction_table_lo, ranges.friction_table_hi);
    read_range(r, path + ".randomization", "restitution", ranges.restitution_lo,
               ranges.restitution_hi);
    read_range(r, path + ".randomization", "object_size", ranges.object_size_lo,
               ranges.object_size_hi);
    read_range(r, path + ".randomization", "object_mass", ranges.object_mass_lo,
               ranges.object_mass_hi);
  }
  read(j, path, "observation_noise", config.env.noise.observation_noise);
  read(j, path, "action_noise", config.env.noise.action_noise);
  if (j.contains("disturbance")) {
    const auto& d = j.at("disturbance");
    check_keys(d, path + ".disturbance",
               {"enabled", "probability", "coefficient"});
    read(d, path + ".disturbance", "enabled", config.env.disturbance.enabled);
    read(d, path + ".disturbance", "probability",
         config.env.disturbance.probability);
    read(d, path + ".disturbance", "coefficient",
         config.env.disturbance.coefficient);
  }
  read_vec3(j, path, "init_center", config.env.init_center);
  read_vec3(j, path, "init_half_extent", config.env.init_half_extent);
  read_vec3(j, path, "goal_display_offset", config.env.goal_display_offset);
  read(j, path, "direct_rate_gain", config.env.direct_rate_gain);
  read(j, path, "direct_max_rate", config.env.direct_max_rate);
  read(j, path, "action_limit", config.env.action_limit);
  read(j, path, "contact_radius", config.env.contact_radius);
  read(j, path, "drop_window", config.env.drop_window);
  read(j, path, "physics_substeps", config.env.physics_substeps);
}

void parse_reward(const json& j, GlobalConfig& config) {
  const std::string path = "reward";
  check_keys(j, path,
             {"c1", "c2", "c3", "c4", "c5", "c6", "c7", "eps_theta", "p_bar",
              "p_bar_z", "thresholds"});
  auto& r = config.env.reward;
  read(j, path, "c1", r.c1);
  read(j, path, "c2", r.c2);
  read(j, path, "c3", r.c3);
  read(j, path, "c4", r.c4);
  read(j, path, "c5", r.c5);
  read(j, path, "c6", r.c6);
  read(j, path, "c7", r.c7);
  read(j, path, "eps_theta", r.eps_theta);
  read(j, path, "p_bar", r.p_bar);
  read(j, path, "p_bar_z", r.p_bar_z);
  // Setting the air-mode terms while in table mode is a configuration error.
  if (r.mode == reward::TaskMode::kTable &&
      ((j.contains("c6") && r.c6 != 0.0) || (j.contains("c7") && r.c7 != 0.0))) {
    throw ConfigError(
        "config: reward.c6/c7 are air-mode terms; set environment.mode to "
        "\"air\" or remove them");
  }
  if (j.contains("thresholds")) {
    const auto& t = j.at("thresholds");
    check_keys(t, path + ".thresholds",
               {"theta_bar", "qdot_bar", "action_bar", "v_bar", "omega_bar"});
    auto& thresholds = config.env.episode.thresholds;
    read(t, path + ".thresholds", "theta_bar", thresholds.theta_bar);
    read(t, path + ".thresholds", "qdot_bar", thresholds.qdot_bar);
    read(t, path + ".thresholds", "action_bar", thresholds.action_bar);
    read(t, path + ".thresholds", "v_bar", thresholds.v_bar);
    read(t, path + ".thresholds", "omega_bar", thresholds.omega_bar);
  }
}

void parse_policy(const json& j, GlobalConfig& config) {
  const std::string path = "policy";
  check_keys(j, path, {"teacher_hidden", "log_std_init", "mean_bound", "alpha", "student"});
  read(j, path, "teacher_hidden", config.teacher_hidden);
  read(j, path, "log_std_init", config.log_std_init);
  read(j, path, "mean_bound", config.teacher_mean_bound);
  read(j, path, "alpha", config.action_smoothing_alpha);
  if (config.action_smoothing_alpha < 0.0 || config.action_smoothing_alpha > 1.0) {
    throw ConfigError("config: policy.alpha must be in [0, 1]");
  }
  if (j.contains("student")) {
    const auto& s = j.at("student");
    check_keys(s, path + ".student",
               {"feature", "hidden", "conv_channels", "separate_goal_encoder",
                "bounds", "goal_bounds"});
    read(s, path + ".student", "feature", config.student.feature);
    read(s, path + ".student", "hidden", config.student.hidden);
    read(s, path + ".student", "conv_channels", config.student.conv_channels);
    read(s, path + ".student", "separate_goal_encoder",
         config.student.separate_goal_encoder);
    if (s.contains("bounds")) {
      config.student.bounds =
          parse_bounds(s.at("bounds"), path + ".student.bounds",
                       config.student.bounds);
    }
    if (s.contains("goal_bounds")) {
      config.student.goal_bounds =
          parse_bounds(s.at("goal_bounds"), path + ".student.goal_bounds",
                       config.student.goal_bounds);
    }
  }
}

void parse_learn(const json& j, GlobalConfig& config) {
  const std::string path = "learn";
  check_keys(j, path,
             {"ppo", "eval_episodes", "checkpoint_every", "dagger",
              "observation", "stage0"});
  if (j.contains("ppo")) {
    const auto& p = j.at("ppo");
    check_keys(p, path + ".ppo",
               {"gamma", "gae_lambda", "clip_range", "epochs", "rollout_steps",
                "env_count", "batch_size", "actor_lr", "critic_lr",
                "entropy_coef", "normalize_advantages", "updates"});
    auto& ppo = config.ppo;
    read(p, path + ".ppo", "gamma", ppo.gamma);
    read(p, path + ".ppo", "gae_lambda", ppo.gae_lambda);
    read(p, path + ".ppo", "clip_range", ppo.clip_range);
    read(p, path + ".ppo", "epochs", ppo.epochs);
    read(p, path + ".ppo", "rollout_steps", ppo.rollout_steps);
    read(p, path + ".ppo", "env_count", ppo.env_count);
    read(p, path + ".ppo", "batch_size", ppo.batch_size);
    read(p, path + ".ppo", "actor_lr", ppo.actor_lr);
    read(p, path + ".ppo", "critic_lr", ppo.critic_lr);
    read(p, path + ".ppo", "entropy_coef", ppo.entropy_coef);
    read(p, path + ".ppo", "normalize_advantages", ppo.normalize_advantages);
    read(p, path + ".ppo", "updates", ppo.updates);
  }
  read(j, path, "eval_episodes", config.ppo_eval_episodes);
  read(j, path, "checkpoint_every", config.checkpoint_every);
  if (j.contains("dagger")) {
    const auto& d = j.at("dagger");
    check_keys(d, path + ".dagger",
               {"env_count", "rollout_steps", "train_steps", "window",
                "batch_windows", "learning_rate", "distance_loss_weight",
                "iterations", "stage2_iterations", "teacher"});
    auto& dagger = config.dagger;
    read(d, path + ".dagger", "env_count", dagger.env_count);
    read(d, path + ".dagger", "rollout_steps", dagger.rollout_steps);
    read(d, path + ".dagger", "train_steps", dagger.train_steps);
    read(d, path + ".dagger", "window", dagger.window);
    read(d, path + ".dagger", "batch_windows", dagger.batch_windows);
    read(d, path + ".dagger", "learning_rate", dagger.learning_rate);
    read(d, path + ".dagger", "distance_loss_weight",
         dagger.distance_loss_weight);
    read(d, path + ".dagger", "iterations", config.dagger_iterations);
    read(d, path + ".dagger", "stage2_iterations", config.stage2_iterations);
    read(d, path + ".dagger", "teacher", config.dagger_teacher);
    if (config.dagger_teacher != "checkpoint" &&
        config.dagger_teacher != "geodesic") {
      throw ConfigError(
          "config: learn.dagger.teacher must be checkpoint or geodesic");
    }
  }
  if (j.contains("observation")) {
    const auto& o = j.at("observation");
    check_keys(o, path + ".observation",
               {"voxel_resolution", "rendered_points", "augment",
                "image_width", "image_height"});
    auto& obs = config.dagger.observation;
    read(o, path + ".observation", "voxel_resolution", obs.voxel_resolution);
    read(o, path + ".observation", "rendered_points", obs.rendered_points);
    read(o, path + ".observation", "augment", obs.augment);
    read(o, path + ".observation", "image_width", obs.image_width);
    read(o, path + ".observation", "image_height", obs.image_height);
  }
  if (j.contains("stage0")) {
    const auto& s = j.at("stage0");
    check_keys(s, path + ".stage0",
               {"samples", "epochs", "batch_size", "learning_rate",
                "split_embedding", "predict_category", "predict_distance",
                "predict_joints", "holdout_fraction"});
    read(s, path + ".stage0", "samples", config.stage0_samples);
    read(s, path + ".stage0", "epochs", config.stage0_epochs);
    read(s, path + ".stage0", "batch_size", config.stage0.batch_size);
    read(s, path + ".stage0", "learning_rate", config.stage0.learning_rate);
    read(s, path + ".stage0", "split_embedding", config.stage0.split_embedding);
    read(s, path + ".stage0", "predict_category", config.stage0.predict_category);
    read(s, path + ".stage0", "predict_distance", config.stage0.predict_distance);
    read(s, path + ".stage0", "predict_joints", config.stage0.predict_joints);
    read(s, path + ".stage0", "holdout_fraction",
         config.stage0_holdout_fraction);
  }
}

void parse_sysid(const json& j, GlobalConfig& config) {
  const std::string path = "sysid";
  check_keys(j, path,
             {"cma", "nominal", "bounds", "inertia", "latency_samples",
              "sine_count", "joint_limits"});
  if (j.contains("cma")) {
    const auto& c = j.at("cma");
    check_keys(c, path + ".cma",
               {"population", "max_generations", "initial_sigma"});
    read(c, path + ".cma", "population", config.sysid_options.search.population);
    read(c, path + ".cma", "max_generations",
         config.sysid_options.search.max_generations);
    read(c, path + ".cma", "initial_sigma",
         config.sysid_options.search.initial_sigma);
  }
  if (j.contains("nominal")) {
    const auto& n = j.at("nominal");
    check_keys(n, path + ".nominal", {"stiffness", "damping", "velocity_limit"});
    read(n, path + ".nominal", "stiffness",
         config.sysid_options.nominal.stiffness);
    read(n, path + ".nominal", "damping", config.sysid_options.nominal.damping);
    read(n, path + ".nominal", "velocity_limit",
         config.sysid_options.nominal.velocity_limit);
  }
  if (j.contains("bounds")) {
    const auto& b = j.at("bounds");
    check_keys(b, path + ".bounds", {"lower", "upper"});
    const auto to_vec = [&](const char* key) {
      const auto& a = b.at(key);
      if (!a.is_array() || a.size() != 3) {
        throw ConfigError("config: sysid.bounds." + std::string(key) +
                          " must have 3 entries (k, d, vlim)");
      }
      Eigen::VectorXd v(3);
      for (int i = 0; i < 3; ++i) v[i] = a[i].get<double>();
      return v;
    };
    if (b.contains("lower")) config.sysid_options.search.lower_bounds = to_vec("lower");
    if (b.contains("upper")) config.sysid_options.search.upper_bounds = to_vec("upper");
    config.sysid_options.search.initial_mean = Eigen::VectorXd(3);
    config.sysid_options.search.initial_mean
        << config.sysid_options.nominal.stiffness,
        config.sysid_options.nominal.damping,
        config.sysid_options.nominal.velocity_limit;
  }
  read(j, path, "inertia", config.sysid_options.sim.inertia);
  read(j, path, "latency_samples", config.sysid_options.sim.latency_samples);
  read(j, path, "sine_count", config.sysid_sine_count);
  if (j.contains("joint_limits")) {
    read_range(j, path, "joint_limits", config.sysid_joint_lower,
               config.sysid_joint_upper);
  }
}

void parse_metrics(const json& j, GlobalConfig& config) {
  const std::string path = "metrics";
  check_keys(j, path, {"threshold_low", "threshold_high", "level", "n_boot"});
  read(j, path, "threshold_low", config.summary.threshold_low);
  read(j, path, "threshold_high", config.summary.threshold_high);
  read(j, path, "level", config.summary.level);
  read(j, path, "n_boot", config.summary.n_boot);
}

}  // namespace

policy::TeacherConfig GlobalConfig::teacher_config() const {
  policy::TeacherConfig tc;
  tc.observation = env::teacher_observation_size(env.episode.fingers);
  tc.action = action_size();
  tc.hidden = teacher_hidden;
  tc.log_std_init = log_std_init;
  tc.mean_bound = teacher_mean_bound;
  return tc;
}

void GlobalConfig::validate() const {
  try {
    env.validate();
    ppo.validate();
    dagger.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (summary.n_boot < 2 || !(summary.level > 0.0 && summary.level < 1.0)) {
    throw ConfigError("config: metrics.n_boot/level out of range");
  }
  if (student.action != action_size()) {
    throw ConfigError("config: student action size must equal 3G");
  }
  if (stage0_holdout_fraction <= 0.0 || stage0_holdout_fraction >= 1.0) {
    throw ConfigError("config: learn.stage0.holdout_fraction must be in (0,1)");
  }
}

GlobalConfig config_from_json(const nlohmann::json& j) {
  check_keys(j, "",
             {"seed", "environment", "reward", "policy", "learn", "sysid",
              "metrics", "eval"});
  GlobalConfig config;
  if (j.contains("seed")) config.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("environment")) parse_environment(j.at("environment"), config);
  if (j.contains("reward")) parse_reward(j.at("reward"), config);
  if (j.contains("policy")) parse_policy(j.at("policy"), config);
  if (j.contains("learn")) parse_learn(j.at("learn"), config);
  if (j.contains("sysid")) parse_sysid(j.at("sysid"), config);
  if (j.contains("metrics")) parse_metrics(j.at("metrics"), config);
  if (j.contains("eval")) {
    check_keys(j.at("eval"), "eval", {"episodes"});
    read(j.at("eval"), "eval", "episodes", config.eval_episodes);
  }

  // Derived wiring.
  config.student.action = config.action_size();
  config.stage0.bounds = config.student.bounds;
  config.stage0.conv_channels = config.student.conv_channels;
  config.stage0.feature = config.student.feature;
  config.stage0.observation = config.dagger.observation;
  config.stage0.goal_display_offset = config.env.goal_display_offset;

  config.validate();
  return config;
}

GlobalConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: JSON parse failure in " + path + ": " + e.what());
  }
  return config_from_json(j);
}

nlohmann::json config_to_json(const GlobalConfig& c) {
  nlohmann::json j;
  j["seed"] = c.seed;
  j["environment"] = {
      {"kind", c.env_kind},
      {"mode", c.env.episode.mode == env::TaskMode::kTable ? "table" : "air"},
      {"fingers", c.env.episode.fingers},
      {"horizon", c.env.episode.horizon},
      {"control_period", c.env.episode.control_period},
      {"object", c.env.object},
      {"object_cloud_points", c.env.object_cloud_points},
      {"points_per_link", c.env.points_per_link},
      {"randomize_dynamics", c.env.randomize_dynamics},
      {"randomization",
       {{"stiffness", {c.env.ranges.stiffness_lo, c.env.ranges.stiffness_hi}},
        {"damping", {c.env.ranges.damping_lo, c.env.ranges.damping_hi}},
        {"link_mass", {c.env.ranges.link_mass_lo, c.env.ranges.link_mass_hi}},
        {"friction_robot",
         {c.env.ranges.friction_robot_lo, c.env.ranges.friction_robot_hi}},
        {"friction_table",
         {c.env.ranges.friction_table_lo, c.env.ranges.friction_table_hi}},
        {"restitution",
         {c.env.ranges.restitution_lo, c.env.ranges.restitution_hi}},
        {"object_size",
         {c.env.ranges.object_size_lo, c.env.ranges.object_size_hi}},
        {"object_mass",
         {c.env.ranges.object_mass_lo, c.env.ranges.object_mass_hi}}}},
      {"observation_noise", c.env.noise.observation_noise},
      {"action_noise", c.env.noise.action_noise},
      {"disturbance",
       {{"enabled", c.env.disturbance.enabled},
        {"probability", c.env.disturbance.probability},
        {"coefficient", c.env.disturbance.coefficient}}},
      {"init_center",
       {c.env.init_center.x(), c.env.init_center.y(), c.env.init_center.z()}},
      {"init_half_extent",
       {c.env.init_half_extent.x(), c.env.init_half_extent.y(),
        c.env.init_half_extent.z()}},
      {"goal_display_offset",
       {c.env.goal_display_offset.x(), c.env.goal_display_offset.y(),
        c.env.goal_display_offset.z()}},
      {"direct_rate_gain", c.env.direct_rate_gain},
      {"direct_max_rate", c.env.direct_max_rate},
      {"action_limit", c.env.action_limit},
      {"contact_radius", c.env.contact_radius},
      {"drop_window", c.env.drop_window},
      {"physics_substeps", c.env.physics_substeps}};
  json reward_json = {{"c1", c.env.reward.c1}, {"c2", c.env.reward.c2},
                      {"c3", c.env.reward.c3}, {"c4", c.env.reward.c4},
                      {"c5", c.env.reward.c5}, {"eps_theta", c.env.reward.eps_theta},
                      {"p_bar", c.env.reward.p_bar},
                      {"p_bar_z", c.env.reward.p_bar_z},
                      {"thresholds",
                       {{"theta_bar", c.env.episode.thresholds.theta_bar},
                        {"qdot_bar", c.env.episode.thresholds.qdot_bar},
                        {"action_bar", c.env.episode.thresholds.action_bar},
                        {"v_bar", c.env.episode.thresholds.v_bar},
                        {"omega_bar", c.env.episode.thresholds.omega_bar}}}};
  if (c.env.reward.mode == reward::TaskMode::kAir) {
    reward_json["c6"] = c.env.reward.c6;
    reward_json["c7"] = c.env.reward.c7;
  }
  j["reward"] = reward_json;
  const auto bounds_json = [](const policy::VoxelBounds& b) {
    return json{{"origin", {b.origin.x(), b.origin.y(), b.origin.z()}},
                {"resolution", b.resolution},
                {"dims", {b.dims[0], b.dims[1], b.dims[2]}}};
  };
  j["policy"] = {{"teacher_hidden", c.teacher_hidden},
                 {"log_std_init", c.log_std_init},
                 {"mean_bound", c.teacher_mean_bound},
                 {"alpha", c.action_smoothing_alpha},
                 {"student",
                  {{"feature", c.student.feature},
                   {"hidden", c.student.hidden},
                   {"conv_channels", c.student.conv_channels},
                   {"separate_goal_encoder", c.student.separate_goal_encoder},
                   {"bounds", bounds_json(c.student.bounds)},
                   {"goal_bounds", bounds_json(c.student.goal_bounds)}}}};
  j["learn"] = {
      {"ppo",
       {{"gamma", c.ppo.gamma},
        {"gae_lambda", c.ppo.gae_lambda},
        {"clip_range", c.ppo.clip_range},
        {"epochs", c.ppo.epochs},
        {"rollout_steps", c.ppo.rollout_steps},
        {"env_count", c.ppo.env_count},
        {"batch_size", c.ppo.batch_size},
        {"actor_lr", c.ppo.actor_lr},
        {"critic_lr", c.ppo.critic_lr},
        {"entropy_coef", c.ppo.entropy_coef},
        {"normalize_advantages", c.ppo.normalize_advantages},
        {"updates", c.ppo.updates}}},
      {"eval_episodes", c.ppo_eval_episodes},
      {"checkpoint_every", c.checkpoint_every},
      {"dagger",
       {{"env_count", c.dagger.env_count},
        {"rollout_steps", c.dagger.rollout_steps},
        {"train_steps", c.dagger.train_steps},
        {"window", c.dagger.window},
        {"batch_windows", c.dagger.batch_windows},
        {"learning_rate", c.dagger.learning_rate},
        {"distance_loss_weight", c.dagger.distance_loss_weight},
        {"iterations", c.dagger_iterations},
        {"stage2_iterations", c.stage2_iterations},
        {"teacher", c.dagger_teacher}}},
      {"observation",
       {{"voxel_resolution", c.dagger.observation.voxel_resolution},
        {"rendered_points", c.dagger.observation.rendered_points},
        {"augment", c.dagger.observation.augment},
        {"image_width", c.dagger.observation.image_width},
        {"image_height", c.dagger.observation.image_height}}},
      {"stage0",
       {{"samples", c.stage0_samples},
        {"epochs", c.stage0_epochs},
        {"batch_size", c.stage0.batch_size},
        {"learning_rate", c.stage0.learning_rate},
        {"split_embedding", c.stage0.split_embedding},
        {"predict_category", c.stage0.predict_category},
        {"predict_distance", c.stage0.predict_distance},
        {"predict_joints", c.stage0.predict_joints},
        {"holdout_fraction", c.stage0_holdout_fraction}}}};
  j["sysid"] = {
      {"cma",
       {{"population", c.sysid_options.search.population},
        {"max_generations", c.sysid_options.search.max_generations},
        {"initial_sigma", c.sysid_options.search.initial_sigma}}},
      {"nominal",
       {{"stiffness", c.sysid_options.nominal.stiffness},
        {"damping", c.sysid_options.nominal.damping},
        {"velocity_limit", c.sysid_options.nominal.velocity_limit}}},
      {"inertia", c.sysid_options.sim.inertia},
      {"latency_samples", c.sysid_options.sim.latency_samples},
      {"sine_count", c.sysid_sine_count},
      {"joint_limits", {c.sysid_joint_lower, c.sysid_joint_upper}}};
  j["metrics"] = {{"threshold_low", c.summary.threshold_low},
                  {"threshold_high", c.summary.threshold_high},
                  {"level", c.summary.level},
                  {"n_boot", c.summary.n_boot}};
  j["eval"] = {{"episodes", c.eval_episodes}};
  return j;
}

void save_config(const GlobalConfig& config, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_config: cannot write " + path);
  out << config_to_json(config).dump(2) << "\n";
}

}  // namespace reorient::cli
