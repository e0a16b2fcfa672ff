// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

#include <json.hpp>

#include "reorient/env.hpp"
#include "reorient/learn.hpp"
#include "reorient/metrics.hpp"
#include "reorient/policy.hpp"
#include "reorient/sysid.hpp"

namespace reorient::cli {

// Configuration problems exit with status 2; runtime failures with 3.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GlobalConfig {
  std::uint64_t seed = 1;

  // environment
  std::string env_kind = "direct_rotation";  // or "surrogate_hand"
  env::EnvConfig env;

  // policy
  std::vector<int> teacher_hidden = {512, 256, 256};
  double log_std_init = -0.7;
  double teacher_mean_bound = 0.0;
  policy::StudentConfig student;
  double action_smoothing_alpha = 0.8;

  // learn
  learn::PpoConfig ppo;
  int ppo_eval_episodes = 50;
  int checkpoint_every = 100;  // updates
  learn::DaggerConfig dagger;
  int dagger_iterations = 50;
  int stage2_iterations = 10;
  std::string dagger_teacher = "checkpoint";  // or "geodesic"
  learn::Stage0Config stage0;
  int stage0_samples = 50000;
  int stage0_epochs = 4;
  double stage0_holdout_fraction = 0.1;

  // sysid
  sysid::IdentifyOptions sysid_options;
  int sysid_sine_count = 5;
  double sysid_joint_lower = -1.57;
  double sysid_joint_upper = 1.57;

  // metrics
  metrics::SummaryConfig summary;

  int eval_episodes = 100;

  // Derived sizes.
  int action_size() const { return 3 * env.episode.fingers; }
  policy::TeacherConfig teacher_config() const;

  void validate() const;
};

// Parses and validates a JSON config; unknown keys and invariant violations
// raise ConfigError naming the offending key. An empty object yields the
// published defaults.
GlobalConfig parse_config(const std::string& path);
GlobalConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const GlobalConfig& config);
void save_config(const GlobalConfig& config, const std::string& path);

}  // namespace reorient::cli
