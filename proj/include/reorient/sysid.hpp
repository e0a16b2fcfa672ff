// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "reorient/rng.hpp"

namespace reorient::sysid {

using VecXd = Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Excitation signals

enum class ExcitationKind { kStep, kSine };

struct ExcitationCommand {
  ExcitationKind kind = ExcitationKind::kStep;
  double amplitude_scale = 0.5;  // fraction of the joint limit
  double frequency = 0.25;       // Hz, sine only
  double duration = 4.0;         // s
  double sample_rate = 50.0;     // Hz

  void validate() const;
};

struct CommandSeries {
  std::vector<double> time;     // s
  std::vector<double> command;  // rad
  bool frequency_flagged = false;  // sine outside [0.05, 1.5] Hz
};

// Step: constant amplitude*limit. Sine: amplitude*limit*sin(2*pi*f*t). The
// limit is the smaller magnitude of the joint's two bounds.
CommandSeries generate_excitation(const ExcitationCommand& command,
                                  double lower_limit, double upper_limit);

// Standard grid used for identification: one step plus sines spanning the
// published frequency band.
std::vector<ExcitationCommand> default_excitation_grid(int sine_count = 5);

// ---------------------------------------------------------------------------
// Trajectories

struct ResponseTrajectory {
  std::vector<double> time;      // s, monotone
  std::vector<double> command;   // rad
  std::vector<double> measured;  // rad

  void validate() const;
  void save_csv(const std::string& path) const;
  static ResponseTrajectory load_csv(const std::string& path);
};

// Negative squared L2 distance between the measured sequences; the sim
// trajectory is linearly resampled onto the reference time grid when the
// grids differ.
double response_score(const ResponseTrajectory& reference,
                      const ResponseTrajectory& simulated);

// ---------------------------------------------------------------------------
// Reference joint simulator

struct JointParams {
  double stiffness = 6.0;      // N*m/rad
  double damping = 0.12;       // N*m*s/rad
  double velocity_limit = 3.0; // rad/s
};

struct JointSimConfig {
  double inertia = 5e-3;  // kg*m^2
  double initial_position = 0.0;
  double initial_velocity = 0.0;
  int latency_samples = 0;  // optional fixed command latency
};

// Integrates qdd = (k (cmd - q) - d qd) / I semi-implicitly at the command
// rate, with the velocity clamped to the limit.
ResponseTrajectory simulate_joint(const JointParams& params,
                                  const CommandSeries& commands,
                                  const JointSimConfig& sim = {});

// ---------------------------------------------------------------------------
// CMA-ES (minimization)

struct CmaConfig {
  int population = 0;  // 0 selects 4 + floor(3 ln n)
  VecXd initial_mean;
  double initial_sigma = 0.0;  // 0 selects 0.3 * mean box width
  VecXd lower_bounds, upper_bounds;
  int max_generations = 200;
  double target_fitness = -std::numeric_limits<double>::infinity();
  int resample_attempts = 10;  // box handling before clipping
  std::uint64_t seed = 1;

  void validate() const;
};

struct CmaResult {
  VecXd best_parameters;
  double best_fitness = std::numeric_limits<double>::infinity();
  std::vector<double> history;  // best-so-far per generation (non-increasing)
  int generations = 0;
  int nan_evaluations = 0;
  bool boundary_hit = false;  // optimum within 1e-3 of a box face
  double covariance_condition = 1.0;
};

CmaResult cma_es_minimize(const std::function<double(const VecXd&)>& objective,
                          const CmaConfig& config);

// ---------------------------------------------------------------------------
// Identification

struct JointReference {
  // One entry per excitation: the command series and the reference response.
  std::vector<CommandSeries> commands;
  std::vector<ResponseTrajectory> responses;
};

struct IdentifiedJoint {
  JointParams params;
  double fitness = 0.0;  // total response score at the optimum (<= 0)
  bool boundary_hit = false;
};

struct IdentifyOptions {
  JointSimConfig sim;
  CmaConfig search;           // bounds in (k, d, vlim) order
  // Default bounds when unset: x[0.1, 10] around this nominal.
  JointParams nominal;
};

// Per-joint black-box search maximizing the total response score.
std::vector<IdentifiedJoint> identify_dynamics(
    const std::vector<JointReference>& joints, const IdentifyOptions& options);

}  // namespace reorient::sysid
