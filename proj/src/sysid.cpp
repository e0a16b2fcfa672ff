// SPDX-License-Identifier: Apache-2.0
#include "reorient/sysid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace reorient::sysid {

void ExcitationCommand::validate() const {
  if (!(amplitude_scale > 0.0 && amplitude_scale <= 1.0)) {
    throw std::invalid_argument(
        "ExcitationCommand: amplitude scale must be in (0, 1]");
  }
  if (!(duration > 0.0) || !(sample_rate > 0.0)) {
    throw std::invalid_argument(
        "ExcitationCommand: duration and sample rate must be positive");
  }
}

CommandSeries generate_excitation(const ExcitationCommand& command,
                                  double lower_limit, double upper_limit) {
  command.validate();
  if (!(lower_limit < upper_limit)) {
    throw std::invalid_argument("generate_excitation: bad joint limits");
  }
  const double limit = std::min(std::abs(lower_limit), std::abs(upper_limit));
  const double amplitude = command.amplitude_scale * limit;
  CommandSeries series;
  if (command.kind == ExcitationKind::kSine &&
      (command.frequency < 0.05 || command.frequency > 1.5)) {
    series.frequency_flagged = true;
    std::cerr << "generate_excitation: sine frequency " << command.frequency
              << " Hz outside the calibrated band [0.05, 1.5]" << std::endl;
  }
  const int samples = int(command.duration * command.sample_rate) + 1;
  series.time.resize(samples);
  series.command.resize(samples);
  for (int i = 0; i < samples; ++i) {
    const double t = i / command.sample_rate;
    series.time[i] = t;
    series.command[i] =
        command.kind == ExcitationKind::kStep
            ? amplitude
            : amplitude * std::sin(2.0 * M_PI * command.frequency * t);
  }
  return series;
}

std::vector<ExcitationCommand> default_excitation_grid(int sine_count) {
  std::vector<ExcitationCommand> grid;
  ExcitationCommand step;
  step.kind = ExcitationKind::kStep;
  step.amplitude_scale = 0.6;
  grid.push_back(step);
  for (int i = 0; i < sine_count; ++i) {
    ExcitationCommand sine;
    sine.kind = ExcitationKind::kSine;
    sine.amplitude_scale = 0.8;
    sine.frequency =
        0.05 + (1.5 - 0.05) * (sine_count > 1 ? double(i) / (sine_count - 1) : 0.0);
    grid.push_back(sine);
  }
  return grid;
}

void ResponseTrajectory::validate() const {
  if (time.size() != command.size() || time.size() != measured.size()) {
    throw std::invalid_argument("ResponseTrajectory: length mismatch");
  }
  for (std::size_t i = 1; i < time.size(); ++i) {
    if (!(time[i] > time[i - 1])) {
      throw std::invalid_argument("ResponseTrajectory: time must be monotone");
    }
  }
}

void ResponseTrajectory::save_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("ResponseTrajectory: cannot write " + path);
  out << "t,command,response\n";
  out.precision(12);
  for (std::size_t i = 0; i < time.size(); ++i) {
    out << time[i] << "," << command[i] << "," << measured[i] << "\n";
  }
}

ResponseTrajectory ResponseTrajectory::load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("ResponseTrajectory: cannot open " + path);
  ResponseTrajectory out;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    double values[3];
    for (int i = 0; i < 3; ++i) {
      if (!std::getline(ss, cell, ',')) {
        throw std::runtime_error("ResponseTrajectory: malformed row in " + path);
      }
      values[i] = std::stod(cell);
    }
    out.time.push_back(values[0]);
    out.command.push_back(values[1]);
    out.measured.push_back(values[2]);
  }
  out.validate();
  return out;
}

namespace {

double interpolate(const std::vector<double>& t, const std::vector<double>& y,
                   double at) {
  if (at <= t.front()) return y.front();
  if (at >= t.back()) return y.back();
  const auto it = std::upper_bound(t.begin(), t.end(), at);
  const std::size_t hi = std::size_t(it - t.begin());
  const std::size_t lo = hi - 1;
  const double alpha = (at - t[lo]) / (t[hi] - t[lo]);
  return y[lo] + alpha * (y[hi] - y[lo]);
}

}  // namespace

double response_score(const ResponseTrajectory& reference,
                      const ResponseTrajectory& simulated) {
  reference.validate();
  simulated.validate();
  if (reference.time.empty() || simulated.time.empty()) {
    throw std::invalid_argument("response_score: empty trajectory");
  }
  double sum = 0.0;
  const bool same_grid =
      reference.time.size() == simulated.time.size() &&
      std::equal(reference.time.begin(), reference.time.end(),
                 simulated.time.begin());
  for (std::size_t i = 0; i < reference.time.size(); ++i) {
    const double sim_value =
        same_grid ? simulated.measured[i]
                  : interpolate(simulated.time, simulated.measured,
                                reference.time[i]);
    const double diff = reference.measured[i] - sim_value;
    sum += diff * diff;
  }
  return -sum;
}

ResponseTrajectory simulate_joint(const JointParams& params,
                                  const CommandSeries& commands,
                                  const JointSimConfig& sim) {
  if (!(sim.inertia > 0.0)) {
    throw std::invalid_argument("simulate_joint: inertia must be positive");
  }
  if (!(params.stiffness > 0.0) || !(params.damping > 0.0) ||
      !(params.velocity_limit > 0.0)) {
    throw std::invalid_argument("simulate_joint: parameters must be positive");
  }
  ResponseTrajectory out;
  const std::size_t n = commands.time.size();
  out.time = commands.time;
  out.command = commands.command;
  out.measured.resize(n);
  double q = sim.initial_position;
  double qd = sim.initial_velocity;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t cmd_index =
        i >= std::size_t(sim.latency_samples) ? i - sim.latency_samples : 0;
    const double cmd = commands.command[cmd_index];
    const double dt =
        i + 1 < n ? commands.time[i + 1] - commands.time[i]
                  : (i > 0 ? commands.time[i] - commands.time[i - 1] : 0.0);
    out.measured[i] = q;
    if (dt <= 0.0) continue;
    // Implicit damping keeps the discretization stable for any d*dt/I.
    qd = (qd + params.stiffness * (cmd - q) / sim.inertia * dt) /
         (1.0 + params.damping / sim.inertia * dt);
    qd = std::clamp(qd, -params.velocity_limit, params.velocity_limit);
    q += qd * dt;
    if (!std::isfinite(q) || !std::isfinite(qd)) {
      throw std::runtime_error("simulate_joint: state diverged");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// CMA-ES

void CmaConfig::validate() const {
  const Eigen::Index n = initial_mean.size();
  if (n == 0) throw std::invalid_argument("CmaConfig: initial mean required");
  if (population != 0 && population < 4) {
    throw std::invalid_argument("CmaConfig: population must be >= 4");
  }
  if (lower_bounds.size() != n || upper_bounds.size() != n) {
    throw std::invalid_argument("CmaConfig: bounds must match the dimension");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(lower_bounds[i] < upper_bounds[i])) {
      throw std::invalid_argument("CmaConfig: lower bound must be below upper");
    }
  }
  if (max_generations <= 0) {
    throw std::invalid_argument("CmaConfig: max generations must be positive");
  }
}

CmaResult cma_es_minimize(const std::function<double(const VecXd&)>& objective,
                          const CmaConfig& config) {
  config.validate();
  const int n = int(config.initial_mean.size());
  const int lambda =
      config.population > 0 ? config.population : 4 + int(3.0 * std::log(n));
  const int mu = lambda / 2;

  // Recombination weights.
  VecXd weights(mu);
  for (int i = 0; i < mu; ++i) {
    weights[i] = std::log(mu + 0.5) - std::log(i + 1.0);
  }
  weights /= weights.sum();
  const double mu_eff = 1.0 / weights.squaredNorm();

  // Adaptation constants (Hansen's defaults).
  const double c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0);
  const double d_sigma =
      1.0 + 2.0 * std::max(0.0, std::sqrt((mu_eff - 1.0) / (n + 1.0)) - 1.0) +
      c_sigma;
  const double c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n);
  const double c_1 = 2.0 / ((n + 1.3) * (n + 1.3) + mu_eff);
  const double c_mu =
      std::min(1.0 - c_1, 2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) /
                              ((n + 2.0) * (n + 2.0) + mu_eff));
  const double chi_n =
      std::sqrt(double(n)) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));

  VecXd mean = config.initial_mean;
  const VecXd box_width = config.upper_bounds - config.lower_bounds;
  double sigma = config.initial_sigma > 0.0
                     ? config.initial_sigma
                     : 0.3 * box_width.mean();
  Eigen::MatrixXd covariance = Eigen::MatrixXd::Identity(n, n);
  VecXd path_sigma = VecXd::Zero(n);
  VecXd path_c = VecXd::Zero(n);
  Rng rng(config.seed);

  CmaResult result;
  result.best_parameters = mean;

  std::vector<VecXd> candidates(lambda), displacements(lambda);
  std::vector<double> fitness(lambda);
  std::vector<int> order(lambda);

  for (int gen = 0; gen < config.max_generations; ++gen) {
    // Eigendecomposition for sampling and the inverse square root.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(covariance);
    const VecXd eigenvalues = eig.eigenvalues().cwiseMax(1e-20);
    const Eigen::MatrixXd& basis = eig.eigenvectors();
    const VecXd scales = eigenvalues.cwiseSqrt();
    result.covariance_condition =
        eigenvalues.maxCoeff() / std::max(eigenvalues.minCoeff(), 1e-300);

    for (int k = 0; k < lambda; ++k) {
      VecXd x(n);
      bool feasible = false;
      for (int attempt = 0; attempt <= config.resample_attempts; ++attempt) {
        VecXd z(n);
        for (int i = 0; i < n; ++i) z[i] = rng.normal();
        x = mean + sigma * (basis * scales.cwiseProduct(z).eval());
        feasible = true;
        for (int i = 0; i < n; ++i) {
          if (x[i] < config.lower_bounds[i] || x[i] > config.upper_bounds[i]) {
            feasible = false;
            break;
          }
        }
        if (feasible) break;
      }
      if (!feasible) {
        for (int i = 0; i < n; ++i) {
          x[i] = std::clamp(x[i], config.lower_bounds[i],
                            config.upper_bounds[i]);
        }
      }
      candidates[k] = x;
      displacements[k] = (x - mean) / sigma;
      double f = objective(x);
      if (!std::isfinite(f)) {
        ++result.nan_evaluations;
        f = std::numeric_limits<double>::infinity();
      }
      fitness[k] = f;
    }

    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return fitness[a] < fitness[b]; });

    if (fitness[order[0]] < result.best_fitness) {
      result.best_fitness = fitness[order[0]];
      result.best_parameters = candidates[order[0]];
    }
    result.history.push_back(result.best_fitness);
    result.generations = gen + 1;

    // Recombination.
    VecXd mean_displacement = VecXd::Zero(n);
    for (int i = 0; i < mu; ++i) {
      mean_displacement += weights[i] * displacements[order[i]];
    }
    mean += sigma * mean_displacement;

    // Step-size path uses C^(-1/2) * displacement.
    const VecXd whitened =
        basis * (basis.transpose() * mean_displacement)
                    .cwiseQuotient(scales)
                    .eval();
    path_sigma = (1.0 - c_sigma) * path_sigma +
                 std::sqrt(c_sigma * (2.0 - c_sigma) * mu_eff) * whitened;

    const double hs_threshold =
        (1.4 + 2.0 / (n + 1.0)) * chi_n *
        std::sqrt(1.0 - std::pow(1.0 - c_sigma, 2.0 * (gen + 1)));
    const bool hs = path_sigma.norm() < hs_threshold;

    path_c = (1.0 - c_c) * path_c +
             (hs ? std::sqrt(c_c * (2.0 - c_c) * mu_eff) : 0.0) *
                 mean_displacement;

    Eigen::MatrixXd rank_mu = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < mu; ++i) {
      rank_mu +=
          weights[i] * displacements[order[i]] * displacements[order[i]].transpose();
    }
    covariance =
        (1.0 - c_1 - c_mu) * covariance +
        c_1 * (path_c * path_c.transpose() +
               (hs ? 0.0 : c_c * (2.0 - c_c)) * covariance) +
        c_mu * rank_mu;
    covariance = 0.5 * (covariance + covariance.transpose());

    sigma *= std::exp((c_sigma / d_sigma) * (path_sigma.norm() / chi_n - 1.0));

    if (result.best_fitness <= config.target_fitness) break;
  }

  for (int i = 0; i < n; ++i) {
    const double span = config.upper_bounds[i] - config.lower_bounds[i];
    if (result.best_parameters[i] - config.lower_bounds[i] < 1e-3 * span ||
        config.upper_bounds[i] - result.best_parameters[i] < 1e-3 * span) {
      result.boundary_hit = true;
    }
  }
  return result;
}

std::vector<IdentifiedJoint> identify_dynamics(
    const std::vector<JointReference>& joints, const IdentifyOptions& options) {
  std::vector<IdentifiedJoint> identified;
  identified.reserve(joints.size());
  int joint_index = 0;
  for (const auto& joint : joints) {
    if (joint.commands.size() != joint.responses.size() ||
        joint.commands.empty()) {
      throw std::invalid_argument(
          "identify_dynamics: each joint needs matching command/response sets");
    }

    CmaConfig search = options.search;
    if (search.initial_mean.size() == 0) {
      search.initial_mean = VecXd(3);
      search.initial_mean << options.nominal.stiffness, options.nominal.damping,
          options.nominal.velocity_limit;
      search.lower_bounds = 0.1 * search.initial_mean;
      search.upper_bounds = 10.0 * search.initial_mean;
    }
    // Joints get decorrelated but deterministic seeds.
    search.seed = options.search.seed + std::uint64_t(joint_index) * 7919;

    const auto objective = [&](const VecXd& x) {
      JointParams params{x[0], x[1], x[2]};
      double total = 0.0;
      for (std::size_t e = 0; e < joint.commands.size(); ++e) {
        const auto sim = simulate_joint(params, joint.commands[e], options.sim);
        total += response_score(joint.responses[e], sim);
      }
      return -total;  // maximize the score
    };

    const auto result = cma_es_minimize(objective, search);
    IdentifiedJoint out;
    out.params = {result.best_parameters[0], result.best_parameters[1],
                  result.best_parameters[2]};
    out.fitness = -result.best_fitness;
    out.boundary_hit = result.boundary_hit;
    if (out.boundary_hit) {
      std::cerr << "identify_dynamics: joint " << joint_index
                << " optimum sits at the search boundary" << std::endl;
    }
    identified.push_back(out);
    ++joint_index;
  }
  return identified;
}

}  // namespace reorient::sysid
