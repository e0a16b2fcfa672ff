#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "reorient/sysid.hpp"

using namespace reorient;
using namespace reorient::sysid;

TEST_SUITE_BEGIN("sysid");

TEST_CASE("excitation signals follow their definitions") {
  ExcitationCommand sine;
  sine.kind = ExcitationKind::kSine;
  sine.frequency = 0.25;
  sine.amplitude_scale = 1.0;
  sine.duration = 2.0;
  sine.sample_rate = 100.0;
  const auto series = generate_excitation(sine, -1.0, 1.0);
  CHECK(!series.frequency_flagged);
  // sin(2 pi 0.25 * 1) = sin(pi/2) = 1 at t = 1 s.
  CHECK(series.command[100] == doctest::Approx(1.0));
  CHECK(series.command[0] == doctest::Approx(0.0));

  ExcitationCommand step;
  step.kind = ExcitationKind::kStep;
  step.amplitude_scale = 0.5;
  const auto flat = generate_excitation(step, -2.0, 2.0);
  for (double c : flat.command) CHECK(c == doctest::Approx(1.0));

  // Amplitude scales with the joint limit (smaller bound magnitude).
  const auto clipped = generate_excitation(step, -0.5, 2.0);
  CHECK(clipped.command[0] == doctest::Approx(0.25));
}

TEST_CASE("excitation grid spans the published band and flags outliers") {
  const auto grid = default_excitation_grid(5);
  REQUIRE(grid.size() == 6);
  CHECK(grid[0].kind == ExcitationKind::kStep);
  CHECK(grid[1].frequency == doctest::Approx(0.05));
  CHECK(grid[5].frequency == doctest::Approx(1.5));

  ExcitationCommand outside;
  outside.kind = ExcitationKind::kSine;
  outside.frequency = 3.0;
  const auto series = generate_excitation(outside, -1.0, 1.0);
  CHECK(series.frequency_flagged);  // allowed but flagged
}

TEST_CASE("response_score closed forms") {
  ResponseTrajectory a;
  for (int i = 0; i < 50; ++i) {
    a.time.push_back(i * 0.01);
    a.command.push_back(0.0);
    a.measured.push_back(std::sin(i * 0.1));
  }
  CHECK(response_score(a, a) == 0.0);

  // Constant offset delta over n samples scores -n delta^2.
  ResponseTrajectory b = a;
  const double delta = 0.05;
  for (auto& m : b.measured) m += delta;
  CHECK(response_score(a, b) ==
        doctest::Approx(-50 * delta * delta).epsilon(1e-12));
  CHECK(response_score(a, b) < 0.0);

  // Shifting both trajectories together leaves the score unchanged.
  ResponseTrajectory a2 = a, b2 = b;
  for (auto& m : a2.measured) m += 0.7;
  for (auto& m : b2.measured) m += 0.7;
  CHECK(response_score(a2, b2) == doctest::Approx(response_score(a, b)));
}

TEST_CASE("response_score resamples mismatched grids") {
  ResponseTrajectory coarse, fine;
  for (int i = 0; i <= 10; ++i) {
    coarse.time.push_back(i * 0.1);
    coarse.command.push_back(0.0);
    coarse.measured.push_back(i * 0.1);  // line y = t
  }
  for (int i = 0; i <= 100; ++i) {
    fine.time.push_back(i * 0.01);
    fine.command.push_back(0.0);
    fine.measured.push_back(i * 0.01);
  }
  // Same underlying line: score ~ 0 despite different grids.
  CHECK(response_score(coarse, fine) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("simulate_joint equilibrium and velocity clamp") {
  CommandSeries zero;
  for (int i = 0; i < 200; ++i) {
    zero.time.push_back(i * 0.01);
    zero.command.push_back(0.0);
  }
  JointParams params;
  const auto rest = simulate_joint(params, zero);
  for (double q : rest.measured) CHECK(q == 0.0);

  // A big step: velocity must never exceed the limit.
  CommandSeries step = zero;
  for (auto& c : step.command) c = 1.5;
  JointParams fast;
  fast.stiffness = 50.0;
  fast.damping = 0.05;
  fast.velocity_limit = 2.0;
  const auto response = simulate_joint(fast, step);
  for (std::size_t i = 1; i < response.measured.size(); ++i) {
    const double v = (response.measured[i] - response.measured[i - 1]) / 0.01;
    CHECK(std::abs(v) <= 2.0 + 1e-9);
  }
}

TEST_CASE("overdamped step response is monotone without overshoot") {
  CommandSeries step;
  for (int i = 0; i < 1000; ++i) {
    step.time.push_back(i * 0.005);
    step.command.push_back(1.0);
  }
  // zeta = d / (2 sqrt(k I)) with I = 5e-3: d = 2.0, k = 8 -> zeta ~ 5.
  JointParams over;
  over.stiffness = 8.0;
  over.damping = 2.0;
  over.velocity_limit = 50.0;
  const auto response = simulate_joint(over, step);
  double prev = -1e9;
  for (double q : response.measured) {
    CHECK(q >= prev - 1e-12);  // monotone
    CHECK(q <= 1.0 + 1e-9);    // no overshoot
    prev = q;
  }
  CHECK(response.measured.back() == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("trajectory csv round trip") {
  ResponseTrajectory t;
  for (int i = 0; i < 20; ++i) {
    t.time.push_back(i * 0.02);
    t.command.push_back(std::sin(i * 0.3));
    t.measured.push_back(std::cos(i * 0.3));
  }
  t.save_csv("sysid_test.csv");
  const auto loaded = ResponseTrajectory::load_csv("sysid_test.csv");
  REQUIRE(loaded.time.size() == t.time.size());
  for (std::size_t i = 0; i < t.time.size(); ++i) {
    CHECK(loaded.measured[i] == doctest::Approx(t.measured[i]).epsilon(1e-9));
  }
  std::remove("sysid_test.csv");
}

TEST_CASE("cma-es minimizes the 3d sphere to 1e-6") {
  CmaConfig config;
  config.initial_mean = VecXd::Constant(3, 2.0);
  config.lower_bounds = VecXd::Constant(3, -5.0);
  config.upper_bounds = VecXd::Constant(3, 5.0);
  config.max_generations = 200;
  config.seed = 7;
  const auto result = cma_es_minimize(
      [](const VecXd& x) { return x.squaredNorm(); }, config);
  CHECK(result.best_parameters.norm() <= 1e-6);

  // Best-so-far history is non-increasing (elitist bookkeeping).
  for (std::size_t i = 1; i < result.history.size(); ++i) {
    CHECK(result.history[i] <= result.history[i - 1]);
  }
  // All iterates respect the box.
  CHECK(!result.boundary_hit);
}

TEST_CASE("cma-es reaches the rosenbrock optimum to 1e-3") {
  CmaConfig config;
  config.initial_mean = VecXd::Zero(2);
  config.lower_bounds = VecXd::Constant(2, -3.0);
  config.upper_bounds = VecXd::Constant(2, 3.0);
  config.max_generations = 400;
  config.seed = 11;
  const auto result = cma_es_minimize(
      [](const VecXd& x) {
        const double a = 1.0 - x[0];
        const double b = x[1] - x[0] * x[0];
        return a * a + 100.0 * b * b;
      },
      config);
  CHECK(std::abs(result.best_parameters[0] - 1.0) <= 1e-3);
  CHECK(std::abs(result.best_parameters[1] - 1.0) <= 1e-3);
}

TEST_CASE("cma-es is deterministic and respects bounds") {
  CmaConfig config;
  config.initial_mean = VecXd::Constant(2, 0.9);
  config.lower_bounds = VecXd::Constant(2, 0.5);
  config.upper_bounds = VecXd::Constant(2, 1.0);
  config.max_generations = 60;
  config.seed = 13;
  // Optimum outside the box at the origin: the search must pin the boundary.
  const auto objective = [](const VecXd& x) { return x.squaredNorm(); };
  const auto a = cma_es_minimize(objective, config);
  const auto b = cma_es_minimize(objective, config);
  CHECK(a.best_fitness == b.best_fitness);
  CHECK(a.best_parameters == b.best_parameters);
  CHECK(a.best_parameters.minCoeff() >= 0.5 - 1e-12);
  CHECK(a.boundary_hit);
}

TEST_CASE("cma-es flags nan objectives and keeps going") {
  CmaConfig config;
  config.initial_mean = VecXd::Constant(2, 1.0);
  config.lower_bounds = VecXd::Constant(2, -4.0);
  config.upper_bounds = VecXd::Constant(2, 4.0);
  config.max_generations = 80;
  config.seed = 17;
  const auto result = cma_es_minimize(
      [](const VecXd& x) {
        if (x[0] < 0.0) return std::nan("");
        return (x - VecXd::Constant(2, 2.0)).squaredNorm();
      },
      config);
  CHECK(result.nan_evaluations > 0);
  CHECK((result.best_parameters - VecXd::Constant(2, 2.0)).norm() <= 1e-4);
}

TEST_CASE("cma-es covariance stays conditioned on a quadratic") {
  CmaConfig config;
  config.initial_mean = VecXd::Constant(4, 1.0);
  config.lower_bounds = VecXd::Constant(4, -10.0);
  config.upper_bounds = VecXd::Constant(4, 10.0);
  config.max_generations = 500;
  config.seed = 19;
  const auto result = cma_es_minimize(
      [](const VecXd& x) {
        double f = 0.0;
        for (int i = 0; i < x.size(); ++i) f += (i + 1) * x[i] * x[i];
        return f;
      },
      config);
  CHECK(result.covariance_condition < 1e8);
}

TEST_CASE("planted joint parameters are recovered within 5 percent") {
  const JointParams planted{9.5, 0.21, 1.8};
  JointSimConfig sim;

  JointReference reference;
  for (const auto& excitation : default_excitation_grid(5)) {
    const auto commands = generate_excitation(excitation, -1.57, 1.57);
    reference.commands.push_back(commands);
    reference.responses.push_back(simulate_joint(planted, commands, sim));
  }

  IdentifyOptions options;
  options.sim = sim;
  options.nominal = JointParams{6.0, 0.12, 3.0};
  options.search.seed = 23;
  options.search.max_generations = 120;
  options.search.initial_mean = VecXd(3);
  options.search.initial_mean << 6.0, 0.12, 3.0;
  options.search.lower_bounds = VecXd(3);
  options.search.lower_bounds << 0.6, 0.012, 0.3;
  options.search.upper_bounds = VecXd(3);
  options.search.upper_bounds << 60.0, 1.2, 30.0;

  const auto identified = identify_dynamics({reference}, options);
  REQUIRE(identified.size() == 1);
  CHECK(std::abs(identified[0].params.stiffness - planted.stiffness) /
            planted.stiffness <=
        0.05);
  CHECK(std::abs(identified[0].params.damping - planted.damping) /
            planted.damping <=
        0.05);
  CHECK(std::abs(identified[0].params.velocity_limit - planted.velocity_limit) /
            planted.velocity_limit <=
        0.05);
  // Self-match at the optimum scores ~0.
  CHECK(identified[0].fitness <= 0.0);
  CHECK(identified[0].fitness >= -1e-3);
}

TEST_CASE("identification is seed-deterministic end to end") {
  const JointParams planted{5.0, 0.3, 2.5};
  JointReference reference;
  for (const auto& excitation : default_excitation_grid(3)) {
    const auto commands = generate_excitation(excitation, -1.0, 1.0);
    reference.commands.push_back(commands);
    reference.responses.push_back(simulate_joint(planted, commands));
  }
  IdentifyOptions options;
  options.nominal = JointParams{6.0, 0.12, 3.0};
  options.search.seed = 29;
  options.search.max_generations = 40;
  const auto a = identify_dynamics({reference}, options);
  const auto b = identify_dynamics({reference}, options);
  CHECK(a[0].params.stiffness == b[0].params.stiffness);
  CHECK(a[0].params.damping == b[0].params.damping);
  CHECK(a[0].params.velocity_limit == b[0].params.velocity_limit);
}

TEST_SUITE_END();
