// Criteria 9-11: CMA-ES, metrics statistics, CLI reproducibility.
#include <filesystem>

#include "acceptance.hpp"
#include "reorient/commands.hpp"
#include "reorient/io.hpp"
#include "reorient/metrics.hpp"
#include "reorient/sysid.hpp"

namespace acceptance {

using namespace reorient;

// ---------------------------------------------------------------------------
// 9. CMA-ES benchmarks and planted-parameter identification.

void criterion_09_cma_es() {
  using namespace reorient::sysid;
  {  // Sphere in 3-D to 1e-6 within 200 generations.
    CmaConfig config;
    config.initial_mean = VecXd::Constant(3, 2.0);
    config.lower_bounds = VecXd::Constant(3, -5.0);
    config.upper_bounds = VecXd::Constant(3, 5.0);
    config.max_generations = 200;
    config.seed = 30001;
    const auto result =
        cma_es_minimize([](const VecXd& x) { return x.squaredNorm(); }, config);
    require_le(result.best_parameters.norm(), 1e-6, "sphere optimum distance");
    require_le(result.generations, 200, "sphere generation budget");
    for (std::size_t i = 1; i < result.history.size(); ++i) {
      require_le(result.history[i], result.history[i - 1],
                 "best-so-far must be non-increasing");
    }
  }
  {  // Rosenbrock 2-D to 1e-3 of (1, 1).
    CmaConfig config;
    config.initial_mean = VecXd::Zero(2);
    config.lower_bounds = VecXd::Constant(2, -3.0);
    config.upper_bounds = VecXd::Constant(2, 3.0);
    config.max_generations = 500;
    config.seed = 30002;
    const auto result = cma_es_minimize(
        [](const VecXd& x) {
          const double a = 1.0 - x[0];
          const double b = x[1] - x[0] * x[0];
          return a * a + 100.0 * b * b;
        },
        config);
    require_le(std::abs(result.best_parameters[0] - 1.0), 1e-3, "rosenbrock x");
    require_le(std::abs(result.best_parameters[1] - 1.0), 1e-3, "rosenbrock y");
  }
  {  // Planted joint parameters from a step plus 5 sines spanning the band.
    const JointParams planted{9.5, 0.21, 1.8};
    JointReference reference;
    const auto grid = default_excitation_grid(5);
    require(grid.size() == 6, "one step plus five sines");
    require_close(grid[1].frequency, 0.05, 1e-12, "band lower edge");
    require_close(grid[5].frequency, 1.5, 1e-12, "band upper edge");
    for (const auto& excitation : grid) {
      const auto commands = generate_excitation(excitation, -1.57, 1.57);
      reference.commands.push_back(commands);
      reference.responses.push_back(simulate_joint(planted, commands));
    }
    IdentifyOptions options;
    options.nominal = JointParams{6.0, 0.12, 3.0};
    options.search.seed = 30003;
    options.search.max_generations = 150;
    options.search.initial_mean = VecXd(3);
    options.search.initial_mean << 6.0, 0.12, 3.0;
    options.search.lower_bounds = VecXd(3);
    options.search.lower_bounds << 0.6, 0.012, 0.3;
    options.search.upper_bounds = VecXd(3);
    options.search.upper_bounds << 60.0, 1.2, 30.0;
    const auto identified = identify_dynamics({reference}, options);
    require_le(std::abs(identified[0].params.stiffness - planted.stiffness) /
                   planted.stiffness,
               0.05, "stiffness within 5 percent");
    require_le(std::abs(identified[0].params.damping - planted.damping) /
                   planted.damping,
               0.05, "damping within 5 percent");
    require_le(std::abs(identified[0].params.velocity_limit -
                        planted.velocity_limit) /
                   planted.velocity_limit,
               0.05, "velocity limit within 5 percent");
  }
}

// ---------------------------------------------------------------------------
// 10. Metrics: counting oracle, BCa coverage, success-rate fixtures.

void criterion_10_metrics() {
  using namespace reorient::metrics;

  {  // ECDF equals the counting oracle.
    Rng rng(30004);
    std::vector<double> values(400);
    for (auto& v : values) v = rng.uniform(0.0, M_PI);
    const Ecdf ecdf(values);
    for (int i = 0; i < 100; ++i) {
      const double x = rng.uniform(-0.2, M_PI + 0.2);
      int count = 0;
      for (double v : values) {
        if (v <= x) ++count;
      }
      require_close(ecdf(x), double(count) / values.size(), 1e-12,
                    "ecdf counting oracle");
    }
  }

  {  // Success-rate fixtures at the published thresholds.
    require_close(success_rate({0.1, 0.5, 0.3}, 0.4), 2.0 / 3.0, 1e-12,
                  "success rate at 0.4");
    require_close(success_rate({0.1, 0.5, 0.3}, 0.8), 1.0, 1e-12,
                  "success rate at 0.8");
    require_close(success_rate({0.39, 0.41, 0.79, 0.81}, 0.4), 0.25, 1e-12,
                  "boundary fixture at 0.4");
    require_close(success_rate({0.39, 0.41, 0.79, 0.81}, 0.8), 0.75, 1e-12,
                  "boundary fixture at 0.8");
  }

  {  // Monte-Carlo coverage of the BCa interval for the median:
     // nominal 95%, n = 100, n_boot = 2000, 2000 replications, true
     // distribution Exp(1) with median ln 2.
    const double true_median = std::log(2.0);
    Rng rng(30005);
    int covered = 0;
    const int replications = 2000;
    const Statistic med = [](const std::vector<double>& v) {
      return metrics::median(v);
    };
    std::vector<double> sample(100);
    for (int rep = 0; rep < replications; ++rep) {
      for (auto& v : sample) v = -std::log(1.0 - rng.uniform());
      const auto interval = bca_ci(sample, med, 0.95, 2000, rng);
      if (interval.low <= true_median && true_median <= interval.high) {
        ++covered;
      }
    }
    const double coverage = double(covered) / replications;
    require_ge(coverage, 0.93, "BCa coverage of the median");
    require_le(coverage, 0.97, "BCa coverage of the median");
  }
}

// ---------------------------------------------------------------------------
// 11. Two identical eval runs produce byte-identical metric CSVs.

namespace {

std::string find_file(const std::string& root, const std::string& name) {
  for (const auto& entry :
       std::filesystem::recursive_directory_iterator(root)) {
    if (entry.is_regular_file() && entry.path().filename() == name) {
      return entry.path().string();
    }
  }
  throw Failure("missing " + name + " under " + root);
}

}  // namespace

void criterion_11_reproducibility() {
  const std::string config_path = "acceptance_eval_config.json";
  io::write_text_file(config_path, R"({
    "seed": 20230817,
    "environment": {"kind": "direct_rotation", "object": "lblock",
                     "object_cloud_points": 80, "points_per_link": 20},
    "metrics": {"n_boot": 500}
  })");

  for (const char* root : {"acceptance_run_a", "acceptance_run_b"}) {
    std::filesystem::remove_all(root);
    const int status = cli::run_command({"--config", config_path, "--run-root",
                                         root, "eval", "--policy", "geodesic",
                                         "--episodes", "40"});
    require(status == 0, "eval run failed");
  }
  const auto report_a =
      io::read_text_file(find_file("acceptance_run_a", "report.csv"));
  const auto report_b =
      io::read_text_file(find_file("acceptance_run_b", "report.csv"));
  require(report_a == report_b, "report.csv must be byte identical");
  require(!report_a.empty(), "report.csv must not be empty");
  const auto records_a =
      io::read_text_file(find_file("acceptance_run_a", "records.jsonl"));
  const auto records_b =
      io::read_text_file(find_file("acceptance_run_b", "records.jsonl"));
  require(records_a == records_b, "records.jsonl must be byte identical");

  std::filesystem::remove_all("acceptance_run_a");
  std::filesystem::remove_all("acceptance_run_b");
  std::filesystem::remove(config_path);
}

}  // namespace acceptance
