// Acceptance suite: one pass/fail line per criterion. Run all criteria with
// no arguments or a single one with --criterion N.
#include <cstring>
#include <iostream>

#include "acceptance.hpp"

namespace acceptance {
void criterion_01_so3_suite();
void criterion_02_uniform_rotation();
void criterion_03_cloud_pipeline();
void criterion_04_reward_success();
void criterion_05_gradient_checks();
void criterion_06_ppo_sanity();
void criterion_07_dagger_distillation();
void criterion_08_stage0_pretraining();
void criterion_09_cma_es();
void criterion_10_metrics();
void criterion_11_reproducibility();
}  // namespace acceptance

int main(int argc, char** argv) {
  using namespace acceptance;
  std::vector<Criterion> criteria = {
      {1, "so3 suite: metric axioms, double cover, symmetric min distance",
       criterion_01_so3_suite},
      {2, "uniform rotation statistics: mean angle to identity",
       criterion_02_uniform_rotation},
      {3, "cloud pipeline: voxel idempotence, depth round trip, scene oracle",
       criterion_03_cloud_pipeline},
      {4, "reward and success: term fixtures and criterion truth table",
       criterion_04_reward_success},
      {5, "gradient checks: analytic vs central finite differences",
       criterion_05_gradient_checks},
      {6, "ppo sanity: bandit optimum and DirectRotation training",
       criterion_06_ppo_sanity},
      {7, "dagger distillation: student tracks its teacher, stage switch",
       criterion_07_dagger_distillation},
      {8, "stage-0 pretraining: distance MAE on held-out scenes, ablations",
       criterion_08_stage0_pretraining},
      {9, "cma-es: sphere, rosenbrock, planted joint identification",
       criterion_09_cma_es},
      {10, "metrics: ecdf oracle, bca coverage, success-rate fixtures",
       criterion_10_metrics},
      {11, "reproducibility: byte-identical eval runs under a fixed seed",
       criterion_11_reproducibility},
  };

  int selected = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
      selected = std::atoi(argv[i + 1]);
      ++i;
    } else if (std::strcmp(argv[i], "--list") == 0) {
      for (const auto& c : criteria) {
        std::cout << c.id << "\t" << c.name << "\n";
      }
      return 0;
    }
  }

  int failures = 0;
  for (const auto& criterion : criteria) {
    if (selected != 0 && criterion.id != selected) continue;
    const auto start = std::chrono::steady_clock::now();
    std::string failure;
    try {
      criterion.run();
    } catch (const std::exception& e) {
      failure = e.what();
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    char line[512];
    std::snprintf(line, sizeof(line), "[%s] %02d %s (%.1fs)%s%s",
                  failure.empty() ? "PASS" : "FAIL", criterion.id,
                  criterion.name.c_str(), elapsed,
                  failure.empty() ? "" : " -- ", failure.c_str());
    std::cout << line << std::endl;
    if (!failure.empty()) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
