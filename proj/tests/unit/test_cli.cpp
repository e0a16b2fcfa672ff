#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "reorient/commands.hpp"
#include "reorient/config.hpp"
#include "reorient/io.hpp"

using namespace reorient;
using namespace reorient::cli;
namespace fs = std::filesystem;

TEST_SUITE_BEGIN("cli");

namespace {

std::string write_temp_config(const std::string& name,
                              const std::string& content) {
  const std::string path = name;
  std::ofstream out(path);
  out << content;
  return path;
}

std::string find_run_file(const std::string& root, const std::string& file) {
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_regular_file() && entry.path().filename() == file) {
      return entry.path().string();
    }
  }
  throw std::runtime_error("file not found under " + root + ": " + file);
}

}  // namespace

TEST_CASE("empty config yields the published defaults") {
  const auto path = write_temp_config("cli_empty.json", "{}");
  const auto config = parse_config(path);
  std::remove(path.c_str());

  CHECK(config.env.reward.c1 == 800.0);
  CHECK(config.env.reward.c2 == 1.0);
  CHECK(config.env.reward.c3 == -1.0);
  CHECK(config.env.reward.c4 == -20.0);
  CHECK(config.env.reward.c5 == -100.0);
  CHECK(config.env.reward.eps_theta == 0.4);
  CHECK(config.env.reward.p_bar == 0.15);
  CHECK(config.env.reward.p_bar_z == 0.16);
  CHECK(config.env.episode.thresholds.qdot_bar == 0.25);
  CHECK(config.env.episode.thresholds.v_bar == 0.04);
  CHECK(config.env.episode.thresholds.omega_bar == 0.5);
  CHECK(config.env.episode.horizon == 180);
  CHECK(config.ppo.gamma == 0.99);
  CHECK(config.ppo.gae_lambda == 0.95);
  CHECK(config.ppo.clip_range == 0.1);
  CHECK(config.ppo.epochs == 12);
  CHECK(config.ppo.rollout_steps == 8);
  CHECK(config.ppo.actor_lr == 3e-4);
  CHECK(config.ppo.critic_lr == 1e-3);
  CHECK(config.action_smoothing_alpha == 0.8);
  CHECK(config.env.disturbance.coefficient == 15.0);
  CHECK(config.env.disturbance.probability == 0.2);
  CHECK(config.env.ranges.object_mass_lo == 0.009);
  CHECK(config.env.ranges.object_mass_hi == 0.324);
  CHECK(config.dagger.rollout_steps == 80);
  CHECK(config.dagger.learning_rate == 3e-4);
  CHECK(config.env.object_cloud_points == 500);
  CHECK(config.dagger.observation.rendered_points == 6000);
  CHECK(config.dagger.observation.voxel_resolution == 0.005);
  CHECK(config.summary.n_boot == 2000);
  CHECK(config.teacher_hidden == std::vector<int>{512, 256, 256});
}

TEST_CASE("unknown keys are rejected by name") {
  const auto path = write_temp_config(
      "cli_unknown.json", R"({"reward": {"c9": 1.0}})");
  CHECK_THROWS_WITH_AS(parse_config(path), doctest::Contains("reward.c9"),
                       ConfigError);
  std::remove(path.c_str());

  const auto top = write_temp_config("cli_unknown2.json", R"({"rewards": {}})");
  CHECK_THROWS_WITH_AS(parse_config(top), doctest::Contains("rewards"),
                       ConfigError);
  std::remove(top.c_str());
}

TEST_CASE("invariant violations name the offending key") {
  const auto path =
      write_temp_config("cli_bad_c1.json", R"({"reward": {"c1": -5}})");
  CHECK_THROWS_AS(parse_config(path), ConfigError);
  std::remove(path.c_str());

  const auto bad_type = write_temp_config(
      "cli_bad_type.json", R"({"reward": {"c1": "eight hundred"}})");
  CHECK_THROWS_WITH_AS(parse_config(bad_type), doctest::Contains("reward.c1"),
                       ConfigError);
  std::remove(bad_type.c_str());
}

TEST_CASE("air-mode reward terms in table mode are a config error") {
  const auto path = write_temp_config(
      "cli_c6_table.json",
      R"({"environment": {"mode": "table"}, "reward": {"c6": -1.0}})");
  CHECK_THROWS_AS(parse_config(path), ConfigError);
  std::remove(path.c_str());

  // The same terms are accepted in air mode.
  const auto air = write_temp_config(
      "cli_c6_air.json",
      R"({"environment": {"mode": "air"}, "reward": {"c6": -1.0, "c7": -2.0}})");
  const auto config = parse_config(air);
  CHECK(config.env.reward.c6 == -1.0);
  std::remove(air.c_str());
}

TEST_CASE("config save/load round trip is value identical") {
  const auto path = write_temp_config(
      "cli_roundtrip.json",
      R"({"seed": 9, "environment": {"mode": "air", "fingers": 3},
          "reward": {"c2": 2.5}, "learn": {"ppo": {"gamma": 0.98}}})");
  const auto config = parse_config(path);
  std::remove(path.c_str());

  save_config(config, "cli_roundtrip_echo.json");
  const auto reloaded = parse_config("cli_roundtrip_echo.json");
  std::remove("cli_roundtrip_echo.json");
  CHECK(config_to_json(config) == config_to_json(reloaded));
  CHECK(reloaded.env.episode.fingers == 3);
  CHECK(reloaded.env.reward.c2 == 2.5);
  CHECK(reloaded.ppo.gamma == 0.98);
}

TEST_CASE("unknown subcommand exits nonzero") {
  CHECK(run_command({"frobnicate"}) != 0);
  CHECK(run_command({}) != 0);
}

TEST_CASE("eval runs are byte identical under a fixed seed") {
  const auto config = write_temp_config("cli_eval_config.json", R"({
    "seed": 42,
    "environment": {"kind": "direct_rotation", "object": "lblock",
                     "object_cloud_points": 60, "points_per_link": 20},
    "metrics": {"n_boot": 200}
  })");

  for (const char* root : {"cli_eval_run_a", "cli_eval_run_b"}) {
    fs::remove_all(root);
    const int status =
        run_command({"--config", config, "--run-root", root, "eval",
                     "--policy", "geodesic", "--episodes", "20"});
    REQUIRE(status == 0);
  }
  const auto csv_a = io::read_text_file(find_run_file("cli_eval_run_a", "report.csv"));
  const auto csv_b = io::read_text_file(find_run_file("cli_eval_run_b", "report.csv"));
  CHECK(csv_a == csv_b);
  const auto rec_a =
      io::read_text_file(find_run_file("cli_eval_run_a", "records.jsonl"));
  const auto rec_b =
      io::read_text_file(find_run_file("cli_eval_run_b", "records.jsonl"));
  CHECK(rec_a == rec_b);

  // The run directory is self-contained.
  CHECK_NOTHROW(find_run_file("cli_eval_run_a", "effective_config.json"));
  CHECK_NOTHROW(find_run_file("cli_eval_run_a", "run_info.json"));
  CHECK_NOTHROW(find_run_file("cli_eval_run_a", "ecdf.svg"));

  fs::remove_all("cli_eval_run_a");
  fs::remove_all("cli_eval_run_b");
  std::remove(config.c_str());
}

TEST_CASE("report command consumes an episode log") {
  fs::remove_all("cli_report_run");
  metrics::save_records_jsonl(
      {{"a", 0.1, 3.0, metrics::Outcome::kSuccess, 1.0},
       {"a", 0.6, 15.0, metrics::Outcome::kTimeOut, 2.0},
       {"b", 0.2, 5.0, metrics::Outcome::kSuccess, 1.0}},
      "cli_report_records.jsonl");
  const auto config = write_temp_config("cli_report_config.json",
                                        R"({"metrics": {"n_boot": 100}})");
  const int status =
      run_command({"--config", config, "--run-root", "cli_report_run",
                   "report", "--records", "cli_report_records.jsonl"});
  CHECK(status == 0);
  const auto csv = io::read_text_file(find_run_file("cli_report_run", "report.csv"));
  CHECK(csv.find("pooled") != std::string::npos);
  fs::remove_all("cli_report_run");
  std::remove("cli_report_records.jsonl");
  std::remove(config.c_str());
}

TEST_CASE("sysid command identifies planted parameters") {
  fs::remove_all("cli_sysid_run");
  const auto config = write_temp_config("cli_sysid_config.json", R"({
    "seed": 3,
    "sysid": {"cma": {"max_generations": 160}, "sine_count": 4}
  })");
  const int status =
      run_command({"--config", config, "--run-root", "cli_sysid_run", "sysid",
                   "--planted", "8.0,0.2,2.0"});
  REQUIRE(status == 0);
  const auto out = nlohmann::json::parse(
      io::read_text_file(find_run_file("cli_sysid_run", "identified_params.json")));
  const auto& joint = out.at("joints").at(0);
  CHECK(std::abs(joint.at("stiffness").get<double>() - 8.0) / 8.0 < 0.1);
  CHECK(std::abs(joint.at("damping").get<double>() - 0.2) / 0.2 < 0.1);
  fs::remove_all("cli_sysid_run");
  std::remove(config.c_str());
}

TEST_CASE("checkpoint roundtrip verification via the cli") {
  policy::TeacherConfig tc;
  tc.observation = 97;
  tc.action = 12;
  tc.hidden = {16};
  Rng rng(6001);
  policy::TeacherPolicy teacher(tc, rng);
  policy::save_teacher(teacher, "cli_verify.ckpt");

  const auto report = checkpoint_roundtrip("cli_verify.ckpt");
  CHECK(report.ok);
  CHECK(report.kind == "teacher");
  CHECK(run_command({"verify-checkpoint", "cli_verify.ckpt"}) == 0);

  // Corrupt the file: verification must fail loudly.
  {
    std::fstream io("cli_verify.ckpt",
                    std::ios::binary | std::ios::in | std::ios::out);
    io.seekp(-12, std::ios::end);
    const float garbage = 1234.5f;
    io.write(reinterpret_cast<const char*>(&garbage), sizeof(garbage));
  }
  const auto tampered = checkpoint_roundtrip("cli_verify.ckpt");
  CHECK(!tampered.ok);
  CHECK(run_command({"verify-checkpoint", "cli_verify.ckpt"}) == 3);
  std::remove("cli_verify.ckpt");
}

TEST_CASE("missing config file is a configuration error (exit 2)") {
  CHECK(run_command({"--config", "no_such_file.json", "eval", "--policy",
                     "geodesic"}) == 2);
}

TEST_SUITE_END();
