// SPDX-License-Identifier: Apache-2.0
#include "reorient/commands.hpp"

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "reorient/io.hpp"

namespace reorient::cli {

namespace {

#ifndef REORIENT_BUILD_ID
#define REORIENT_BUILD_ID "unknown"
#endif

std::string resolve_run_root(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env_root = std::getenv("REORIENT_RUN_ROOT")) {
    return env_root;
  }
  return "runs";
}

// Every run directory records how to reproduce it.
std::string setup_run_dir(const GlobalConfig& config, const std::string& root,
                          const std::string& name,
                          const std::vector<std::string>& args) {
  const std::string dir = io::make_run_directory(root, name);
  save_config(config, dir + "/effective_config.json");
  nlohmann::json info;
  info["seed"] = config.seed;
  info["build_id"] = REORIENT_BUILD_ID;
  info["argv"] = args;
  io::write_text_file(dir + "/run_info.json", info.dump(2) + "\n");
  return dir;
}

struct Bundle {
  std::shared_ptr<cloud::KinematicChain> chain;
  std::shared_ptr<env::ObjectModel> object;
};

Bundle make_bundle(const GlobalConfig& config, const std::string& object_name) {
  Bundle bundle;
  bundle.chain = std::make_shared<cloud::KinematicChain>(
      cloud::make_hand_chain(config.env.episode.fingers,
                             config.env.points_per_link));
  Rng object_rng(config.seed ^ 0xfeedface12345678ULL);
  bundle.object = std::make_shared<env::ObjectModel>(env::make_object(
      object_name.empty() ? config.env.object : object_name,
      config.env.object_cloud_points, object_rng));
  return bundle;
}

std::vector<std::unique_ptr<env::Environment>> build_envs(
    const GlobalConfig& config, const Bundle& bundle, int count) {
  std::vector<std::unique_ptr<env::Environment>> envs;
  envs.reserve(count);
  for (int i = 0; i < count; ++i) {
    envs.push_back(env::make_environment(config.env_kind, config.env,
                                         bundle.chain, bundle.object));
  }
  return envs;
}

env::StudentObsConfig observation_config(const GlobalConfig& config,
                                         bool rendered, bool augment) {
  env::StudentObsConfig obs = config.dagger.observation;
  obs.mode = rendered ? env::StudentObsMode::kRendered
                      : env::StudentObsMode::kSynthetic;
  obs.augment = augment;
  obs.camera = env::default_student_camera(obs.image_width, obs.image_height);
  return obs;
}

// ---------------------------------------------------------------------------
// train-teacher

int cmd_train_teacher(const GlobalConfig& config, const std::string& run_root,
                      const std::vector<std::string>& args) {
  const std::string dir = setup_run_dir(config, run_root, "train-teacher", args);
  std::cout << "run directory: " << dir << std::endl;

  const Bundle bundle = make_bundle(config, "");
  Rng init_rng(config.seed);
  policy::TeacherPolicy teacher(config.teacher_config(), init_rng);
  learn::PpoTrainer trainer(&teacher, config.ppo,
                            build_envs(config, bundle, config.ppo.env_count),
                            config.seed ^ 0x51ed1e5);

  io::CsvWriter log(dir + "/training.csv",
                    {"update", "mean_reward", "actor_loss", "value_loss",
                     "clip_fraction", "approx_kl", "episodes", "successes"});
  io::JsonlWriter events(dir + "/events.jsonl");
  events.write({{"event", "train_teacher_start"},
                {"updates", config.ppo.updates}});

  for (int update = 0; update < config.ppo.updates; ++update) {
    const auto batch = trainer.collect_rollout();
    const auto stats = trainer.update(batch);
    log.row_numeric({double(update), batch.mean_reward, stats.actor_loss,
                     stats.value_loss, stats.clip_fraction, stats.approx_kl,
                     double(batch.episodes_finished),
                     double(batch.successes)});
    if (config.checkpoint_every > 0 &&
        (update + 1) % config.checkpoint_every == 0) {
      trainer.save_state(dir + "/trainer_state.ckpt");
      policy::save_teacher(teacher, dir + "/teacher.ckpt");
      events.write({{"event", "checkpoint"}, {"update", update + 1}});
    }
  }
  log.flush();
  policy::save_teacher(teacher, dir + "/teacher.ckpt");
  const double success = trainer.evaluate(config.ppo_eval_episodes,
                                          config.seed ^ 0xe7a1);
  events.write({{"event", "train_teacher_end"}, {"eval_success", success}});
  io::write_text_file(dir + "/eval_success.txt",
                      io::format_double(success) + "\n");
  std::cout << "teacher checkpoint: " << dir << "/teacher.ckpt (eval success "
            << success << ")" << std::endl;
  return 0;
}

// ---------------------------------------------------------------------------
// pretrain-stage0

int cmd_pretrain_stage0(const GlobalConfig& config, const std::string& run_root,
                        const std::vector<std::string>& args) {
  const std::string dir = setup_run_dir(config, run_root, "pretrain-stage0", args);
  std::cout << "run directory: " << dir << std::endl;

  const Bundle bundle = make_bundle(config, "");
  std::vector<std::shared_ptr<const env::ObjectModel>> library;
  Rng lib_rng(config.seed ^ 0x0b1ec7);
  for (const auto& name : env::object_library_names()) {
    library.push_back(std::make_shared<env::ObjectModel>(
        env::make_object(name, config.env.object_cloud_points, lib_rng)));
  }
  learn::Stage0Config stage0 = config.stage0;
  stage0.categories = int(library.size());

  Rng data_rng(config.seed ^ 0xda7a);
  std::vector<learn::Stage0Sample> train_set, holdout;
  const int holdout_count =
      std::max(1, int(config.stage0_samples * config.stage0_holdout_fraction));
  for (int i = 0; i < config.stage0_samples; ++i) {
    auto sample =
        learn::stage0_generate_scene(data_rng, *bundle.chain, library, stage0);
    if (i < holdout_count) {
      holdout.push_back(std::move(sample));
    } else {
      train_set.push_back(std::move(sample));
    }
  }

  learn::Stage0Trainer trainer(stage0, int(bundle.chain->joint_count()),
                               config.seed ^ 0x57a6e0);
  io::CsvWriter log(dir + "/stage0.csv",
                    {"epoch", "train_total", "train_category", "train_distance",
                     "train_joints", "holdout_total", "holdout_mae"});
  for (int epoch = 0; epoch < config.stage0_epochs; ++epoch) {
    const auto train_losses = trainer.train_epoch(train_set);
    const auto holdout_losses = trainer.evaluate(holdout);
    const double mae = trainer.distance_mae(holdout);
    log.row_numeric({double(epoch), train_losses.total, train_losses.category,
                     train_losses.distance, train_losses.joints,
                     holdout_losses.total, mae});
  }
  trainer.save(dir + "/stage0_encoder.ckpt");
  const double final_mae = trainer.distance_mae(holdout);
  io::write_text_file(dir + "/holdout_mae.txt",
                      io::format_double(final_mae) + "\n");
  std::cout << "stage0 encoder: " << dir << "/stage0_encoder.ckpt"
            << " (holdout distance MAE " << final_mae << ")" << std::endl;
  return 0;
}

// ---------------------------------------------------------------------------
// train-student

int cmd_train_student(const GlobalConfig& config, const std::string& run_root,
                      int stage, const std::string& teacher_path,
                      const std::string& init_path,
                      const std::string& encoder_path,
                      const std::vector<std::string>& args) {
  if (stage != 1 && stage != 2) {
    throw ConfigError("train-student: stage must be 1 or 2");
  }
  if (stage == 2 && init_path.empty()) {
    throw ConfigError(
        "train-student: stage 2 requires --init with a stage-1 checkpoint");
  }
  if (config.dagger_teacher == "checkpoint" && teacher_path.empty()) {
    throw ConfigError("train-student: --teacher checkpoint required (or set "
                      "learn.dagger.teacher to \"geodesic\")");
  }

  const std::string dir = setup_run_dir(
      config, run_root, "train-student-stage" + std::to_string(stage), args);
  std::cout << "run directory: " << dir << std::endl;

  const Bundle bundle = make_bundle(config, "");

  policy::StudentPolicy student = [&] {
    if (stage == 2) {
      auto loaded = policy::load_student(init_path);
      const auto ck = nn::Checkpoint::load(init_path);
      if (ck.meta.value("stage", 0) < 1) {
        throw ConfigError(
            "train-student: --init checkpoint does not come from stage 1");
      }
      return loaded;
    }
    Rng init_rng(config.seed ^ 0x57);
    policy::StudentPolicy fresh(config.student, init_rng);
    if (!encoder_path.empty()) {
      const auto ck = nn::Checkpoint::load(encoder_path);
      Rng tmp(0);
      policy::VoxelEncoder pretrained(config.student.bounds,
                                      config.student.conv_channels,
                                      config.student.feature, tmp,
                                      "student.encoder");
      nn::load_params(ck, pretrained.params());
      learn::initialize_student_encoder(fresh, pretrained);
    }
    return fresh;
  }();

  learn::TeacherFn teacher_fn;
  std::shared_ptr<policy::TeacherPolicy> teacher;
  if (config.dagger_teacher == "geodesic") {
    teacher_fn = learn::geodesic_expert_fn();
  } else {
    teacher = std::make_shared<policy::TeacherPolicy>(
        policy::load_teacher(teacher_path));
    teacher_fn = learn::teacher_policy_fn(teacher);
  }

  learn::DaggerConfig dagger = config.dagger;
  dagger.observation = observation_config(config, stage == 2, true);

  learn::DaggerTrainer trainer(
      &student, teacher_fn, dagger,
      build_envs(config, bundle, dagger.env_count),
      config.seed ^ (stage == 1 ? 0xda66e201 : 0xda66e202));

  io::CsvWriter log(dir + "/dagger.csv",
                    {"iteration", "action_loss", "distance_loss", "new_steps",
                     "buffer_steps"});
  io::JsonlWriter events(dir + "/events.jsonl");
  if (stage == 2) {
    events.write({{"event", "stage_transition"}, {"from", 1}, {"to", 2}});
  }
  events.write({{"event", "dagger_start"}, {"stage", stage}});

  const int iterations =
      stage == 1 ? config.dagger_iterations : config.stage2_iterations;
  for (int it = 0; it < iterations; ++it) {
    const auto stats = trainer.iterate();
    log.row_numeric({double(it), stats.action_loss, stats.distance_loss,
                     double(stats.new_steps), double(stats.buffer_steps)});
  }
  log.flush();

  const std::string out = dir + "/student_stage" + std::to_string(stage) + ".ckpt";
  policy::save_student(student, out, {{"stage", stage}});
  events.write({{"event", "dagger_end"}, {"stage", stage}});
  std::cout << "student checkpoint: " << out << std::endl;
  return 0;
}

// ---------------------------------------------------------------------------
// sysid

int cmd_sysid(const GlobalConfig& config, const std::string& run_root,
              const std::vector<std::string>& reference_files,
              const std::string& planted_spec,
              const std::vector<std::string>& args) {
  const std::string dir = setup_run_dir(config, run_root, "sysid", args);
  std::cout << "run directory: " << dir << std::endl;

  sysid::IdentifyOptions options = config.sysid_options;
  options.search.seed = config.seed ^ 0xc3a;

  sysid::JointReference reference;
  if (!planted_spec.empty()) {
    // Demo/verification mode: synthesize the reference from planted values.
    sysid::JointParams planted;
    if (std::sscanf(planted_spec.c_str(), "%lf,%lf,%lf", &planted.stiffness,
                    &planted.damping, &planted.velocity_limit) != 3) {
      throw ConfigError("sysid: --planted expects \"k,d,vlim\"");
    }
    int index = 0;
    for (const auto& excitation :
         sysid::default_excitation_grid(config.sysid_sine_count)) {
      const auto commands = sysid::generate_excitation(
          excitation, config.sysid_joint_lower, config.sysid_joint_upper);
      reference.commands.push_back(commands);
      reference.responses.push_back(
          sysid::simulate_joint(planted, commands, options.sim));
      reference.responses.back().save_csv(
          dir + "/reference_" + std::to_string(index++) + ".csv");
    }
  } else {
    if (reference_files.empty()) {
      throw ConfigError("sysid: provide --reference CSV files or --planted");
    }
    for (const auto& file : reference_files) {
      const auto trajectory = sysid::ResponseTrajectory::load_csv(file);
      sysid::CommandSeries commands;
      commands.time = trajectory.time;
      commands.command = trajectory.command;
      reference.commands.push_back(std::move(commands));
      reference.responses.push_back(trajectory);
    }
  }

  const auto identified = sysid::identify_dynamics({reference}, options);
  nlohmann::json out;
  out["joints"] = nlohmann::json::array();
  for (const auto& joint : identified) {
    out["joints"].push_back({{"stiffness", joint.params.stiffness},
                             {"damping", joint.params.damping},
                             {"velocity_limit", joint.params.velocity_limit},
                             {"fitness", joint.fitness},
                             {"boundary_hit", joint.boundary_hit}});
  }
  io::write_text_file(dir + "/identified_params.json", out.dump(2) + "\n");
  std::cout << "identified parameters: " << dir << "/identified_params.json"
            << std::endl;
  std::cout << out.dump(2) << std::endl;
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalPolicy {
  std::function<Eigen::VectorXd(env::Environment&, const Eigen::VectorXd&)>
      act;
  // Student extras: distance prediction drives the stopping rule.
  bool has_distance_head = false;
  std::function<void()> reset;
  std::function<double()> predicted_distance;
};

EvalPolicy make_eval_policy(const GlobalConfig& config,
                            const std::string& policy_kind,
                            const std::string& checkpoint_path) {
  EvalPolicy out;
  out.reset = [] {};
  if (policy_kind == "geodesic") {
    if (config.env_kind != "direct_rotation") {
      throw ConfigError("eval: the geodesic policy needs direct_rotation");
    }
    out.act = [](env::Environment& e, const Eigen::VectorXd&) {
      return dynamic_cast<env::DirectRotationEnv&>(e).expert_action();
    };
    return out;
  }
  if (checkpoint_path.empty()) {
    throw ConfigError("eval: --checkpoint required unless --policy geodesic");
  }
  const auto ck = nn::Checkpoint::load(checkpoint_path);
  const std::string kind = ck.meta.value("kind", "");
  if (kind == "teacher") {
    auto teacher = std::make_shared<policy::TeacherPolicy>(
        policy::load_teacher(checkpoint_path));
    out.act = [teacher](env::Environment& e, const Eigen::VectorXd& prev) {
      const Eigen::VectorXd obs =
          env::teacher_observation(e.state(), e.config().episode.fingers);
      const learn::MatXf x = teacher->stack_input(
          obs.cast<float>().eval(), prev.cast<float>().eval());
      return Eigen::VectorXd(teacher->actor_forward(x).col(0).cast<double>());
    };
    return out;
  }
  if (kind == "student") {
    auto student = std::make_shared<policy::StudentPolicy>(
        policy::load_student(checkpoint_path));
    auto hidden = std::make_shared<learn::MatXf>(student->initial_hidden(1));
    auto obs_rng = std::make_shared<Rng>(config.seed ^ 0x0b5e7);
    auto last_distance = std::make_shared<double>(M_PI);
    auto obs_config = std::make_shared<env::StudentObsConfig>();
    out.reset = [student, hidden] { *hidden = student->initial_hidden(1); };
    out.has_distance_head = true;
    out.predicted_distance = [last_distance] { return *last_distance; };
    const GlobalConfig cfg = config;
    out.act = [student, hidden, obs_rng, last_distance, cfg](
                  env::Environment& e, const Eigen::VectorXd& prev) {
      env::StudentObsConfig obs = cfg.dagger.observation;
      obs.mode = env::StudentObsMode::kRendered;
      obs.augment = false;
      obs.camera = env::default_student_camera(obs.image_width, obs.image_height);
      const auto cells =
          learn::observe_cells(e, obs, student->config(), *obs_rng);
      const learn::MatXf occ =
          learn::occupancy_from_cells(cells.scene, student->config().bounds);
      learn::MatXf goal_occ;
      if (student->config().separate_goal_encoder) {
        goal_occ = learn::occupancy_from_cells(cells.goal,
                                               student->config().goal_bounds);
      }
      const auto step = student->step(occ, prev.cast<float>().eval(), *hidden,
                                      goal_occ);
      *hidden = step.hidden;
      *last_distance = double(step.distance[0]);
      return Eigen::VectorXd(step.action.col(0).cast<double>());
    };
    return out;
  }
  throw ConfigError("eval: unsupported checkpoint kind \"" + kind + "\"");
}

}  // namespace

EvalArtifacts run_eval(const GlobalConfig& config, const std::string& run_dir,
                       const std::string& policy_kind,
                       const std::string& checkpoint_path, int episodes,
                       const std::string& object_name) {
  const Bundle bundle = make_bundle(config, object_name);
  auto envs = build_envs(config, bundle, 1);
  auto& env = *envs[0];
  EvalPolicy policy = make_eval_policy(config, policy_kind, checkpoint_path);

  const auto symmetric_error = [&](const env::EnvState& state) {
    const double plain =
        so3::rotation_distance(state.object_orientation, state.goal_orientation);
    if (!bundle.object->symmetry) return plain;
    return so3::symmetric_min_distance(state.object_orientation,
                                       state.goal_orientation,
                                       *bundle.object->symmetry);
  };

  Rng rng(config.seed);
  std::vector<metrics::EpisodeRecord> records;
  records.reserve(episodes);
  const double dt = config.env.episode.control_period;

  for (int ep = 0; ep < episodes; ++ep) {
    env.reset(rng);
    policy.reset();
    policy::ActionSmoother smoother(config.action_smoothing_alpha);
    smoother.reset(env.action_size());
    Eigen::VectorXd prev = Eigen::VectorXd::Zero(env.action_size());

    metrics::EpisodeRecord record;
    record.object = bundle.object->name;
    record.initial_distance = symmetric_error(env.state());

    int steps = 0;
    while (true) {
      const Eigen::VectorXd action = policy.act(env, prev);
      // Deployment stopping rule from the distance head.
      if (policy.has_distance_head &&
          reward::should_stop(policy.predicted_distance(), action,
                              config.env.episode.thresholds)) {
        record.final_error = symmetric_error(env.state());
        record.outcome =
            record.final_error < config.summary.threshold_low
                ? metrics::Outcome::kSuccess
                : metrics::Outcome::kOrientationError;
        break;
      }
      env.set_raw_action(action);
      const auto result = env.step(smoother.smooth(action));
      prev = action;
      ++steps;
      if (result.done) {
        record.final_error = symmetric_error(env.state());
        switch (result.termination) {
          case env::StepResult::Termination::kSuccess:
            record.outcome = metrics::Outcome::kSuccess;
            break;
          case env::StepResult::Termination::kPushedAway:
          case env::StepResult::Termination::kDropped:
            record.outcome = metrics::Outcome::kObjectFalls;
            break;
          default:
            record.outcome = metrics::Outcome::kTimeOut;
        }
        break;
      }
    }
    record.elapsed_time = steps * dt;
    records.push_back(record);
  }

  EvalArtifacts artifacts;
  artifacts.records_path = run_dir + "/records.jsonl";
  metrics::save_records_jsonl(records, artifacts.records_path);

  metrics::SummaryConfig summary_config = config.summary;
  summary_config.seed = config.seed ^ 0x5u;
  const auto report = metrics::summarize(records, summary_config);
  artifacts.report_csv_path = run_dir + "/report.csv";
  metrics::save_report_csv(report, artifacts.report_csv_path);
  artifacts.report_json_path = run_dir + "/report.json";
  io::write_text_file(artifacts.report_json_path,
                      metrics::report_to_json(report).dump(2) + "\n");

  std::vector<double> errors;
  for (const auto& r : records) errors.push_back(r.final_error);
  artifacts.ecdf_svg_path = run_dir + "/ecdf.svg";
  metrics::save_ecdf_svg(metrics::Ecdf(errors), artifacts.ecdf_svg_path);
  artifacts.success_rate_04 =
      metrics::success_rate(errors, summary_config.threshold_low);
  double sum = 0.0;
  for (double e : errors) sum += e;
  artifacts.mean_error = sum / double(errors.size());
  return artifacts;
}

namespace {

int cmd_eval(const GlobalConfig& config, const std::string& run_root,
             const std::string& policy_kind, const std::string& checkpoint,
             int episodes, const std::string& object_name,
             const std::vector<std::string>& args) {
  const std::string dir = setup_run_dir(config, run_root, "eval", args);
  std::cout << "run directory: " << dir << std::endl;
  const auto artifacts = run_eval(
      config, dir, policy_kind, checkpoint,
      episodes > 0 ? episodes : config.eval_episodes, object_name);
  std::cout << "records: " << artifacts.records_path << "\n"
            << "report:  " << artifacts.report_csv_path << "\n"
            << "success rate (<= 0.4 rad): " << artifacts.success_rate_04
            << std::endl;
  return 0;
}

int cmd_report(const GlobalConfig& config, const std::string& run_root,
               const std::string& records_path,
               const std::vector<std::string>& args) {
  const std::string dir = setup_run_dir(config, run_root, "report", args);
  const auto records = metrics::load_records_jsonl(records_path);
  metrics::SummaryConfig summary_config = config.summary;
  summary_config.seed = config.seed ^ 0x5u;
  const auto report = metrics::summarize(records, summary_config);
  metrics::save_report_csv(report, dir + "/report.csv");
  io::write_text_file(dir + "/report.json",
                      metrics::report_to_json(report).dump(2) + "\n");
  std::vector<double> errors;
  for (const auto& r : records) errors.push_back(r.final_error);
  metrics::save_ecdf_svg(metrics::Ecdf(errors), dir + "/ecdf.svg");
  std::cout << "report: " << dir << "/report.csv" << std::endl;
  return 0;
}

nlohmann::json patch_json(nlohmann::json base, const std::string& dotted_path,
                          const std::string& value) {
  nlohmann::json* node = &base;
  std::size_t start = 0;
  std::vector<std::string> parts;
  while (true) {
    const auto dot = dotted_path.find('.', start);
    if (dot == std::string::npos) {
      parts.push_back(dotted_path.substr(start));
      break;
    }
    parts.push_back(dotted_path.substr(start, dot - start));
    start = dot + 1;
  }
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    node = &(*node)[parts[i]];
  }
  (*node)[parts.back()] = nlohmann::json::parse(value, nullptr, false).is_discarded()
                              ? nlohmann::json(value)
                              : nlohmann::json::parse(value);
  return base;
}

int cmd_sweep(const GlobalConfig& base_config, const std::string& run_root,
              const std::string& param, const std::string& values_csv,
              const std::vector<std::string>& args) {
  if (param.empty() || values_csv.empty()) {
    throw ConfigError("sweep: --param and --values are required");
  }
  const std::string dir =
      setup_run_dir(base_config, run_root, "sweep", args);
  std::cout << "run directory: " << dir << std::endl;

  std::vector<std::string> values;
  std::size_t start = 0;
  while (true) {
    const auto comma = values_csv.find(',', start);
    values.push_back(values_csv.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }

  io::CsvWriter grid(dir + "/sweep.csv",
                     {"value", "eval_success_04", "mean_error",
                      "train_success"});
  const nlohmann::json base_json = config_to_json(base_config);
  for (const auto& value : values) {
    const auto patched = patch_json(base_json, param, value);
    GlobalConfig config = config_from_json(patched);
    const std::string sub_dir = dir + "/value_" + value;
    std::filesystem::create_directories(sub_dir);
    save_config(config, sub_dir + "/effective_config.json");

    // Short teacher training followed by a greedy evaluation.
    const Bundle bundle = make_bundle(config, "");
    Rng init_rng(config.seed);
    policy::TeacherPolicy teacher(config.teacher_config(), init_rng);
    learn::PpoTrainer trainer(&teacher, config.ppo,
                              build_envs(config, bundle, config.ppo.env_count),
                              config.seed ^ 0x51ed1e5);
    for (int update = 0; update < config.ppo.updates; ++update) {
      trainer.update(trainer.collect_rollout());
    }
    const double train_success =
        trainer.evaluate(config.ppo_eval_episodes, config.seed ^ 0xe7a1);
    policy::save_teacher(teacher, sub_dir + "/teacher.ckpt");
    const auto artifacts =
        run_eval(config, sub_dir, "", sub_dir + "/teacher.ckpt",
                 config.eval_episodes, "");
    grid.row({value, io::format_double(artifacts.success_rate_04),
              io::format_double(artifacts.mean_error),
              io::format_double(train_success)});
  }
  std::cout << "sweep grid: " << dir << "/sweep.csv" << std::endl;
  return 0;
}

}  // namespace

RoundtripReport checkpoint_roundtrip(const std::string& path) {
  RoundtripReport report;
  const auto ck = nn::Checkpoint::load(path);
  report.kind = ck.meta.value("kind", "");
  if (report.kind == "teacher") {
    auto teacher = policy::load_teacher(path);
    const auto in = ck.get_matrix("__probe_in");
    const auto mean = teacher.actor_forward(in);
    const auto value = teacher.critic_forward(in);
    report.ok = (mean == ck.get_matrix("__probe_mean")) &&
                (value == ck.get_matrix("__probe_value"));
    report.detail = report.ok ? "probe outputs bitwise identical"
                              : "probe outputs differ";
    return report;
  }
  if (report.kind == "student") {
    auto student = policy::load_student(path);
    const auto occ = ck.get_matrix("__probe_in");
    learn::MatXf goal;
    if (ck.contains("__probe_goal_in")) goal = ck.get_matrix("__probe_goal_in");
    const learn::MatXf prev =
        learn::MatXf::Zero(student.config().action, occ.cols());
    const auto out = student.step(occ, prev, student.initial_hidden(int(occ.cols())), goal);
    report.ok = (out.action == ck.get_matrix("__probe_action")) &&
                (out.hidden == ck.get_matrix("__probe_hidden"));
    report.detail = report.ok ? "probe outputs bitwise identical"
                              : "probe outputs differ";
    return report;
  }
  throw std::runtime_error("verify-checkpoint: unsupported kind \"" +
                           report.kind + "\"");
}

int run_command(const std::vector<std::string>& args) {
  CLI::App app{"desk-scale in-hand reorientation toolkit"};
  app.require_subcommand(1);

  std::string config_path, run_root_flag;
  app.add_option("--config", config_path, "JSON configuration file");
  app.add_option("--run-root", run_root_flag,
                 "run directory root (default $REORIENT_RUN_ROOT or ./runs)");

  auto* train_teacher = app.add_subcommand("train-teacher", "PPO teacher training");

  auto* pretrain = app.add_subcommand("pretrain-stage0",
                                      "supervised encoder pretraining");

  auto* train_student =
      app.add_subcommand("train-student", "DAGGER student distillation");
  int stage = 1;
  std::string teacher_path, init_path, encoder_path;
  train_student->add_option("--stage", stage, "1 (synthetic) or 2 (rendered)")
      ->required();
  train_student->add_option("--teacher", teacher_path, "teacher checkpoint");
  train_student->add_option("--init", init_path, "stage-1 student checkpoint");
  train_student->add_option("--encoder", encoder_path,
                            "stage-0 encoder checkpoint");

  auto* sysid_cmd = app.add_subcommand("sysid", "dynamics identification");
  std::vector<std::string> reference_files;
  std::string planted_spec;
  sysid_cmd->add_option("--reference", reference_files,
                        "response CSV (t,command,response); repeatable");
  sysid_cmd->add_option("--planted", planted_spec,
                        "\"k,d,vlim\": synthesize the reference internally");

  auto* eval_cmd = app.add_subcommand("eval", "run episodes and report");
  std::string checkpoint, policy_kind, object_name;
  int episodes = 0;
  eval_cmd->add_option("--checkpoint", checkpoint, "policy checkpoint");
  eval_cmd->add_option("--policy", policy_kind,
                       "built-in policy (geodesic) instead of a checkpoint");
  eval_cmd->add_option("--episodes", episodes, "episode count");
  eval_cmd->add_option("--object", object_name, "object name or mesh path");

  auto* report_cmd = app.add_subcommand("report", "summarize an episode log");
  std::string records_path;
  report_cmd->add_option("--records", records_path, "records JSONL")->required();

  auto* sweep_cmd = app.add_subcommand("sweep", "parameter sweep");
  std::string sweep_param, sweep_values;
  sweep_cmd->add_option("--param", sweep_param, "dotted config path")->required();
  sweep_cmd->add_option("--values", sweep_values, "comma-separated values")
      ->required();

  auto* verify_cmd =
      app.add_subcommand("verify-checkpoint", "bitwise probe verification");
  std::string verify_path;
  verify_cmd->add_option("path", verify_path, "checkpoint file")->required();

  try {
    std::vector<const char*> argv;
    argv.push_back("reorient");
    for (const auto& a : args) argv.push_back(a.c_str());
    app.parse(int(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    GlobalConfig config;
    if (!config_path.empty()) {
      config = parse_config(config_path);
    }
    const std::string run_root = resolve_run_root(run_root_flag);

    if (*train_teacher) return cmd_train_teacher(config, run_root, args);
    if (*pretrain) return cmd_pretrain_stage0(config, run_root, args);
    if (*train_student) {
      return cmd_train_student(config, run_root, stage, teacher_path,
                               init_path, encoder_path, args);
    }
    if (*sysid_cmd) {
      return cmd_sysid(config, run_root, reference_files, planted_spec, args);
    }
    if (*eval_cmd) {
      return cmd_eval(config, run_root, policy_kind, checkpoint, episodes,
                      object_name, args);
    }
    if (*report_cmd) return cmd_report(config, run_root, records_path, args);
    if (*sweep_cmd) {
      return cmd_sweep(config, run_root, sweep_param, sweep_values, args);
    }
    if (*verify_cmd) {
      const auto result = checkpoint_roundtrip(verify_path);
      std::cout << (result.ok ? "OK" : "MISMATCH") << ": " << result.kind
                << " checkpoint, " << result.detail << std::endl;
      return result.ok ? 0 : 3;
    }
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << std::endl;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 3;
  }
}

}  // namespace reorient::cli
