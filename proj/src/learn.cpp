// SPDX-License-Identifier: Apache-2.0
#include "reorient/learn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace reorient::learn {

namespace {

constexpr double kLogTwoPi = 1.8378770664093453;

std::string rng_to_hex(const Rng& rng) {
  std::ostringstream raw(std::ios::binary);
  rng.serialize(raw);
  const std::string bytes = raw.str();
  static const char* digits = "0123456789abcdef";
  std::string hex;
  hex.reserve(bytes.size() * 2);
  for (unsigned char b : bytes) {
    hex.push_back(digits[b >> 4]);
    hex.push_back(digits[b & 0xf]);
  }
  return hex;
}

void rng_from_hex(Rng& rng, const std::string& hex) {
  std::string bytes;
  bytes.reserve(hex.size() / 2);
  for (std::size_t i = 0; i + 1 < hex.size(); i += 2) {
    bytes.push_back(char(std::stoi(hex.substr(i, 2), nullptr, 16)));
  }
  std::istringstream raw(bytes, std::ios::binary);
  rng.deserialize(raw);
}

}  // namespace

void PpoConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0) || !(gae_lambda >= 0.0 && gae_lambda <= 1.0)) {
    throw std::invalid_argument("PpoConfig: gamma and lambda must be in (0, 1]");
  }
  if (!(clip_range > 0.0)) {
    throw std::invalid_argument("PpoConfig: clip range must be positive");
  }
  if (epochs <= 0 || rollout_steps <= 0 || env_count <= 0 || batch_size <= 0) {
    throw std::invalid_argument("PpoConfig: counts must be positive");
  }
  if (!(actor_lr > 0.0) || !(critic_lr > 0.0)) {
    throw std::invalid_argument("PpoConfig: learning rates must be positive");
  }
}

GaeResult compute_gae(const std::vector<double>& rewards,
                      const std::vector<double>& values,
                      const std::vector<bool>& dones, double gamma,
                      double lambda) {
  const std::size_t steps = rewards.size();
  if (values.size() != steps + 1 || dones.size() != steps) {
    throw std::invalid_argument("compute_gae: length mismatch");
  }
  GaeResult out;
  out.advantages.resize(steps);
  out.returns.resize(steps);
  double advantage = 0.0;
  for (std::size_t t = steps; t-- > 0;) {
    const double not_done = dones[t] ? 0.0 : 1.0;
    const double delta =
        rewards[t] + gamma * not_done * values[t + 1] - values[t];
    advantage = delta + gamma * lambda * not_done * advantage;
    out.advantages[t] = advantage;
    out.returns[t] = advantage + values[t];
  }
  return out;
}

// ---------------------------------------------------------------------------
// PPO

PpoTrainer::PpoTrainer(policy::TeacherPolicy* teacher, PpoConfig config,
                       std::vector<std::unique_ptr<env::Environment>> envs,
                       std::uint64_t seed)
    : teacher_(teacher),
      config_(std::move(config)),
      envs_(std::move(envs)),
      actor_adam_(config_.actor_lr),
      critic_adam_(config_.critic_lr),
      rng_(seed) {
  config_.validate();
  if (int(envs_.size()) != config_.env_count) {
    throw std::invalid_argument("PpoTrainer: env count mismatch");
  }
  slots_.resize(envs_.size());
  for (auto& slot : slots_) {
    slot.smoother = policy::ActionSmoother(0.8);
    slot.needs_reset = true;
  }
}

void PpoTrainer::reset_slot(EnvSlot& slot, env::Environment& env) {
  const Eigen::VectorXd obs = env.reset(rng_);
  slot.observation = obs.cast<float>();
  slot.prev_action = VecXf::Zero(env.action_size());
  slot.smoother.reset(env.action_size());
  slot.needs_reset = false;
}

RolloutBatch PpoTrainer::collect_rollout() {
  const int steps = config_.rollout_steps;
  const int envs = config_.env_count;
  const int obs_dim = teacher_->config().observation;
  const int act_dim = teacher_->config().action;
  const int total = steps * envs;

  RolloutBatch batch;
  batch.observations.resize(obs_dim, total);
  batch.prev_actions.resize(act_dim, total);
  batch.actions.resize(act_dim, total);
  batch.log_probs.resize(total);
  std::vector<double> rewards(total);
  std::vector<bool> dones(total);
  MatX<double> values(steps + 1, envs);

  for (int e = 0; e < envs; ++e) {
    if (slots_[e].needs_reset) reset_slot(slots_[e], *envs_[e]);
  }

  const VecXf log_std = teacher_->log_std();
  double reward_sum = 0.0;

  for (int t = 0; t < steps; ++t) {
    MatXf obs(obs_dim, envs), prev(act_dim, envs);
    for (int e = 0; e < envs; ++e) {
      obs.col(e) = slots_[e].observation;
      prev.col(e) = slots_[e].prev_action;
    }
    const MatXf x = teacher_->stack_input(obs, prev);
    const MatXf mean = teacher_->actor_forward(x);
    const MatXf value = teacher_->critic_forward(x);

    for (int e = 0; e < envs; ++e) {
      const int col = t * envs + e;
      VecXf action(act_dim);
      double logp = 0.0;
      for (int j = 0; j < act_dim; ++j) {
        const double std_j = std::exp(double(log_std[j]));
        action[j] = mean(j, e) + float(std_j * rng_.normal());
        // Recompute z from the rounded float action so the first update's
        // ratio is exactly 1.
        const double z = (double(action[j]) - double(mean(j, e))) / std_j;
        logp += -0.5 * z * z - double(log_std[j]) - 0.5 * kLogTwoPi;
      }
      batch.observations.col(col) = slots_[e].observation;
      batch.prev_actions.col(col) = slots_[e].prev_action;
      batch.actions.col(col) = action;
      batch.log_probs[col] = logp;
      values(t, e) = double(value(0, e));

      const Eigen::VectorXd smoothed =
          slots_[e].smoother.smooth(action.cast<double>());
      envs_[e]->set_raw_action(action.cast<double>());
      const auto result = envs_[e]->step(smoothed);
      rewards[col] = result.reward;
      reward_sum += result.reward;
      dones[col] = result.done;
      if (result.done) {
        ++batch.episodes_finished;
        if (result.termination ==
            env::StepResult::Termination::kSuccess) {
          ++batch.successes;
        }
        reset_slot(slots_[e], *envs_[e]);
      } else {
        slots_[e].observation = result.observation.cast<float>();
        slots_[e].prev_action = action;
      }
    }
  }

  // Bootstrap values for the current (post-rollout) observations.
  {
    MatXf obs(obs_dim, envs), prev(act_dim, envs);
    for (int e = 0; e < envs; ++e) {
      obs.col(e) = slots_[e].observation;
      prev.col(e) = slots_[e].prev_action;
    }
    const MatXf value =
        teacher_->critic_forward(teacher_->stack_input(obs, prev));
    for (int e = 0; e < envs; ++e) values(steps, e) = double(value(0, e));
  }

  batch.advantages.resize(total);
  batch.returns.resize(total);
  for (int e = 0; e < envs; ++e) {
    std::vector<double> env_rewards(steps), env_values(steps + 1);
    std::vector<bool> env_dones(steps);
    for (int t = 0; t < steps; ++t) {
      env_rewards[t] = rewards[t * envs + e];
      env_dones[t] = dones[t * envs + e];
      env_values[t] = values(t, e);
    }
    env_values[steps] = values(steps, e);
    const auto gae = compute_gae(env_rewards, env_values, env_dones,
                                 config_.gamma, config_.gae_lambda);
    for (int t = 0; t < steps; ++t) {
      batch.advantages[t * envs + e] = gae.advantages[t];
      batch.returns[t * envs + e] = gae.returns[t];
    }
  }
  batch.mean_reward = reward_sum / total;
  return batch;
}

PpoStats PpoTrainer::update(const RolloutBatch& batch) {
  return ppo_update(*teacher_, batch, config_, actor_adam_, critic_adam_, rng_);
}

PpoStats ppo_update(policy::TeacherPolicy& teacher, const RolloutBatch& batch,
                    const PpoConfig& config, nn::AdamT<float>& actor_adam,
                    nn::AdamT<float>& critic_adam, Rng& rng) {
  const int total = int(batch.log_probs.size());
  const int act_dim = teacher.config().action;

  VecX<double> advantages = batch.advantages;
  if (config.normalize_advantages && total > 1) {
    const double mean = advantages.mean();
    const double var =
        (advantages.array() - mean).square().sum() / double(total);
    const double stddev = std::sqrt(std::max(var, 1e-12));
    advantages = ((advantages.array() - mean) / stddev).matrix();
  }

  PpoStats stats;
  long minibatches = 0;
  std::vector<int> order(total);
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    // Fisher-Yates shuffle with the trainer rng.
    for (int i = total - 1; i > 0; --i) {
      const int j = int(rng.uniform_index(std::uint64_t(i + 1)));
      std::swap(order[i], order[j]);
    }
    for (int start = 0; start < total; start += config.batch_size) {
      const int b = std::min(config.batch_size, total - start);
      MatXf obs(batch.observations.rows(), b), prev(act_dim, b), act(act_dim, b);
      VecX<double> adv(b), ret(b), logp_old(b);
      for (int i = 0; i < b; ++i) {
        const int idx = order[start + i];
        obs.col(i) = batch.observations.col(idx);
        prev.col(i) = batch.prev_actions.col(idx);
        act.col(i) = batch.actions.col(idx);
        adv[i] = advantages[idx];
        ret[i] = batch.returns[idx];
        logp_old[i] = batch.log_probs[idx];
      }

      const MatXf x = teacher.stack_input(obs, prev);
      teacher.zero_grad();

      // Actor.
      const MatXf mean = teacher.actor_forward(x);
      const VecXf log_std = teacher.log_std();
      MatXf dmean = MatXf::Zero(act_dim, b);
      VecXf dlog_std = VecXf::Zero(act_dim);
      double actor_loss = 0.0, kl = 0.0;
      int clipped = 0;
      for (int i = 0; i < b; ++i) {
        double logp = 0.0;
        for (int j = 0; j < act_dim; ++j) {
          const double std_j = std::exp(double(log_std[j]));
          const double z = (double(act(j, i)) - double(mean(j, i))) / std_j;
          logp += -0.5 * z * z - double(log_std[j]) - 0.5 * kLogTwoPi;
        }
        const double ratio = std::exp(logp - logp_old[i]);
        const double lo = 1.0 - config.clip_range;
        const double hi = 1.0 + config.clip_range;
        const double surrogate =
            std::min(ratio * adv[i], std::clamp(ratio, lo, hi) * adv[i]);
        actor_loss -= surrogate / b;
        kl += (logp_old[i] - logp) / b;
        if (std::abs(ratio - 1.0) > config.clip_range) ++clipped;
        const bool flows =
            (adv[i] >= 0.0 && ratio <= hi) || (adv[i] < 0.0 && ratio >= lo);
        if (!flows) continue;
        const double scale = -adv[i] * ratio / b;
        for (int j = 0; j < act_dim; ++j) {
          const double std_j = std::exp(double(log_std[j]));
          const double z = (double(act(j, i)) - double(mean(j, i))) / std_j;
          dmean(j, i) = float(scale * z / std_j);
          dlog_std[j] += float(scale * (z * z - 1.0));
        }
      }
      if (config.entropy_coef > 0.0) {
        // Entropy of a diagonal Gaussian rises with log_std.
        for (int j = 0; j < act_dim; ++j) {
          dlog_std[j] -= float(config.entropy_coef);
        }
      }
      teacher.actor_backward(dmean);
      teacher.accumulate_log_std_grad(dlog_std);
      actor_adam.step(teacher.actor_params());
      teacher.clamp_log_std();

      // Critic (separate pass keeps the two optimizers independent).
      const MatXf value = teacher.critic_forward(x);
      MatXf dvalue(1, b);
      double value_loss = 0.0;
      for (int i = 0; i < b; ++i) {
        const double err = double(value(0, i)) - ret[i];
        value_loss += err * err / b;
        dvalue(0, i) = float(2.0 * err / b);
      }
      teacher.critic_backward(dvalue);
      critic_adam.step(teacher.critic_params());

      if (!std::isfinite(actor_loss) || !std::isfinite(value_loss)) {
        std::ostringstream what;
        what << "ppo_update: non-finite loss (actor " << actor_loss
             << ", value " << value_loss << ") at epoch " << epoch;
        throw std::runtime_error(what.str());
      }

      stats.actor_loss += actor_loss;
      stats.value_loss += value_loss;
      stats.clip_fraction += double(clipped) / b;
      stats.approx_kl += kl;
      ++minibatches;
    }
  }
  const double scale = minibatches > 0 ? 1.0 / double(minibatches) : 0.0;
  stats.actor_loss *= scale;
  stats.value_loss *= scale;
  stats.clip_fraction *= scale;
  stats.approx_kl *= scale;
  stats.entropy = 0.0;
  const VecXf log_std = teacher.log_std();
  for (int j = 0; j < act_dim; ++j) {
    stats.entropy += double(log_std[j]) + 0.5 * (kLogTwoPi + 1.0);
  }
  return stats;
}

double PpoTrainer::evaluate(int episodes, std::uint64_t seed) {
  Rng eval_rng(seed);
  int successes = 0;
  auto& env = *envs_[0];
  for (int ep = 0; ep < episodes; ++ep) {
    Eigen::VectorXd obs = env.reset(eval_rng);
    policy::ActionSmoother smoother(0.8);
    smoother.reset(env.action_size());
    VecXf prev = VecXf::Zero(env.action_size());
    while (true) {
      const MatXf x = teacher_->stack_input(obs.cast<float>(), prev);
      const MatXf mean = teacher_->actor_forward(x);
      const Eigen::VectorXd action = mean.col(0).cast<double>();
      env.set_raw_action(action);
      const auto result = env.step(smoother.smooth(action));
      if (result.done) {
        if (result.termination == env::StepResult::Termination::kSuccess) {
          ++successes;
        }
        break;
      }
      obs = result.observation;
      prev = mean.col(0);
    }
  }
  // The evaluation consumed episode state; force fresh episodes next rollout.
  for (auto& slot : slots_) slot.needs_reset = true;
  return double(successes) / episodes;
}

void PpoTrainer::save_state(const std::string& path) const {
  nn::Checkpoint ck;
  ck.meta["kind"] = "ppo_trainer";
  ck.meta["config"] = policy::teacher_config_to_json(teacher_->config());
  ck.meta["rng"] = rng_to_hex(rng_);
  ck.meta["actor_adam_step"] = actor_adam_.step_count();
  ck.meta["critic_adam_step"] = critic_adam_.step_count();
  auto* self = const_cast<PpoTrainer*>(this);
  nn::store_params(ck, self->teacher_->params());
  std::map<std::string, MatXf> moments;
  nlohmann::json unused;
  actor_adam_.serialize_into(unused, moments);
  for (const auto& [name, m] : moments) ck.put("actor." + name, m);
  moments.clear();
  critic_adam_.serialize_into(unused, moments);
  for (const auto& [name, m] : moments) ck.put("critic." + name, m);
  ck.save(path);
  // Checkpoint boundaries start fresh episodes so a resumed run and the
  // continued run see identical streams.
  for (auto& slot : self->slots_) slot.needs_reset = true;
}

void PpoTrainer::load_state(const std::string& path) {
  const auto ck = nn::Checkpoint::load(path);
  if (ck.meta.value("kind", "") != "ppo_trainer") {
    throw std::runtime_error("load_state: not a PPO trainer checkpoint");
  }
  nn::load_params(ck, teacher_->params());
  rng_from_hex(rng_, ck.meta.at("rng").get<std::string>());
  actor_adam_.set_step_count(ck.meta.at("actor_adam_step").get<std::int64_t>());
  critic_adam_.set_step_count(ck.meta.at("critic_adam_step").get<std::int64_t>());
  for (const auto& name : ck.names()) {
    if (name.rfind("actor.adam.", 0) == 0) {
      actor_adam_.restore_moment(name.substr(6), ck.get_matrix(name));
    } else if (name.rfind("critic.adam.", 0) == 0) {
      critic_adam_.restore_moment(name.substr(7), ck.get_matrix(name));
    }
  }
  for (auto& slot : slots_) slot.needs_reset = true;
}

// ---------------------------------------------------------------------------
// DAGGER

TeacherFn teacher_policy_fn(std::shared_ptr<policy::TeacherPolicy> teacher) {
  return [teacher](const env::Environment& env,
                   const Eigen::VectorXd& prev_action) {
    const Eigen::VectorXd obs =
        env::teacher_observation(env.state(), env.config().episode.fingers);
    const MatXf x = teacher->stack_input(obs.cast<float>().eval(),
                                         prev_action.cast<float>().eval());
    return Eigen::VectorXd(teacher->actor_forward(x).col(0).cast<double>());
  };
}

TeacherFn geodesic_expert_fn() {
  return [](const env::Environment& env, const Eigen::VectorXd&) {
    const auto* direct = dynamic_cast<const env::DirectRotationEnv*>(&env);
    if (!direct) {
      throw std::invalid_argument(
          "geodesic_expert_fn: requires a DirectRotation environment");
    }
    return direct->expert_action();
  };
}

void DaggerConfig::validate() const {
  if (env_count <= 0 || rollout_steps <= 0 || train_steps < 0 ||
      window <= 0 || batch_windows <= 0) {
    throw std::invalid_argument("DaggerConfig: counts must be positive");
  }
  if (!(learning_rate > 0.0)) {
    throw std::invalid_argument("DaggerConfig: learning rate must be positive");
  }
}

void DaggerBuffer::append(DaggerEpisode episode) {
  if (episode.steps.empty()) return;
  total_steps_ += episode.steps.size();
  episodes_.push_back(std::move(episode));
}

std::vector<PackedCell> pack_cells(const std::vector<cloud::VoxelKey>& cells) {
  std::vector<PackedCell> packed;
  packed.reserve(cells.size());
  for (const auto& cell : cells) {
    packed.push_back({std::int16_t(cell.x), std::int16_t(cell.y),
                      std::int16_t(cell.z)});
  }
  return packed;
}

namespace {

template <typename Cell>
MatXf occupancy_impl(const std::vector<Cell>& cells,
                     const policy::VoxelBounds& bounds) {
  MatXf occ = MatXf::Zero(bounds.volume(), 1);
  const int ox = int(std::floor(bounds.origin.x() / bounds.resolution));
  const int oy = int(std::floor(bounds.origin.y() / bounds.resolution));
  const int oz = int(std::floor(bounds.origin.z() / bounds.resolution));
  for (const auto& cell : cells) {
    const int x = int(cell.x) - ox, y = int(cell.y) - oy, z = int(cell.z) - oz;
    if (bounds.contains(x, y, z)) {
      occ(x + bounds.dims[0] * (y + bounds.dims[1] * z), 0) = 1.0f;
    }
  }
  return occ;
}

}  // namespace

MatXf occupancy_from_cells(const std::vector<cloud::VoxelKey>& cells,
                           const policy::VoxelBounds& bounds) {
  return occupancy_impl(cells, bounds);
}

MatXf occupancy_from_cells(const std::vector<PackedCell>& cells,
                           const policy::VoxelBounds& bounds) {
  return occupancy_impl(cells, bounds);
}

StudentCells observe_cells(const env::Environment& env,
                           const env::StudentObsConfig& obs_config,
                           const policy::StudentConfig& student_config,
                           Rng& rng) {
  StudentCells out;
  if (student_config.separate_goal_encoder) {
    const auto parts = env::student_observation_parts(env, obs_config, rng);
    out.scene =
        cloud::voxelize(parts.scene, student_config.bounds.resolution).cells;
    out.goal =
        cloud::voxelize(parts.goal, student_config.goal_bounds.resolution).cells;
  } else {
    const auto merged = env::student_observation(env, obs_config, rng);
    out.scene =
        cloud::voxelize(merged, student_config.bounds.resolution).cells;
  }
  return out;
}

DaggerTrainer::DaggerTrainer(policy::StudentPolicy* student, TeacherFn teacher,
                             DaggerConfig config,
                             std::vector<std::unique_ptr<env::Environment>> envs,
                             std::uint64_t seed)
    : student_(student),
      teacher_(std::move(teacher)),
      config_(std::move(config)),
      envs_(std::move(envs)),
      adam_(config_.learning_rate),
      rng_(seed) {
  config_.validate();
  if (int(envs_.size()) != config_.env_count) {
    throw std::invalid_argument("DaggerTrainer: env count mismatch");
  }
}

void DaggerTrainer::rollout() {
  const int act_dim = student_->config().action;
  const auto& bounds = student_->config().bounds;
  const auto& goal_bounds = student_->config().goal_bounds;
  const bool separate = student_->config().separate_goal_encoder;

  struct Slot {
    DaggerEpisode episode;
    MatXf hidden;
    VecXf prev_action;
    policy::ActionSmoother smoother{0.8};
    Rng obs_rng;
  };
  std::vector<Slot> slots(envs_.size());
  for (std::size_t e = 0; e < envs_.size(); ++e) {
    envs_[e]->reset(rng_);
    slots[e].hidden = student_->initial_hidden(1);
    slots[e].prev_action = VecXf::Zero(act_dim);
    slots[e].smoother.reset(act_dim);
    slots[e].obs_rng = rng_.spawn();
  }

  for (int t = 0; t < config_.rollout_steps; ++t) {
    for (std::size_t e = 0; e < envs_.size(); ++e) {
      auto& slot = slots[e];
      auto& env = *envs_[e];
      if (env.done()) continue;

      DaggerStepRecord record;
      const auto cells = observe_cells(env, config_.observation,
                                       student_->config(), slot.obs_rng);
      record.cells = pack_cells(cells.scene);
      record.goal_cells = pack_cells(cells.goal);
      record.prev_action = slot.prev_action;
      record.hidden = slot.hidden.col(0);
      record.true_distance = float(env.state().orientation_error());
      record.teacher_action =
          teacher_(env, slot.prev_action.cast<double>().eval())
              .cast<float>();

      const MatXf occ = occupancy_from_cells(record.cells, bounds);
      MatXf goal_occ;
      if (separate) {
        goal_occ = occupancy_from_cells(record.goal_cells, goal_bounds);
      }
      const auto step =
          student_->step(occ, slot.prev_action, slot.hidden, goal_occ);
      slot.hidden = step.hidden;
      const Eigen::VectorXd action = step.action.col(0).cast<double>();
      slot.episode.steps.push_back(std::move(record));

      env.set_raw_action(action);
      const auto result = env.step(slot.smoother.smooth(action));
      slot.prev_action = step.action.col(0);
      if (result.done) {
        buffer_.append(std::move(slot.episode));
        slot.episode = DaggerEpisode{};
        env.reset(rng_);
        slot.hidden = student_->initial_hidden(1);
        slot.prev_action = VecXf::Zero(act_dim);
        slot.smoother.reset(act_dim);
      }
    }
  }
  for (auto& slot : slots) buffer_.append(std::move(slot.episode));
}

DaggerStats DaggerTrainer::train_on_buffer(int steps) {
  DaggerStats stats;
  stats.buffer_steps = buffer_.total_steps();
  if (buffer_.episodes().empty() || steps == 0) return stats;

  const auto& episodes = buffer_.episodes();
  int window = config_.window;
  int max_len = 0;
  for (const auto& ep : episodes) max_len = std::max(max_len, int(ep.steps.size()));
  window = std::min(window, max_len);

  // Cumulative step counts for uniform sampling over the aggregate dataset.
  std::vector<std::size_t> cumulative(episodes.size());
  std::size_t running = 0;
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    running += episodes[i].steps.size();
    cumulative[i] = running;
  }

  const int act_dim = student_->config().action;
  const auto& bounds = student_->config().bounds;
  const auto& goal_bounds = student_->config().goal_bounds;
  const bool separate = student_->config().separate_goal_encoder;
  const int feature = student_->config().feature * (separate ? 2 : 1);
  const int hidden_size = student_->config().hidden;

  double action_loss_sum = 0.0, distance_loss_sum = 0.0;
  int batches_done = 0;

  for (int step_idx = 0; step_idx < steps; ++step_idx) {
    // Sample window starts, uniform over steps, skipping too-short episodes.
    std::vector<std::pair<int, int>> picks;  // (episode, start)
    int guard = 0;
    while (int(picks.size()) < config_.batch_windows && guard < 10000) {
      ++guard;
      const std::size_t flat = rng_.uniform_index(running);
      const auto it =
          std::upper_bound(cumulative.begin(), cumulative.end(), flat);
      const int ep = int(it - cumulative.begin());
      const int len = int(episodes[ep].steps.size());
      if (len < window) continue;
      const int pos = int(flat - (ep > 0 ? cumulative[ep - 1] : 0));
      picks.emplace_back(ep, std::min(pos, len - window));
    }
    if (picks.empty()) break;
    const int b = int(picks.size());

    // Batched encoder input over all window steps.
    MatXf occ_all(bounds.volume(), window * b);
    MatXf goal_all;
    if (separate) goal_all.resize(goal_bounds.volume(), window * b);
    MatXf h0(hidden_size, b);
    std::vector<MatXf> prevs(window, MatXf(act_dim, b));
    std::vector<MatXf> labels(window, MatXf(act_dim, b));
    std::vector<VecXf> dists(window, VecXf(b));
    for (int i = 0; i < b; ++i) {
      const auto& ep = episodes[picks[i].first];
      h0.col(i) = ep.steps[picks[i].second].hidden;
      for (int t = 0; t < window; ++t) {
        const auto& s = ep.steps[picks[i].second + t];
        occ_all.col(t * b + i) = occupancy_from_cells(s.cells, bounds).col(0);
        if (separate) {
          goal_all.col(t * b + i) =
              occupancy_from_cells(s.goal_cells, goal_bounds).col(0);
        }
        prevs[t].col(i) = s.prev_action;
        labels[t].col(i) = s.teacher_action;
        dists[t][i] = s.true_distance;
      }
    }

    student_->zero_grad();
    MatXf features = student_->encoder().forward(occ_all);
    if (separate) {
      const MatXf goal_features = student_->goal_encoder().forward(goal_all);
      MatXf both(features.rows() + goal_features.rows(), features.cols());
      both.topRows(features.rows()) = features;
      both.bottomRows(goal_features.rows()) = goal_features;
      features = std::move(both);
    }

    // Unroll the GRU over the window.
    std::vector<nn::GruCellT<float>::Cache> caches(window);
    MatXf h_all(hidden_size, window * b);
    MatXf h = h0;
    for (int t = 0; t < window; ++t) {
      MatXf x(feature + act_dim, b);
      x.topRows(feature) = features.middleCols(t * b, b);
      x.bottomRows(act_dim) = prevs[t];
      h = student_->gru().forward(x, h, &caches[t]);
      h_all.middleCols(t * b, b) = h;
    }

    const int n = window * b;
    const MatXf pred_actions = student_->action_head().forward(h_all);
    const MatXf pred_dist_raw = student_->distance_head().forward(h_all);
    const MatXf pred_dist = student_->softplus().forward(pred_dist_raw);

    MatXf daction(act_dim, n);
    MatXf ddist(1, n);
    double action_loss = 0.0, distance_loss = 0.0;
    for (int t = 0; t < window; ++t) {
      for (int i = 0; i < b; ++i) {
        const int col = t * b + i;
        const VecXf err = pred_actions.col(col) - labels[t].col(i);
        action_loss += 0.5 * double(err.squaredNorm()) / n;
        daction.col(col) = err / float(n);
        const float derr = pred_dist(0, col) - dists[t][i];
        distance_loss += 0.5 * double(derr) * double(derr) / n;
        ddist(0, col) =
            float(config_.distance_loss_weight) * derr / float(n);
      }
    }

    MatXf dh_all = student_->action_head().backward(daction);
    dh_all += student_->distance_head().backward(
        student_->softplus().backward(ddist));

    MatXf dfeatures(feature, window * b);
    MatXf dh_carry = MatXf::Zero(hidden_size, b);
    for (int t = window - 1; t >= 0; --t) {
      const MatXf dh = dh_all.middleCols(t * b, b) + dh_carry;
      auto [dx, dh_prev] = student_->gru().backward(dh, caches[t]);
      dfeatures.middleCols(t * b, b) = dx.topRows(feature);
      dh_carry = dh_prev;
    }
    if (separate) {
      const int f = student_->config().feature;
      student_->encoder().backward(dfeatures.topRows(f));
      student_->goal_encoder().backward(dfeatures.bottomRows(f));
    } else {
      student_->encoder().backward(dfeatures);
    }
    adam_.step(student_->params());

    if (!std::isfinite(action_loss) || !std::isfinite(distance_loss)) {
      throw std::runtime_error("dagger: non-finite loss");
    }
    action_loss_sum += action_loss;
    distance_loss_sum += distance_loss;
    ++batches_done;
  }

  if (batches_done > 0) {
    stats.action_loss = action_loss_sum / batches_done;
    stats.distance_loss = distance_loss_sum / batches_done;
  }
  return stats;
}

DaggerStats DaggerTrainer::iterate() {
  const std::size_t before = buffer_.total_steps();
  rollout();
  auto stats = train_on_buffer(config_.train_steps);
  stats.new_steps = int(buffer_.total_steps() - before);
  stats.buffer_steps = buffer_.total_steps();
  return stats;
}

double DaggerTrainer::evaluate(int episodes, std::uint64_t seed) {
  Rng eval_rng(seed);
  Rng obs_rng = eval_rng.spawn();
  auto& env = *envs_[0];
  const bool separate = student_->config().separate_goal_encoder;
  int successes = 0;
  for (int ep = 0; ep < episodes; ++ep) {
    env.reset(eval_rng);
    MatXf hidden = student_->initial_hidden(1);
    VecXf prev = VecXf::Zero(student_->config().action);
    policy::ActionSmoother smoother(0.8);
    smoother.reset(student_->config().action);
    while (true) {
      const auto cells = observe_cells(env, config_.observation,
                                       student_->config(), obs_rng);
      const MatXf occ =
          occupancy_from_cells(cells.scene, student_->config().bounds);
      MatXf goal_occ;
      if (separate) {
        goal_occ = occupancy_from_cells(cells.goal,
                                        student_->config().goal_bounds);
      }
      const auto out = student_->step(occ, prev, hidden, goal_occ);
      hidden = out.hidden;
      const Eigen::VectorXd action = out.action.col(0).cast<double>();
      env.set_raw_action(action);
      const auto result = env.step(smoother.smooth(action));
      prev = out.action.col(0);
      if (result.done) {
        if (result.termination == env::StepResult::Termination::kSuccess) {
          ++successes;
        }
        break;
      }
    }
  }
  return double(successes) / episodes;
}

// ---------------------------------------------------------------------------
// Stage 0

void Stage0Config::validate() const {
  if (categories <= 0 || feature <= 0 || batch_size <= 0) {
    throw std::invalid_argument("Stage0Config: counts must be positive");
  }
  if (split_embedding && feature % 3 != 0) {
    throw std::invalid_argument(
        "Stage0Config: split embedding needs a feature size divisible by 3");
  }
  if (!(learning_rate > 0.0)) {
    throw std::invalid_argument("Stage0Config: learning rate must be positive");
  }
}

Stage0Sample stage0_generate_scene(
    Rng& rng, const cloud::KinematicChain& chain,
    const std::vector<std::shared_ptr<const env::ObjectModel>>& library,
    const Stage0Config& config) {
  if (library.empty()) {
    throw std::invalid_argument("stage0_generate_scene: empty object library");
  }
  Stage0Sample sample;
  sample.category = int(rng.uniform_index(library.size()));
  const auto& object = *library[sample.category];

  std::vector<double> q(chain.joint_count());
  sample.joint_positions.resize(Eigen::Index(q.size()));
  for (std::size_t i = 0; i < q.size(); ++i) {
    q[i] = rng.uniform(chain.links()[i].lower, chain.links()[i].upper);
    sample.joint_positions[Eigen::Index(i)] = float(q[i]);
  }

  cloud::ObjectInstance instance;
  instance.local_cloud = object.local_cloud;
  instance.orientation = so3::sample_uniform_rotation(rng);
  instance.position =
      cloud::Vec3(rng.uniform(-0.04, 0.04), rng.uniform(-0.04, 0.04),
                  rng.uniform(0.05, 0.13));
  const auto goal = so3::sample_uniform_rotation(rng);
  sample.distance = float(so3::rotation_distance(instance.orientation, goal));

  const auto scene = cloud::compose_scene_cloud(
      chain, q, instance, goal, cloud::GoalDisplay{config.goal_display_offset});
  const auto reps = cloud::voxelize(scene, config.observation.voxel_resolution)
                        .representative_points();
  sample.cells =
      pack_cells(cloud::voxelize(reps, config.bounds.resolution).cells);
  return sample;
}

Stage0Trainer::Stage0Trainer(const Stage0Config& config, int joint_count,
                             std::uint64_t seed)
    : config_(config), adam_(config.learning_rate), rng_(seed) {
  config_.validate();
  encoder_ = policy::VoxelEncoder(config_.bounds, config_.conv_channels,
                                  config_.feature, rng_, "student.encoder");
  const int part = config_.split_embedding ? config_.feature / 3 : config_.feature;
  const int distance_in = config_.split_embedding ? 2 * part : config_.feature;
  category_head_ =
      nn::LinearT<float>(part, config_.categories, rng_, "stage0.category");
  distance_head_ = nn::LinearT<float>(distance_in, 1, rng_, "stage0.distance");
  joints_head_ = nn::LinearT<float>(part, joint_count, rng_, "stage0.joints");
}

Stage0Losses Stage0Trainer::run_batch(
    const std::vector<const Stage0Sample*>& batch, bool train) {
  const int b = int(batch.size());
  MatXf occ(config_.bounds.volume(), b);
  for (int i = 0; i < b; ++i) {
    occ.col(i) = occupancy_from_cells(batch[i]->cells, config_.bounds).col(0);
  }
  if (train) {
    encoder_.zero_grad();
    category_head_.zero_grad();
    distance_head_.zero_grad();
    joints_head_.zero_grad();
  }
  const MatXf features = encoder_.forward(occ);
  const int part = config_.split_embedding ? config_.feature / 3 : config_.feature;

  const MatXf cat_in = config_.split_embedding
                           ? MatXf(features.topRows(part))
                           : features;
  const MatXf dist_in = config_.split_embedding
                            ? MatXf(features.topRows(2 * part))
                            : features;
  const MatXf joint_in = config_.split_embedding
                             ? MatXf(features.bottomRows(part))
                             : features;

  Stage0Losses losses;
  MatXf dfeatures = MatXf::Zero(features.rows(), b);

  if (config_.predict_category) {
    const MatXf logits = category_head_.forward(cat_in);
    MatXf dlogits(logits.rows(), b);
    for (int i = 0; i < b; ++i) {
      VecXf column = logits.col(i);
      const float peak = column.maxCoeff();
      VecXf exps = (column.array() - peak).exp();
      const float norm = exps.sum();
      losses.category +=
          -std::log(std::max(exps[batch[i]->category] / norm, 1e-30f)) / b;
      dlogits.col(i) = exps / norm / float(b);
      dlogits(batch[i]->category, i) -= 1.0f / float(b);
    }
    if (train) {
      const MatXf dcat = category_head_.backward(dlogits);
      if (config_.split_embedding) {
        dfeatures.topRows(part) += dcat;
      } else {
        dfeatures += dcat;
      }
    }
  }

  if (config_.predict_distance) {
    const MatXf pred = softplus_.forward(distance_head_.forward(dist_in));
    MatXf dpred(1, b);
    for (int i = 0; i < b; ++i) {
      const float err = pred(0, i) - batch[i]->distance;
      losses.distance += 0.5 * double(err) * double(err) / b;
      dpred(0, i) = err / float(b);
    }
    if (train) {
      const MatXf ddist =
          distance_head_.backward(softplus_.backward(dpred));
      if (config_.split_embedding) {
        dfeatures.topRows(2 * part) += ddist;
      } else {
        dfeatures += ddist;
      }
    }
  }

  if (config_.predict_joints) {
    const MatXf pred = joints_head_.forward(joint_in);
    MatXf dpred(pred.rows(), b);
    for (int i = 0; i < b; ++i) {
      const VecXf err = pred.col(i) - batch[i]->joint_positions;
      losses.joints += 0.5 * double(err.squaredNorm()) / b;
      dpred.col(i) = err / float(b);
    }
    if (train) {
      const MatXf djoint = joints_head_.backward(dpred);
      if (config_.split_embedding) {
        dfeatures.bottomRows(part) += djoint;
      } else {
        dfeatures += djoint;
      }
    }
  }

  losses.total = losses.category + losses.distance + losses.joints;
  if (train) {
    encoder_.backward(dfeatures);
    std::vector<nn::ParamRef<float>> params = encoder_.params();
    for (auto& p : category_head_.params()) params.push_back(p);
    for (auto& p : distance_head_.params()) params.push_back(p);
    for (auto& p : joints_head_.params()) params.push_back(p);
    adam_.step(params);
  }
  return losses;
}

Stage0Losses Stage0Trainer::train_epoch(const std::vector<Stage0Sample>& dataset) {
  std::vector<int> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  for (int i = int(order.size()) - 1; i > 0; --i) {
    const int j = int(rng_.uniform_index(std::uint64_t(i + 1)));
    std::swap(order[i], order[j]);
  }
  Stage0Losses sum;
  int batches = 0;
  for (std::size_t start = 0; start < order.size();
       start += std::size_t(config_.batch_size)) {
    std::vector<const Stage0Sample*> batch;
    for (std::size_t i = start;
         i < std::min(order.size(), start + std::size_t(config_.batch_size));
         ++i) {
      batch.push_back(&dataset[order[i]]);
    }
    const auto losses = run_batch(batch, true);
    sum.category += losses.category;
    sum.distance += losses.distance;
    sum.joints += losses.joints;
    sum.total += losses.total;
    ++batches;
  }
  if (batches > 0) {
    sum.category /= batches;
    sum.distance /= batches;
    sum.joints /= batches;
    sum.total /= batches;
  }
  return sum;
}

Stage0Losses Stage0Trainer::evaluate(const std::vector<Stage0Sample>& dataset) {
  Stage0Losses sum;
  int batches = 0;
  for (std::size_t start = 0; start < dataset.size();
       start += std::size_t(config_.batch_size)) {
    std::vector<const Stage0Sample*> batch;
    for (std::size_t i = start;
         i < std::min(dataset.size(), start + std::size_t(config_.batch_size));
         ++i) {
      batch.push_back(&dataset[i]);
    }
    const auto losses = run_batch(batch, false);
    sum.category += losses.category;
    sum.distance += losses.distance;
    sum.joints += losses.joints;
    sum.total += losses.total;
    ++batches;
  }
  if (batches > 0) {
    sum.category /= batches;
    sum.distance /= batches;
    sum.joints /= batches;
    sum.total /= batches;
  }
  return sum;
}

double Stage0Trainer::distance_mae(const std::vector<Stage0Sample>& dataset) {
  if (dataset.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t start = 0; start < dataset.size();
       start += std::size_t(config_.batch_size)) {
    const std::size_t end =
        std::min(dataset.size(), start + std::size_t(config_.batch_size));
    const int b = int(end - start);
    MatXf occ(config_.bounds.volume(), b);
    for (int i = 0; i < b; ++i) {
      occ.col(i) =
          occupancy_from_cells(dataset[start + i].cells, config_.bounds).col(0);
    }
    const MatXf features = encoder_.forward(occ);
    const int part =
        config_.split_embedding ? config_.feature / 3 : config_.feature;
    const MatXf dist_in = config_.split_embedding
                              ? MatXf(features.topRows(2 * part))
                              : features;
    const MatXf pred = softplus_.forward(distance_head_.forward(dist_in));
    for (int i = 0; i < b; ++i) {
      sum += std::abs(double(pred(0, i)) - double(dataset[start + i].distance));
    }
  }
  return sum / double(dataset.size());
}

void Stage0Trainer::save(const std::string& path) const {
  nn::Checkpoint ck;
  ck.meta["kind"] = "stage0";
  ck.meta["feature"] = config_.feature;
  ck.meta["split_embedding"] = config_.split_embedding;
  auto* self = const_cast<Stage0Trainer*>(this);
  nn::store_params(ck, self->encoder_.params());
  nn::store_params(ck, self->category_head_.params());
  nn::store_params(ck, self->distance_head_.params());
  nn::store_params(ck, self->joints_head_.params());
  ck.save(path);
}

void initialize_student_encoder(policy::StudentPolicy& student,
                                policy::VoxelEncoder& pretrained) {
  auto dst = student.encoder().params();
  auto src = pretrained.params();
  if (dst.size() != src.size()) {
    throw std::invalid_argument(
        "initialize_student_encoder: architecture mismatch");
  }
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (dst[i].value->rows() != src[i].value->rows() ||
        dst[i].value->cols() != src[i].value->cols()) {
      throw std::invalid_argument(
          "initialize_student_encoder: shape mismatch at " + dst[i].name);
    }
    *dst[i].value = *src[i].value;
  }
}

}  // namespace reorient::learn
