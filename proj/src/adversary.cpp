/*
 * Copyright 2026 The igcarl Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "igcarl/adversary.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "igcarl/errors.hpp"

namespace igcarl::adversary {
namespace {

constexpr auto kObsDim = static_cast<Eigen::Index>(sim::kObsDim);

// Batched draws from the squashed Gaussian head.
struct HeadDraws {
  Eigen::RowVectorXd squashed;
  Eigen::RowVectorXd log_prob;
  std::vector<nn::SquashedSample> samples;
  std::vector<bool> log_std_clamped;
};

HeadDraws draw_batch(const Eigen::MatrixXd& head_out, std::span<const double> noise) {
  const Eigen::Index n = head_out.cols();
  if (static_cast<Eigen::Index>(noise.size()) != n) {
    throw UsageError("one noise draw per batch sample is required");
  }
  HeadDraws d;
  d.squashed.resize(n);
  d.log_prob.resize(n);
  d.samples.resize(static_cast<std::size_t>(n));
  d.log_std_clamped.resize(static_cast<std::size_t>(n));
  for (Eigen::Index b = 0; b < n; ++b) {
    const double raw = head_out(1, b);
    const double log_std = std::clamp(raw, nn::kLogStdMin, nn::kLogStdMax);
    const auto s = nn::sample_squashed(head_out(0, b), log_std, noise[static_cast<std::size_t>(b)]);
    d.samples[static_cast<std::size_t>(b)] = s;
    d.log_std_clamped[static_cast<std::size_t>(b)] = raw != log_std;
    d.squashed(b) = s.squashed;
    d.log_prob(b) = s.log_prob;
  }
  return d;
}

Eigen::RowVectorXd min_of(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.row(0).cwiseMin(b.row(0));
}

void critic_step(nn::Mlp& critic, nn::AdamState& opt, const Eigen::MatrixXd& input,
                 const Eigen::RowVectorXd& target, double& loss) {
  nn::Tape tape;
  const Eigen::MatrixXd q = nn::forward(critic, input, tape);
  const Eigen::RowVectorXd diff = q.row(0) - target;
  const double n = static_cast<double>(diff.size());
  loss = 0.5 * diff.squaredNorm() / n;
  std::vector<double> grad(critic.param_count(), 0.0);
  nn::backward(critic, tape, diff / n, grad, nullptr);
  nn::adam_step(opt, critic.params(), grad);
}

std::vector<double> normal_draws(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericError(std::string("non-finite ") + what);
}

const char* const kNetFiles[] = {"policy.ckpt",    "q1.ckpt",        "q2.ckpt",
                                 "q1_target.ckpt", "q2_target.ckpt", "value.ckpt"};

}  // namespace

void SacConfig::validate() const {
  if (hidden.empty()) throw ConfigError("SAC needs at least one hidden layer");
  if (!(actor_lr > 0.0 && critic_lr > 0.0 && value_lr > 0.0)) {
    throw ConfigError("learning rates must be > 0");
  }
  if (!(alpha >= 0.0)) throw ConfigError("entropy temperature must be >= 0");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must be in [0, 1]");
  if (!(polyak > 0.0 && polyak <= 1.0)) throw ConfigError("polyak factor must be in (0, 1]");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (buffer_capacity < batch_size) throw ConfigError("buffer capacity must hold one batch");
}

SacNets SacNets::create(const SacConfig& config, std::mt19937_64& rng) {
  config.validate();
  auto sizes = [&](std::size_t in, std::size_t out) {
    std::vector<std::size_t> s{in};
    s.insert(s.end(), config.hidden.begin(), config.hidden.end());
    s.push_back(out);
    return s;
  };
  SacNets n;
  n.policy = nn::Mlp::random(sizes(sim::kObsDim, 2), config.activation, rng, 0.01);
  n.q1 = nn::Mlp::random(sizes(sim::kObsDim + 1, 1), config.activation, rng);
  n.q2 = nn::Mlp::random(sizes(sim::kObsDim + 1, 1), config.activation, rng);
  n.q1_target = n.q1;
  n.q2_target = n.q2;
  n.value = nn::Mlp::random(sizes(sim::kObsDim, 1), config.activation, rng);
  n.alpha = config.alpha;
  return n;
}

void SacNets::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  const nn::Mlp* nets[] = {&policy, &q1, &q2, &q1_target, &q2_target, &value};
  for (std::size_t i = 0; i < std::size(nets); ++i) nn::save_checkpoint(*nets[i], dir / kNetFiles[i]);
}

SacNets SacNets::load(const std::filesystem::path& dir, double alpha) {
  SacNets n;
  nn::Mlp* nets[] = {&n.policy, &n.q1, &n.q2, &n.q1_target, &n.q2_target, &n.value};
  for (std::size_t i = 0; i < std::size(nets); ++i) *nets[i] = nn::load_checkpoint(dir / kNetFiles[i]);
  if (n.policy.input_size() != sim::kObsDim || n.policy.output_size() != 2 ||
      n.q1.input_size() != sim::kObsDim + 1 || n.q2.input_size() != sim::kObsDim + 1) {
    throw FormatError("adversary checkpoints in " + dir.string() + " have unexpected shapes");
  }
  n.alpha = alpha;
  return n;
}

SacBatch adversary_view(const Batch& b) {
  return {b.obs, b.adv_action, b.adv_reward, b.next_obs, b.done};
}

SacBatch agent_view(const Batch& b) { return {b.obs, b.action, b.reward, b.next_obs, b.done}; }

Eigen::MatrixXd critic_input(const Eigen::MatrixXd& obs, const Eigen::RowVectorXd& action) {
  Eigen::MatrixXd x(obs.rows() + 1, obs.cols());
  x.topRows(obs.rows()) = obs;
  x.row(obs.rows()) = action;
  return x;
}

nn::SquashedSample policy_sample(const nn::Mlp& policy, const Observation& obs, double noise) {
  const std::vector<double> out = nn::forward(policy, obs);
  return nn::sample_squashed(out[0], std::clamp(out[1], nn::kLogStdMin, nn::kLogStdMax), noise);
}

double act(const SacNets& nets, const Observation& obs, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return policy_sample(nets.policy, obs, dist(rng)).action;
}

double deterministic_action(const SacNets& nets, const Observation& obs) {
  return nn::mean_action(nets.policy, obs);
}

double q_target(const SacNets& nets, double reward, const Observation& next_obs, bool done,
                double noise, double gamma) {
  if (done) return reward;
  const auto s = policy_sample(nets.policy, next_obs, noise);
  std::vector<double> in(next_obs.begin(), next_obs.end());
  in.push_back(s.squashed);
  const double q = std::min(nn::forward(nets.q1_target, in)[0], nn::forward(nets.q2_target, in)[0]);
  return reward + gamma * (q - nets.alpha * s.log_prob);
}

double policy_loss(const SacNets& nets, const SacBatch& batch, std::span<const double> noise) {
  const HeadDraws d = draw_batch(nn::forward(nets.policy, batch.obs), noise);
  const Eigen::MatrixXd in = critic_input(batch.obs, d.squashed);
  const Eigen::RowVectorXd q = min_of(nn::forward(nets.q1, in), nn::forward(nets.q2, in));
  return (nets.alpha * d.log_prob - q).mean();
}

SacLearner::SacLearner(SacConfig config, std::mt19937_64& rng)
    : SacLearner(config, SacNets::create(config, rng)) {}

SacLearner::SacLearner(SacConfig config, SacNets nets)
    : config_(std::move(config)),
      nets_(std::move(nets)),
      policy_opt_(nets_.policy.param_count(), config_.actor_lr),
      q1_opt_(nets_.q1.param_count(), config_.critic_lr),
      q2_opt_(nets_.q2.param_count(), config_.critic_lr),
      value_opt_(nets_.value.param_count(), config_.value_lr) {
  config_.validate();
}

CriticLosses SacLearner::update_critics(const SacBatch& batch, std::span<const double> next_noise) {
  const HeadDraws next = draw_batch(nn::forward(nets_.policy, batch.next_obs), next_noise);
  const Eigen::MatrixXd next_in = critic_input(batch.next_obs, next.squashed);
  const Eigen::RowVectorXd next_q =
      min_of(nn::forward(nets_.q1_target, next_in), nn::forward(nets_.q2_target, next_in));
  const Eigen::RowVectorXd not_done = Eigen::RowVectorXd::Ones(batch.size()) - batch.done;
  const Eigen::RowVectorXd target =
      batch.reward +
      config_.gamma * not_done.cwiseProduct(next_q - nets_.alpha * next.log_prob);

  const Eigen::MatrixXd in = critic_input(batch.obs, batch.action / nn::kActionBound);
  CriticLosses losses;
  critic_step(nets_.q1, q1_opt_, in, target, losses.q1);
  critic_step(nets_.q2, q2_opt_, in, target, losses.q2);
  return losses;
}

double SacLearner::update_policy(const SacBatch& batch, std::span<const double> noise) {
  nn::Tape policy_tape;
  const Eigen::MatrixXd head = nn::forward(nets_.policy, batch.obs, policy_tape);
  const HeadDraws d = draw_batch(head, noise);
  const Eigen::MatrixXd in = critic_input(batch.obs, d.squashed);

  nn::Tape t1;
  nn::Tape t2;
  const Eigen::MatrixXd q1 = nn::forward(nets_.q1, in, t1);
  const Eigen::MatrixXd q2 = nn::forward(nets_.q2, in, t2);
  const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(1, batch.size());
  Eigen::MatrixXd g1;
  Eigen::MatrixXd g2;
  nn::backward(nets_.q1, t1, ones, {}, &g1);
  nn::backward(nets_.q2, t2, ones, {}, &g2);

  const double n = static_cast<double>(batch.size());
  const double alpha = nets_.alpha;
  Eigen::MatrixXd head_grad(2, batch.size());
  double loss = 0.0;
  for (Eigen::Index b = 0; b < batch.size(); ++b) {
    const auto& s = d.samples[static_cast<std::size_t>(b)];
    const bool first = q1(0, b) <= q2(0, b);
    const double q = first ? q1(0, b) : q2(0, b);
    const double dq_da = first ? g1(kObsDim, b) : g2(kObsDim, b);
    loss += alpha * s.log_prob - q;
    const double dq_du = dq_da * s.d_squashed_d_u;
    head_grad(0, b) = (alpha * s.d_logp_d_mean - dq_du) / n;
    head_grad(1, b) = d.log_std_clamped[static_cast<std::size_t>(b)]
                          ? 0.0
                          : (alpha * s.d_logp_d_log_std - dq_du * s.d_u_d_log_std) / n;
  }
  std::vector<double> grad(nets_.policy.param_count(), 0.0);
  nn::backward(nets_.policy, policy_tape, head_grad, grad, nullptr);
  nn::adam_step(policy_opt_, nets_.policy.params(), grad);
  return loss / n;
}

double SacLearner::update_value(const SacBatch& batch, std::span<const double> noise) {
  const HeadDraws d = draw_batch(nn::forward(nets_.policy, batch.obs), noise);
  const Eigen::MatrixXd in = critic_input(batch.obs, d.squashed);
  const Eigen::RowVectorXd target =
      min_of(nn::forward(nets_.q1, in), nn::forward(nets_.q2, in)) - nets_.alpha * d.log_prob;
  double loss = 0.0;
  critic_step(nets_.value, value_opt_, batch.obs, target, loss);
  return loss;
}

void SacLearner::update_targets() {
  nn::polyak_update(nets_.q1_target, nets_.q1, config_.polyak);
  nn::polyak_update(nets_.q2_target, nets_.q2, config_.polyak);
}

UpdateStats SacLearner::update(const SacBatch& batch, std::mt19937_64& rng) {
  const auto n = static_cast<std::size_t>(batch.size());
  const auto next_noise = normal_draws(n, rng);
  const auto policy_noise = normal_draws(n, rng);
  const auto value_noise = normal_draws(n, rng);
  UpdateStats s;
  const CriticLosses c = update_critics(batch, next_noise);
  s.q1_loss = c.q1;
  s.q2_loss = c.q2;
  s.policy_loss = update_policy(batch, policy_noise);
  s.value_loss = update_value(batch, value_noise);
  update_targets();
  check_finite(s.q1_loss, "Q1 loss");
  check_finite(s.q2_loss, "Q2 loss");
  check_finite(s.policy_loss, "policy loss");
  check_finite(s.value_loss, "value loss");
  return s;
}

AdversaryTrainer::AdversaryTrainer(SacConfig config, std::mt19937_64& rng)
    : learner_(config, rng), buffer_(config.buffer_capacity) {}

AdversaryTrainer::AdversaryTrainer(SacConfig config, SacNets nets)
    : learner_(config, std::move(nets)), buffer_(config.buffer_capacity) {}

std::vector<AdversaryEpisodeLog> AdversaryTrainer::train(const sim::SimConfig& sim_config,
                                                         const nn::Mlp& agent_actor,
                                                         const attack::AttackConfig& attack_config,
                                                         int episodes, std::mt19937_64& rng) {
  attack_config.validate();
  sim::Env env(sim_config);
  const SacConfig& cfg = learner_.config();
  const std::size_t ready = std::max(cfg.warmup, cfg.batch_size);
  std::vector<AdversaryEpisodeLog> logs;
  logs.reserve(static_cast<std::size_t>(std::max(episodes, 0)));

  for (int ep = 0; ep < episodes; ++ep) {
    Observation obs = env.reset(rng());
    AdversaryEpisodeLog log;
    log.episode = episodes_done_++;
    int updates = 0;
    for (;;) {
      const double adv_action = act(learner_.nets(), obs, rng);
      const Observation delta = attack::bim_perturb(agent_actor, obs, adv_action, attack_config);
      const Observation perturbed = attack::add(obs, delta);
      const double action = nn::mean_action(agent_actor, perturbed);
      const sim::StepOutcome out = env.step(action);

      Transition t;
      t.obs = obs;
      t.obs_perturbed = perturbed;
      t.action = action;
      t.adv_action = adv_action;
      t.reward = sim::agent_reward(out, sim_config);
      t.adv_reward = sim::adversary_reward(out);
      t.next_obs = env.observation();
      t.done = out.done;
      buffer_.push(t);
      log.adversary_return += t.adv_reward;
      log.collision = log.collision || out.collision;

      if (buffer_.size() >= ready) {
        const UpdateStats s = learner_.update(adversary_view(buffer_.sample(cfg.batch_size, rng)), rng);
        log.q_loss_mean += 0.5 * (s.q1_loss + s.q2_loss);
        log.policy_loss += s.policy_loss;
        ++updates;
      }
      if (out.done) break;
      obs = env.observation();
    }
    if (updates > 0) {
      log.q_loss_mean /= updates;
      log.policy_loss /= updates;
    }
    log.buffer_size = buffer_.size();
    logs.push_back(log);
  }
  return logs;
}

}  // namespace igcarl::adversary
