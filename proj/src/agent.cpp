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

#include "igcarl/agent.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "igcarl/errors.hpp"

namespace igcarl::agent {
namespace {

constexpr auto kObsDim = static_cast<Eigen::Index>(sim::kObsDim);
constexpr double kBound = nn::kActionBound;

const char* const kNetFiles[] = {"actor.ckpt", "q1.ckpt", "q2.ckpt", "q1_target.ckpt",
                                 "q2_target.ckpt"};

// Critic pair evaluated with input gradients at the action row.
struct TwinEval {
  Eigen::RowVectorXd q_min;
  Eigen::RowVectorXd dq_min_da;  // d min(Q1, Q2) / d a, in physical action units
};

TwinEval twin_min(const nn::Mlp& q1, const nn::Mlp& q2, const Eigen::MatrixXd& obs,
                  const Eigen::RowVectorXd& action, bool with_grad) {
  const Eigen::MatrixXd in = adversary::critic_input(obs, action / kBound);
  nn::Tape t1;
  nn::Tape t2;
  const Eigen::MatrixXd v1 = nn::forward(q1, in, t1);
  const Eigen::MatrixXd v2 = nn::forward(q2, in, t2);
  TwinEval e;
  e.q_min = v1.row(0).cwiseMin(v2.row(0));
  if (!with_grad) return e;
  const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(1, obs.cols());
  Eigen::MatrixXd g1;
  Eigen::MatrixXd g2;
  nn::backward(q1, t1, ones, {}, &g1);
  nn::backward(q2, t2, ones, {}, &g2);
  e.dq_min_da.resize(obs.cols());
  for (Eigen::Index b = 0; b < obs.cols(); ++b) {
    e.dq_min_da(b) = (v1(0, b) <= v2(0, b) ? g1(kObsDim, b) : g2(kObsDim, b)) / kBound;
  }
  return e;
}

// Forward pass of the actor keeping the tape and d mu / d pre-activation.
struct ActorPass {
  nn::Tape tape;
  Eigen::RowVectorXd mu;
  Eigen::RowVectorXd dmu_du;
};

ActorPass actor_pass(const nn::Mlp& actor, const Eigen::MatrixXd& obs) {
  ActorPass p;
  const Eigen::MatrixXd u = nn::forward(actor, obs, p.tape);
  const Eigen::RowVectorXd t = u.row(0).array().tanh();
  p.mu = kBound * t;
  p.dmu_du = kBound * (1.0 - t.array().square());
  return p;
}

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericError(std::string("non-finite ") + what);
}

}  // namespace

void AgentConfig::validate() const {
  if (hidden.empty()) throw ConfigError("agent needs at least one hidden layer");
  if (!(actor_lr > 0.0 && critic_lr > 0.0)) throw ConfigError("learning rates must be > 0");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must be in [0, 1]");
  if (!(polyak > 0.0 && polyak <= 1.0)) throw ConfigError("polyak factor must be in (0, 1]");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (buffer_capacity < batch_size) throw ConfigError("buffer capacity must hold one batch");
  if (!(exploration_std >= 0.0)) throw ConfigError("exploration std must be >= 0");
  if (!(action_penalty >= 0.0)) throw ConfigError("action penalty must be >= 0");
}

AgentNets AgentNets::create(const AgentConfig& config, std::mt19937_64& rng) {
  config.validate();
  auto sizes = [&](std::size_t in) {
    std::vector<std::size_t> s{in};
    s.insert(s.end(), config.hidden.begin(), config.hidden.end());
    s.push_back(1);
    return s;
  };
  AgentNets n;
  n.actor = nn::Mlp::random(sizes(sim::kObsDim), config.activation, rng, 0.01);
  n.q1 = nn::Mlp::random(sizes(sim::kObsDim + 1), config.activation, rng);
  n.q2 = nn::Mlp::random(sizes(sim::kObsDim + 1), config.activation, rng);
  n.q1_target = n.q1;
  n.q2_target = n.q2;
  return n;
}

void AgentNets::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  const nn::Mlp* nets[] = {&actor, &q1, &q2, &q1_target, &q2_target};
  for (std::size_t i = 0; i < std::size(nets); ++i) nn::save_checkpoint(*nets[i], dir / kNetFiles[i]);
}

AgentNets AgentNets::load(const std::filesystem::path& dir) {
  AgentNets n;
  nn::Mlp* nets[] = {&n.actor, &n.q1, &n.q2, &n.q1_target, &n.q2_target};
  for (std::size_t i = 0; i < std::size(nets); ++i) *nets[i] = nn::load_checkpoint(dir / kNetFiles[i]);
  if (n.actor.input_size() != sim::kObsDim || n.q1.input_size() != sim::kObsDim + 1) {
    throw FormatError("agent checkpoints in " + dir.string() + " have unexpected shapes");
  }
  return n;
}

void LagrangeState::validate() const {
  if (!(lambda1 >= 0.0 && lambda2 >= 0.0)) throw ConfigError("multipliers must be >= 0");
  if (!(alpha_lambda >= 0.0)) throw ConfigError("dual step size must be >= 0");
}

LagrangeState dual_update(const LagrangeState& s, double c1, double c2) {
  LagrangeState next = s;
  next.lambda1 = std::max(s.lambda1 + s.alpha_lambda * (c1 - s.eps1), 0.0);
  next.lambda2 = std::max(s.lambda2 + s.alpha_lambda * (c2 - s.eps2), 0.0);
  return next;
}

Eigen::RowVectorXd mean_actions(const nn::Mlp& actor, const Eigen::MatrixXd& obs) {
  return kBound * nn::forward(actor, obs).row(0).array().tanh();
}

double constraint_c1(const nn::Mlp& actor, const AdversarySnapshot* adversary,
                     const Eigen::MatrixXd& obs) {
  if (adversary == nullptr) throw ConfigError("collision-risk constraint needs an adversary snapshot");
  return twin_min(adversary->q1, adversary->q2, obs, mean_actions(actor, obs), false).q_min.mean();
}

double constraint_c2(const nn::Mlp& actor, const Eigen::MatrixXd& obs,
                     const Eigen::MatrixXd& obs_perturbed) {
  if (obs.cols() != obs_perturbed.cols()) throw UsageError("constraint_c2: unaligned batches");
  return (mean_actions(actor, obs) - mean_actions(actor, obs_perturbed)).squaredNorm() /
         static_cast<double>(obs.cols());
}

double critic_target(const AgentNets& nets, double reward, const Observation& next_obs, bool done,
                     double gamma) {
  if (done) return reward;
  const double a = nn::mean_action(nets.actor, next_obs);
  std::vector<double> in(next_obs.begin(), next_obs.end());
  in.push_back(a / kBound);
  return reward +
         gamma * std::min(nn::forward(nets.q1_target, in)[0], nn::forward(nets.q2_target, in)[0]);
}

std::vector<double> unconstrained_actor_gradient(const AgentNets& nets, const Batch& batch,
                                                 ActorReading reading, double action_penalty) {
  const double n = static_cast<double>(batch.size());
  ActorPass p = actor_pass(nets.actor, reading == ActorReading::Perturbed ? batch.obs_perturbed
                                                                          : batch.obs);
  const TwinEval q = twin_min(nets.q1, nets.q2, batch.obs, p.mu, true);
  Eigen::RowVectorXd up = (-q.dq_min_da / n).cwiseProduct(p.dmu_du);
  if (action_penalty != 0.0) up += (2.0 * action_penalty / n) * p.tape.values.back().row(0);
  std::vector<double> grad(nets.actor.param_count(), 0.0);
  nn::backward(nets.actor, p.tape, up, grad, nullptr);
  return grad;
}

ActorGradient actor_gradient(const AgentNets& nets, const LagrangeState& lg, const Batch& batch,
                             const AdversarySnapshot* adversary, ActorReading reading,
                             double action_penalty) {
  if (adversary == nullptr && lg.lambda1 != 0.0) {
    throw ConfigError("lambda1 > 0 requires an adversary snapshot");
  }
  const double n = static_cast<double>(batch.size());
  ActorPass pert = actor_pass(nets.actor, batch.obs_perturbed);
  ActorPass clean = actor_pass(nets.actor, batch.obs);
  const bool on_perturbed = reading == ActorReading::Perturbed;
  ActorPass& q_pass = on_perturbed ? pert : clean;

  const TwinEval q = twin_min(nets.q1, nets.q2, batch.obs, q_pass.mu, true);
  const Eigen::RowVectorXd gap = clean.mu - pert.mu;

  ActorGradient out;
  out.c2 = gap.squaredNorm() / n;
  TwinEval risk;
  if (adversary != nullptr) {
    risk = twin_min(adversary->q1, adversary->q2, batch.obs, clean.mu, lg.lambda1 != 0.0);
    out.c1 = risk.q_min.mean();
  }
  const Eigen::RowVectorXd u_q = q_pass.tape.values.back().row(0);
  out.objective = q.q_min.mean() - action_penalty * u_q.squaredNorm() / n -
                  lg.lambda1 * (out.c1 - lg.eps1) - lg.lambda2 * (out.c2 - lg.eps2);

  // d(-J)/d mu for both forward passes.
  Eigen::RowVectorXd d_pert = Eigen::RowVectorXd::Zero(batch.size());
  Eigen::RowVectorXd d_clean = Eigen::RowVectorXd::Zero(batch.size());
  (on_perturbed ? d_pert : d_clean) = -q.dq_min_da / n;
  bool clean_used = !on_perturbed;
  if (lg.lambda2 != 0.0) {
    d_pert += lg.lambda2 * (-2.0 / n) * gap;
    d_clean += lg.lambda2 * (2.0 / n) * gap;
    clean_used = true;
  }
  if (lg.lambda1 != 0.0) {
    d_clean += lg.lambda1 * risk.dq_min_da / n;
    clean_used = true;
  }

  // d(-J)/du; the penalty acts on the pre-activation of the Q-term pass.
  Eigen::RowVectorXd du_pert = d_pert.cwiseProduct(pert.dmu_du);
  Eigen::RowVectorXd du_clean = d_clean.cwiseProduct(clean.dmu_du);
  if (action_penalty != 0.0) {
    (on_perturbed ? du_pert : du_clean) += (2.0 * action_penalty / n) * u_q;
  }
  out.grad.assign(nets.actor.param_count(), 0.0);
  if (on_perturbed || lg.lambda2 != 0.0) {
    nn::backward(nets.actor, pert.tape, du_pert, out.grad, nullptr);
  }
  if (clean_used) {
    nn::backward(nets.actor, clean.tape, du_clean, out.grad, nullptr);
  }
  return out;
}

AgentLearner::AgentLearner(AgentConfig config, std::mt19937_64& rng)
    : AgentLearner(config, AgentNets::create(config, rng)) {}

AgentLearner::AgentLearner(AgentConfig config, AgentNets nets)
    : config_(std::move(config)),
      nets_(std::move(nets)),
      actor_opt_(nets_.actor.param_count(), config_.actor_lr),
      q1_opt_(nets_.q1.param_count(), config_.critic_lr),
      q2_opt_(nets_.q2.param_count(), config_.critic_lr) {
  config_.validate();
}

CriticLosses AgentLearner::update_critics(const Batch& batch) {
  const double n = static_cast<double>(batch.size());
  const Eigen::RowVectorXd next_a = mean_actions(nets_.actor, batch.next_obs);
  const TwinEval next = twin_min(nets_.q1_target, nets_.q2_target, batch.next_obs, next_a, false);
  const Eigen::RowVectorXd not_done = Eigen::RowVectorXd::Ones(batch.size()) - batch.done;
  const Eigen::RowVectorXd target =
      batch.reward + config_.gamma * not_done.cwiseProduct(next.q_min);

  const Eigen::MatrixXd in = adversary::critic_input(batch.obs, batch.action / kBound);
  CriticLosses losses;
  auto step = [&](nn::Mlp& critic, nn::AdamState& opt) {
    nn::Tape tape;
    const Eigen::RowVectorXd diff = nn::forward(critic, in, tape).row(0) - target;
    std::vector<double> grad(critic.param_count(), 0.0);
    nn::backward(critic, tape, (2.0 / n) * diff, grad, nullptr);
    nn::adam_step(opt, critic.params(), grad);
    return diff.squaredNorm() / n;
  };
  losses.q1 = step(nets_.q1, q1_opt_);
  losses.q2 = step(nets_.q2, q2_opt_);
  return losses;
}

ActorStep AgentLearner::update_actor(const Batch& batch, const LagrangeState& lagrange,
                                     const AdversarySnapshot* adversary) {
  const ActorGradient g =
      actor_gradient(nets_, lagrange, batch, adversary, config_.reading, config_.action_penalty);
  nn::adam_step(actor_opt_, nets_.actor.params(), g.grad);
  return {-g.objective, g.c1, g.c2};
}

void AgentLearner::update_targets() {
  nn::polyak_update(nets_.q1_target, nets_.q1, config_.polyak);
  nn::polyak_update(nets_.q2_target, nets_.q2, config_.polyak);
}

AgentTrainer::AgentTrainer(AgentConfig config, LagrangeState lagrange, std::mt19937_64& rng)
    : learner_(config, rng), lagrange_(lagrange), buffer_(config.buffer_capacity) {
  lagrange_.validate();
}

AgentTrainer::AgentTrainer(AgentConfig config, LagrangeState lagrange, AgentNets nets)
    : learner_(config, std::move(nets)), lagrange_(lagrange), buffer_(config.buffer_capacity) {
  lagrange_.validate();
}

std::vector<AgentEpisodeLog> AgentTrainer::train(const sim::SimConfig& sim_config,
                                                 const AdversarySnapshot* adversary,
                                                 const AgentTrainOptions& options, int episodes,
                                                 std::mt19937_64& rng) {
  options.attack.validate();
  const bool attacked = options.attack.epsilon > 0.0 && options.attack.iters > 0;
  if (attacked && adversary == nullptr) {
    throw ConfigError("attacked agent training needs an adversary snapshot");
  }
  if (options.update_multipliers && adversary == nullptr) {
    throw ConfigError("constrained agent training needs an adversary snapshot");
  }
  sim::Env env(sim_config);
  const AgentConfig& cfg = learner_.config();
  const std::size_t ready = std::max(cfg.warmup, cfg.batch_size);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<AgentEpisodeLog> logs;
  logs.reserve(static_cast<std::size_t>(std::max(episodes, 0)));
  for (int ep = 0; ep < episodes; ++ep) {
    Observation obs = env.reset(rng());
    AgentEpisodeLog log;
    log.episode = episodes_done_++;
    int updates = 0;
    for (;;) {
      double adv_action = 0.0;
      Observation perturbed = obs;
      if (attacked) {
        adv_action = adversary::act(*adversary, obs, rng);
        perturbed = attack::add(
            obs, attack::bim_perturb(learner_.nets().actor, obs, adv_action, options.attack));
      }
      double action = nn::mean_action(learner_.nets().actor, perturbed);
      if (cfg.exploration_std > 0.0) {
        action = std::clamp(action + kBound * cfg.exploration_std * normal(rng), -kBound, kBound);
      }
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
      log.episode_return += t.reward;
      log.collision = log.collision || out.collision;
      log.success = log.success || (out.reached_goal && !out.collision);

      if (buffer_.size() >= ready) {
        const Batch batch = buffer_.sample(cfg.batch_size, rng);
        const CriticLosses cl = learner_.update_critics(batch);
        check_finite(cl.q1, "agent Q1 loss");
        check_finite(cl.q2, "agent Q2 loss");
        const ActorStep as = learner_.update_actor(batch, lagrange_, adversary);
        check_finite(as.loss, "agent actor loss");
        if (options.update_multipliers) lagrange_ = dual_update(lagrange_, as.c1, as.c2);
        learner_.update_targets();
        log.c1 += as.c1;
        log.c2 += as.c2;
        ++updates;
      }
      if (out.done) break;
      obs = env.observation();
    }
    if (updates > 0) {
      log.c1 /= updates;
      log.c2 /= updates;
    }
    log.lambda1 = lagrange_.lambda1;
    log.lambda2 = lagrange_.lambda2;
    logs.push_back(log);
  }
  return logs;
}

}  // namespace igcarl::agent
