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

#ifndef IGCARL_AGENT_HPP
#define IGCARL_AGENT_HPP

#include <filesystem>
#include <random>
#include <vector>

#include "igcarl/adversary.hpp"
#include "igcarl/attack.hpp"
#include "igcarl/nn.hpp"
#include "igcarl/replay.hpp"
#include "igcarl/sim.hpp"

namespace igcarl::agent {

using sim::Observation;

/// Which observation feeds the action inside the actor's Q term.
enum class ActorReading {
  Perturbed,  // a = mu(o'), the action the agent actually executes
  Clean,      // a = mu(o)
};

struct AgentConfig {
  std::vector<std::size_t> hidden{64, 64};
  nn::Activation activation = nn::Activation::Relu;
  double actor_lr = 1e-4;
  double critic_lr = 1e-3;
  double gamma = 0.99;
  double polyak = 0.005;
  std::size_t batch_size = 128;
  std::size_t warmup = 1000;
  std::size_t buffer_capacity = 1'000'000;
  /// Std of the Gaussian exploration noise added to the action, in units of
  /// the action bound; the noisy action is clipped back into bounds.
  double exploration_std = 0.3;
  /// Weight of mean(u^2) in the actor loss, u the pre-tanh actor output.
  /// Keeps the squash out of saturation; 0 disables it.
  double action_penalty = 0.1;
  ActorReading reading = ActorReading::Perturbed;

  void validate() const;
};

/// Deterministic actor (obs -> pre-squash mean) and twin critics on (obs, a / 7.6).
struct AgentNets {
  nn::Mlp actor;
  nn::Mlp q1;
  nn::Mlp q2;
  nn::Mlp q1_target;
  nn::Mlp q2_target;

  static AgentNets create(const AgentConfig& config, std::mt19937_64& rng);
  void save(const std::filesystem::path& dir) const;
  static AgentNets load(const std::filesystem::path& dir);
};

struct LagrangeState {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double eps1 = 0.01;
  double eps2 = 0.01;
  double alpha_lambda = 5e-5;

  void validate() const;
};

/// lambda_k <- max(lambda_k + alpha_lambda * (C_k - eps_k), 0).
LagrangeState dual_update(const LagrangeState& state, double c1, double c2);

/// Frozen adversary: its policy supplies target actions, its critics score C1.
using AdversarySnapshot = adversary::SacNets;

/// 7.6 * tanh(actor(obs)) for each column of `obs`.
Eigen::RowVectorXd mean_actions(const nn::Mlp& actor, const Eigen::MatrixXd& obs);

/// Collision-risk constraint: mean of min_i Q_adv_i(o, mu(o)) over the batch.
/// Throws ConfigError when `adversary` is null.
double constraint_c1(const nn::Mlp& actor, const AdversarySnapshot* adversary,
                     const Eigen::MatrixXd& obs);
/// Policy-consistency constraint: mean of (mu(o) - mu(o'))^2.
double constraint_c2(const nn::Mlp& actor, const Eigen::MatrixXd& obs,
                     const Eigen::MatrixXd& obs_perturbed);

/// r + gamma * min_j Q_j_target(o_next, mu(o_next)); r alone when terminal.
double critic_target(const AgentNets& nets, double reward, const Observation& next_obs, bool done,
                     double gamma);

struct ActorGradient {
  std::vector<double> grad;  // gradient of -J with respect to the actor parameters
  /// J = mean min_j Q_j(o, a) - beta mean(u^2) - lambda1 (C1 - eps1) - lambda2 (C2 - eps2)
  double objective = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
};

/// Gradient of the Lagrangian actor loss on one batch, with `action_penalty`
/// as beta. Without an adversary C1 is reported as 0 and lambda1 must be 0.
/// Terms whose multiplier is exactly 0 are skipped, so zero multipliers give
/// the unconstrained gradient bit for bit.
ActorGradient actor_gradient(const AgentNets& nets, const LagrangeState& lagrange,
                             const Batch& batch, const AdversarySnapshot* adversary,
                             ActorReading reading, double action_penalty = 0.0);

/// Gradient of -(mean min_j Q_j(o, a) - beta mean(u^2)) alone.
std::vector<double> unconstrained_actor_gradient(const AgentNets& nets, const Batch& batch,
                                                 ActorReading reading, double action_penalty = 0.0);

struct CriticLosses {
  double q1 = 0.0;
  double q2 = 0.0;
};

struct ActorStep {
  double loss = 0.0;  // -J before the step
  double c1 = 0.0;
  double c2 = 0.0;
};

class AgentLearner {
 public:
  AgentLearner(AgentConfig config, std::mt19937_64& rng);
  AgentLearner(AgentConfig config, AgentNets nets);

  const AgentNets& nets() const { return nets_; }
  AgentNets& nets() { return nets_; }
  const AgentConfig& config() const { return config_; }

  /// One Adam step per critic on mean (Q_i(o, a) - target)^2.
  CriticLosses update_critics(const Batch& batch);
  /// One Adam step ascending J.
  ActorStep update_actor(const Batch& batch, const LagrangeState& lagrange,
                         const AdversarySnapshot* adversary);
  void update_targets();

 private:
  AgentConfig config_;
  AgentNets nets_;
  nn::AdamState actor_opt_;
  nn::AdamState q1_opt_;
  nn::AdamState q2_opt_;
};

struct AgentEpisodeLog {
  int episode = 0;
  double episode_return = 0.0;
  bool collision = false;
  bool success = false;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double c1 = 0.0;  // mean over the episode's updates
  double c2 = 0.0;
};

struct AgentTrainOptions {
  /// Budget of the BIM perturbation; epsilon = 0 trains on clean observations.
  attack::AttackConfig attack = attack::AttackConfig::with_budget(0.0);
  /// False freezes the multipliers at their current values.
  bool update_multipliers = true;
};

/// Learner, replay memory and multipliers; persists across training phases.
class AgentTrainer {
 public:
  AgentTrainer(AgentConfig config, LagrangeState lagrange, std::mt19937_64& rng);
  AgentTrainer(AgentConfig config, LagrangeState lagrange, AgentNets nets);

  /// Per step: o, a_adv from the frozen adversary, delta = BIM, o' = o + delta,
  /// explore around mu(o'), step, store both o and o', then critic, actor and
  /// dual updates once the buffer is warm. Throws NumericError on NaN losses.
  std::vector<AgentEpisodeLog> train(const sim::SimConfig& sim_config,
                                     const AdversarySnapshot* adversary,
                                     const AgentTrainOptions& options, int episodes,
                                     std::mt19937_64& rng);

  const AgentLearner& learner() const { return learner_; }
  AgentLearner& learner() { return learner_; }
  const LagrangeState& lagrange() const { return lagrange_; }
  const ReplayBuffer& buffer() const { return buffer_; }

 private:
  AgentLearner learner_;
  LagrangeState lagrange_;
  ReplayBuffer buffer_;
  int episodes_done_ = 0;
};

}  // namespace igcarl::agent

#endif  // IGCARL_AGENT_HPP
