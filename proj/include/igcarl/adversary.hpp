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

#ifndef IGCARL_ADVERSARY_HPP
#define IGCARL_ADVERSARY_HPP

#include <filesystem>
#include <random>
#include <span>
#include <vector>

#include "igcarl/attack.hpp"
#include "igcarl/nn.hpp"
#include "igcarl/replay.hpp"
#include "igcarl/sim.hpp"

namespace igcarl::adversary {

using sim::Observation;

struct SacConfig {
  std::vector<std::size_t> hidden{64, 64};
  nn::Activation activation = nn::Activation::Relu;
  double actor_lr = 1e-4;
  double critic_lr = 1e-3;
  double value_lr = 1e-3;
  double alpha = 0.1;
  double gamma = 0.99;
  double polyak = 0.005;
  std::size_t batch_size = 128;
  /// Updates start once the buffer holds this many transitions.
  std::size_t warmup = 1000;
  std::size_t buffer_capacity = 1'000'000;

  void validate() const;
};

/// Stochastic policy, twin soft critics with slow copies, and a value network.
///
/// The policy maps an observation to (mean, log_std) of a tanh-squashed
/// Gaussian over [-7.6, 7.6]. Critics take the observation stacked with the
/// action divided by the bound.
struct SacNets {
  nn::Mlp policy;
  nn::Mlp q1;
  nn::Mlp q2;
  nn::Mlp q1_target;
  nn::Mlp q2_target;
  nn::Mlp value;
  double alpha = 0.1;

  static SacNets create(const SacConfig& config, std::mt19937_64& rng);

  void save(const std::filesystem::path& dir) const;
  static SacNets load(const std::filesystem::path& dir, double alpha);
};

using AdversaryNets = SacNets;

/// The slice of a replay batch one SAC learner trains on.
struct SacBatch {
  Eigen::MatrixXd obs;
  Eigen::RowVectorXd action;
  Eigen::RowVectorXd reward;
  Eigen::MatrixXd next_obs;
  Eigen::RowVectorXd done;

  Eigen::Index size() const { return obs.cols(); }
};

/// (o, a_adv, r_adv, o_next, done).
SacBatch adversary_view(const Batch& batch);
/// (o, a, r, o_next, done), used by the vanilla SAC driving baseline.
SacBatch agent_view(const Batch& batch);

/// Stacks observations over the normalized action row.
Eigen::MatrixXd critic_input(const Eigen::MatrixXd& obs, const Eigen::RowVectorXd& action);

/// Draws from the policy head with an explicit standard-normal `noise`.
nn::SquashedSample policy_sample(const nn::Mlp& policy, const Observation& obs, double noise);
double act(const SacNets& nets, const Observation& obs, std::mt19937_64& rng);
double deterministic_action(const SacNets& nets, const Observation& obs);

/// r + gamma * (min_i Q_i_target(o', a') - alpha * log pi(a'|o')) with a'
/// drawn using `noise`; the bracket is dropped for terminal transitions.
double q_target(const SacNets& nets, double reward, const Observation& next_obs, bool done,
                double noise, double gamma);

/// Mean over the batch of alpha * log pi(a|o) - min(Q1, Q2)(o, a) for
/// reparameterized a with the given per-sample noise.
double policy_loss(const SacNets& nets, const SacBatch& batch, std::span<const double> noise);

struct CriticLosses {
  double q1 = 0.0;
  double q2 = 0.0;
};

struct UpdateStats {
  double q1_loss = 0.0;
  double q2_loss = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
};

/// SAC optimizer state around a set of networks.
class SacLearner {
 public:
  SacLearner(SacConfig config, std::mt19937_64& rng);
  SacLearner(SacConfig config, SacNets nets);

  const SacNets& nets() const { return nets_; }
  SacNets& nets() { return nets_; }
  const SacConfig& config() const { return config_; }

  /// One Adam step per critic on 1/2 mean (Q_i - target)^2. Targets are
  /// computed before either critic moves. `next_noise` has one draw per sample.
  CriticLosses update_critics(const SacBatch& batch, std::span<const double> next_noise);
  /// One Adam step on the reparameterized policy loss; returns the pre-step loss.
  double update_policy(const SacBatch& batch, std::span<const double> noise);
  /// One Adam step on 1/2 mean (V(o) - [min Q(o, a) - alpha log pi(a|o)])^2.
  double update_value(const SacBatch& batch, std::span<const double> noise);
  void update_targets();

  /// Critics, policy, value, then Polyak targets, with fresh noise from `rng`.
  /// Throws NumericError if any loss is non-finite.
  UpdateStats update(const SacBatch& batch, std::mt19937_64& rng);

 private:
  SacConfig config_;
  SacNets nets_;
  nn::AdamState policy_opt_;
  nn::AdamState q1_opt_;
  nn::AdamState q2_opt_;
  nn::AdamState value_opt_;
};

// ---------------------------------------------------------------------------
// Adversary training against a frozen agent

struct AdversaryEpisodeLog {
  int episode = 0;
  double adversary_return = 0.0;
  bool collision = false;
  std::size_t buffer_size = 0;
  double q_loss_mean = 0.0;
  double policy_loss = 0.0;
};

/// Learner plus replay memory; persists across training phases.
class AdversaryTrainer {
 public:
  AdversaryTrainer(SacConfig config, std::mt19937_64& rng);
  AdversaryTrainer(SacConfig config, SacNets nets);

  /// Runs `episodes` episodes: observe o, sample a_adv, perturb with BIM,
  /// let the frozen agent act on o', step, store, update.
  std::vector<AdversaryEpisodeLog> train(const sim::SimConfig& sim_config,
                                         const nn::Mlp& agent_actor,
                                         const attack::AttackConfig& attack_config, int episodes,
                                         std::mt19937_64& rng);

  const SacLearner& learner() const { return learner_; }
  SacLearner& learner() { return learner_; }
  const ReplayBuffer& buffer() const { return buffer_; }

 private:
  SacLearner learner_;
  ReplayBuffer buffer_;
  int episodes_done_ = 0;
};

}  // namespace igcarl::adversary

#endif  // IGCARL_ADVERSARY_HPP
