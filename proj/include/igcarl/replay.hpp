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

#ifndef IGCARL_REPLAY_HPP
#define IGCARL_REPLAY_HPP

#include <Eigen/Dense>

#include <random>
#include <span>
#include <vector>

#include "igcarl/sim.hpp"

namespace igcarl {

struct Transition {
  sim::Observation obs{};            // clean o_t
  sim::Observation obs_perturbed{};  // o'_t = o_t + delta_t
  double action = 0.0;               // executed agent acceleration
  double adv_action = 0.0;           // adversary's target action
  double reward = 0.0;
  double adv_reward = 0.0;
  sim::Observation next_obs{};       // clean o_{t+1}
  bool done = false;
};

/// Column-major minibatch; column b of every matrix belongs to sample b.
struct Batch {
  Eigen::MatrixXd obs;
  Eigen::MatrixXd obs_perturbed;
  Eigen::MatrixXd next_obs;
  Eigen::RowVectorXd action;
  Eigen::RowVectorXd adv_action;
  Eigen::RowVectorXd reward;
  Eigen::RowVectorXd adv_reward;
  Eigen::RowVectorXd done;  // 1.0 for terminal transitions

  Eigen::Index size() const { return obs.cols(); }
};

Batch make_batch(std::span<const Transition> transitions);

/// Fixed-capacity ring buffer with uniform sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(const Transition& t);
  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& operator[](std::size_t i) const { return data_[i]; }

  /// Uniform indices with replacement. Throws UsageError when size() < n.
  std::vector<std::size_t> sample_indices(std::size_t n, std::mt19937_64& rng) const;
  Batch sample(std::size_t n, std::mt19937_64& rng) const;

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Transition> data_;
};

}  // namespace igcarl

#endif  // IGCARL_REPLAY_HPP
