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

#include "igcarl/replay.hpp"

#include "igcarl/errors.hpp"

namespace igcarl {

Batch make_batch(std::span<const Transition> ts) {
  const auto n = static_cast<Eigen::Index>(ts.size());
  const auto d = static_cast<Eigen::Index>(sim::kObsDim);
  Batch b;
  b.obs.resize(d, n);
  b.obs_perturbed.resize(d, n);
  b.next_obs.resize(d, n);
  b.action.resize(n);
  b.adv_action.resize(n);
  b.reward.resize(n);
  b.adv_reward.resize(n);
  b.done.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Transition& t = ts[static_cast<std::size_t>(j)];
    for (Eigen::Index i = 0; i < d; ++i) {
      b.obs(i, j) = t.obs[i];
      b.obs_perturbed(i, j) = t.obs_perturbed[i];
      b.next_obs(i, j) = t.next_obs[i];
    }
    b.action(j) = t.action;
    b.adv_action(j) = t.adv_action;
    b.reward(j) = t.reward;
    b.adv_reward(j) = t.adv_reward;
    b.done(j) = t.done ? 1.0 : 0.0;
  }
  return b;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay buffer capacity must be positive");
}

void ReplayBuffer::push(const Transition& t) {
  if (data_.size() < capacity_) {
    data_.push_back(t);
  } else {
    data_[next_] = t;
  }
  next_ = (next_ + 1) % capacity_;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t n, std::mt19937_64& rng) const {
  if (data_.size() < n || data_.empty()) {
    throw UsageError("replay buffer holds fewer transitions than the requested batch");
  }
  std::uniform_int_distribution<std::size_t> pick(0, data_.size() - 1);
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) i = pick(rng);
  return idx;
}

Batch ReplayBuffer::sample(std::size_t n, std::mt19937_64& rng) const {
  const auto idx = sample_indices(n, rng);
  std::vector<Transition> picked;
  picked.reserve(n);
  for (std::size_t i : idx) picked.push_back(data_[i]);
  return make_batch(picked);
}

}  // namespace igcarl
