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

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <set>
#include <vector>

#include "doctest.h"
#include "igcarl/adversary.hpp"
#include "igcarl/errors.hpp"
#include "igcarl/replay.hpp"
#include "oracles.hpp"

using namespace igcarl;
using adversary::SacConfig;
using adversary::SacNets;
using nn::Activation;
using nn::Mlp;
using sim::Observation;

namespace {

SacConfig small_config() {
  SacConfig c;
  c.hidden = {16, 16};
  c.batch_size = 32;
  c.warmup = 64;
  c.buffer_capacity = 10000;
  return c;
}

// Networks with all weights zero so every output is its bias.
SacNets constant_nets(double mean, double log_std, double q1, double q2, double v, double alpha) {
  SacNets n;
  n.policy = Mlp({20, 4, 2}, Activation::Tanh);
  n.policy.bias(1)(0) = mean;
  n.policy.bias(1)(1) = log_std;
  n.q1 = Mlp({21, 4, 1}, Activation::Tanh);
  n.q1.bias(1)(0) = q1;
  n.q2 = Mlp({21, 4, 1}, Activation::Tanh);
  n.q2.bias(1)(0) = q2;
  n.q1_target = n.q1;
  n.q2_target = n.q2;
  n.value = Mlp({20, 4, 1}, Activation::Tanh);
  n.value.bias(1)(0) = v;
  n.alpha = alpha;
  return n;
}

adversary::SacBatch random_batch(Eigen::Index n, std::mt19937_64& rng, double done_value = 0.0) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  adversary::SacBatch b;
  b.obs = Eigen::MatrixXd::NullaryExpr(20, n, [&] { return u(rng); });
  b.next_obs = Eigen::MatrixXd::NullaryExpr(20, n, [&] { return u(rng); });
  b.action = Eigen::RowVectorXd::NullaryExpr(n, [&] { return 7.6 * u(rng); });
  b.reward = Eigen::RowVectorXd::NullaryExpr(n, [&] { return u(rng); });
  b.done = Eigen::RowVectorXd::Constant(n, done_value);
  return b;
}

std::vector<double> normals(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

Transition numbered(double k) {
  Transition t;
  t.reward = k;
  t.obs[0] = k;
  return t;
}

}  // namespace

TEST_CASE("act is reproducible and bounded") {
  std::mt19937_64 init(1);
  const SacNets nets = SacNets::create(small_config(), init);
  std::mt19937_64 rng(2);
  for (int k = 0; k < 200; ++k) {
    const Observation o = oracle::random_observation(rng);
    std::mt19937_64 a(k);
    std::mt19937_64 b(k);
    const double x = adversary::act(nets, o, a);
    CHECK(x == adversary::act(nets, o, b));
    CHECK(std::abs(x) <= nn::kActionBound);
  }
}

TEST_CASE("act samples the squashed Gaussian of the policy head") {
  const double m = 0.3;
  const double ls = -0.5;
  const SacNets nets = constant_nets(m, ls, 0.0, 0.0, 0.0, 0.1);
  // Quadrature of E[7.6 tanh(m + s z)] with z standard normal.
  const double s = std::exp(ls);
  double expected = 0.0;
  const int k = 20000;
  const double h = 20.0 / k;
  for (int i = 0; i < k; ++i) {
    const double z = -10.0 + (i + 0.5) * h;
    expected += 7.6 * std::tanh(m + s * z) * std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi) * h;
  }
  std::mt19937_64 rng(3);
  const int n = 100000;
  double sum = 0.0;
  double sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double a = adversary::act(nets, Observation{}, rng);
    sum += a;
    sq += a * a;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sq / n - mean * mean) / n);
  CHECK(std::abs(mean - expected) < 4.0 * se);
  CHECK(adversary::deterministic_action(nets, Observation{}) == 7.6 * std::tanh(m));
}

TEST_CASE("policy_sample log-density matches the oracle") {
  std::mt19937_64 rng(4);
  const SacNets nets = SacNets::create(small_config(), rng);
  for (int k = 0; k < 50; ++k) {
    const Observation o = oracle::random_observation(rng);
    const double z = normals(1, rng)[0];
    const auto head = nn::forward(nets.policy, o);
    const double ls = std::clamp(head[1], nn::kLogStdMin, nn::kLogStdMax);
    const auto s = adversary::policy_sample(nets.policy, o, z);
    const double u = head[0] + std::exp(ls) * z;
    CHECK(s.action == doctest::Approx(7.6 * std::tanh(u)).epsilon(1e-13));
    CHECK(s.log_prob == doctest::Approx(oracle::squashed_log_prob(head[0], ls, u)).epsilon(1e-10));
  }
}

TEST_CASE("q_target drops the bootstrap term on terminal transitions") {
  std::mt19937_64 rng(5);
  const SacNets nets = SacNets::create(small_config(), rng);
  const Observation o = oracle::random_observation(rng);
  CHECK(adversary::q_target(nets, 1.0, o, true, 0.3, 0.99) == 1.0);
  CHECK(adversary::q_target(nets, 0.0, o, true, -2.0, 0.99) == 0.0);
}

TEST_CASE("q_target on a hand-built fixture") {
  // Policy head mean 0, log_std 0; noise 0 gives u = 0, a = 0 and
  // log pi = -log(sqrt(2 pi)) - log(7.6). Target critics output 2 and 3.
  const double alpha = 0.1;
  const SacNets nets = constant_nets(0.0, 0.0, 2.0, 3.0, 0.0, alpha);
  const double logp = -0.5 * std::log(2.0 * std::numbers::pi) - std::log(7.6);
  const double expected = 0.5 + 0.99 * (2.0 - alpha * logp);
  CHECK(adversary::q_target(nets, 0.5, Observation{}, false, 0.0, 0.99) ==
        doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("critic loss is half the mean squared residual before the step") {
  SacNets nets = constant_nets(0.0, 0.0, 0.7, -0.4, 0.0, 0.1);
  std::mt19937_64 rng(6);
  const auto batch = random_batch(16, rng, 1.0);
  adversary::SacLearner learner(small_config(), nets);
  const auto losses = learner.update_critics(batch, normals(16, rng));
  double e1 = 0.0;
  double e2 = 0.0;
  for (Eigen::Index b = 0; b < 16; ++b) {
    e1 += 0.5 * (0.7 - batch.reward(b)) * (0.7 - batch.reward(b)) / 16.0;
    e2 += 0.5 * (-0.4 - batch.reward(b)) * (-0.4 - batch.reward(b)) / 16.0;
  }
  CHECK(losses.q1 == doctest::Approx(e1).epsilon(1e-13));
  CHECK(losses.q2 == doctest::Approx(e2).epsilon(1e-13));
  CHECK_FALSE(learner.nets().q1 == nets.q1);
}

TEST_CASE("policy loss with zero temperature and constant critics is -Q") {
  const SacNets nets = constant_nets(0.2, -1.0, 5.0, 6.0, 0.0, 0.0);
  std::mt19937_64 rng(7);
  const auto batch = random_batch(8, rng);
  CHECK(adversary::policy_loss(nets, batch, normals(8, rng)) == doctest::Approx(-5.0));
}

TEST_CASE("policy loss on a single hand-evaluated sample") {
  // Q1 = 0.8 * a/7.6 + 1, Q2 = 10, so the minimum is Q1 everywhere.
  SacNets nets = constant_nets(0.4, -0.7, 1.0, 10.0, 0.0, 0.2);
  nets.q1 = Mlp({21, 1}, Activation::Identity);
  nets.q1.weights(0)(0, 20) = 0.8;
  nets.q1.bias(0)(0) = 1.0;
  std::mt19937_64 rng(8);
  const auto batch = random_batch(1, rng);
  const double z = 0.37;
  const double u = 0.4 + std::exp(-0.7) * z;
  const double expected = 0.2 * oracle::squashed_log_prob(0.4, -0.7, u) - (0.8 * std::tanh(u) + 1.0);
  const std::vector<double> noise{z};
  CHECK(adversary::policy_loss(nets, batch, noise) == doctest::Approx(expected).epsilon(1e-13));
  adversary::SacLearner learner(small_config(), nets);
  CHECK(learner.update_policy(batch, noise) == doctest::Approx(expected).epsilon(1e-13));
}

TEST_CASE("policy loss is affine in the temperature with slope mean log pi") {
  std::mt19937_64 rng(9);
  SacNets nets = SacNets::create(small_config(), rng);
  const auto batch = random_batch(32, rng);
  const auto noise = normals(32, rng);
  double mean_logp = 0.0;
  for (Eigen::Index b = 0; b < 32; ++b) {
    Observation o;
    for (int i = 0; i < 20; ++i) o[static_cast<std::size_t>(i)] = batch.obs(i, b);
    mean_logp += adversary::policy_sample(nets.policy, o, noise[static_cast<std::size_t>(b)]).log_prob / 32.0;
  }
  double previous = 0.0;
  for (int k = 0; k <= 5; ++k) {
    nets.alpha = 0.1 * k;
    const double loss = adversary::policy_loss(nets, batch, noise);
    if (k > 0) CHECK(loss - previous == doctest::Approx(0.1 * mean_logp).epsilon(1e-9));
    previous = loss;
  }
}

TEST_CASE("value loss is zero at the soft value and never negative") {
  const SacNets exact = constant_nets(0.1, -0.3, 4.0, 4.5, 4.0, 0.0);
  std::mt19937_64 rng(10);
  const auto batch = random_batch(16, rng);
  adversary::SacLearner zero(small_config(), exact);
  CHECK(zero.update_value(batch, normals(16, rng)) == doctest::Approx(0.0));

  adversary::SacLearner learner(small_config(), rng);
  for (int k = 0; k < 20; ++k) CHECK(learner.update_value(random_batch(16, rng), normals(16, rng)) >= 0.0);
}

TEST_CASE("target critics follow the Polyak rule") {
  std::mt19937_64 rng(11);
  adversary::SacLearner learner(small_config(), rng);
  SacNets& nets = learner.nets();
  for (double& p : nets.q1.params()) p += 0.5;
  const Mlp before = nets.q1_target;
  learner.update_targets();
  const double tau = learner.config().polyak;
  for (std::size_t i = 0; i < before.param_count(); ++i) {
    CHECK(nets.q1_target.params()[i] == (1.0 - tau) * before.params()[i] + tau * nets.q1.params()[i]);
  }
}

TEST_CASE("replay buffer keeps the newest transitions up to capacity") {
  ReplayBuffer buf(5);
  for (int k = 0; k < 8; ++k) buf.push(numbered(k));
  CHECK(buf.size() == 5);
  std::multiset<double> kept;
  for (std::size_t i = 0; i < buf.size(); ++i) kept.insert(buf[i].reward);
  CHECK(kept == std::multiset<double>{3, 4, 5, 6, 7});
  std::mt19937_64 rng(12);
  CHECK_THROWS_AS(buf.sample_indices(6, rng), UsageError);
  CHECK_THROWS_AS(ReplayBuffer(0), ConfigError);
}

TEST_CASE("replay sampling is uniform") {
  ReplayBuffer buf(100);
  for (int k = 0; k < 10; ++k) buf.push(numbered(k));
  std::mt19937_64 rng(13);
  std::vector<int> counts(10, 0);
  const int n = 20000;
  for (int k = 0; k < n / 10; ++k) {
    for (std::size_t i : buf.sample_indices(10, rng)) ++counts[i];
  }
  double chi2 = 0.0;
  const double expected = n / 10.0;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  // 95th percentile of chi-square with 9 degrees of freedom.
  CHECK(chi2 < 16.919);
}

TEST_CASE("make_batch lays samples out as columns") {
  std::vector<Transition> ts{numbered(1), numbered(2), numbered(3)};
  ts[1].done = true;
  ts[2].adv_action = -4.0;
  const Batch b = make_batch(ts);
  CHECK(b.size() == 3);
  CHECK(b.obs(0, 1) == 2.0);
  CHECK(b.reward(2) == 3.0);
  CHECK(b.done(1) == 1.0);
  CHECK(b.done(0) == 0.0);
  CHECK(b.adv_action(2) == -4.0);
  const auto v = adversary::adversary_view(b);
  CHECK(v.action(2) == -4.0);
  CHECK(v.reward == b.adv_reward);
}

TEST_CASE("network checkpoints roundtrip") {
  std::mt19937_64 rng(14);
  const SacNets nets = SacNets::create(small_config(), rng);
  const auto dir = std::filesystem::temp_directory_path() / "igcarl_test_adversary";
  std::filesystem::remove_all(dir);
  nets.save(dir);
  const SacNets back = SacNets::load(dir, 0.1);
  CHECK(back.policy == nets.policy);
  CHECK(back.q2_target == nets.q2_target);
  CHECK(back.value == nets.value);
  CHECK_THROWS_AS(SacNets::load(dir / "missing", 0.1), IoError);
}

TEST_CASE("invalid SAC configs are rejected") {
  SacConfig c;
  c.gamma = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = SacConfig{};
  c.hidden.clear();
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = SacConfig{};
  c.buffer_capacity = 10;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("zero budget training stores unperturbed observations") {
  std::mt19937_64 rng(15);
  const Mlp agent = Mlp::random({20, 16, 1}, Activation::Tanh, rng);
  adversary::AdversaryTrainer trainer(small_config(), rng);
  const auto logs = trainer.train(sim::SimConfig{}, agent, attack::AttackConfig::with_budget(0.0), 10, rng);
  CHECK(logs.size() == 10);
  for (std::size_t i = 0; i < trainer.buffer().size(); ++i) {
    CHECK(trainer.buffer()[i].obs_perturbed == trainer.buffer()[i].obs);
  }
}

TEST_CASE("adversary training is deterministic for a seed") {
  auto run = [] {
    std::mt19937_64 rng(16);
    const Mlp agent = Mlp::random({20, 16, 1}, Activation::Tanh, rng);
    adversary::AdversaryTrainer trainer(small_config(), rng);
    auto logs = trainer.train(sim::SimConfig{}, agent, attack::AttackConfig::with_budget(0.05), 50, rng);
    return std::make_pair(logs, trainer.learner().nets().policy);
  };
  const auto a = run();
  const auto b = run();
  REQUIRE(a.first.size() == 50);
  CHECK(a.second == b.second);
  for (std::size_t i = 0; i < 50; ++i) {
    CHECK(a.first[i].adversary_return == b.first[i].adversary_return);
    CHECK(a.first[i].q_loss_mean == b.first[i].q_loss_mean);
    CHECK(a.first[i].buffer_size == b.first[i].buffer_size);
    CHECK(a.first[i].episode == static_cast<int>(i));
  }
  CHECK(a.first.back().q_loss_mean > 0.0);
}

TEST_CASE("adversary return is one exactly on collision episodes") {
  std::mt19937_64 rng(17);
  const Mlp agent = Mlp::random({20, 16, 1}, Activation::Tanh, rng);
  adversary::AdversaryTrainer trainer(small_config(), rng);
  for (const auto& log : trainer.train(sim::SimConfig{}, agent, attack::AttackConfig::with_budget(0.05), 20, rng)) {
    CHECK(log.adversary_return == (log.collision ? 1.0 : 0.0));
  }
}
