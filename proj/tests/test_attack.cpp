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
#include <random>
#include <vector>

#include "doctest.h"
#include "igcarl/attack.hpp"
#include "igcarl/errors.hpp"
#include "oracles.hpp"

using namespace igcarl;
using attack::AttackConfig;
using nn::Activation;
using nn::Mlp;
using sim::Observation;

namespace {

// mu(o) = 7.6 tanh(w . o + b) with a fixed sign pattern in w.
Mlp linear_policy(double b = 0.0) {
  Mlp net({20, 1}, Activation::Identity);
  for (std::size_t i = 0; i < 20; ++i) net.weights(0)(0, i) = (i % 3 == 0 ? -0.1 : 0.05) * (1.0 + 0.1 * i);
  net.bias(0)(0) = b;
  return net;
}

Observation minus(const Observation& a, const Observation& b) {
  Observation r;
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
  return r;
}

double sgn(double x) { return static_cast<double>((x > 0.0) - (x < 0.0)); }

}  // namespace

TEST_CASE("pg_loss is the squared gap to the target action") {
  const Mlp net = linear_policy(0.2);
  std::mt19937_64 rng(1);
  const Observation o = oracle::random_observation(rng);
  const Observation d = oracle::random_observation(rng);
  const double mu = oracle::ref_mean_action(net, attack::add(o, d));
  CHECK(attack::pg_loss(net, o, d, 3.0) == doctest::Approx((3.0 - mu) * (3.0 - mu)).epsilon(1e-13));
  CHECK(attack::pg_loss(net, o, d, mu) == doctest::Approx(0.0));
  // Zero network: mu = 0 so the loss is target^2.
  const Mlp zero({20, 4, 1}, Activation::Tanh);
  CHECK(attack::pg_loss(zero, o, Observation{}, -2.5) == 6.25);
}

TEST_CASE("with_budget splits the budget evenly across iterations") {
  const AttackConfig c = AttackConfig::with_budget(0.05);
  CHECK(c.iters == 50);
  CHECK(c.step_size == 0.05 / 50);
  CHECK_FALSE(c.ascent);
  CHECK(AttackConfig::with_budget(0.1, 0).step_size == 0.0);
  CHECK_THROWS_AS(AttackConfig::with_budget(-0.1), ConfigError);
  AttackConfig bad;
  bad.step_size = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("zero iterations or zero budget leaves the observation untouched") {
  const Mlp net = linear_policy();
  std::mt19937_64 rng(2);
  const Observation o = oracle::random_observation(rng);
  for (double v : attack::bim_perturb(net, o, 7.0, AttackConfig::with_budget(0.1, 0))) CHECK(v == 0.0);
  for (double v : attack::bim_perturb(net, o, 7.0, AttackConfig::with_budget(0.0))) CHECK(v == 0.0);
}

TEST_CASE("unreachable target drives every coordinate to the budget edge") {
  // Target above the action range: mu rises monotonically along sign(w) and
  // never overshoots, so each coordinate walks to +-epsilon.
  const Mlp net = linear_policy();
  std::mt19937_64 rng(3);
  const Observation o = oracle::random_observation(rng);
  const double eps = 0.05;
  const Observation d = attack::bim_perturb(net, o, 8.0, AttackConfig::with_budget(eps));
  for (std::size_t i = 0; i < 20; ++i) {
    CHECK(d[i] == doctest::Approx(eps * sgn(net.weights(0)(0, i))).epsilon(1e-12));
  }
  CHECK(attack::pg_loss(net, o, d, 8.0) < attack::pg_loss(net, o, Observation{}, 8.0));

  const Observation up = attack::bim_perturb(net, o, 8.0, AttackConfig::with_budget(eps, 50, true));
  for (std::size_t i = 0; i < 20; ++i) {
    CHECK(up[i] == doctest::Approx(-eps * sgn(net.weights(0)(0, i))).epsilon(1e-12));
  }
}

TEST_CASE("matched target gives a zero perturbation") {
  std::mt19937_64 rng(4);
  const Mlp net = Mlp::random({20, 16, 1}, Activation::Tanh, rng);
  const Observation o = oracle::random_observation(rng);
  const double mu = nn::mean_action(net, o);
  for (double v : attack::bim_perturb(net, o, mu, AttackConfig::with_budget(0.05))) CHECK(v == 0.0);
}

TEST_CASE("perturbations stay inside the l-infinity budget and lower the loss") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> target(-7.6, 7.6);
  int improved = 0;
  const int n = 200;
  for (int k = 0; k < n; ++k) {
    const Mlp net = Mlp::random({20, 32, 32, 1}, Activation::Tanh, rng);
    const Observation o = oracle::random_observation(rng);
    const double eps = 0.01 + 0.002 * k;
    const double t = target(rng);
    const Observation d = attack::bim_perturb(net, o, t, AttackConfig::with_budget(eps));
    CHECK(oracle::norm_inf(d) <= eps);
    improved += attack::pg_loss(net, o, d, t) <= attack::pg_loss(net, o, Observation{}, t);
  }
  CHECK(improved == n);
}

TEST_CASE("zero-magnitude probe returns the observation") {
  std::mt19937_64 rng(6);
  const Mlp net = Mlp::random({20, 16, 1}, Activation::Tanh, rng);
  const Observation o = oracle::random_observation(rng);
  const auto r = attack::gradient_orthogonal_probe(net, o, attack::ProbeConfig(0.0, 0.0), rng);
  CHECK(r.perturbed == o);
}

TEST_CASE("probe directions match an independent gradient and decompose exactly") {
  std::mt19937_64 rng(7);
  for (int k = 0; k < 20; ++k) {
    const Mlp net = Mlp::random({20, 32, 1}, Activation::Tanh, rng);
    const Observation o = oracle::random_observation(rng);
    const double b1 = 0.06;
    const double b2 = -0.05;
    const auto r = attack::gradient_orthogonal_probe(net, o, attack::ProbeConfig(b1, b2), rng);

    const std::vector<double> fd = oracle::central_difference(
        [&](std::span<const double> x) { return oracle::ref_mean_action(net, x); },
        std::vector<double>(o.begin(), o.end()), 1e-6);
    const double fd_norm = oracle::norm2(fd);
    std::vector<double> fd_dir(fd.size());
    for (std::size_t i = 0; i < fd.size(); ++i) fd_dir[i] = fd[i] / fd_norm;
    CHECK(oracle::max_relative_error(fd_dir, r.gradient_dir) < 1e-6);
    CHECK(r.gradient_norm == doctest::Approx(fd_norm).epsilon(1e-6));

    const Observation diff = minus(r.perturbed, o);
    CHECK(std::abs(oracle::dot(diff, r.gradient_dir) - b1) <= 1e-10);
    CHECK(std::abs(oracle::dot(diff, r.orthogonal) - b2) <= 1e-10);
    CHECK(std::abs(oracle::dot(r.orthogonal, fd)) <= 1e-10 * fd_norm + 1e-7);
    CHECK(std::abs(oracle::dot(r.orthogonal, r.gradient_dir)) <= 1e-10);
    CHECK(oracle::norm2(r.orthogonal) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("pure gradient probe moves along the gradient only") {
  std::mt19937_64 rng(8);
  const Mlp net = Mlp::random({20, 16, 1}, Activation::Tanh, rng);
  const Observation o = oracle::random_observation(rng);
  const auto r = attack::gradient_orthogonal_probe(net, o, attack::ProbeConfig(0.1, 0.0), rng);
  for (std::size_t i = 0; i < 20; ++i) CHECK(r.perturbed[i] == o[i] + 0.1 * r.gradient_dir[i]);
}

TEST_CASE("infeasible probe magnitudes are rejected") {
  CHECK(attack::probe_feasible(0.06, 0.08, 0.1));
  CHECK_FALSE(attack::probe_feasible(0.08, 0.08, 0.1));
  CHECK_THROWS_AS(attack::ProbeConfig(0.08, 0.08, 0.1), ConfigError);
  CHECK_THROWS_AS(attack::ProbeConfig(0.0, 0.0, -1.0), ConfigError);
}

TEST_CASE("zero network has no usable gradient direction") {
  const Mlp zero({20, 8, 1}, Activation::Tanh);
  std::mt19937_64 rng(9);
  const Observation o = oracle::random_observation(rng);
  CHECK_THROWS_AS(attack::gradient_orthogonal_probe(zero, o, attack::ProbeConfig(0.01, 0.0), rng),
                  DegenerateGradientError);
}

TEST_CASE("sphere noise with zero radius is the identity") {
  std::mt19937_64 rng(10);
  const Observation o = oracle::random_observation(rng);
  CHECK(attack::random_sphere_noise(o, 0.0, rng) == o);
  CHECK_THROWS_AS(attack::random_sphere_noise(o, -0.1, rng), UsageError);
}

TEST_CASE("sphere noise lies on the sphere and is centered") {
  std::mt19937_64 rng(11);
  const Observation o{};
  const int n = 100000;
  const double eps = 0.1;
  std::vector<double> mean(20, 0.0);
  for (int k = 0; k < n; ++k) {
    const Observation p = attack::random_sphere_noise(o, eps, rng);
    const double r = oracle::norm2(p);
    if (std::abs(r - eps) > 1e-12) FAIL_CHECK("radius off the sphere: " << r);
    for (std::size_t i = 0; i < 20; ++i) mean[i] += p[i] / eps / n;
  }
  // Each coordinate of a uniform unit vector in R^20 has variance 1/20.
  const double sigma = std::sqrt(1.0 / 20.0 / n);
  for (double m : mean) CHECK(std::abs(m) <= 4.0 * sigma);
}

TEST_CASE("ball noise fills the ball with the right radial law") {
  std::mt19937_64 rng(12);
  const Observation o{};
  const int n = 20000;
  const double eps = 0.2;
  const double median = eps * std::pow(0.5, 1.0 / 20.0);
  int inside_median = 0;
  for (int k = 0; k < n; ++k) {
    const double r = oracle::norm2(attack::random_sphere_noise(o, eps, rng, attack::SphereMode::Ball));
    CHECK(r <= eps * (1.0 + 1e-12));
    inside_median += r <= median;
  }
  CHECK(std::abs(static_cast<double>(inside_median) / n - 0.5) < 0.02);
}
