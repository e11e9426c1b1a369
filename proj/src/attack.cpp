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

#include "igcarl/attack.hpp"

#include <algorithm>
#include <cmath>

#include "igcarl/errors.hpp"

namespace igcarl::attack {
namespace {

double dot(const Observation& a, const Observation& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(const Observation& a) { return std::sqrt(dot(a, a)); }

double sign(double x) { return static_cast<double>((x > 0.0) - (x < 0.0)); }

Observation standard_normal(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Observation z;
  for (double& v : z) v = n(rng);
  return z;
}

}  // namespace

AttackConfig AttackConfig::with_budget(double epsilon, int iters, bool ascent) {
  AttackConfig c;
  c.epsilon = epsilon;
  c.iters = iters;
  c.step_size = iters > 0 ? epsilon / iters : 0.0;
  c.ascent = ascent;
  c.validate();
  return c;
}

void AttackConfig::validate() const {
  if (!(epsilon >= 0.0)) throw ConfigError("attack epsilon must be >= 0");
  if (iters < 0) throw ConfigError("attack iterations must be >= 0");
  if (iters > 0 && epsilon > 0.0 && !(step_size > 0.0)) throw ConfigError("attack step size must be > 0");
}

Observation add(const Observation& a, const Observation& b) {
  Observation r;
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
  return r;
}

double pg_loss(const nn::Mlp& policy, const Observation& obs, const Observation& delta,
               double target_action) {
  if (policy.input_size() != obs.size()) throw UsageError("pg_loss: policy input size mismatch");
  const double gap = target_action - nn::mean_action(policy, add(obs, delta));
  return gap * gap;
}

Observation bim_perturb(const nn::Mlp& policy, const Observation& obs, double target_action,
                        const AttackConfig& config) {
  config.validate();
  Observation delta{};
  if (config.iters == 0 || config.epsilon == 0.0) return delta;
  const double direction = config.ascent ? 1.0 : -1.0;
  const double eps = config.epsilon;
  for (int it = 0; it < config.iters; ++it) {
    const Observation x = add(obs, delta);
    double mu = 0.0;
    const std::vector<double> dmu = nn::mean_action_gradient(policy, x, nn::kActionBound, &mu);
    const double outer = -2.0 * (target_action - mu);  // dJ/dmu
    for (std::size_t i = 0; i < delta.size(); ++i) {
      const double step = delta[i] + direction * config.step_size * sign(outer * dmu[i]);
      delta[i] = std::clamp(step, -eps, eps);
    }
  }
  return delta;
}

ProbeConfig::ProbeConfig(double b1, double b2, double cap) : beta1(b1), beta2(b2), eps_max(cap) {
  if (!(cap >= 0.0)) throw ConfigError("probe eps_max must be >= 0");
  if (!probe_feasible(b1, b2, cap)) {
    throw ConfigError("probe magnitudes exceed the l2 cap eps_max");
  }
}

bool probe_feasible(double beta1, double beta2, double eps_max) {
  return std::hypot(beta1, beta2) <= eps_max * (1.0 + 1e-12);
}

ProbeResult gradient_orthogonal_probe(const nn::Mlp& policy, const Observation& obs,
                                      const ProbeConfig& config, std::mt19937_64& rng) {
  const std::vector<double> g = nn::mean_action_gradient(policy, obs);
  ProbeResult r;
  std::copy(g.begin(), g.end(), r.gradient_dir.begin());
  r.gradient_norm = norm(r.gradient_dir);
  if (!(r.gradient_norm >= 1e-12)) {
    throw DegenerateGradientError("action gradient vanishes at this observation");
  }
  for (double& v : r.gradient_dir) v /= r.gradient_norm;

  // Gram-Schmidt twice; the second pass removes the residual left by rounding.
  Observation u{};
  double u_norm = 0.0;
  while (u_norm < 1e-6) {
    u = standard_normal(rng);
    for (int pass = 0; pass < 2; ++pass) {
      const double along = dot(u, r.gradient_dir);
      for (std::size_t i = 0; i < u.size(); ++i) u[i] -= along * r.gradient_dir[i];
    }
    u_norm = norm(u);
  }
  for (double& v : u) v /= u_norm;
  r.orthogonal = u;

  for (std::size_t i = 0; i < obs.size(); ++i) {
    r.perturbed[i] = obs[i] + config.beta1 * r.gradient_dir[i] + config.beta2 * u[i];
  }
  return r;
}

Observation random_sphere_noise(const Observation& obs, double epsilon, std::mt19937_64& rng,
                                SphereMode mode) {
  if (!(epsilon >= 0.0)) throw UsageError("noise radius must be >= 0");
  if (epsilon == 0.0) return obs;
  Observation z;
  double n = 0.0;
  do {
    z = standard_normal(rng);
    n = norm(z);
  } while (n == 0.0);
  double radius = epsilon;
  if (mode == SphereMode::Ball) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    radius *= std::pow(u(rng), 1.0 / static_cast<double>(obs.size()));
  }
  Observation out;
  for (std::size_t i = 0; i < obs.size(); ++i) out[i] = obs[i] + radius * (z[i] / n);
  return out;
}

}  // namespace igcarl::attack
