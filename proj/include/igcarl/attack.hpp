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

#ifndef IGCARL_ATTACK_HPP
#define IGCARL_ATTACK_HPP

#include <random>

#include "igcarl/nn.hpp"
#include "igcarl/sim.hpp"

namespace igcarl::attack {

using sim::Observation;

/// l-infinity budget and iteration schedule of the targeted iterative attack.
struct AttackConfig {
  double epsilon = 0.05;
  int iters = 50;
  double step_size = 0.05 / 50;
  /// Move *up* the loss gradient instead of down it. The targeted attack wants
  /// the agent's action close to the adversary's, so descent is the default.
  bool ascent = false;

  /// step_size = epsilon / iters (or 0 when iters == 0).
  static AttackConfig with_budget(double epsilon, int iters = 50, bool ascent = false);
  void validate() const;
};

/// (a_target - mu(o + delta))^2, with mu the deterministic squashed action.
double pg_loss(const nn::Mlp& policy, const Observation& obs, const Observation& delta,
               double target_action);

/// Signed-gradient iterations from delta = 0, each followed by a clip to
/// [-epsilon, epsilon], so the result always satisfies |delta|_inf <= epsilon.
Observation bim_perturb(const nn::Mlp& policy, const Observation& obs, double target_action,
                        const AttackConfig& config);

Observation add(const Observation& a, const Observation& b);

/// Magnitudes along the normalized action gradient and a random orthogonal direction.
struct ProbeConfig {
  ProbeConfig() = default;
  /// Throws ConfigError when |beta1 g + beta2 u|_2 = hypot(beta1, beta2) exceeds eps_max.
  ProbeConfig(double beta1, double beta2, double eps_max = 0.1);

  double beta1 = 0.0;
  double beta2 = 0.0;
  double eps_max = 0.1;
};

struct ProbeResult {
  Observation perturbed{};
  Observation gradient_dir{};  // g / |g|
  Observation orthogonal{};    // unit u with u . g = 0
  double gradient_norm = 0.0;
};

/// o' = o + beta1 g/|g| + beta2 u. Throws DegenerateGradientError when |g| < 1e-12.
ProbeResult gradient_orthogonal_probe(const nn::Mlp& policy, const Observation& obs,
                                      const ProbeConfig& config, std::mt19937_64& rng);

/// Whether a (beta1, beta2) pair fits inside the l2 cap.
bool probe_feasible(double beta1, double beta2, double eps_max);

enum class SphereMode { Surface, Ball };

/// o + epsilon * z/|z| for standard normal z (surface), or uniform in the ball.
Observation random_sphere_noise(const Observation& obs, double epsilon, std::mt19937_64& rng,
                                SphereMode mode = SphereMode::Surface);

}  // namespace igcarl::attack

#endif  // IGCARL_ATTACK_HPP
