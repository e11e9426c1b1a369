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

// Reference implementations written without the library's math, used as
// independent oracles by the unit and acceptance tests.

#ifndef IGCARL_TESTS_ORACLES_HPP
#define IGCARL_TESTS_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "igcarl/nn.hpp"
#include "igcarl/sim.hpp"

namespace oracle {

// Plain-loop forward pass over the flat parameter layout.
inline std::vector<double> ref_forward(const igcarl::nn::Mlp& net, std::span<const double> input) {
  const auto& sizes = net.layer_sizes();
  const auto p = net.params();
  std::vector<double> x(input.begin(), input.end());
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const std::size_t in = sizes[l];
    const std::size_t out = sizes[l + 1];
    std::vector<double> y(out, 0.0);
    for (std::size_t r = 0; r < out; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < in; ++c) acc += p[off + r * in + c] * x[c];
      y[r] = acc + p[off + in * out + r];
    }
    off += in * out + out;
    const bool hidden = l + 2 < sizes.size();
    if (hidden) {
      for (double& v : y) {
        switch (net.activation()) {
          case igcarl::nn::Activation::Tanh: v = std::tanh(v); break;
          case igcarl::nn::Activation::Relu: v = v > 0.0 ? v : 0.0; break;
          case igcarl::nn::Activation::Identity: break;
        }
      }
    }
    x = std::move(y);
  }
  return x;
}

inline double ref_mean_action(const igcarl::nn::Mlp& policy, std::span<const double> obs) {
  return 7.6 * std::tanh(ref_forward(policy, obs)[0]);
}

// Smallest |pre-activation| over hidden units; ReLU finite differences are
// only meaningful when this exceeds the step.
inline double min_abs_preactivation(const igcarl::nn::Mlp& net, std::span<const double> input) {
  const auto& sizes = net.layer_sizes();
  const auto p = net.params();
  std::vector<double> x(input.begin(), input.end());
  std::size_t off = 0;
  double best = INFINITY;
  for (std::size_t l = 0; l + 2 < sizes.size(); ++l) {
    const std::size_t in = sizes[l];
    const std::size_t out = sizes[l + 1];
    std::vector<double> y(out, 0.0);
    for (std::size_t r = 0; r < out; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < in; ++c) acc += p[off + r * in + c] * x[c];
      y[r] = acc + p[off + in * out + r];
      best = std::min(best, std::abs(y[r]));
      if (net.activation() == igcarl::nn::Activation::Relu) y[r] = std::max(y[r], 0.0);
      if (net.activation() == igcarl::nn::Activation::Tanh) y[r] = std::tanh(y[r]);
    }
    off += in * out + out;
    x = std::move(y);
  }
  return best;
}

// Central differences of f at x along every coordinate.
inline std::vector<double> central_difference(const std::function<double(std::span<const double>)>& f,
                                              std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// max_i |a_i - b_i| / max(max_i |a_i|, max_i |b_i|), 0 for two zero vectors.
inline double max_relative_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0;
  double scale = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max({scale, std::abs(a[i]), std::abs(b[i])});
  }
  return scale == 0.0 ? diff : diff / scale;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double norm_inf(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

// Log-density of a = bound * tanh(u), u ~ N(mean, exp(log_std)^2), in action units.
inline double squashed_log_prob(double mean, double log_std, double u, double bound = 7.6) {
  const double s = std::exp(log_std);
  const double z = (u - mean) / s;
  const double log_normal = -0.5 * z * z - log_std - 0.5 * std::log(2.0 * std::numbers::pi);
  const double t = std::tanh(u);
  return log_normal - std::log(bound * (1.0 - t * t));
}

inline igcarl::sim::Observation random_observation(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  igcarl::sim::Observation o{};
  for (double& v : o) v = u(rng);
  return o;
}

}  // namespace oracle

#endif  // IGCARL_TESTS_ORACLES_HPP
