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

#ifndef IGCARL_NN_HPP
#define IGCARL_NN_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <vector>

namespace igcarl::nn {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Activation : std::uint32_t { Tanh = 0, Relu = 1, Identity = 2 };

/// Fully connected network stored as one flat parameter vector.
///
/// Layer l owns a row-major weight block W_l (out x in) followed by its bias
/// b_l. Hidden layers apply `activation`; the output layer is linear.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<std::size_t> layer_sizes, Activation activation);

  /// Uniform(+-1/sqrt(fan_in)) init; the output layer is scaled by `output_scale`.
  static Mlp random(std::vector<std::size_t> layer_sizes, Activation activation,
                    std::mt19937_64& rng, double output_scale = 1.0);

  std::size_t input_size() const { return sizes_.front(); }
  std::size_t output_size() const { return sizes_.back(); }
  std::size_t num_layers() const { return sizes_.size() - 1; }
  std::size_t param_count() const { return params_.size(); }
  const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
  Activation activation() const { return activation_; }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  Eigen::Map<const RowMatrix> weights(std::size_t layer) const;
  Eigen::Map<RowMatrix> weights(std::size_t layer);
  Eigen::Map<const Eigen::VectorXd> bias(std::size_t layer) const;
  Eigen::Map<Eigen::VectorXd> bias(std::size_t layer);
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const {
    return offsets_[layer] + sizes_[layer] * sizes_[layer + 1];
  }

  bool all_finite() const;

  friend bool operator==(const Mlp&, const Mlp&) = default;

 private:
  std::vector<std::size_t> sizes_;
  Activation activation_ = Activation::Tanh;
  // Aligned so Eigen kernels see the same address alignment on every run.
  std::vector<double, Eigen::aligned_allocator<double>> params_;
  std::vector<std::size_t> offsets_;
};

/// Activations recorded by a batched forward pass; column b is sample b.
struct Tape {
  std::vector<Eigen::MatrixXd> values;  // values[0] = input, values.back() = output
};

/// Batched forward; `inputs` is (input_size x batch).
Eigen::MatrixXd forward(const Mlp& net, const Eigen::MatrixXd& inputs);
Eigen::MatrixXd forward(const Mlp& net, const Eigen::MatrixXd& inputs, Tape& tape);

/// Reverse pass for the loss whose gradient at the outputs is `output_grad`.
/// Adds dLoss/dParams (summed over the batch) into `param_grad` when it is
/// non-empty, and writes dLoss/dInputs into `input_grad` when non-null.
void backward(const Mlp& net, const Tape& tape, const Eigen::MatrixXd& output_grad,
              std::span<double> param_grad, Eigen::MatrixXd* input_grad);

std::vector<double> forward(const Mlp& net, std::span<const double> input);
std::vector<double> param_gradient(const Mlp& net, std::span<const double> input,
                                   std::span<const double> output_grad);
std::vector<double> input_gradient(const Mlp& net, std::span<const double> input,
                                   std::span<const double> output_grad);

// ---------------------------------------------------------------------------
// Squashed Gaussian head

inline constexpr double kActionBound = 7.6;
inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;

/// One reparameterized draw a = bound * tanh(mean + exp(log_std) * noise) with
/// its log-density and the partial derivatives SAC needs.
struct SquashedSample {
  double action = 0.0;
  double log_prob = 0.0;
  double squashed = 0.0;         // tanh(u), i.e. action / bound
  double d_squashed_d_u = 0.0;   // 1 - tanh(u)^2
  double d_logp_d_mean = 0.0;
  double d_logp_d_log_std = 0.0;
  double d_u_d_log_std = 0.0;    // exp(log_std) * noise
};

SquashedSample sample_squashed(double mean, double log_std, double noise,
                               double bound = kActionBound);

/// Deterministic action of a policy network: bound * tanh(output[0]).
double mean_action(const Mlp& policy, std::span<const double> obs, double bound = kActionBound);
/// d mean_action / d obs. Also stores mean_action in `action` when non-null.
std::vector<double> mean_action_gradient(const Mlp& policy, std::span<const double> obs,
                                         double bound = kActionBound, double* action = nullptr);

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
  AdamState() = default;
  AdamState(std::size_t n, double learning_rate)
      : m(n, 0.0), v(n, 0.0), lr(learning_rate) {}

  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One descent step: params -= lr * m_hat / (sqrt(v_hat) + eps).
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grad);

/// theta_target <- (1 - tau) * theta_target + tau * theta.
void polyak_update(Mlp& target, const Mlp& source, double tau);

// ---------------------------------------------------------------------------
// Checkpoints
//
// Layout (all integers and floats little-endian):
//   8 bytes   magic "IGCNNCKP"
//   u32       format version (1)
//   u32       activation tag
//   u32       number of layer sizes
//   u64[n]    layer sizes
//   u64       parameter count
//   f64[k]    parameters

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const Mlp& net);
/// Throws FormatError on bad magic, version, truncation, or trailing bytes.
Mlp decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const Mlp& net, const std::filesystem::path& path);
Mlp load_checkpoint(const std::filesystem::path& path);

}  // namespace igcarl::nn

#endif  // IGCARL_NN_HPP
