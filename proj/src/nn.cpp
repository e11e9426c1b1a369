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

#include "igcarl/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <string>

#include "igcarl/errors.hpp"

namespace igcarl::nn {
namespace {

void apply_activation(Activation act, Eigen::MatrixXd& z) {
  switch (act) {
    case Activation::Tanh:
      z = z.array().tanh();
      break;
    case Activation::Relu:
      z = z.array().max(0.0);
      break;
    case Activation::Identity:
      break;
  }
}

// Multiplies `grad` in place by the activation derivative, given the activated values.
void apply_activation_grad(Activation act, const Eigen::MatrixXd& activated,
                           Eigen::MatrixXd& grad) {
  switch (act) {
    case Activation::Tanh:
      grad.array() *= 1.0 - activated.array().square();
      break;
    case Activation::Relu:
      grad.array() *= (activated.array() > 0.0).cast<double>();
      break;
    case Activation::Identity:
      break;
  }
}

void check_input(const Mlp& net, Eigen::Index rows) {
  if (net.layer_sizes().size() < 2) throw UsageError("network has no layers");
  if (static_cast<std::size_t>(rows) != net.input_size()) {
    throw UsageError("input size " + std::to_string(rows) + " does not match network input " +
                     std::to_string(net.input_size()));
  }
}

Eigen::MatrixXd column(std::span<const double> v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// Little-endian byte IO independent of host order.
template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  const U bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
    if (bytes_.size() - pos_ < sizeof(U)) throw FormatError("checkpoint truncated");
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) bits |= static_cast<U>(bytes_[pos_ + i]) << (8 * i);
    pos_ += sizeof(U);
    return std::bit_cast<T>(bits);
  }

  std::span<const std::uint8_t> take(std::size_t n) {
    if (bytes_.size() - pos_ < n) throw FormatError("checkpoint truncated");
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

constexpr char kMagic[8] = {'I', 'G', 'C', 'N', 'N', 'C', 'K', 'P'};

}  // namespace

Mlp::Mlp(std::vector<std::size_t> layer_sizes, Activation activation)
    : sizes_(std::move(layer_sizes)), activation_(activation) {
  if (sizes_.size() < 2) throw UsageError("an Mlp needs at least input and output sizes");
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    if (sizes_[l] == 0 || sizes_[l + 1] == 0) throw UsageError("layer sizes must be positive");
    offsets_.push_back(total);
    total += sizes_[l] * sizes_[l + 1] + sizes_[l + 1];
  }
  params_.assign(total, 0.0);
}

Mlp Mlp::random(std::vector<std::size_t> layer_sizes, Activation activation,
                std::mt19937_64& rng, double output_scale) {
  Mlp net(std::move(layer_sizes), activation);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(net.sizes_[l]));
    const double scale = (l + 1 == net.num_layers()) ? output_scale : 1.0;
    std::uniform_real_distribution<double> u(-bound, bound);
    const std::size_t end = l + 1 < net.num_layers() ? net.offsets_[l + 1] : net.params_.size();
    for (std::size_t i = net.offsets_[l]; i < end; ++i) net.params_[i] = scale * u(rng);
  }
  return net;
}

Eigen::Map<const RowMatrix> Mlp::weights(std::size_t l) const {
  return {params_.data() + offsets_[l], static_cast<Eigen::Index>(sizes_[l + 1]),
          static_cast<Eigen::Index>(sizes_[l])};
}

Eigen::Map<RowMatrix> Mlp::weights(std::size_t l) {
  return {params_.data() + offsets_[l], static_cast<Eigen::Index>(sizes_[l + 1]),
          static_cast<Eigen::Index>(sizes_[l])};
}

Eigen::Map<const Eigen::VectorXd> Mlp::bias(std::size_t l) const {
  return {params_.data() + bias_offset(l), static_cast<Eigen::Index>(sizes_[l + 1])};
}

Eigen::Map<Eigen::VectorXd> Mlp::bias(std::size_t l) {
  return {params_.data() + bias_offset(l), static_cast<Eigen::Index>(sizes_[l + 1])};
}

bool Mlp::all_finite() const {
  return std::all_of(params_.begin(), params_.end(), [](double p) { return std::isfinite(p); });
}

Eigen::MatrixXd forward(const Mlp& net, const Eigen::MatrixXd& inputs) {
  check_input(net, inputs.rows());
  Eigen::MatrixXd x = inputs;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    Eigen::MatrixXd z = net.weights(l) * x;
    z.colwise() += net.bias(l);
    if (l + 1 < net.num_layers()) apply_activation(net.activation(), z);
    x = std::move(z);
  }
  return x;
}

Eigen::MatrixXd forward(const Mlp& net, const Eigen::MatrixXd& inputs, Tape& tape) {
  check_input(net, inputs.rows());
  tape.values.resize(net.num_layers() + 1);
  tape.values[0] = inputs;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    Eigen::MatrixXd& z = tape.values[l + 1];
    z.noalias() = net.weights(l) * tape.values[l];
    z.colwise() += net.bias(l);
    if (l + 1 < net.num_layers()) apply_activation(net.activation(), z);
  }
  return tape.values.back();
}

void backward(const Mlp& net, const Tape& tape, const Eigen::MatrixXd& output_grad,
              std::span<double> param_grad, Eigen::MatrixXd* input_grad) {
  if (tape.values.size() != net.num_layers() + 1) throw UsageError("tape does not match network");
  if (static_cast<std::size_t>(output_grad.rows()) != net.output_size() ||
      output_grad.cols() != tape.values.back().cols()) {
    throw UsageError("output gradient shape does not match the forward batch");
  }
  if (!param_grad.empty() && param_grad.size() != net.param_count()) {
    throw UsageError("parameter gradient buffer has the wrong length");
  }
  Eigen::MatrixXd delta = output_grad;
  for (std::size_t l = net.num_layers(); l-- > 0;) {
    if (l + 1 < net.num_layers()) apply_activation_grad(net.activation(), tape.values[l + 1], delta);
    if (!param_grad.empty()) {
      const auto rows = static_cast<Eigen::Index>(net.layer_sizes()[l + 1]);
      const auto cols = static_cast<Eigen::Index>(net.layer_sizes()[l]);
      Eigen::Map<RowMatrix> gw(param_grad.data() + net.weight_offset(l), rows, cols);
      Eigen::Map<Eigen::VectorXd> gb(param_grad.data() + net.bias_offset(l), rows);
      // Products land in aligned temporaries; only elementwise adds touch the caller's buffer.
      const RowMatrix dw = delta * tape.values[l].transpose();
      const Eigen::VectorXd db = delta.rowwise().sum();
      gw += dw;
      gb += db;
    }
    if (l > 0 || input_grad != nullptr) {
      Eigen::MatrixXd next = net.weights(l).transpose() * delta;
      delta = std::move(next);
    }
  }
  if (input_grad != nullptr) *input_grad = std::move(delta);
}

std::vector<double> forward(const Mlp& net, std::span<const double> input) {
  const Eigen::MatrixXd y = forward(net, column(input));
  return {y.data(), y.data() + y.size()};
}

std::vector<double> param_gradient(const Mlp& net, std::span<const double> input,
                                   std::span<const double> output_grad) {
  if (output_grad.size() != net.output_size()) throw UsageError("output gradient size mismatch");
  Tape tape;
  forward(net, column(input), tape);
  std::vector<double> grad(net.param_count(), 0.0);
  backward(net, tape, column(output_grad), grad, nullptr);
  return grad;
}

std::vector<double> input_gradient(const Mlp& net, std::span<const double> input,
                                   std::span<const double> output_grad) {
  if (output_grad.size() != net.output_size()) throw UsageError("output gradient size mismatch");
  Tape tape;
  forward(net, column(input), tape);
  Eigen::MatrixXd gx;
  backward(net, tape, column(output_grad), {}, &gx);
  return {gx.data(), gx.data() + gx.size()};
}

SquashedSample sample_squashed(double mean, double log_std, double noise, double bound) {
  const double std_dev = std::exp(log_std);
  const double u = mean + std_dev * noise;
  SquashedSample s;
  s.squashed = std::tanh(u);
  s.action = bound * s.squashed;
  s.d_squashed_d_u = 1.0 - s.squashed * s.squashed;
  // log(1 - tanh(u)^2) written to stay finite for large |u|.
  const double au = std::abs(u);
  const double log_one_minus_t2 = 2.0 * (std::numbers::ln2 - au - std::log1p(std::exp(-2.0 * au)));
  const double log_normal =
      -0.5 * noise * noise - log_std - 0.5 * std::log(2.0 * std::numbers::pi);
  s.log_prob = log_normal - std::log(bound) - log_one_minus_t2;
  s.d_logp_d_mean = 2.0 * s.squashed;
  s.d_u_d_log_std = std_dev * noise;
  s.d_logp_d_log_std = -1.0 + 2.0 * s.squashed * s.d_u_d_log_std;
  return s;
}

double mean_action(const Mlp& policy, std::span<const double> obs, double bound) {
  return bound * std::tanh(forward(policy, obs).front());
}

std::vector<double> mean_action_gradient(const Mlp& policy, std::span<const double> obs,
                                         double bound, double* action) {
  Tape tape;
  const Eigen::MatrixXd y = forward(policy, column(obs), tape);
  const double t = std::tanh(y(0, 0));
  if (action != nullptr) *action = bound * t;
  Eigen::MatrixXd up = Eigen::MatrixXd::Zero(y.rows(), 1);
  up(0, 0) = bound * (1.0 - t * t);
  Eigen::MatrixXd gx;
  backward(policy, tape, up, {}, &gx);
  return {gx.data(), gx.data() + gx.size()};
}

void adam_step(AdamState& s, std::span<double> params, std::span<const double> grad) {
  if (params.size() != grad.size() || s.m.size() != params.size() || s.v.size() != params.size()) {
    throw UsageError("adam_step: parameter, gradient and moment lengths differ");
  }
  ++s.step;
  const double t = static_cast<double>(s.step);
  const double c1 = 1.0 - std::pow(s.beta1, t);
  const double c2 = 1.0 - std::pow(s.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * grad[i];
    s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * grad[i] * grad[i];
    const double m_hat = s.m[i] / c1;
    const double v_hat = s.v[i] / c2;
    params[i] -= s.lr * m_hat / (std::sqrt(v_hat) + s.eps);
  }
}

void polyak_update(Mlp& target, const Mlp& source, double tau) {
  if (target.param_count() != source.param_count()) throw UsageError("polyak: shape mismatch");
  auto t = target.params();
  auto s = source.params();
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = (1.0 - tau) * t[i] + tau * s[i];
}

std::vector<std::uint8_t> encode_checkpoint(const Mlp& net) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(net.activation()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(net.layer_sizes().size()));
  for (std::size_t n : net.layer_sizes()) put<std::uint64_t>(out, n);
  put<std::uint64_t>(out, net.param_count());
  for (double p : net.params()) put<double>(out, p);
  return out;
}

Mlp decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  const auto magic = in.take(sizeof(kMagic));
  if (std::memcmp(magic.data(), kMagic, sizeof(kMagic)) != 0) {
    throw FormatError("not a network checkpoint (bad magic)");
  }
  const auto version = in.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto act = in.get<std::uint32_t>();
  if (act > static_cast<std::uint32_t>(Activation::Identity)) {
    throw FormatError("unknown activation tag " + std::to_string(act));
  }
  const auto n_sizes = in.get<std::uint32_t>();
  if (n_sizes < 2 || n_sizes > 64) throw FormatError("implausible layer count");
  std::vector<std::size_t> sizes;
  for (std::uint32_t i = 0; i < n_sizes; ++i) {
    const auto n = in.get<std::uint64_t>();
    if (n == 0 || n > (1u << 20)) throw FormatError("implausible layer size");
    sizes.push_back(static_cast<std::size_t>(n));
  }
  Mlp net(std::move(sizes), static_cast<Activation>(act));
  const auto count = in.get<std::uint64_t>();
  if (count != net.param_count()) throw FormatError("parameter count does not match layer sizes");
  if (in.remaining() != count * sizeof(double)) {
    throw FormatError(in.remaining() < count * sizeof(double) ? "checkpoint truncated"
                                                              : "trailing bytes after parameters");
  }
  for (double& p : net.params()) p = in.get<double>();
  return net;
}

void save_checkpoint(const Mlp& net, const std::filesystem::path& path) {
  if (!net.all_finite()) throw NumericError("refusing to save non-finite parameters: " + path.string());
  const auto bytes = encode_checkpoint(net);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed: " + path.string());
}

Mlp load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                        std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace igcarl::nn
