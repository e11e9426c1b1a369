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

// Acceptance checks 1-8. Prints one PASS/FAIL line per criterion and exits
// non-zero when any selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "igcarl/adversary.hpp"
#include "igcarl/agent.hpp"
#include "igcarl/attack.hpp"
#include "igcarl/errors.hpp"
#include "igcarl/harness.hpp"
#include "igcarl/nn.hpp"
#include "oracles.hpp"

using namespace igcarl;
using nn::Activation;
using nn::Mlp;
using sim::Observation;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// 1. Analytic gradients against central differences.

Outcome criterion1() {
  constexpr double h = 1e-5;
  constexpr double tol = 1e-5;
  const std::vector<std::vector<std::size_t>> shapes{{20, 64, 64, 1}, {21, 64, 64, 1}, {20, 64, 64, 2}};
  std::mt19937_64 rng(101);
  int pairs = 0;
  double worst_param = 0.0;
  double worst_input = 0.0;
  int relu_pairs = 0;
  for (const auto& shape : shapes) {
    for (int k = 0; k < 45; ++k) {
      // Two thirds tanh; the rest ReLU kept away from kinks.
      const Activation act = k % 3 == 2 ? Activation::Relu : Activation::Tanh;
      Mlp net = Mlp::random(shape, act, rng);
      std::vector<double> x = random_vector(shape.front(), rng);
      if (act == Activation::Relu) {
        while (oracle::min_abs_preactivation(net, x) < 1e-3) x = random_vector(shape.front(), rng);
        ++relu_pairs;
      }
      const std::vector<double> c = random_vector(shape.back(), rng);
      auto loss_at = [&](const Mlp& m, std::span<const double> in) {
        const auto y = oracle::ref_forward(m, in);
        double s = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) s += c[i] * y[i];
        return s;
      };

      const auto gp = nn::param_gradient(net, x, c);
      const std::vector<double> theta(net.params().begin(), net.params().end());
      const auto fp = oracle::central_difference(
          [&](std::span<const double> p) {
            std::copy(p.begin(), p.end(), net.params().begin());
            const double v = loss_at(net, x);
            std::copy(theta.begin(), theta.end(), net.params().begin());
            return v;
          },
          theta, h);
      const auto gi = nn::input_gradient(net, x, c);
      const auto fi = oracle::central_difference([&](std::span<const double> in) { return loss_at(net, in); }, x, h);
      worst_param = std::max(worst_param, oracle::max_relative_error(gp, fp));
      worst_input = std::max(worst_input, oracle::max_relative_error(gi, fi));
      ++pairs;
    }
  }
  const bool pass = pairs >= 100 && worst_param <= tol && worst_input <= tol;
  return {pass, fmt("%d pairs (%d ReLU), max rel err params %.2e inputs %.2e (tol %.0e)", pairs,
                    relu_pairs, worst_param, worst_input, tol)};
}

// ---------------------------------------------------------------------------
// 2. BIM stays in the l-infinity ball and lowers the PG loss.

Outcome criterion2() {
  const double budgets[] = {0.01, 0.03, 0.05};
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> target(-nn::kActionBound, nn::kActionBound);
  const int n = 10000;
  int violations = 0;
  int improved = 0;
  for (int k = 0; k < n; ++k) {
    const Activation act = k % 2 == 0 ? Activation::Relu : Activation::Tanh;
    const Mlp net = Mlp::random({20, 64, 64, 1}, act, rng);
    const Observation o = oracle::random_observation(rng);
    const double eps = budgets[k % 3];
    const double t = target(rng);
    const Observation d = attack::bim_perturb(net, o, t, attack::AttackConfig::with_budget(eps));
    if (!(oracle::norm_inf(d) <= eps)) ++violations;
    if (attack::pg_loss(net, o, d, t) <= attack::pg_loss(net, o, Observation{}, t)) ++improved;
  }
  const double frac = static_cast<double>(improved) / n;
  return {violations == 0 && frac >= 0.95,
          fmt("%d calls, %d budget violations, J(delta) <= J(0) in %.2f%%", n, violations, 100.0 * frac)};
}

// ---------------------------------------------------------------------------
// 3. Probe orthogonality and the l2 cap.

Outcome criterion3() {
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double cap = 0.1;
  const int n = 1000;
  double worst_ortho = 0.0;  // |u . g| / |g|
  double worst_norm = 0.0;
  int bad = 0;
  for (int k = 0; k < n; ++k) {
    const Mlp net = Mlp::random({20, 64, 64, 1}, k % 2 ? Activation::Tanh : Activation::Relu, rng);
    const Observation o = oracle::random_observation(rng);
    const double r = cap * std::sqrt(unit(rng));
    const double phi = 2.0 * std::numbers::pi * unit(rng);
    const double b1 = std::clamp(r * std::cos(phi), -cap, cap);
    const double b2 = std::clamp(r * std::sin(phi), -cap, cap);
    if (!attack::probe_feasible(b1, b2, cap)) continue;
    const auto p = attack::gradient_orthogonal_probe(net, o, attack::ProbeConfig(b1, b2, cap), rng);
    const auto g = nn::mean_action_gradient(net, o);
    const double ortho = std::abs(oracle::dot(p.orthogonal, g)) / oracle::norm2(g);
    // The combined offset before it is added to o.
    std::vector<double> delta(20);
    for (std::size_t i = 0; i < 20; ++i) delta[i] = b1 * p.gradient_dir[i] + b2 * p.orthogonal[i];
    const double dn = oracle::norm2(delta);
    worst_ortho = std::max(worst_ortho, ortho);
    worst_norm = std::max(worst_norm, dn);
    if (ortho > 1e-10 || dn > cap * (1.0 + 4.0 * std::numeric_limits<double>::epsilon())) ++bad;
  }
  return {bad == 0, fmt("%d draws, max |u.g|/|g| %.2e, max |delta|_2 %.17g", n, worst_ortho, worst_norm)};
}

// ---------------------------------------------------------------------------
// 4. Dual updates and the zero-multiplier gradient.

Outcome criterion4() {
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int failures = 0;
  int strict_increases = 0;
  for (int seq = 0; seq < 10; ++seq) {
    agent::LagrangeState s;
    s.alpha_lambda = std::pow(10.0, -1.0 - 4.0 * u(rng));
    for (int k = 0; k < 1000; ++k) {
      const double c1 = 0.05 * u(rng) - 0.02;
      const double c2 = 0.05 * u(rng) - 0.02;
      const agent::LagrangeState next = agent::dual_update(s, c1, c2);
      if (next.lambda1 < 0.0 || next.lambda2 < 0.0) ++failures;
      const double l1 = s.lambda1 + s.alpha_lambda * (c1 - s.eps1);
      const double l2 = s.lambda2 + s.alpha_lambda * (c2 - s.eps2);
      if (c1 > s.eps1) {
        if (!(next.lambda1 > s.lambda1 && next.lambda1 == l1)) ++failures;
        ++strict_increases;
      } else if (next.lambda1 != std::max(l1, 0.0)) {
        ++failures;
      }
      if (c2 > s.eps2) {
        if (!(next.lambda2 > s.lambda2 && next.lambda2 == l2)) ++failures;
      } else if (next.lambda2 != std::max(l2, 0.0)) {
        ++failures;
      }
      s = next;
    }
  }

  int mismatched = 0;
  int batches = 0;
  agent::AgentConfig cfg;
  adversary::SacConfig sac;
  for (int b = 0; b < 8; ++b) {
    const agent::AgentNets nets = agent::AgentNets::create(cfg, rng);
    const adversary::SacNets adv = adversary::SacNets::create(sac, rng);
    std::vector<Transition> ts(128);
    for (auto& t : ts) {
      t.obs = oracle::random_observation(rng);
      t.obs_perturbed = attack::add(t.obs, attack::random_sphere_noise(Observation{}, 0.05, rng));
      t.action = nn::kActionBound * (2.0 * u(rng) - 1.0);
    }
    const Batch batch = make_batch(ts);
    const auto reading = b % 2 ? agent::ActorReading::Clean : agent::ActorReading::Perturbed;
    const double beta = b < 4 ? 0.0 : cfg.action_penalty;
    const auto ref = agent::unconstrained_actor_gradient(nets, batch, reading, beta);
    const auto got = agent::actor_gradient(nets, agent::LagrangeState{}, batch, &adv, reading, beta).grad;
    if (got != ref) ++mismatched;
    ++batches;
  }
  return {failures == 0 && mismatched == 0,
          fmt("10^4 updates, %d property failures (%d strict increases checked); %d/%d batches not bitwise equal",
              failures, strict_increases, mismatched, batches)};
}

// ---------------------------------------------------------------------------
// 5. SAC on a one-step bandit: reward 1 iff the action lies in [3, 4].

Outcome criterion5() {
  const int updates = 20000;
  int hits = 0;
  std::string per_seed;
  for (std::uint64_t seed : {1, 2, 3}) {
    std::mt19937_64 rng(seed);
    adversary::SacConfig cfg;
    adversary::SacLearner learner(cfg, rng);
    ReplayBuffer buffer(cfg.buffer_capacity);
    const Observation state = oracle::random_observation(rng);
    auto pull = [&] {
      Transition t;
      t.obs = state;
      t.next_obs = state;
      t.action = adversary::act(learner.nets(), state, rng);
      t.reward = t.action >= 3.0 && t.action <= 4.0 ? 1.0 : 0.0;
      t.done = true;
      buffer.push(t);
    };
    while (buffer.size() < std::max(cfg.warmup, cfg.batch_size)) pull();
    for (int k = 0; k < updates; ++k) {
      pull();
      learner.update(adversary::agent_view(buffer.sample(cfg.batch_size, rng)), rng);
    }
    const double a = adversary::deterministic_action(learner.nets(), state);
    const bool hit = a >= 3.0 && a <= 4.0;
    hits += hit;
    per_seed += fmt(" seed%llu=%.3f", static_cast<unsigned long long>(seed), a);
  }
  return {hits >= 2, fmt("deterministic action after %d updates:%s (%d/3 in [3, 4])", updates,
                         per_seed.c_str(), hits)};
}

// ---------------------------------------------------------------------------
// 6. Clean-trained agent without attack.

Outcome criterion6() {
  harness::ExperimentConfig cfg;
  const auto run = harness::train_method(cfg, harness::kMethodClean, 1);
  harness::EvalRequest req;
  req.episodes = 200;
  req.seed_base = cfg.eval.seed_base;
  const auto m = harness::evaluate(cfg.sim, run.actor, req);
  return {m.sr >= 0.90, fmt("seed 1, %d episodes: SR %.3f CR %.3f DE %.2f m/s (need SR >= 0.90)",
                            cfg.schedule.agent_episodes, m.sr, m.cr, m.de)};
}

// ---------------------------------------------------------------------------
// 7. SR ordering under BIM at epsilon 0.05 with three paired seeds.

Outcome criterion7() {
  harness::ExperimentConfig cfg;
  cfg.eval.epsilons = {0.05};
  const char* methods[] = {harness::kMethodIgcarl, harness::kMethodUnconstrained, harness::kMethodClean};
  double mean[3] = {0.0, 0.0, 0.0};
  std::string per_seed;
  for (std::uint64_t seed : {1, 2, 3}) {
    per_seed += fmt(" [seed %llu:", static_cast<unsigned long long>(seed));
    for (int m = 0; m < 3; ++m) {
      const auto run = harness::train_method(cfg, methods[m], seed);
      const auto rows = harness::evaluate_method(cfg, run);
      const double sr = rows.back().metrics.sr;
      mean[m] += sr / 3.0;
      per_seed += fmt(" %s %.3f", methods[m], sr);
    }
    per_seed += "]";
  }
  const double vs_ablation = 100.0 * (mean[0] - mean[1]);
  const double vs_clean = 100.0 * (mean[0] - mean[2]);
  return {vs_ablation >= 10.0 && vs_clean >= 20.0,
          fmt("mean SR igcarl %.3f adv_unconstrained %.3f clean %.3f; margins %+.1f pts (need 10) and "
              "%+.1f pts (need 20);",
              mean[0], mean[1], mean[2], vs_ablation, vs_clean) +
              per_seed};
}

// ---------------------------------------------------------------------------
// 8. Byte-identical reruns and checkpoint roundtrips.

Outcome criterion8(const std::filesystem::path& data_dir) {
  const auto base = std::filesystem::temp_directory_path() / "igcarl_acceptance_c8";
  std::filesystem::remove_all(base);
  harness::ExperimentConfig cfg = harness::load_config(data_dir / "smoke.json");
  cfg.methods = {harness::kMethodIgcarl, harness::kMethodUnconstrained, harness::kMethodClean,
                 harness::kMethodSac};
  cfg.seeds = {1, 2};
  cfg.out_dir = base / "a";
  harness::run_igcarl(cfg);
  cfg.out_dir = base / "b";
  harness::run_igcarl(cfg);
  const bool metrics_same = slurp(base / "a/metrics.csv") == slurp(base / "b/metrics.csv") &&
                            !slurp(base / "a/metrics.csv").empty();
  const bool summary_same = slurp(base / "a/summary.csv") == slurp(base / "b/summary.csv");

  int ckpts = 0;
  int ckpt_failures = 0;
  for (const auto& e : std::filesystem::recursive_directory_iterator(base / "a")) {
    if (e.path().extension() != ".ckpt") continue;
    ++ckpts;
    const auto twin = base / "b" / std::filesystem::relative(e.path(), base / "a");
    if (!harness::checkpoint_roundtrip(e.path()) || slurp(e.path()) != slurp(twin)) ++ckpt_failures;
  }

  std::mt19937_64 rng(808);
  const Mlp net = Mlp::random({20, 64, 64, 1}, Activation::Relu, rng);
  nn::save_checkpoint(net, base / "net.ckpt");
  const Mlp back = nn::load_checkpoint(base / "net.ckpt");
  const bool bytes_same = nn::encode_checkpoint(back) == nn::encode_checkpoint(net) &&
                          harness::checkpoint_roundtrip(base / "net.ckpt");
  int forward_mismatch = 0;
  for (int k = 0; k < 100; ++k) {
    const auto x = random_vector(20, rng, 2.0);
    if (nn::forward(net, x) != nn::forward(back, x)) ++forward_mismatch;
  }
  const bool pass = metrics_same && summary_same && ckpt_failures == 0 && ckpts > 0 && bytes_same &&
                    forward_mismatch == 0;
  return {pass, fmt("metrics.csv identical: %s, summary.csv identical: %s, %d/%d run checkpoints "
                    "roundtrip and match, net roundtrip bytes %s, %d/100 forward mismatches",
                    metrics_same ? "yes" : "no", summary_same ? "yes" : "no", ckpts - ckpt_failures,
                    ckpts, bytes_same ? "equal" : "differ", forward_mismatch)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"igcarl acceptance checks"};
  std::vector<int> selected;
  std::string data_dir = IGCARL_TEST_DATA_DIR;
  app.add_option("--criterion", selected, "Criteria to run (1-8); all when omitted")
      ->check(CLI::Range(1, 8));
  app.add_option("--data", data_dir, "Directory holding smoke.json");
  CLI11_PARSE(app, argc, argv);
  if (selected.empty()) selected = {1, 2, 3, 4, 5, 6, 7, 8};

  const std::function<Outcome()> checks[] = {
      criterion1, criterion2, criterion3, criterion4, criterion5, criterion6, criterion7,
      [&] { return criterion8(data_dir); }};
  int failed = 0;
  for (int c : selected) {
    const auto start = std::chrono::steady_clock::now();
    Outcome r;
    try {
      r = checks[c - 1]();
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %d: %s (%.1f s) %s\n", c, r.pass ? "PASS" : "FAIL", secs, r.detail.c_str());
    std::fflush(stdout);
    failed += !r.pass;
  }
  return failed == 0 ? 0 : 1;
}
