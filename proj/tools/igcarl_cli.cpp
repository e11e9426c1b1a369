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

// Command-line front end. Talks to the library through the C interface only.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>

#include "CLI11.hpp"
#include "igcarl/igcarl.h"

namespace {

// Carries a library status out of a subcommand.
struct Failure : std::runtime_error {
  Failure(igcarl_status s, const std::string& what) : std::runtime_error(what), status(s) {}
  igcarl_status status;
};

void check(igcarl_status s, const char* what) {
  if (s != IGCARL_OK) {
    throw Failure(s, std::string(what) + ": " + igcarl_status_name(s) + ": " + igcarl_last_error());
  }
}

struct ConfigDeleter {
  void operator()(igcarl_config* c) const { igcarl_config_free(c); }
};
struct AgentDeleter {
  void operator()(igcarl_agent* a) const { igcarl_agent_free(a); }
};
struct AdversaryDeleter {
  void operator()(igcarl_adversary* a) const { igcarl_adversary_free(a); }
};
using ConfigPtr = std::unique_ptr<igcarl_config, ConfigDeleter>;
using AgentPtr = std::unique_ptr<igcarl_agent, AgentDeleter>;
using AdversaryPtr = std::unique_ptr<igcarl_adversary, AdversaryDeleter>;

struct Options {
  std::string config;
  std::uint64_t seed = 1;
  std::string out = "out";
  std::optional<double> epsilon;
  std::string attack = "none";
  std::string agent;
  std::string adversary;
  std::string method = "igcarl";
  int episodes = -1;
  bool trace = false;
};

ConfigPtr load(const Options& o) {
  igcarl_config* raw = nullptr;
  if (o.config.empty()) {
    check(igcarl_config_default(&raw), "default config");
  } else {
    check(igcarl_config_load(o.config.c_str(), &raw), "load config");
  }
  return ConfigPtr(raw);
}

AgentPtr load_agent(const Options& o) {
  igcarl_agent* raw = nullptr;
  check(igcarl_agent_load(o.agent.c_str(), &raw), "load agent");
  return AgentPtr(raw);
}

double nan_if_unset(const std::optional<double>& v) {
  return v.value_or(std::numeric_limits<double>::quiet_NaN());
}

void print_metrics(const char* attack, double eps, const igcarl_metrics& m) {
  std::printf("attack=%s epsilon=%g episodes=%d SR=%.4f CR=%.4f DE=%.4f\n", attack, eps,
              m.n_episodes, m.sr, m.cr, m.de);
}

void cmd_train_agent(const Options& o) {
  ConfigPtr cfg = load(o);
  if (o.epsilon) check(igcarl_config_set_attack_epsilon(cfg.get(), *o.epsilon), "set epsilon");
  check(igcarl_train_agent(cfg.get(), o.method.c_str(), o.seed, o.out.c_str(), nullptr),
        "train agent");
  std::printf("trained %s (seed %llu); actor at %s\n", o.method.c_str(),
              static_cast<unsigned long long>(o.seed),
              (std::filesystem::path(o.out) / "actor.ckpt").c_str());
}

void cmd_train_adversary(const Options& o) {
  ConfigPtr cfg = load(o);
  AgentPtr agent = load_agent(o);
  check(igcarl_train_adversary(cfg.get(), agent.get(), nan_if_unset(o.epsilon), o.episodes, o.seed,
                               o.out.c_str(), nullptr),
        "train adversary");
  std::printf("adversary written to %s\n", (std::filesystem::path(o.out) / "adversary").c_str());
}

void cmd_run(const Options& o, bool seed_given) {
  ConfigPtr cfg = load(o);
  check(igcarl_config_set_out_dir(cfg.get(), o.out.c_str()), "set out dir");
  if (seed_given) check(igcarl_config_set_seeds(cfg.get(), &o.seed, 1), "set seed");
  if (o.epsilon) check(igcarl_config_set_attack_epsilon(cfg.get(), *o.epsilon), "set epsilon");
  check(igcarl_run(cfg.get()), "run");
  std::printf("results in %s (metrics.csv, summary.csv)\n", o.out.c_str());
}

void cmd_evaluate(const Options& o) {
  ConfigPtr cfg = load(o);
  AgentPtr agent = load_agent(o);
  const double eps = o.epsilon.value_or(o.attack == "none" ? 0.0 : 0.05);
  AdversaryPtr adv;
  if (o.attack == "bim") {
    igcarl_adversary* raw = nullptr;
    if (!o.adversary.empty()) {
      check(igcarl_adversary_load(cfg.get(), o.adversary.c_str(), &raw), "load adversary");
    } else {
      check(igcarl_train_adversary(cfg.get(), agent.get(), eps, o.episodes, o.seed, o.out.c_str(),
                                   &raw),
            "train adversary");
    }
    adv.reset(raw);
  }
  const std::filesystem::path out = o.out;
  const std::string trace = (out / "trace.csv").string();
  igcarl_metrics m{};
  check(igcarl_evaluate(cfg.get(), agent.get(), o.attack.c_str(), eps, adv.get(),
                        o.trace ? trace.c_str() : nullptr, &m),
        "evaluate");
  check(igcarl_metrics_write_csv((out / "metrics.csv").c_str(), "agent", o.seed, o.attack.c_str(),
                                 eps, &m),
        "write metrics");
  print_metrics(o.attack.c_str(), eps, m);
}

void cmd_probe(const Options& o) {
  ConfigPtr cfg = load(o);
  AgentPtr agent = load_agent(o);
  const std::string path = (std::filesystem::path(o.out) / "probe.csv").string();
  size_t rows = 0;
  size_t skipped = 0;
  check(igcarl_probe(cfg.get(), agent.get(), o.seed, path.c_str(), &rows, &skipped), "probe");
  if (skipped > 0) {
    std::fprintf(stderr, "warning: %zu observation(s) skipped, action gradient vanished\n", skipped);
  }
  std::printf("%zu probe rows written to %s\n", rows, path.c_str());
}

void cmd_noise(const Options& o) {
  ConfigPtr cfg = load(o);
  AgentPtr agent = load_agent(o);
  const std::string path = (std::filesystem::path(o.out) / "noise.csv").string();
  size_t rows = 0;
  check(igcarl_noise_study(cfg.get(), agent.get(), nan_if_unset(o.epsilon), o.seed, path.c_str(),
                           &rows),
        "noise study");
  std::printf("%zu noise rows written to %s\n", rows, path.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constrained adversarial training for an unprotected left turn"};
  app.set_version_flag("--version", std::string(igcarl_version()));
  app.require_subcommand(1);
  Options o;

  auto common = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON config file (defaults when omitted)")
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "Random seed");
    sub->add_option("--out", o.out, "Output directory");
  };
  auto needs_agent = [&o](CLI::App* sub) {
    sub->add_option("--agent", o.agent, "Actor checkpoint (actor.ckpt)")
        ->required()
        ->check(CLI::ExistingFile);
  };

  auto* train_adv = app.add_subcommand("train-adversary", "Train an adversary against a frozen agent");
  common(train_adv);
  needs_agent(train_adv);
  train_adv->add_option("--epsilon", o.epsilon, "BIM budget (defaults to the configured attack)");
  train_adv->add_option("--episodes", o.episodes, "Training episodes (negative: configured length)");

  auto* train_agent = app.add_subcommand("train-agent", "Train one agent recipe");
  common(train_agent);
  train_agent->add_option("--method", o.method, "igcarl, adv_unconstrained, clean or sac")
      ->check(CLI::IsMember({"igcarl", "adv_unconstrained", "clean", "sac"}));
  train_agent->add_option("--epsilon", o.epsilon, "Co-training BIM budget");

  auto* run = app.add_subcommand("run-igcarl", "Full pipeline: train, checkpoint, evaluate");
  common(run);
  run->add_option("--epsilon", o.epsilon, "Co-training BIM budget");

  auto* evaluate = app.add_subcommand("evaluate", "Evaluate an agent with or without attack");
  common(evaluate);
  needs_agent(evaluate);
  evaluate->add_option("--attack", o.attack, "none, bim or random")
      ->check(CLI::IsMember({"none", "bim", "random"}));
  evaluate->add_option("--epsilon", o.epsilon, "Attack budget (default 0.05 when attacked)");
  evaluate->add_option("--adversary", o.adversary,
                       "Adversary directory for bim; a fresh one is trained when omitted")
      ->check(CLI::ExistingDirectory);
  evaluate->add_option("--episodes", o.episodes, "Episodes for a freshly trained adversary");
  evaluate->add_flag("--trace", o.trace, "Write a per-step trace.csv");

  auto* probe = app.add_subcommand("probe", "Gradient/orthogonal probe grid");
  common(probe);
  needs_agent(probe);

  auto* noise = app.add_subcommand("noise-study", "Action offsets under random sphere noise");
  common(noise);
  needs_agent(noise);
  noise->add_option("--epsilon", o.epsilon, "Noise radius (defaults to the configured value)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_adv) cmd_train_adversary(o);
    if (*train_agent) cmd_train_agent(o);
    if (*run) cmd_run(o, run->count("--seed") > 0);
    if (*evaluate) cmd_evaluate(o);
    if (*probe) cmd_probe(o);
    if (*noise) cmd_noise(o);
  } catch (const Failure& f) {
    std::fprintf(stderr, "error: %s\n", f.what());
    return static_cast<int>(f.status);
  }
  return 0;
}
