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

#ifndef IGCARL_HARNESS_HPP
#define IGCARL_HARNESS_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "igcarl/adversary.hpp"
#include "igcarl/agent.hpp"
#include "igcarl/attack.hpp"
#include "igcarl/sim.hpp"

namespace igcarl::harness {

struct ScheduleConfig {
  /// Agent episodes per run; adversary phases come on top of this budget.
  int agent_episodes = 3000;
  /// Agent episodes per phase. Each phase is preceded by an adversary phase.
  int phase_length = 500;
  int adversary_phase_episodes = 500;
  /// Episodes used to train the fresh adversary that attacks a finished agent.
  int eval_adversary_episodes = 500;
};

struct EvalConfig {
  int episodes = 200;
  /// Evaluation episode i uses seed seed_base + i, disjoint from training seeds.
  std::uint64_t seed_base = 1'000'000'000ULL;
  std::vector<double> epsilons{0.0, 0.01, 0.03, 0.05};
};

struct ProbeStudyConfig {
  int observations = 5;
  int grid_points = 11;
  double eps_max = 0.1;
  int noise_draws = 1000;
  double noise_epsilon = 0.05;
  attack::SphereMode noise_mode = attack::SphereMode::Surface;
  std::uint64_t rollout_seed = 2'000'000'000ULL;
};

inline constexpr const char* kMethodIgcarl = "igcarl";
inline constexpr const char* kMethodUnconstrained = "adv_unconstrained";
inline constexpr const char* kMethodClean = "clean";
inline constexpr const char* kMethodSac = "sac";

struct ExperimentConfig {
  sim::SimConfig sim;
  /// Budget used while co-training; evaluation budgets come from `eval`.
  attack::AttackConfig attack = attack::AttackConfig::with_budget(0.05);
  adversary::SacConfig adversary;
  agent::AgentConfig agent;
  agent::LagrangeState lagrange;
  adversary::SacConfig sac_agent;
  ScheduleConfig schedule;
  EvalConfig eval;
  ProbeStudyConfig probe;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::vector<std::string> methods{kMethodIgcarl, kMethodUnconstrained, kMethodClean};
  std::filesystem::path out_dir = "out";

  /// Throws ConfigError on the first violated invariant.
  void validate() const;
};

/// Parses the JSON schema documented in the README. Missing keys keep their
/// defaults; unknown keys are rejected. Throws ConfigError.
ExperimentConfig parse_config(std::string_view json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ExperimentConfig& config);

// ---------------------------------------------------------------------------
// Evaluation

enum class AttackMode { None, Bim, Random };

/// Throws ConfigError for anything other than none, bim, random.
AttackMode parse_attack_mode(std::string_view name);
const char* attack_mode_name(AttackMode mode);

struct Metrics {
  double sr = 0.0;  // success rate
  double cr = 0.0;  // collision rate
  double de = 0.0;  // mean over episodes of per-episode mean speed (m/s)
  int n_episodes = 0;

  double timeout_rate() const { return 1.0 - sr - cr; }
};

struct EvalRequest {
  AttackMode mode = AttackMode::None;
  double epsilon = 0.0;
  /// Required for Bim; supplies the target actions.
  const adversary::SacNets* adversary = nullptr;
  int episodes = 200;
  std::uint64_t seed_base = 1'000'000'000ULL;
  attack::SphereMode noise_mode = attack::SphereMode::Surface;
  /// Optional per-step trace with an episode column prepended.
  std::ostream* trace = nullptr;
};

/// Runs the deterministic actor (7.6 tanh of output 0) on seeded episodes.
/// Throws ConfigError when Bim is requested without an adversary.
Metrics evaluate(const sim::SimConfig& sim_config, const nn::Mlp& actor, const EvalRequest& request);

// ---------------------------------------------------------------------------
// Training drivers

/// Trains a fresh adversary against a frozen actor.
struct AdversaryRun {
  adversary::SacNets nets;
  std::vector<adversary::AdversaryEpisodeLog> log;
};
AdversaryRun train_adversary(const ExperimentConfig& config, const nn::Mlp& agent_actor,
                             const attack::AttackConfig& attack_config, int episodes,
                             std::uint64_t seed);

/// One training recipe for the driving agent.
struct MethodRun {
  std::string method;
  std::uint64_t seed = 0;
  nn::Mlp actor;                                // deterministic actor used for evaluation
  std::optional<agent::AgentNets> agent_nets;   // absent for the SAC baseline
  std::optional<adversary::SacNets> sac_nets;   // SAC baseline networks
  std::optional<adversary::SacNets> co_adversary;
  std::vector<agent::AgentEpisodeLog> agent_log;
  std::vector<adversary::AdversaryEpisodeLog> adversary_log;
};

/// igcarl and adv_unconstrained alternate adversary and agent phases; clean
/// trains the agent algorithm without attack or constraints; sac trains the
/// vanilla SAC learner on the driving reward. Throws ConfigError for unknown
/// names and NumericError on non-finite losses.
MethodRun train_method(const ExperimentConfig& config, const std::string& method, std::uint64_t seed);

struct MetricsRow {
  std::string method;
  std::uint64_t seed = 0;
  AttackMode mode = AttackMode::None;
  double epsilon = 0.0;
  Metrics metrics;
};

/// The evaluation table of one trained method: no attack, then BIM at each
/// positive epsilon from a fresh adversary trained against the final actor.
std::vector<MetricsRow> evaluate_method(const ExperimentConfig& config, const MethodRun& run);

/// Full pipeline: every (seed, method) pair is trained, checkpointed, logged,
/// and evaluated; writes metrics.csv and summary.csv under config.out_dir.
/// On a non-finite loss writes nan_dump.txt and rethrows.
std::vector<MetricsRow> run_igcarl(const ExperimentConfig& config);

struct SummaryRow {
  std::string method;
  AttackMode mode = AttackMode::None;
  double epsilon = 0.0;
  int n_seeds = 0;
  double sr_mean = 0.0, sr_std = 0.0;
  double cr_mean = 0.0, cr_std = 0.0;
  double de_mean = 0.0, de_std = 0.0;
};

/// Mean and sample standard deviation across seeds per (method, mode, epsilon).
std::vector<SummaryRow> summarize(const std::vector<MetricsRow>& rows);

// ---------------------------------------------------------------------------
// Robustness studies

/// Clean observations spread over one deterministic rollout (further rollouts
/// are appended when an episode is shorter than `count`).
std::vector<sim::Observation> sample_rollout_observations(const sim::SimConfig& sim_config,
                                                          const nn::Mlp& actor, int count,
                                                          std::uint64_t seed);

struct ProbeRow {
  int obs_id = 0;
  double beta1 = 0.0;
  double beta2 = 0.0;
  double action_offset = 0.0;  // mu(o') - mu(o)
};

/// (beta1, beta2) grid over [-eps_max, eps_max]^2 keeping only pairs inside
/// the l2 cap. The orthogonal direction is fixed per observation. Observations
/// with a degenerate gradient are skipped with a warning on `warnings`.
std::vector<ProbeRow> run_probe_grid(const nn::Mlp& actor, const std::vector<sim::Observation>& obs,
                                     const ProbeStudyConfig& config, std::uint64_t seed,
                                     std::ostream* warnings);

struct NoiseRow {
  int obs_id = 0;
  int draw_id = 0;
  double action_offset = 0.0;
};

std::vector<NoiseRow> run_noise_study(const nn::Mlp& actor, const std::vector<sim::Observation>& obs,
                                      double epsilon, int draws, attack::SphereMode mode,
                                      std::uint64_t seed);

// ---------------------------------------------------------------------------
// Artifacts

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> read_metrics_csv(std::istream& in);
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);
void write_agent_log_csv(std::ostream& out, const std::vector<agent::AgentEpisodeLog>& log);
void write_adversary_log_csv(std::ostream& out,
                             const std::vector<adversary::AdversaryEpisodeLog>& log);
void write_probe_csv(std::ostream& out, const std::vector<ProbeRow>& rows);
void write_noise_csv(std::ostream& out, const std::vector<NoiseRow>& rows);

/// Writes `contents` to `path`, creating parent directories. Throws IoError.
void write_text_file(const std::filesystem::path& path, const std::string& contents);

/// Loads a checkpoint, re-encodes it, and compares bytes with the file.
/// Throws FormatError on corruption and IoError when unreadable.
bool checkpoint_roundtrip(const std::filesystem::path& path);

}  // namespace igcarl::harness

#endif  // IGCARL_HARNESS_HPP
