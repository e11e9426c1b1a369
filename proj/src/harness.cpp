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

#include "igcarl/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <tuple>

#include "igcarl/errors.hpp"
#include "json.hpp"

namespace igcarl::harness {
namespace {

using json = nlohmann::json;

// Independent random streams derived from one user seed.
enum Stream : std::uint32_t {
  kStreamEval = 1,
  kStreamEvalAdversary = 2,
  kStreamProbe = 3,
  kStreamNoise = 4,
};

std::uint64_t derive_seed(std::uint64_t seed, std::uint32_t stream, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    stream, static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  std::uint32_t out[2];
  seq.generate(std::begin(out), std::end(out));
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

// Shortest decimal form that parses back to the same double.
std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(std::begin(buf), std::end(buf), v);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// JSON reading with strict types and unknown-key rejection

class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + " must be a JSON object");
  }

  const json* find(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void number(const char* key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) fail(key, "a number");
      out = v->get<double>();
    }
  }

  void integer(const char* key, int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) fail(key, "an integer");
      const auto x = v->get<std::int64_t>();
      if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
        fail(key, "an integer in int range");
      }
      out = static_cast<int>(x);
    }
  }

  template <class U>
  void unsigned_integer(const char* key, U& out) {
    if (const json* v = find(key)) {
      if (!is_unsigned(*v)) fail(key, "a non-negative integer");
      out = static_cast<U>(v->get<std::uint64_t>());
    }
  }

  void boolean(const char* key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) fail(key, "a boolean");
      out = v->get<bool>();
    }
  }

  void string(const char* key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) fail(key, "a string");
      out = v->get<std::string>();
    }
  }

  template <class U>
  void unsigned_list(const char* key, std::vector<U>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array()) fail(key, "an array of non-negative integers");
      std::vector<U> r;
      for (const json& e : *v) {
        if (!is_unsigned(e)) fail(key, "an array of non-negative integers");
        r.push_back(static_cast<U>(e.get<std::uint64_t>()));
      }
      out = std::move(r);
    }
  }

  void number_list(const char* key, std::vector<double>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array()) fail(key, "an array of numbers");
      std::vector<double> r;
      for (const json& e : *v) {
        if (!e.is_number()) fail(key, "an array of numbers");
        r.push_back(e.get<double>());
      }
      out = std::move(r);
    }
  }

  void string_list(const char* key, std::vector<std::string>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array()) fail(key, "an array of strings");
      std::vector<std::string> r;
      for (const json& e : *v) {
        if (!e.is_string()) fail(key, "an array of strings");
        r.push_back(e.get<std::string>());
      }
      out = std::move(r);
    }
  }

  std::string child_path(const char* key) const { return path_ + "." + key; }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw ConfigError("unknown config key " + path_ + "." + item.key());
    }
  }

 private:
  static bool is_unsigned(const json& v) {
    return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
  }

  [[noreturn]] void fail(const char* key, const char* what) const {
    throw ConfigError(path_ + "." + key + " must be " + what);
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

nn::Activation parse_activation(const std::string& s) {
  if (s == "relu") return nn::Activation::Relu;
  if (s == "tanh") return nn::Activation::Tanh;
  if (s == "identity") return nn::Activation::Identity;
  throw ConfigError("unknown activation '" + s + "' (expected relu, tanh, identity)");
}

const char* activation_name(nn::Activation a) {
  switch (a) {
    case nn::Activation::Relu: return "relu";
    case nn::Activation::Tanh: return "tanh";
    case nn::Activation::Identity: return "identity";
  }
  return "relu";
}

agent::ActorReading parse_reading(const std::string& s) {
  if (s == "perturbed") return agent::ActorReading::Perturbed;
  if (s == "clean") return agent::ActorReading::Clean;
  throw ConfigError("unknown actor reading '" + s + "' (expected perturbed, clean)");
}

attack::SphereMode parse_sphere(const std::string& s) {
  if (s == "surface") return attack::SphereMode::Surface;
  if (s == "ball") return attack::SphereMode::Ball;
  throw ConfigError("unknown noise mode '" + s + "' (expected surface, ball)");
}

const char* sphere_name(attack::SphereMode m) {
  return m == attack::SphereMode::Ball ? "ball" : "surface";
}

void read_geometry(const json& j, const std::string& path, sim::Geometry& g) {
  ObjectReader r(j, path);
  r.number("approach_length", g.approach_length);
  r.number("turn_radius", g.turn_radius);
  r.number("exit_length", g.exit_length);
  r.number("lane_width", g.lane_width);
  r.number("oncoming_length", g.oncoming_length);
  r.number("conflict_half_extent", g.conflict_half_extent);
  r.integer("oncoming_lanes", g.oncoming_lanes);
  r.finish();
}

void read_sim(const json& j, const std::string& path, sim::SimConfig& c) {
  ObjectReader r(j, path);
  r.number("v_max", c.v_max);
  r.number("a_min", c.a_min);
  r.number("a_max", c.a_max);
  r.number("arrival_prob", c.arrival_prob);
  r.integer("max_steps", c.max_steps);
  r.number("dt", c.dt);
  r.integer("substeps", c.substeps);
  if (const json* g = r.find("geometry")) read_geometry(*g, r.child_path("geometry"), c.geometry);
  r.number("vehicle_half_length", c.vehicle_half_length);
  r.number("sensing_range", c.sensing_range);
  r.number("warmup_seconds", c.warmup_seconds);
  r.number("other_speed_min_frac", c.other_speed_min_frac);
  r.number("min_gap", c.min_gap);
  r.number("time_headway", c.time_headway);
  r.finish();
}

void read_attack(const json& j, const std::string& path, attack::AttackConfig& a) {
  ObjectReader r(j, path);
  double epsilon = a.epsilon;
  int iters = a.iters;
  bool ascent = a.ascent;
  double step_size = std::numeric_limits<double>::quiet_NaN();
  r.number("epsilon", epsilon);
  r.integer("iters", iters);
  r.boolean("ascent", ascent);
  r.number("step_size", step_size);
  r.finish();
  if (iters < 0) throw ConfigError(path + ".iters must be >= 0");
  a = attack::AttackConfig::with_budget(epsilon, iters, ascent);
  if (!std::isnan(step_size)) a.step_size = step_size;
}

void read_sac(const json& j, const std::string& path, adversary::SacConfig& c) {
  ObjectReader r(j, path);
  r.unsigned_list("hidden", c.hidden);
  std::string act = activation_name(c.activation);
  r.string("activation", act);
  c.activation = parse_activation(act);
  r.number("actor_lr", c.actor_lr);
  r.number("critic_lr", c.critic_lr);
  r.number("value_lr", c.value_lr);
  r.number("alpha", c.alpha);
  r.number("gamma", c.gamma);
  r.number("polyak", c.polyak);
  r.unsigned_integer("batch_size", c.batch_size);
  r.unsigned_integer("warmup", c.warmup);
  r.unsigned_integer("buffer_capacity", c.buffer_capacity);
  r.finish();
}

void read_agent(const json& j, const std::string& path, agent::AgentConfig& c) {
  ObjectReader r(j, path);
  r.unsigned_list("hidden", c.hidden);
  std::string act = activation_name(c.activation);
  r.string("activation", act);
  c.activation = parse_activation(act);
  r.number("actor_lr", c.actor_lr);
  r.number("critic_lr", c.critic_lr);
  r.number("gamma", c.gamma);
  r.number("polyak", c.polyak);
  r.unsigned_integer("batch_size", c.batch_size);
  r.unsigned_integer("warmup", c.warmup);
  r.unsigned_integer("buffer_capacity", c.buffer_capacity);
  r.number("exploration_std", c.exploration_std);
  r.number("action_penalty", c.action_penalty);
  std::string reading = c.reading == agent::ActorReading::Clean ? "clean" : "perturbed";
  r.string("reading", reading);
  c.reading = parse_reading(reading);
  r.finish();
}

void read_lagrange(const json& j, const std::string& path, agent::LagrangeState& l) {
  ObjectReader r(j, path);
  r.number("lambda1", l.lambda1);
  r.number("lambda2", l.lambda2);
  r.number("eps1", l.eps1);
  r.number("eps2", l.eps2);
  r.number("alpha_lambda", l.alpha_lambda);
  r.finish();
}

void read_schedule(const json& j, const std::string& path, ScheduleConfig& s) {
  ObjectReader r(j, path);
  r.integer("agent_episodes", s.agent_episodes);
  r.integer("phase_length", s.phase_length);
  r.integer("adversary_phase_episodes", s.adversary_phase_episodes);
  r.integer("eval_adversary_episodes", s.eval_adversary_episodes);
  r.finish();
}

void read_eval(const json& j, const std::string& path, EvalConfig& e) {
  ObjectReader r(j, path);
  r.integer("episodes", e.episodes);
  r.unsigned_integer("seed_base", e.seed_base);
  r.number_list("epsilons", e.epsilons);
  r.finish();
}

void read_probe(const json& j, const std::string& path, ProbeStudyConfig& p) {
  ObjectReader r(j, path);
  r.integer("observations", p.observations);
  r.integer("grid_points", p.grid_points);
  r.number("eps_max", p.eps_max);
  r.integer("noise_draws", p.noise_draws);
  r.number("noise_epsilon", p.noise_epsilon);
  std::string mode = sphere_name(p.noise_mode);
  r.string("noise_mode", mode);
  p.noise_mode = parse_sphere(mode);
  r.unsigned_integer("rollout_seed", p.rollout_seed);
  r.finish();
}

json sac_to_json(const adversary::SacConfig& c) {
  return {{"hidden", c.hidden},
          {"activation", activation_name(c.activation)},
          {"actor_lr", c.actor_lr},
          {"critic_lr", c.critic_lr},
          {"value_lr", c.value_lr},
          {"alpha", c.alpha},
          {"gamma", c.gamma},
          {"polyak", c.polyak},
          {"batch_size", c.batch_size},
          {"warmup", c.warmup},
          {"buffer_capacity", c.buffer_capacity}};
}

bool is_known_method(const std::string& m) {
  return m == kMethodIgcarl || m == kMethodUnconstrained || m == kMethodClean || m == kMethodSac;
}

void require(bool ok, const char* message) {
  if (!ok) throw ConfigError(message);
}

// ---------------------------------------------------------------------------
// CSV helpers

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw FormatError("bad number in CSV: '" + s + "'");
  }
  return v;
}

template <class I>
I parse_int(const std::string& s) {
  I v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw FormatError("bad integer in CSV: '" + s + "'");
  }
  return v;
}

constexpr const char* kMetricsHeader = "method,seed,attack,epsilon,sr,cr,de,n_episodes";

// ---------------------------------------------------------------------------
// Training helpers

std::vector<agent::AgentEpisodeLog> train_sac_driver(const ExperimentConfig& config,
                                                     adversary::SacLearner& learner, int episodes,
                                                     std::mt19937_64& rng) {
  sim::Env env(config.sim);
  ReplayBuffer buffer(config.sac_agent.buffer_capacity);
  const std::size_t ready = std::max(config.sac_agent.warmup, config.sac_agent.batch_size);
  std::vector<agent::AgentEpisodeLog> logs;
  for (int ep = 0; ep < episodes; ++ep) {
    sim::Observation obs = env.reset(rng());
    agent::AgentEpisodeLog log;
    log.episode = ep;
    for (;;) {
      const double action = adversary::act(learner.nets(), obs, rng);
      const sim::StepOutcome out = env.step(action);
      Transition t;
      t.obs = obs;
      t.obs_perturbed = obs;
      t.action = action;
      t.reward = sim::agent_reward(out, config.sim);
      t.adv_reward = sim::adversary_reward(out);
      t.next_obs = env.observation();
      t.done = out.done;
      buffer.push(t);
      log.episode_return += t.reward;
      log.collision = log.collision || out.collision;
      log.success = log.success || (out.reached_goal && !out.collision);
      if (buffer.size() >= ready) {
        learner.update(adversary::agent_view(buffer.sample(config.sac_agent.batch_size, rng)), rng);
      }
      if (out.done) break;
      obs = env.observation();
    }
    logs.push_back(log);
  }
  return logs;
}

template <class T>
void append(std::vector<T>& dst, std::vector<T> src) {
  dst.insert(dst.end(), std::make_move_iterator(src.begin()), std::make_move_iterator(src.end()));
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

void ExperimentConfig::validate() const {
  sim.validate();
  attack.validate();
  adversary.validate();
  agent.validate();
  lagrange.validate();
  sac_agent.validate();
  require(schedule.agent_episodes >= 0, "schedule.agent_episodes must be >= 0");
  require(schedule.phase_length > 0, "schedule.phase_length must be > 0");
  require(schedule.adversary_phase_episodes >= 0, "schedule.adversary_phase_episodes must be >= 0");
  require(schedule.eval_adversary_episodes >= 0, "schedule.eval_adversary_episodes must be >= 0");
  require(eval.episodes > 0, "eval.episodes must be > 0");
  for (double e : eval.epsilons) {
    require(std::isfinite(e) && e >= 0.0, "eval.epsilons must be finite and >= 0");
  }
  require(probe.observations > 0, "probe.observations must be > 0");
  require(probe.grid_points > 0, "probe.grid_points must be > 0");
  require(std::isfinite(probe.eps_max) && probe.eps_max > 0.0, "probe.eps_max must be > 0");
  require(probe.noise_draws > 0, "probe.noise_draws must be > 0");
  require(std::isfinite(probe.noise_epsilon) && probe.noise_epsilon >= 0.0,
          "probe.noise_epsilon must be >= 0");
  require(!seeds.empty(), "seeds must not be empty");
  require(!methods.empty(), "methods must not be empty");
  std::set<std::string> seen;
  for (const auto& m : methods) {
    if (!is_known_method(m)) throw ConfigError("unknown method '" + m + "'");
    if (!seen.insert(m).second) throw ConfigError("duplicate method '" + m + "'");
  }
  std::set<std::uint64_t> seen_seeds;
  for (auto s : seeds) require(seen_seeds.insert(s).second, "duplicate seed");
}

ExperimentConfig parse_config(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text.begin(), json_text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  ObjectReader r(root, "config");
  if (const json* v = r.find("sim")) read_sim(*v, "config.sim", c.sim);
  if (const json* v = r.find("attack")) read_attack(*v, "config.attack", c.attack);
  if (const json* v = r.find("adversary")) read_sac(*v, "config.adversary", c.adversary);
  if (const json* v = r.find("agent")) read_agent(*v, "config.agent", c.agent);
  if (const json* v = r.find("lagrange")) read_lagrange(*v, "config.lagrange", c.lagrange);
  if (const json* v = r.find("sac_agent")) read_sac(*v, "config.sac_agent", c.sac_agent);
  if (const json* v = r.find("schedule")) read_schedule(*v, "config.schedule", c.schedule);
  if (const json* v = r.find("eval")) read_eval(*v, "config.eval", c.eval);
  if (const json* v = r.find("probe")) read_probe(*v, "config.probe", c.probe);
  r.unsigned_list("seeds", c.seeds);
  r.string_list("methods", c.methods);
  std::string out_dir = c.out_dir.string();
  r.string("out_dir", out_dir);
  c.out_dir = out_dir;
  r.finish();
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const ExperimentConfig& c) {
  const auto& g = c.sim.geometry;
  json j;
  j["sim"] = {{"v_max", c.sim.v_max},
              {"a_min", c.sim.a_min},
              {"a_max", c.sim.a_max},
              {"arrival_prob", c.sim.arrival_prob},
              {"max_steps", c.sim.max_steps},
              {"dt", c.sim.dt},
              {"substeps", c.sim.substeps},
              {"geometry",
               {{"approach_length", g.approach_length},
                {"turn_radius", g.turn_radius},
                {"exit_length", g.exit_length},
                {"lane_width", g.lane_width},
                {"oncoming_length", g.oncoming_length},
                {"conflict_half_extent", g.conflict_half_extent},
                {"oncoming_lanes", g.oncoming_lanes}}},
              {"vehicle_half_length", c.sim.vehicle_half_length},
              {"sensing_range", c.sim.sensing_range},
              {"warmup_seconds", c.sim.warmup_seconds},
              {"other_speed_min_frac", c.sim.other_speed_min_frac},
              {"min_gap", c.sim.min_gap},
              {"time_headway", c.sim.time_headway}};
  j["attack"] = {{"epsilon", c.attack.epsilon},
                 {"iters", c.attack.iters},
                 {"step_size", c.attack.step_size},
                 {"ascent", c.attack.ascent}};
  j["adversary"] = sac_to_json(c.adversary);
  j["agent"] = {{"hidden", c.agent.hidden},
                {"activation", activation_name(c.agent.activation)},
                {"actor_lr", c.agent.actor_lr},
                {"critic_lr", c.agent.critic_lr},
                {"gamma", c.agent.gamma},
                {"polyak", c.agent.polyak},
                {"batch_size", c.agent.batch_size},
                {"warmup", c.agent.warmup},
                {"buffer_capacity", c.agent.buffer_capacity},
                {"exploration_std", c.agent.exploration_std},
                {"action_penalty", c.agent.action_penalty},
                {"reading", c.agent.reading == agent::ActorReading::Clean ? "clean" : "perturbed"}};
  j["lagrange"] = {{"lambda1", c.lagrange.lambda1},
                   {"lambda2", c.lagrange.lambda2},
                   {"eps1", c.lagrange.eps1},
                   {"eps2", c.lagrange.eps2},
                   {"alpha_lambda", c.lagrange.alpha_lambda}};
  j["sac_agent"] = sac_to_json(c.sac_agent);
  j["schedule"] = {{"agent_episodes", c.schedule.agent_episodes},
                   {"phase_length", c.schedule.phase_length},
                   {"adversary_phase_episodes", c.schedule.adversary_phase_episodes},
                   {"eval_adversary_episodes", c.schedule.eval_adversary_episodes}};
  j["eval"] = {{"episodes", c.eval.episodes},
               {"seed_base", c.eval.seed_base},
               {"epsilons", c.eval.epsilons}};
  j["probe"] = {{"observations", c.probe.observations},
                {"grid_points", c.probe.grid_points},
                {"eps_max", c.probe.eps_max},
                {"noise_draws", c.probe.noise_draws},
                {"noise_epsilon", c.probe.noise_epsilon},
                {"noise_mode", sphere_name(c.probe.noise_mode)},
                {"rollout_seed", c.probe.rollout_seed}};
  j["seeds"] = c.seeds;
  j["methods"] = c.methods;
  j["out_dir"] = c.out_dir.string();
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Evaluation

AttackMode parse_attack_mode(std::string_view name) {
  if (name == "none") return AttackMode::None;
  if (name == "bim") return AttackMode::Bim;
  if (name == "random") return AttackMode::Random;
  throw ConfigError("unknown attack '" + std::string(name) + "' (expected none, bim, random)");
}

const char* attack_mode_name(AttackMode mode) {
  switch (mode) {
    case AttackMode::None: return "none";
    case AttackMode::Bim: return "bim";
    case AttackMode::Random: return "random";
  }
  return "none";
}

Metrics evaluate(const sim::SimConfig& sim_config, const nn::Mlp& actor, const EvalRequest& req) {
  if (req.episodes <= 0) throw ConfigError("evaluation needs at least one episode");
  if (!std::isfinite(req.epsilon) || req.epsilon < 0.0) {
    throw ConfigError("evaluation epsilon must be finite and >= 0");
  }
  if (req.mode == AttackMode::Bim && req.adversary == nullptr) {
    throw ConfigError("bim evaluation needs an adversary");
  }
  if (actor.input_size() != sim::kObsDim) throw UsageError("actor input size must match observations");
  const attack::AttackConfig bim = attack::AttackConfig::with_budget(req.epsilon);
  sim::Env env(sim_config);
  std::mt19937_64 rng(derive_seed(req.seed_base, kStreamEval, 0));
  if (req.trace != nullptr) {
    *req.trace << "episode,";
    sim::write_trace_header(*req.trace);
  }

  int successes = 0;
  int collisions = 0;
  double speed_sum = 0.0;
  for (int i = 0; i < req.episodes; ++i) {
    sim::Observation obs = env.reset(req.seed_base + static_cast<std::uint64_t>(i));
    double episode_speed = 0.0;
    int steps = 0;
    bool collided = false;
    bool succeeded = false;
    for (;;) {
      sim::Observation seen = obs;
      if (req.mode == AttackMode::Bim) {
        const double target = adversary::act(*req.adversary, obs, rng);
        seen = attack::add(obs, attack::bim_perturb(actor, obs, target, bim));
      } else if (req.mode == AttackMode::Random) {
        seen = attack::random_sphere_noise(obs, req.epsilon, rng, req.noise_mode);
      }
      const sim::StepOutcome out = env.step(nn::mean_action(actor, seen));
      if (req.trace != nullptr) {
        *req.trace << i << ',';
        sim::write_trace_row(*req.trace, env.state(), out);
      }
      episode_speed += out.ego_speed;
      ++steps;
      collided = collided || out.collision;
      succeeded = succeeded || (out.reached_goal && !out.collision);
      if (out.done) break;
      obs = env.observation();
    }
    successes += succeeded ? 1 : 0;
    collisions += collided ? 1 : 0;
    speed_sum += episode_speed / steps;
  }
  Metrics m;
  m.n_episodes = req.episodes;
  m.sr = static_cast<double>(successes) / req.episodes;
  m.cr = static_cast<double>(collisions) / req.episodes;
  m.de = speed_sum / req.episodes;
  return m;
}

// ---------------------------------------------------------------------------
// Training drivers

AdversaryRun train_adversary(const ExperimentConfig& config, const nn::Mlp& agent_actor,
                             const attack::AttackConfig& attack_config, int episodes,
                             std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  adversary::AdversaryTrainer trainer(config.adversary, rng);
  AdversaryRun run;
  run.log = trainer.train(config.sim, agent_actor, attack_config, episodes, rng);
  run.nets = trainer.learner().nets();
  return run;
}

MethodRun train_method(const ExperimentConfig& config, const std::string& method,
                       std::uint64_t seed) {
  if (!is_known_method(method)) throw ConfigError("unknown method '" + method + "'");
  MethodRun run;
  run.method = method;
  run.seed = seed;
  std::mt19937_64 rng(seed);

  if (method == kMethodSac) {
    adversary::SacLearner learner(config.sac_agent, rng);
    run.agent_log = train_sac_driver(config, learner, config.schedule.agent_episodes, rng);
    run.sac_nets = learner.nets();
    run.actor = learner.nets().policy;
    return run;
  }

  if (method == kMethodClean) {
    agent::AgentTrainer trainer(config.agent, agent::LagrangeState{}, rng);
    agent::AgentTrainOptions opts;
    opts.attack = attack::AttackConfig::with_budget(0.0);
    opts.update_multipliers = false;
    run.agent_log = trainer.train(config.sim, nullptr, opts, config.schedule.agent_episodes, rng);
    run.agent_nets = trainer.learner().nets();
    run.actor = trainer.learner().nets().actor;
    return run;
  }

  const bool constrained = method == kMethodIgcarl;
  agent::LagrangeState lagrange = config.lagrange;
  if (!constrained) {
    lagrange.lambda1 = 0.0;
    lagrange.lambda2 = 0.0;
  }
  adversary::AdversaryTrainer adv(config.adversary, rng);
  agent::AgentTrainer trainer(config.agent, lagrange, rng);
  agent::AgentTrainOptions opts;
  opts.attack = config.attack;
  opts.update_multipliers = constrained;

  int remaining = config.schedule.agent_episodes;
  while (remaining > 0) {
    append(run.adversary_log, adv.train(config.sim, trainer.learner().nets().actor, config.attack,
                                        config.schedule.adversary_phase_episodes, rng));
    const adversary::SacNets snapshot = adv.learner().nets();
    const int n = std::min(config.schedule.phase_length, remaining);
    append(run.agent_log, trainer.train(config.sim, &snapshot, opts, n, rng));
    remaining -= n;
  }
  run.agent_nets = trainer.learner().nets();
  run.co_adversary = adv.learner().nets();
  run.actor = trainer.learner().nets().actor;
  return run;
}

std::vector<MetricsRow> evaluate_method(const ExperimentConfig& config, const MethodRun& run) {
  std::vector<MetricsRow> rows;
  for (std::size_t k = 0; k < config.eval.epsilons.size(); ++k) {
    const double eps = config.eval.epsilons[k];
    MetricsRow row;
    row.method = run.method;
    row.seed = run.seed;
    row.epsilon = eps;
    EvalRequest req;
    req.episodes = config.eval.episodes;
    req.seed_base = config.eval.seed_base;
    req.epsilon = eps;
    if (eps == 0.0) {
      row.mode = AttackMode::None;
      req.mode = AttackMode::None;
      row.metrics = evaluate(config.sim, run.actor, req);
    } else {
      row.mode = AttackMode::Bim;
      req.mode = AttackMode::Bim;
      const attack::AttackConfig budget =
          attack::AttackConfig::with_budget(eps, config.attack.iters, config.attack.ascent);
      const AdversaryRun adv =
          train_adversary(config, run.actor, budget, config.schedule.eval_adversary_episodes,
                          derive_seed(run.seed, kStreamEvalAdversary, k));
      req.adversary = &adv.nets;
      row.metrics = evaluate(config.sim, run.actor, req);
    }
    rows.push_back(row);
  }
  return rows;
}

std::vector<MetricsRow> run_igcarl(const ExperimentConfig& config) {
  config.validate();
  const std::filesystem::path& out = config.out_dir;
  write_text_file(out / "config.json", config_to_json(config));
  std::vector<MetricsRow> rows;
  for (const std::uint64_t seed : config.seeds) {
    for (const std::string& method : config.methods) {
      const std::filesystem::path dir = out / ("seed_" + std::to_string(seed)) / method;
      try {
        const MethodRun run = train_method(config, method, seed);
        if (run.agent_nets) run.agent_nets->save(dir / "agent");
        if (run.sac_nets) run.sac_nets->save(dir / "sac");
        if (run.co_adversary) run.co_adversary->save(dir / "adversary");
        std::ostringstream agent_log;
        write_agent_log_csv(agent_log, run.agent_log);
        write_text_file(dir / "agent_log.csv", agent_log.str());
        if (!run.adversary_log.empty()) {
          std::ostringstream adv_log;
          write_adversary_log_csv(adv_log, run.adversary_log);
          write_text_file(dir / "adversary_log.csv", adv_log.str());
        }
        append(rows, evaluate_method(config, run));
      } catch (const NumericError& e) {
        std::ostringstream dump;
        dump << "method: " << method << "\nseed: " << seed << "\nerror: " << e.what()
             << "\nconfig:\n"
             << config_to_json(config);
        write_text_file(dir / "nan_dump.txt", dump.str());
        throw;
      }
      std::ostringstream metrics;
      write_metrics_csv(metrics, rows);
      write_text_file(out / "metrics.csv", metrics.str());
    }
  }
  std::ostringstream summary;
  write_summary_csv(summary, summarize(rows));
  write_text_file(out / "summary.csv", summary.str());
  return rows;
}

std::vector<SummaryRow> summarize(const std::vector<MetricsRow>& rows) {
  using Key = std::tuple<std::string, AttackMode, double>;
  std::vector<Key> order;
  std::map<Key, std::vector<const Metrics*>> groups;
  for (const auto& r : rows) {
    const Key key{r.method, r.mode, r.epsilon};
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(&r.metrics);
  }
  auto mean_std = [](const std::vector<const Metrics*>& ms, double Metrics::*field) {
    double mean = 0.0;
    for (const Metrics* m : ms) mean += m->*field;
    mean /= static_cast<double>(ms.size());
    double ss = 0.0;
    for (const Metrics* m : ms) ss += (m->*field - mean) * (m->*field - mean);
    const double sd = ms.size() > 1 ? std::sqrt(ss / static_cast<double>(ms.size() - 1)) : 0.0;
    return std::pair{mean, sd};
  };
  std::vector<SummaryRow> out;
  for (const Key& key : order) {
    const auto& ms = groups[key];
    SummaryRow s;
    s.method = std::get<0>(key);
    s.mode = std::get<1>(key);
    s.epsilon = std::get<2>(key);
    s.n_seeds = static_cast<int>(ms.size());
    std::tie(s.sr_mean, s.sr_std) = mean_std(ms, &Metrics::sr);
    std::tie(s.cr_mean, s.cr_std) = mean_std(ms, &Metrics::cr);
    std::tie(s.de_mean, s.de_std) = mean_std(ms, &Metrics::de);
    out.push_back(s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Robustness studies

std::vector<sim::Observation> sample_rollout_observations(const sim::SimConfig& sim_config,
                                                          const nn::Mlp& actor, int count,
                                                          std::uint64_t seed) {
  if (count <= 0) throw ConfigError("observation count must be > 0");
  sim::Env env(sim_config);
  std::vector<sim::Observation> pool;
  for (std::uint64_t ep = 0; pool.size() < static_cast<std::size_t>(count); ++ep) {
    sim::Observation obs = env.reset(seed + ep);
    for (;;) {
      pool.push_back(obs);
      const sim::StepOutcome out = env.step(nn::mean_action(actor, obs));
      if (out.done) break;
      obs = env.observation();
    }
  }
  std::vector<sim::Observation> picked;
  const std::size_t n = pool.size();
  for (int k = 0; k < count; ++k) picked.push_back(pool[static_cast<std::size_t>(k) * n / count]);
  return picked;
}

std::vector<ProbeRow> run_probe_grid(const nn::Mlp& actor, const std::vector<sim::Observation>& obs,
                                     const ProbeStudyConfig& config, std::uint64_t seed,
                                     std::ostream* warnings) {
  if (config.grid_points <= 0) throw ConfigError("probe grid needs at least one point");
  if (!(config.eps_max > 0.0)) throw ConfigError("probe eps_max must be > 0");
  const int n = config.grid_points;
  std::vector<double> grid(static_cast<std::size_t>(n), 0.0);
  for (int k = 0; k < n && n > 1; ++k) {
    grid[static_cast<std::size_t>(k)] =
        config.eps_max * static_cast<double>(2 * k - (n - 1)) / static_cast<double>(n - 1);
  }

  std::vector<ProbeRow> rows;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const double base = nn::mean_action(actor, obs[i]);
    const std::mt19937_64 obs_rng(derive_seed(seed, kStreamProbe, i));
    std::vector<ProbeRow> obs_rows;
    try {
      for (double b1 : grid) {
        for (double b2 : grid) {
          if (!attack::probe_feasible(b1, b2, config.eps_max)) continue;
          std::mt19937_64 rng = obs_rng;  // same orthogonal direction at every grid point
          const attack::ProbeResult p = attack::gradient_orthogonal_probe(
              actor, obs[i], attack::ProbeConfig(b1, b2, config.eps_max), rng);
          obs_rows.push_back({static_cast<int>(i), b1, b2, nn::mean_action(actor, p.perturbed) - base});
        }
      }
    } catch (const DegenerateGradientError& e) {
      if (warnings != nullptr) {
        *warnings << "warning: skipping observation " << i << ": " << e.what() << '\n';
      }
      continue;
    }
    append(rows, std::move(obs_rows));
  }
  return rows;
}

std::vector<NoiseRow> run_noise_study(const nn::Mlp& actor, const std::vector<sim::Observation>& obs,
                                      double epsilon, int draws, attack::SphereMode mode,
                                      std::uint64_t seed) {
  if (draws <= 0) throw ConfigError("noise study needs at least one draw");
  if (!std::isfinite(epsilon) || epsilon < 0.0) throw ConfigError("noise epsilon must be >= 0");
  std::vector<NoiseRow> rows;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const double base = nn::mean_action(actor, obs[i]);
    std::mt19937_64 rng(derive_seed(seed, kStreamNoise, i));
    for (int d = 0; d < draws; ++d) {
      const sim::Observation o = attack::random_sphere_noise(obs[i], epsilon, rng, mode);
      rows.push_back({static_cast<int>(i), d, nn::mean_action(actor, o) - base});
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Artifacts

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows) {
  out << kMetricsHeader << '\n';
  for (const auto& r : rows) {
    out << r.method << ',' << r.seed << ',' << attack_mode_name(r.mode) << ',' << fmt(r.epsilon)
        << ',' << fmt(r.metrics.sr) << ',' << fmt(r.metrics.cr) << ',' << fmt(r.metrics.de) << ','
        << r.metrics.n_episodes << '\n';
  }
}

std::vector<MetricsRow> read_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) {
    throw FormatError("metrics CSV header mismatch");
  }
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 8) throw FormatError("metrics CSV row needs 8 cells: " + line);
    MetricsRow r;
    r.method = cells[0];
    r.seed = parse_int<std::uint64_t>(cells[1]);
    try {
      r.mode = parse_attack_mode(cells[2]);
    } catch (const ConfigError& e) {
      throw FormatError(e.what());
    }
    r.epsilon = parse_double(cells[3]);
    r.metrics.sr = parse_double(cells[4]);
    r.metrics.cr = parse_double(cells[5]);
    r.metrics.de = parse_double(cells[6]);
    r.metrics.n_episodes = parse_int<int>(cells[7]);
    rows.push_back(r);
  }
  return rows;
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "method,attack,epsilon,n_seeds,sr_mean,sr_std,cr_mean,cr_std,de_mean,de_std\n";
  for (const auto& s : rows) {
    out << s.method << ',' << attack_mode_name(s.mode) << ',' << fmt(s.epsilon) << ',' << s.n_seeds
        << ',' << fmt(s.sr_mean) << ',' << fmt(s.sr_std) << ',' << fmt(s.cr_mean) << ','
        << fmt(s.cr_std) << ',' << fmt(s.de_mean) << ',' << fmt(s.de_std) << '\n';
  }
}

void write_agent_log_csv(std::ostream& out, const std::vector<agent::AgentEpisodeLog>& log) {
  out << "episode,return,collision,success,lambda1,lambda2,c1,c2\n";
  for (const auto& e : log) {
    out << e.episode << ',' << fmt(e.episode_return) << ',' << (e.collision ? 1 : 0) << ','
        << (e.success ? 1 : 0) << ',' << fmt(e.lambda1) << ',' << fmt(e.lambda2) << ','
        << fmt(e.c1) << ',' << fmt(e.c2) << '\n';
  }
}

void write_adversary_log_csv(std::ostream& out,
                             const std::vector<adversary::AdversaryEpisodeLog>& log) {
  out << "episode,adversary_return,collision,buffer_size,q_loss,policy_loss\n";
  for (const auto& e : log) {
    out << e.episode << ',' << fmt(e.adversary_return) << ',' << (e.collision ? 1 : 0) << ','
        << e.buffer_size << ',' << fmt(e.q_loss_mean) << ',' << fmt(e.policy_loss) << '\n';
  }
}

void write_probe_csv(std::ostream& out, const std::vector<ProbeRow>& rows) {
  out << "obs_id,beta1,beta2,action_offset\n";
  for (const auto& r : rows) {
    out << r.obs_id << ',' << fmt(r.beta1) << ',' << fmt(r.beta2) << ',' << fmt(r.action_offset)
        << '\n';
  }
}

void write_noise_csv(std::ostream& out, const std::vector<NoiseRow>& rows) {
  out << "obs_id,draw_id,action_offset\n";
  for (const auto& r : rows) out << r.obs_id << ',' << r.draw_id << ',' << fmt(r.action_offset) << '\n';
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << contents;
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

bool checkpoint_roundtrip(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  const nn::Mlp net = nn::decode_checkpoint(bytes);
  return nn::encode_checkpoint(net) == bytes;
}

}  // namespace igcarl::harness
