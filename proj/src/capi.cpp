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

#include "igcarl/igcarl.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <new>
#include <sstream>
#include <string>

#include "igcarl/errors.hpp"
#include "igcarl/harness.hpp"

struct igcarl_config {
  igcarl::harness::ExperimentConfig c;
};

struct igcarl_agent {
  igcarl::nn::Mlp actor;
};

struct igcarl_adversary {
  igcarl::adversary::SacNets nets;
};

namespace {

namespace h = igcarl::harness;

thread_local std::string g_last_error;

igcarl_status fail(igcarl_status status, const char* message) {
  g_last_error = message;
  return status;
}

// Runs `fn`, translating exceptions into status codes.
template <class Fn>
igcarl_status guarded(Fn&& fn) {
  g_last_error.clear();
  try {
    fn();
    return IGCARL_OK;
  } catch (const igcarl::ConfigError& e) {
    return fail(IGCARL_ERR_CONFIG, e.what());
  } catch (const igcarl::UsageError& e) {
    return fail(IGCARL_ERR_USAGE, e.what());
  } catch (const igcarl::FormatError& e) {
    return fail(IGCARL_ERR_FORMAT, e.what());
  } catch (const igcarl::IoError& e) {
    return fail(IGCARL_ERR_IO, e.what());
  } catch (const igcarl::NumericError& e) {
    return fail(IGCARL_ERR_NUMERIC, e.what());
  } catch (const igcarl::DegenerateGradientError& e) {
    return fail(IGCARL_ERR_DEGENERATE, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(IGCARL_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(IGCARL_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(IGCARL_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(IGCARL_ERR_INTERNAL, "unknown error");
  }
}

template <class T>
void require_arg(const T* p, const char* name) {
  if (p == nullptr) throw igcarl::UsageError(std::string(name) + " must not be NULL");
}

}  // namespace

extern "C" {

const char* igcarl_version(void) { return "0.1.0"; }

const char* igcarl_status_name(igcarl_status status) {
  switch (status) {
    case IGCARL_OK: return "ok";
    case IGCARL_ERR_CONFIG: return "config error";
    case IGCARL_ERR_USAGE: return "usage error";
    case IGCARL_ERR_FORMAT: return "format error";
    case IGCARL_ERR_IO: return "io error";
    case IGCARL_ERR_NUMERIC: return "numeric error";
    case IGCARL_ERR_DEGENERATE: return "degenerate gradient";
    case IGCARL_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* igcarl_last_error(void) { return g_last_error.c_str(); }

// ---- configuration --------------------------------------------------------

igcarl_status igcarl_config_default(igcarl_config** out) {
  return guarded([&] {
    require_arg(out, "out");
    *out = new igcarl_config{};
  });
}

igcarl_status igcarl_config_parse(const char* json_text, igcarl_config** out) {
  return guarded([&] {
    require_arg(json_text, "json_text");
    require_arg(out, "out");
    *out = new igcarl_config{h::parse_config(json_text)};
  });
}

igcarl_status igcarl_config_load(const char* path, igcarl_config** out) {
  return guarded([&] {
    require_arg(path, "path");
    require_arg(out, "out");
    *out = new igcarl_config{h::load_config(path)};
  });
}

void igcarl_config_free(igcarl_config* config) { delete config; }

igcarl_status igcarl_config_set_out_dir(igcarl_config* config, const char* dir) {
  return guarded([&] {
    require_arg(config, "config");
    require_arg(dir, "dir");
    config->c.out_dir = dir;
  });
}

igcarl_status igcarl_config_set_seeds(igcarl_config* config, const uint64_t* seeds, size_t count) {
  return guarded([&] {
    require_arg(config, "config");
    if (count > 0) require_arg(seeds, "seeds");
    h::ExperimentConfig next = config->c;
    next.seeds.assign(seeds, seeds + count);
    next.validate();
    config->c = std::move(next);
  });
}

igcarl_status igcarl_config_set_attack_epsilon(igcarl_config* config, double epsilon) {
  return guarded([&] {
    require_arg(config, "config");
    const auto& a = config->c.attack;
    const auto next = igcarl::attack::AttackConfig::with_budget(epsilon, a.iters, a.ascent);
    next.validate();
    config->c.attack = next;
  });
}

igcarl_status igcarl_config_set_methods(igcarl_config* config, const char* const* methods,
                                        size_t count) {
  return guarded([&] {
    require_arg(config, "config");
    if (count > 0) require_arg(methods, "methods");
    h::ExperimentConfig next = config->c;
    next.methods.clear();
    for (size_t i = 0; i < count; ++i) {
      require_arg(methods[i], "methods[i]");
      next.methods.emplace_back(methods[i]);
    }
    next.validate();
    config->c = std::move(next);
  });
}

igcarl_status igcarl_config_to_json(const igcarl_config* config, char* buf, size_t capacity,
                                    size_t* needed) {
  return guarded([&] {
    require_arg(config, "config");
    const std::string text = h::config_to_json(config->c);
    if (needed != nullptr) *needed = text.size() + 1;
    if (capacity < text.size() + 1) throw igcarl::UsageError("buffer too small for config JSON");
    require_arg(buf, "buf");
    std::memcpy(buf, text.c_str(), text.size() + 1);
  });
}

// ---- agents ---------------------------------------------------------------

igcarl_status igcarl_train_agent(const igcarl_config* config, const char* method, uint64_t seed,
                                 const char* out_dir, igcarl_agent** out) {
  return guarded([&] {
    require_arg(config, "config");
    require_arg(method, "method");
    config->c.validate();
    const h::MethodRun run = h::train_method(config->c, method, seed);
    if (out_dir != nullptr) {
      const std::filesystem::path dir = out_dir;
      std::filesystem::create_directories(dir);
      igcarl::nn::save_checkpoint(run.actor, dir / "actor.ckpt");
      if (run.agent_nets) run.agent_nets->save(dir / "agent");
      if (run.sac_nets) run.sac_nets->save(dir / "sac");
      if (run.co_adversary) run.co_adversary->save(dir / "adversary");
      std::ostringstream log;
      h::write_agent_log_csv(log, run.agent_log);
      h::write_text_file(dir / "agent_log.csv", log.str());
      if (!run.adversary_log.empty()) {
        std::ostringstream adv;
        h::write_adversary_log_csv(adv, run.adversary_log);
        h::write_text_file(dir / "adversary_log.csv", adv.str());
      }
    }
    if (out != nullptr) *out = new igcarl_agent{run.actor};
  });
}

igcarl_status igcarl_agent_load(const char* path, igcarl_agent** out) {
  return guarded([&] {
    require_arg(path, "path");
    require_arg(out, "out");
    igcarl::nn::Mlp actor = igcarl::nn::load_checkpoint(path);
    if (actor.input_size() != IGCARL_OBS_DIM) {
      throw igcarl::FormatError("actor checkpoint must take 20 inputs");
    }
    *out = new igcarl_agent{std::move(actor)};
  });
}

igcarl_status igcarl_agent_save(const igcarl_agent* agent, const char* path) {
  return guarded([&] {
    require_arg(agent, "agent");
    require_arg(path, "path");
    const std::filesystem::path p = path;
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    igcarl::nn::save_checkpoint(agent->actor, p);
  });
}

void igcarl_agent_free(igcarl_agent* agent) { delete agent; }

igcarl_status igcarl_agent_act(const igcarl_agent* agent, const double* obs, double* action) {
  return guarded([&] {
    require_arg(agent, "agent");
    require_arg(obs, "obs");
    require_arg(action, "action");
    *action = igcarl::nn::mean_action(agent->actor, std::span<const double>(obs, IGCARL_OBS_DIM));
  });
}

// ---- adversaries ----------------------------------------------------------

igcarl_status igcarl_train_adversary(const igcarl_config* config, const igcarl_agent* agent,
                                     double epsilon, int episodes, uint64_t seed,
                                     const char* out_dir, igcarl_adversary** out) {
  return guarded([&] {
    require_arg(config, "config");
    require_arg(agent, "agent");
    config->c.validate();
    const auto& a = config->c.attack;
    if (std::isnan(epsilon)) epsilon = a.epsilon;
    if (episodes < 0) episodes = config->c.schedule.eval_adversary_episodes;
    const auto budget = igcarl::attack::AttackConfig::with_budget(epsilon, a.iters, a.ascent);
    const h::AdversaryRun run = h::train_adversary(config->c, agent->actor, budget, episodes, seed);
    if (out_dir != nullptr) {
      const std::filesystem::path dir = out_dir;
      run.nets.save(dir / "adversary");
      std::ostringstream log;
      h::write_adversary_log_csv(log, run.log);
      h::write_text_file(dir / "adversary_log.csv", log.str());
    }
    if (out != nullptr) *out = new igcarl_adversary{run.nets};
  });
}

igcarl_status igcarl_adversary_load(const igcarl_config* config, const char* dir,
                                    igcarl_adversary** out) {
  return guarded([&] {
    require_arg(config, "config");
    require_arg(dir, "dir");
    require_arg(out, "out");
    *out = new igcarl_adversary{igcarl::adversary::SacNets::load(dir, config->c.adversary.alpha)};
  });
}

igcarl_status igcarl_adversary_save(const igcarl_adversary* adversary, const char* dir) {
  return guarded([&] {
    require_arg(adversary, "adversary");
    require_arg(dir, "dir");
    adversary->nets.save(dir);
  });
}

void igcarl_adversary_free(igcarl_adversary* adversary) { delete adversary; }

// ---- evaluation and studies -----------------------------------------------

igcarl_status igcarl_evaluate(const igcarl_config* config, const igcarl_agent* agent,
                              const char* attack, double epsilon, const igcarl_adversary* adversary,
                              const char* trace_path, igcarl_metrics* out) {
  return guarded([&] {
    require_arg(config, "config");
    require_arg(agent, "agent");
    require_arg(attack, "attack");
    require_arg(out, "out");
    h::EvalRequest req;
    req.mode = h::parse_attack_mode(attack);
    req.epsilon = epsilon;
    req.adversary = adversary != nullptr ? &adversary->nets : nullptr;
    req.episodes = config->c.eval.episodes;
    req.seed_base = config->c.eval.seed_base;
    req.noise_mode = config->c.probe.noise_mode;
    std::ostringstream trace;
    if (trace_path != nullptr) req.trace = &trace;
    const h::Metrics m = h::evaluate(config->c.sim, agent->actor, req);
    if (trace_path != nullptr) h::write_text_file(trace_path, trace.str());
    *out = igcarl_metrics{m.sr, m.cr, m.de, m.n_episodes};
  });
}

igcarl_status igcarl_metrics_write_csv(const char* path, const char* method, uint64_t seed,
                                       const char* attack, double epsilon,
                                       const igcarl_metrics* metrics) {
  return guarded([&] {
    require_arg(path, "path");
    require_arg(method, "method");
    require_arg(attack, "attack");
    require_arg(metrics, "metrics");
    h::MetricsRow row;
    row.method = method;
    row.seed = seed;
    row.mode = h::parse_attack_mode(attack);
    row.epsilon = epsilon;
    row.metrics = h::Metrics{metrics->sr, metrics->cr, metrics->de, metrics->n_episodes};
    std::ostringstream out;
    h::write_metrics_csv(out, {row});
    h::write_text_file(path, out.str());
  });
}

igcarl_status igcarl_probe(const igcarl_config* config, const igcarl_agent* agent, uint64_t seed,
                           const char* csv_path, size_t* rows, size_t* skipped) {
  return guarded([&] {
    require_arg(config, "config");
    require_arg(agent, "agent");
    require_arg(csv_path, "csv_path");
    const auto& p = config->c.probe;
    const auto obs =
        h::sample_rollout_observations(config->c.sim, agent->actor, p.observations, p.rollout_seed);
    std::ostringstream warnings;
    const auto result = h::run_probe_grid(agent->actor, obs, p, seed, &warnings);
    std::ostringstream out;
    h::write_probe_csv(out, result);
    h::write_text_file(csv_path, out.str());
    if (rows != nullptr) *rows = result.size();
    if (skipped != nullptr) {
      const std::string w = warnings.str();
      *skipped = static_cast<size_t>(std::count(w.begin(), w.end(), '\n'));
    }
  });
}

igcarl_status igcarl_noise_study(const igcarl_config* config, const igcarl_agent* agent,
                                 double epsilon, uint64_t seed, const char* csv_path, size_t* rows) {
  return guarded([&] {
    require_arg(config, "config");
    require_arg(agent, "agent");
    require_arg(csv_path, "csv_path");
    const auto& p = config->c.probe;
    if (std::isnan(epsilon)) epsilon = p.noise_epsilon;
    const auto obs =
        h::sample_rollout_observations(config->c.sim, agent->actor, p.observations, p.rollout_seed);
    const auto result = h::run_noise_study(agent->actor, obs, epsilon, p.noise_draws, p.noise_mode, seed);
    std::ostringstream out;
    h::write_noise_csv(out, result);
    h::write_text_file(csv_path, out.str());
    if (rows != nullptr) *rows = result.size();
  });
}

igcarl_status igcarl_run(const igcarl_config* config) {
  return guarded([&] {
    require_arg(config, "config");
    h::run_igcarl(config->c);
  });
}

}  // extern "C"
