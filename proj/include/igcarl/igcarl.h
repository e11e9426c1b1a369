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

/*
 * C interface of libigcarl.
 *
 * Every fallible function returns an igcarl_status. On failure the message is
 * available from igcarl_last_error() on the same thread until the next call.
 * Handles are opaque; each *_free accepts NULL.
 */

#ifndef IGCARL_IGCARL_H
#define IGCARL_IGCARL_H

#include <stddef.h>
#include <stdint.h>

#if defined(IGCARL_BUILDING_LIBRARY)
#define IGCARL_API __attribute__((visibility("default")))
#else
#define IGCARL_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

#define IGCARL_OBS_DIM 20

typedef enum igcarl_status {
  IGCARL_OK = 0,
  IGCARL_ERR_CONFIG = 1,
  IGCARL_ERR_USAGE = 2,
  IGCARL_ERR_FORMAT = 3,
  IGCARL_ERR_IO = 4,
  IGCARL_ERR_NUMERIC = 5,
  IGCARL_ERR_DEGENERATE = 6,
  IGCARL_ERR_INTERNAL = 7
} igcarl_status;

typedef struct igcarl_config igcarl_config;
/* Deterministic driving policy: action = 7.6 tanh(output 0). */
typedef struct igcarl_agent igcarl_agent;
/* Adversary networks: stochastic policy, twin critics, value network. */
typedef struct igcarl_adversary igcarl_adversary;

typedef struct igcarl_metrics {
  double sr;
  double cr;
  double de;
  int n_episodes;
} igcarl_metrics;

IGCARL_API const char* igcarl_version(void);
IGCARL_API const char* igcarl_status_name(igcarl_status status);
/* Never NULL; empty after a successful call. */
IGCARL_API const char* igcarl_last_error(void);

/* ---- configuration ---------------------------------------------------- */

IGCARL_API igcarl_status igcarl_config_default(igcarl_config** out);
IGCARL_API igcarl_status igcarl_config_parse(const char* json_text, igcarl_config** out);
IGCARL_API igcarl_status igcarl_config_load(const char* path, igcarl_config** out);
IGCARL_API void igcarl_config_free(igcarl_config* config);

IGCARL_API igcarl_status igcarl_config_set_out_dir(igcarl_config* config, const char* dir);
/* Replaces the seed list. */
IGCARL_API igcarl_status igcarl_config_set_seeds(igcarl_config* config, const uint64_t* seeds,
                                                 size_t count);
/* Co-training attack budget; the step size becomes epsilon / iterations. */
IGCARL_API igcarl_status igcarl_config_set_attack_epsilon(igcarl_config* config, double epsilon);
/* Replaces the training method list (igcarl, adv_unconstrained, clean, sac). */
IGCARL_API igcarl_status igcarl_config_set_methods(igcarl_config* config, const char* const* methods,
                                                   size_t count);

/*
 * Serializes the configuration as JSON into buf (NUL-terminated). *needed
 * receives the size including the terminator; a short buffer yields
 * IGCARL_ERR_USAGE with *needed set. buf may be NULL when capacity is 0.
 */
IGCARL_API igcarl_status igcarl_config_to_json(const igcarl_config* config, char* buf,
                                               size_t capacity, size_t* needed);

/* ---- agents ----------------------------------------------------------- */

/*
 * Trains one method and writes its artifacts under out_dir: actor.ckpt, the
 * network directories, agent_log.csv and, for adversarial methods,
 * adversary_log.csv. out may be NULL when only the artifacts are wanted.
 */
IGCARL_API igcarl_status igcarl_train_agent(const igcarl_config* config, const char* method,
                                            uint64_t seed, const char* out_dir,
                                            igcarl_agent** out);

/* Loads an actor checkpoint file with a 20-dimensional input. */
IGCARL_API igcarl_status igcarl_agent_load(const char* path, igcarl_agent** out);
IGCARL_API igcarl_status igcarl_agent_save(const igcarl_agent* agent, const char* path);
IGCARL_API void igcarl_agent_free(igcarl_agent* agent);
/* obs has IGCARL_OBS_DIM entries. */
IGCARL_API igcarl_status igcarl_agent_act(const igcarl_agent* agent, const double* obs,
                                          double* action);

/* ---- adversaries ------------------------------------------------------ */

/*
 * Trains a fresh adversary against a frozen agent with BIM budget epsilon.
 * A NaN epsilon selects the configured attack budget and a negative episode
 * count the configured evaluation-adversary length. Writes networks under
 * out_dir/adversary and out_dir/adversary_log.csv when out_dir is non-NULL.
 * out may be NULL.
 */
IGCARL_API igcarl_status igcarl_train_adversary(const igcarl_config* config,
                                                const igcarl_agent* agent, double epsilon,
                                                int episodes, uint64_t seed, const char* out_dir,
                                                igcarl_adversary** out);

/* Loads a directory written by igcarl_adversary_save; alpha from the config. */
IGCARL_API igcarl_status igcarl_adversary_load(const igcarl_config* config, const char* dir,
                                               igcarl_adversary** out);
IGCARL_API igcarl_status igcarl_adversary_save(const igcarl_adversary* adversary, const char* dir);
IGCARL_API void igcarl_adversary_free(igcarl_adversary* adversary);

/* ---- evaluation and studies ------------------------------------------- */

/*
 * Runs the configured number of evaluation episodes with the deterministic
 * actor. attack is "none", "bim" or "random"; bim requires an adversary.
 * trace_path, when non-NULL, receives a per-step CSV trace.
 */
IGCARL_API igcarl_status igcarl_evaluate(const igcarl_config* config, const igcarl_agent* agent,
                                         const char* attack, double epsilon,
                                         const igcarl_adversary* adversary, const char* trace_path,
                                         igcarl_metrics* out);

/* Writes a one-row metrics CSV in the same schema as the full pipeline. */
IGCARL_API igcarl_status igcarl_metrics_write_csv(const char* path, const char* method,
                                                  uint64_t seed, const char* attack,
                                                  double epsilon, const igcarl_metrics* metrics);

/*
 * Gradient/orthogonal probe grid over observations sampled from a rollout.
 * rows and skipped (observations with a vanishing gradient) may be NULL.
 */
IGCARL_API igcarl_status igcarl_probe(const igcarl_config* config, const igcarl_agent* agent,
                                      uint64_t seed, const char* csv_path, size_t* rows,
                                      size_t* skipped);

/* Action offsets under random sphere noise of radius epsilon (NaN selects the
 * configured noise radius). */
IGCARL_API igcarl_status igcarl_noise_study(const igcarl_config* config, const igcarl_agent* agent,
                                            double epsilon, uint64_t seed, const char* csv_path,
                                            size_t* rows);

/* Full pipeline into the configured output directory. */
IGCARL_API igcarl_status igcarl_run(const igcarl_config* config);

#ifdef __cplusplus
}
#endif

#endif /* IGCARL_IGCARL_H */
