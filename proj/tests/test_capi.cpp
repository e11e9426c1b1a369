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

// Links the shared library only; nothing from the C++ core is visible here.

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "doctest.h"
#include "igcarl/igcarl.h"

#ifndef IGCARL_TEST_DATA_DIR
#error "IGCARL_TEST_DATA_DIR must point at tests/data"
#endif

namespace {

const std::string kSmoke = std::string(IGCARL_TEST_DATA_DIR) + "/smoke.json";

std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("igcarl_test_capi_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

std::size_t count_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

}  // namespace

TEST_CASE("version and status names") {
  CHECK(std::strlen(igcarl_version()) > 0);
  CHECK(std::string(igcarl_status_name(IGCARL_OK)) == "ok");
  for (int s = IGCARL_OK; s <= IGCARL_ERR_INTERNAL; ++s) {
    CHECK(std::strlen(igcarl_status_name(static_cast<igcarl_status>(s))) > 0);
  }
  CHECK(std::strlen(igcarl_status_name(static_cast<igcarl_status>(99))) > 0);
}

TEST_CASE("errors set the last error and success clears it") {
  igcarl_config* cfg = nullptr;
  CHECK(igcarl_config_parse("{\"sim\": {\"bogus\": 1}}", &cfg) == IGCARL_ERR_CONFIG);
  CHECK(cfg == nullptr);
  CHECK(std::string(igcarl_last_error()).find("bogus") != std::string::npos);
  REQUIRE(igcarl_config_parse("{}", &cfg) == IGCARL_OK);
  CHECK(std::string(igcarl_last_error()).empty());
  igcarl_config_free(cfg);
  CHECK(igcarl_config_load("/nonexistent/x.json", &cfg) == IGCARL_ERR_IO);
}

TEST_CASE("NULL arguments are usage errors") {
  CHECK(igcarl_config_default(nullptr) == IGCARL_ERR_USAGE);
  CHECK(igcarl_config_parse(nullptr, nullptr) == IGCARL_ERR_USAGE);
  CHECK(igcarl_config_set_out_dir(nullptr, "x") == IGCARL_ERR_USAGE);
  CHECK(igcarl_agent_act(nullptr, nullptr, nullptr) == IGCARL_ERR_USAGE);
  CHECK(igcarl_evaluate(nullptr, nullptr, "none", 0.0, nullptr, nullptr, nullptr) == IGCARL_ERR_USAGE);
  igcarl_config_free(nullptr);
  igcarl_agent_free(nullptr);
  igcarl_adversary_free(nullptr);
}

TEST_CASE("to_json follows the size-query protocol") {
  igcarl_config* cfg = nullptr;
  REQUIRE(igcarl_config_default(&cfg) == IGCARL_OK);
  std::size_t needed = 0;
  CHECK(igcarl_config_to_json(cfg, nullptr, 0, &needed) == IGCARL_ERR_USAGE);
  REQUIRE(needed > 1);
  std::vector<char> small(needed - 1);
  CHECK(igcarl_config_to_json(cfg, small.data(), small.size(), &needed) == IGCARL_ERR_USAGE);
  std::vector<char> buf(needed);
  CHECK(igcarl_config_to_json(cfg, buf.data(), buf.size(), &needed) == IGCARL_OK);
  CHECK(std::strlen(buf.data()) + 1 == needed);

  igcarl_config* back = nullptr;
  REQUIRE(igcarl_config_parse(buf.data(), &back) == IGCARL_OK);
  std::vector<char> again(needed);
  CHECK(igcarl_config_to_json(back, again.data(), again.size(), &needed) == IGCARL_OK);
  CHECK(std::string(again.data()) == std::string(buf.data()));
  igcarl_config_free(back);
  igcarl_config_free(cfg);
}

TEST_CASE("setters validate their input") {
  igcarl_config* cfg = nullptr;
  REQUIRE(igcarl_config_default(&cfg) == IGCARL_OK);
  const std::uint64_t seeds[] = {4, 5};
  CHECK(igcarl_config_set_seeds(cfg, seeds, 2) == IGCARL_OK);
  const std::uint64_t dup[] = {4, 4};
  CHECK(igcarl_config_set_seeds(cfg, dup, 2) == IGCARL_ERR_CONFIG);
  const char* methods[] = {"igcarl", "sac"};
  CHECK(igcarl_config_set_methods(cfg, methods, 2) == IGCARL_OK);
  const char* bad[] = {"ppo"};
  CHECK(igcarl_config_set_methods(cfg, bad, 1) == IGCARL_ERR_CONFIG);
  CHECK(igcarl_config_set_attack_epsilon(cfg, -1.0) == IGCARL_ERR_CONFIG);
  CHECK(igcarl_config_set_attack_epsilon(cfg, 0.03) == IGCARL_OK);
  igcarl_config_free(cfg);
}

TEST_CASE("train, evaluate, attack and study through the C interface") {
  igcarl_config* cfg = nullptr;
  REQUIRE(igcarl_config_load(kSmoke.c_str(), &cfg) == IGCARL_OK);
  const auto dir = fresh_dir("flow");

  igcarl_agent* agent = nullptr;
  REQUIRE(igcarl_train_agent(cfg, "clean", 1, dir.c_str(), &agent) == IGCARL_OK);
  CHECK(std::filesystem::exists(dir / "actor.ckpt"));
  CHECK(std::filesystem::exists(dir / "agent_log.csv"));
  CHECK(igcarl_train_agent(cfg, "ppo", 1, dir.c_str(), nullptr) == IGCARL_ERR_CONFIG);

  double obs[IGCARL_OBS_DIM] = {};
  double action = 0.0;
  REQUIRE(igcarl_agent_act(agent, obs, &action) == IGCARL_OK);
  CHECK(std::abs(action) <= 7.6);

  igcarl_agent* loaded = nullptr;
  REQUIRE(igcarl_agent_load((dir / "actor.ckpt").c_str(), &loaded) == IGCARL_OK);
  double again = 1.0;
  REQUIRE(igcarl_agent_act(loaded, obs, &again) == IGCARL_OK);
  CHECK(again == action);
  CHECK(igcarl_agent_load((dir / "missing.ckpt").c_str(), &loaded) == IGCARL_ERR_IO);
  CHECK(igcarl_agent_load((dir / "agent_log.csv").c_str(), &loaded) == IGCARL_ERR_FORMAT);

  igcarl_metrics m{};
  REQUIRE(igcarl_evaluate(cfg, agent, "none", 0.0, nullptr, nullptr, &m) == IGCARL_OK);
  CHECK(m.n_episodes == 10);
  CHECK(m.sr + m.cr <= 1.0);
  CHECK(igcarl_evaluate(cfg, agent, "bim", 0.05, nullptr, nullptr, &m) == IGCARL_ERR_CONFIG);
  CHECK(igcarl_evaluate(cfg, agent, "fgsm", 0.05, nullptr, nullptr, &m) == IGCARL_ERR_CONFIG);

  igcarl_adversary* adv = nullptr;
  REQUIRE(igcarl_train_adversary(cfg, agent, std::numeric_limits<double>::quiet_NaN(), -1, 3,
                                 dir.c_str(), &adv) == IGCARL_OK);
  CHECK(std::filesystem::exists(dir / "adversary" / "policy.ckpt"));
  const auto trace = dir / "trace.csv";
  REQUIRE(igcarl_evaluate(cfg, agent, "bim", 0.05, adv, trace.c_str(), &m) == IGCARL_OK);
  CHECK(count_lines(trace) > 10);

  igcarl_adversary* adv_loaded = nullptr;
  REQUIRE(igcarl_adversary_load(cfg, (dir / "adversary").c_str(), &adv_loaded) == IGCARL_OK);
  igcarl_metrics m2{};
  REQUIRE(igcarl_evaluate(cfg, agent, "bim", 0.05, adv_loaded, nullptr, &m2) == IGCARL_OK);
  CHECK(m2.sr == m.sr);
  CHECK(m2.de == m.de);

  REQUIRE(igcarl_metrics_write_csv((dir / "metrics.csv").c_str(), "agent", 1, "bim", 0.05, &m) == IGCARL_OK);
  CHECK(count_lines(dir / "metrics.csv") == 2);

  std::size_t rows = 0;
  std::size_t skipped = 0;
  REQUIRE(igcarl_probe(cfg, agent, 1, (dir / "probe.csv").c_str(), &rows, &skipped) == IGCARL_OK);
  CHECK(rows + 13 * skipped == 2 * 13);
  CHECK(count_lines(dir / "probe.csv") == rows + 1);
  REQUIRE(igcarl_noise_study(cfg, agent, 0.05, 1, (dir / "noise.csv").c_str(), &rows) == IGCARL_OK);
  CHECK(rows == 40);

  igcarl_adversary_free(adv_loaded);
  igcarl_adversary_free(adv);
  igcarl_agent_free(loaded);
  igcarl_agent_free(agent);
  igcarl_config_free(cfg);
}
