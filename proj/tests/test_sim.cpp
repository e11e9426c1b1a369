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

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "igcarl/errors.hpp"
#include "igcarl/sim.hpp"

using namespace igcarl;
using namespace igcarl::sim;

namespace {

SimConfig empty_road() {
  SimConfig c;
  c.arrival_prob = 0.0;
  return c;
}

bool same_state(const SimState& a, const SimState& b) {
  if (a.ego.position != b.ego.position || a.ego.speed != b.ego.speed ||
      a.ego.heading != b.ego.heading || a.step_count != b.step_count ||
      a.others.size() != b.others.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.others.size(); ++i) {
    const auto& x = a.others[i];
    const auto& y = b.others[i];
    if (x.position != y.position || x.speed != y.speed || x.desired_speed != y.desired_speed ||
        x.lane != y.lane) {
      return false;
    }
  }
  return true;
}

// Closed-form position after t seconds of constant acceleration a from rest with a speed cap.
double clamped_distance(double a, double v_max, double t) {
  const double t_cap = v_max / a;
  if (t <= t_cap) return 0.5 * a * t * t;
  return 0.5 * a * t_cap * t_cap + v_max * (t - t_cap);
}

}  // namespace

TEST_CASE("reset is deterministic for a fixed seed") {
  const SimConfig c;
  CHECK(same_state(reset(c, 7), reset(c, 7)));
}

TEST_CASE("reset places the ego at the path start at rest") {
  const SimState s = reset(SimConfig{}, 3);
  CHECK(s.ego.position == 0.0);
  CHECK(s.ego.speed == 0.0);
  CHECK(s.step_count == 0);
  CHECK_FALSE(s.done);
}

TEST_CASE("zero arrival probability gives an empty road") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) CHECK(reset(empty_road(), seed).others.empty());
}

TEST_CASE("fraction of empty warm-up roads matches the arrival oracle") {
  const SimConfig c;
  int empty = 0;
  const int n = 1000;
  for (int seed = 0; seed < n; ++seed) empty += reset(c, static_cast<std::uint64_t>(seed)).others.empty();
  const double expected = std::pow(1.0 - c.arrival_prob, c.warmup_seconds);
  CHECK(std::abs(static_cast<double>(empty) / n - expected) <= 0.05);
  CHECK_FALSE(reset(c, 3).others.empty());
}

TEST_CASE("full throttle on an empty road reaches the goal on the closed-form step") {
  const SimConfig c = empty_road();
  SimState s = reset(c, 1);
  int expected = 0;
  while (clamped_distance(c.a_max, c.v_max, expected * c.dt) < c.path_length()) ++expected;
  REQUIRE(expected < c.max_steps);
  StepOutcome out;
  int steps = 0;
  while (!s.done) {
    out = step(c, s, 7.6);
    ++steps;
  }
  CHECK(out.reached_goal);
  CHECK_FALSE(out.collision);
  CHECK(steps == expected);
}

TEST_CASE("zero acceleration from standstill ends only at the horizon") {
  const SimConfig c = empty_road();
  SimState s = reset(c, 2);
  for (int k = 1; k <= c.max_steps; ++k) {
    const StepOutcome out = step(c, s, 0.0);
    CHECK(s.ego.position == 0.0);
    CHECK(out.done == (k == c.max_steps));
    CHECK_FALSE(out.reached_goal);
    CHECK_FALSE(out.collision);
  }
  CHECK_THROWS_AS(step(c, s, 0.0), UsageError);
}

TEST_CASE("vehicle entering the conflict zone with the ego collides") {
  const SimConfig c = empty_road();
  SimState s = reset(c, 4);
  s.ego.position = conflict_arc_position(c, 0);
  s.ego.speed = 0.0;
  s.ego.heading = ego_pose(c, s.ego.position).heading;
  s.others.push_back({conflict_lane_position(c, 0) - 6.0, 10.0, 10.0, 0});
  const StepOutcome out = step(c, s, 0.0);
  CHECK(out.collision);
  CHECK_FALSE(out.reached_goal);
  CHECK(out.done);
  CHECK(agent_reward(out, c) == doctest::Approx(0.0 / c.v_max - 1.0));
  CHECK(adversary_reward(out) == 1.0);
}

TEST_CASE("adjacent-lane traffic beside the ego is not a collision") {
  SimConfig c = empty_road();
  c.geometry.oncoming_lanes = 2;
  c.geometry.turn_radius = 12.0;
  SimState s = reset(c, 5);
  s.ego.position = conflict_arc_position(c, 0);
  s.ego.heading = ego_pose(c, s.ego.position).heading;
  // A vehicle parked in lane 1 level with the ego, outside lane 1's conflict window.
  const double lane1 = conflict_lane_position(c, 1);
  s.others.push_back({lane1 + 30.0, 0.0, 0.0, 1});
  CHECK_FALSE(step(c, s, 0.0).collision);
}

TEST_CASE("observation of an empty road uses the no-neighbor encoding") {
  const SimConfig c = empty_road();
  const Observation o = observe(c, reset(c, 1));
  CHECK(o.size() == 20);
  for (std::size_t k = 0; k < kNeighborSlots; ++k) {
    CHECK(o[2 + 3 * k] == 1.0);
    CHECK(o[3 + 3 * k] == 0.0);
    CHECK(o[4 + 3 * k] == 0.0);
  }
  CHECK(o[0] == -1.0);
}

TEST_CASE("ego at v_max maps to +1") {
  const SimConfig c = empty_road();
  SimState s = reset(c, 1);
  s.ego.speed = c.v_max;
  CHECK(observe(c, s)[0] == 1.0);
}

TEST_CASE("vehicle at half sensing range ahead maps to distance 0") {
  const SimConfig c = empty_road();
  SimState s = reset(c, 1);
  const Pose ego = ego_pose(c, 0.0);
  // Oncoming lane 0 runs parallel to the ego heading at a lateral offset.
  const double lateral = ego.x - (-0.5 * c.geometry.lane_width);
  const double ahead = std::sqrt(25.0 * 25.0 - lateral * lateral);
  const double y_world = ego.y + ahead;
  s.others.push_back({0.5 * c.geometry.oncoming_length - y_world, 10.0, 10.0, 0});
  const Observation o = observe(c, s);
  const std::size_t front = 2 + 3 * static_cast<std::size_t>(Slot::Front);
  CHECK(o[front] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(o[front + 1] == doctest::Approx(std::atan2(lateral, ahead) / std::numbers::pi));
  // Closing at 10 m/s along the line of sight component.
  CHECK(o[front + 2] == doctest::Approx(-10.0 * ahead / 25.0 / c.v_max));
}

TEST_CASE("agent and adversary rewards") {
  const SimConfig c;
  StepOutcome o;
  o.ego_speed = 15.0;
  CHECK(agent_reward(o, c) == 1.0);
  o.collision = true;
  CHECK(agent_reward(o, c) == 0.0);
  CHECK(adversary_reward(o) == 1.0);
  o.collision = false;
  o.ego_speed = 0.0;
  CHECK(agent_reward(o, c) == 0.0);
  CHECK(adversary_reward(o) == 0.0);
}

TEST_CASE("random rollouts respect every state and observation invariant") {
  const SimConfig c;
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> accel(-10.0, 10.0);
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    SimState s = reset(c, seed);
    double adv_return = 0.0;
    bool collided = false;
    for (;;) {
      const StepOutcome out = step(c, s, accel(rng));
      CHECK(s.ego.speed >= 0.0);
      CHECK(s.ego.speed <= c.v_max);
      for (const auto& v : s.others) {
        CHECK(v.speed >= 0.0);
        CHECK(v.speed <= c.v_max);
      }
      CHECK_FALSE((out.collision && out.reached_goal));
      CHECK(out.done == (out.collision || out.reached_goal || s.step_count == c.max_steps));
      const double r = agent_reward(out, c);
      CHECK(r >= -1.0);
      CHECK(r <= 1.0);
      adv_return += adversary_reward(out);
      collided = collided || out.collision;
      const Observation o = observe(c, s);
      for (double x : o) {
        CHECK(x >= -1.0);
        CHECK(x <= 1.0);
      }
      if (out.done) break;
    }
    CHECK(s.step_count <= c.max_steps);
    CHECK(adv_return == (collided ? 1.0 : 0.0));
  }
}

TEST_CASE("identical seeds and actions give bit-identical trajectories") {
  const SimConfig c;
  std::vector<double> actions;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> accel(-7.6, 7.6);
  for (int i = 0; i < c.max_steps; ++i) actions.push_back(accel(rng));
  SimState a = reset(c, 17);
  SimState b = reset(c, 17);
  for (double u : actions) {
    if (a.done) break;
    step(c, a, u);
    step(c, b, u);
    CHECK(same_state(a, b));
    CHECK(observe(c, a) == observe(c, b));
  }
}

TEST_CASE("acceleration is clamped to the bounds") {
  const SimConfig c = empty_road();
  SimState a = reset(c, 1);
  SimState b = reset(c, 1);
  step(c, a, 100.0);
  step(c, b, c.a_max);
  CHECK(a.ego.position == b.ego.position);
  CHECK_THROWS_AS(step(c, a, std::nan("")), UsageError);
}

TEST_CASE("invalid configs are rejected") {
  SimConfig c;
  c.v_max = 0.0;
  CHECK_THROWS_AS(reset(c, 1), ConfigError);
  c = SimConfig{};
  c.arrival_prob = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = SimConfig{};
  c.max_steps = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = SimConfig{};
  c.dt = 0.0;
  CHECK_THROWS_AS(Env{c}, ConfigError);
}

TEST_CASE("trace rows follow the declared schema") {
  const SimConfig c = empty_road();
  SimState s = reset(c, 1);
  const StepOutcome out = step(c, s, 1.0);
  std::ostringstream ss;
  write_trace_header(ss);
  write_trace_row(ss, s, out);
  std::istringstream in(ss.str());
  std::string header;
  std::string row;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header == "step,ego_pos,ego_speed,n_others,collision,reached_goal");
  CHECK(std::count(row.begin(), row.end(), ',') == 5);
}

TEST_CASE("env wrapper mirrors the free functions") {
  const SimConfig c;
  Env env(c);
  const Observation o = env.reset(9);
  SimState s = reset(c, 9);
  CHECK(o == observe(c, s));
  const StepOutcome a = env.step(2.0);
  const StepOutcome b = step(c, s, 2.0);
  CHECK(a.done == b.done);
  CHECK(env.observation() == observe(c, s));
}
