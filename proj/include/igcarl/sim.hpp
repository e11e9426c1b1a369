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

#ifndef IGCARL_SIM_HPP
#define IGCARL_SIM_HPP

#include <array>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <vector>

namespace igcarl::sim {

inline constexpr std::size_t kObsDim = 20;
inline constexpr std::size_t kNeighborSlots = 6;

/// Normalized observation: [speed, heading, 6 x (distance, direction, range rate)].
/// Clean observations lie in [-1, 1]; perturbed copies share the type.
using Observation = std::array<double, kObsDim>;

/// Neighbor slot order inside an Observation, relative to ego heading.
enum class Slot : std::size_t { Front = 0, Rear, FrontLeft, RearLeft, FrontRight, RearRight };

/// Intersection layout. The ego follows a fixed path: a straight approach
/// heading north, a left-turn arc, then a straight exit heading west. Oncoming
/// lanes run south on the far side of the centerline and are crossed by the arc.
struct Geometry {
  double approach_length = 0.0;
  double turn_radius = 10.0;
  double exit_length = 10.0;
  double lane_width = 3.5;
  double oncoming_length = 120.0;
  /// Half-extent of the conflict zone along the ego path around each crossing.
  double conflict_half_extent = 3.0;
  int oncoming_lanes = 1;
};

struct SimConfig {
  double v_max = 15.0;
  double a_min = -7.6;
  double a_max = 7.6;
  /// Vehicle arrival probability per second and lane.
  double arrival_prob = 0.5;
  int max_steps = 30;
  double dt = 1.0;
  /// Integration substeps per dt; collisions are tested at every substep.
  int substeps = 20;
  Geometry geometry;
  /// Collision distance is twice this value.
  double vehicle_half_length = 2.0;
  double sensing_range = 50.0;
  /// Length of the backward arrival window used to pre-populate traffic.
  double warmup_seconds = 8.0;
  /// Oncoming desired speeds are uniform in [min_frac * v_max, v_max].
  double other_speed_min_frac = 0.6;
  double min_gap = 2.0;
  double time_headway = 2.0;
  std::uint64_t seed = 0;

  /// Throws ConfigError on the first violated invariant.
  void validate() const;
  double path_length() const;
};

struct EgoState {
  double position = 0.0;  // arc length along the turn path (m)
  double speed = 0.0;
  double heading = 0.0;   // rad, world frame
};

struct OtherVehicle {
  double position = 0.0;  // distance travelled along its lane (m)
  double speed = 0.0;
  double desired_speed = 0.0;
  int lane = 0;
};

struct SimState {
  EgoState ego;
  std::vector<OtherVehicle> others;
  int step_count = 0;
  bool done = false;
  std::mt19937_64 rng;
};

struct StepOutcome {
  bool collision = false;
  bool reached_goal = false;
  double ego_speed = 0.0;
  bool done = false;
};

struct Pose {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
};

SimState reset(const SimConfig& config, std::uint64_t seed);

/// Advances one dt. The acceleration is clamped to [a_min, a_max].
/// Throws UsageError when the state is already done.
StepOutcome step(const SimConfig& config, SimState& state, double ego_accel);

Observation observe(const SimConfig& config, const SimState& state);

/// v / v_max - c, with c the collision indicator.
double agent_reward(const StepOutcome& outcome, const SimConfig& config);
/// Collision indicator.
double adversary_reward(const StepOutcome& outcome);

Pose ego_pose(const SimConfig& config, double arc_position);
Pose other_pose(const SimConfig& config, const OtherVehicle& vehicle);
/// Arc position of the ego path where it crosses the centre of `lane`.
double conflict_arc_position(const SimConfig& config, int lane);
/// Lane position of an oncoming vehicle at the crossing with the ego path.
double conflict_lane_position(const SimConfig& config, int lane);

/// Per-step CSV trace: step,ego_pos,ego_speed,n_others,collision,reached_goal
void write_trace_header(std::ostream& out);
void write_trace_row(std::ostream& out, const SimState& state, const StepOutcome& outcome);

/// Convenience bundle of a config and a live state.
class Env {
 public:
  explicit Env(SimConfig config);

  const Observation& reset(std::uint64_t seed);
  StepOutcome step(double ego_accel);
  const Observation& observation() const { return obs_; }
  const SimState& state() const { return state_; }
  const SimConfig& config() const { return config_; }
  /// Replaces the live state, e.g. with a hand-built fixture.
  void set_state(SimState state);

 private:
  SimConfig config_;
  SimState state_;
  Observation obs_{};
};

}  // namespace igcarl::sim

#endif  // IGCARL_SIM_HPP
