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

#include "igcarl/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <string>

#include "igcarl/errors.hpp"

namespace igcarl::sim {
namespace {

constexpr double kPi = std::numbers::pi;

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("invalid sim config: " + what);
}

double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

double ego_x0(const SimConfig& c) { return 0.5 * c.geometry.lane_width; }
double stop_line_y(const SimConfig& c) { return -c.geometry.lane_width; }
double lane_center_x(const SimConfig& c, int lane) {
  return -c.geometry.lane_width * (lane + 0.5);
}

double crossing_angle(const SimConfig& c, int lane) {
  const double r = c.geometry.turn_radius;
  const double cx = ego_x0(c) - r;
  return std::acos((lane_center_x(c, lane) - cx) / r);
}

double sample_desired_speed(const SimConfig& c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(c.other_speed_min_frac * c.v_max, c.v_max);
  return u(rng);
}

// Highest speed that keeps min_gap to the leader after one headway.
double safe_speed(const SimConfig& c, double gap) {
  return std::max(0.0, (gap - c.min_gap) / c.time_headway);
}

double bumper_gap(const SimConfig& c, const OtherVehicle& follower, const OtherVehicle& leader) {
  return leader.position - follower.position - 2.0 * c.vehicle_half_length;
}

// Orders vehicles by lane, then leader first.
void sort_traffic(std::vector<OtherVehicle>& others) {
  std::sort(others.begin(), others.end(), [](const OtherVehicle& a, const OtherVehicle& b) {
    if (a.lane != b.lane) return a.lane < b.lane;
    return a.position > b.position;
  });
}

void advance_traffic(const SimConfig& c, std::vector<OtherVehicle>& others, double h) {
  for (std::size_t i = 0; i < others.size(); ++i) {
    OtherVehicle& v = others[i];
    double target = v.desired_speed;
    if (i > 0 && others[i - 1].lane == v.lane) {
      target = std::min(target, safe_speed(c, bumper_gap(c, v, others[i - 1])));
    }
    v.speed = std::clamp(std::min(v.speed + c.a_max * h, target), 0.0, c.v_max);
  }
  for (auto& v : others) v.position += v.speed * h;
  std::erase_if(others, [&](const OtherVehicle& v) {
    return v.position > c.geometry.oncoming_length;
  });
}

void spawn_arrivals(const SimConfig& c, SimState& s) {
  std::bernoulli_distribution arrive(std::clamp(c.arrival_prob * c.dt, 0.0, 1.0));
  for (int lane = 0; lane < c.geometry.oncoming_lanes; ++lane) {
    if (!arrive(s.rng)) continue;
    const double desired = sample_desired_speed(c, s.rng);
    const OtherVehicle* last = nullptr;
    for (const auto& v : s.others) {
      if (v.lane == lane && (last == nullptr || v.position < last->position)) last = &v;
    }
    OtherVehicle fresh{0.0, desired, desired, lane};
    if (last != nullptr) {
      const double gap = bumper_gap(c, fresh, *last);
      if (gap < c.min_gap) continue;  // entrance blocked, arrival dropped
      fresh.speed = std::min(desired, safe_speed(c, gap));
    }
    s.others.push_back(fresh);
  }
  sort_traffic(s.others);
}

bool collides(const SimConfig& c, const SimState& s) {
  const Pose ego = ego_pose(c, s.ego.position);
  const double reach = 2.0 * c.vehicle_half_length;
  for (const auto& v : s.others) {
    if (std::abs(s.ego.position - conflict_arc_position(c, v.lane)) > c.geometry.conflict_half_extent) {
      continue;
    }
    const Pose p = other_pose(c, v);
    if (std::hypot(p.x - ego.x, p.y - ego.y) < reach) return true;
  }
  return false;
}

int slot_for_bearing(double b) {
  constexpr double k30 = kPi / 6.0;
  constexpr double k90 = kPi / 2.0;
  constexpr double k150 = 5.0 * kPi / 6.0;
  if (std::abs(b) <= k30) return static_cast<int>(Slot::Front);
  if (std::abs(b) > k150) return static_cast<int>(Slot::Rear);
  if (b > 0.0) return static_cast<int>(b <= k90 ? Slot::FrontLeft : Slot::RearLeft);
  return static_cast<int>(b >= -k90 ? Slot::FrontRight : Slot::RearRight);
}

}  // namespace

void SimConfig::validate() const {
  require(std::isfinite(v_max) && v_max > 0.0, "v_max must be > 0");
  require(a_min < 0.0 && a_max > 0.0, "acceleration bounds must straddle 0");
  require(arrival_prob >= 0.0 && arrival_prob <= 1.0, "arrival probability must be in [0, 1]");
  require(max_steps >= 1, "max_steps must be >= 1");
  require(std::isfinite(dt) && dt > 0.0, "dt must be > 0");
  require(substeps >= 1, "substeps must be >= 1");
  require(dt / substeps <= time_headway, "substep must not exceed the time headway");
  require(vehicle_half_length > 0.0, "vehicle_half_length must be > 0");
  require(sensing_range > 0.0, "sensing_range must be > 0");
  require(warmup_seconds >= 0.0, "warmup_seconds must be >= 0");
  require(other_speed_min_frac > 0.0 && other_speed_min_frac <= 1.0,
          "other_speed_min_frac must be in (0, 1]");
  require(min_gap >= 0.0 && time_headway > 0.0, "car-following parameters must be positive");
  const Geometry& g = geometry;
  require(g.oncoming_lanes >= 0, "oncoming_lanes must be >= 0");
  require(g.approach_length >= 0.0 && g.exit_length >= 0.0, "path segments must be >= 0");
  require(g.lane_width > 0.0, "lane_width must be > 0");
  require(g.turn_radius > g.lane_width * (g.oncoming_lanes + 1),
          "turn_radius must span every oncoming lane");
  require(g.oncoming_length > 0.0, "oncoming_length must be > 0");
  require(g.conflict_half_extent > 0.0, "conflict_half_extent must be > 0");
}

double SimConfig::path_length() const {
  return geometry.approach_length + 0.5 * kPi * geometry.turn_radius + geometry.exit_length;
}

Pose ego_pose(const SimConfig& c, double s) {
  const Geometry& g = c.geometry;
  const double x0 = ego_x0(c);
  const double ys = stop_line_y(c);
  const double r = g.turn_radius;
  const double arc = 0.5 * kPi * r;
  if (s <= g.approach_length) {
    return {x0, ys - (g.approach_length - s), 0.5 * kPi};
  }
  if (s <= g.approach_length + arc) {
    const double theta = (s - g.approach_length) / r;
    return {x0 - r + r * std::cos(theta), ys + r * std::sin(theta), 0.5 * kPi + theta};
  }
  const double along = s - g.approach_length - arc;
  return {x0 - r - along, ys + r, kPi};
}

Pose other_pose(const SimConfig& c, const OtherVehicle& v) {
  return {lane_center_x(c, v.lane), 0.5 * c.geometry.oncoming_length - v.position, -0.5 * kPi};
}

double conflict_arc_position(const SimConfig& c, int lane) {
  return c.geometry.approach_length + c.geometry.turn_radius * crossing_angle(c, lane);
}

double conflict_lane_position(const SimConfig& c, int lane) {
  const double y = stop_line_y(c) + c.geometry.turn_radius * std::sin(crossing_angle(c, lane));
  return 0.5 * c.geometry.oncoming_length - y;
}

SimState reset(const SimConfig& c, std::uint64_t seed) {
  c.validate();
  SimState s;
  s.rng.seed(seed);
  s.ego = {0.0, 0.0, ego_pose(c, 0.0).heading};

  // Arrivals that happened k*dt seconds ago have travelled k*dt at their desired speed.
  std::bernoulli_distribution arrive(std::clamp(c.arrival_prob * c.dt, 0.0, 1.0));
  const int window = static_cast<int>(std::floor(c.warmup_seconds / c.dt + 1e-9));
  for (int lane = 0; lane < c.geometry.oncoming_lanes; ++lane) {
    for (int k = 1; k <= window; ++k) {
      if (!arrive(s.rng)) continue;
      const double desired = sample_desired_speed(c, s.rng);
      s.others.push_back({desired * k * c.dt, desired, desired, lane});
    }
  }
  sort_traffic(s.others);
  // Push followers back until spacing is collision-free, then settle speeds.
  for (std::size_t i = 1; i < s.others.size(); ++i) {
    OtherVehicle& v = s.others[i];
    const OtherVehicle& lead = s.others[i - 1];
    if (lead.lane != v.lane) continue;
    const double clearance = 2.0 * c.vehicle_half_length + c.min_gap + v.speed * c.time_headway;
    v.position = std::min(v.position, lead.position - clearance);
    v.speed = std::min(v.desired_speed, safe_speed(c, bumper_gap(c, v, lead)));
  }
  std::erase_if(s.others, [&](const OtherVehicle& v) {
    return v.position < 0.0 || v.position > c.geometry.oncoming_length;
  });
  return s;
}

StepOutcome step(const SimConfig& c, SimState& s, double ego_accel) {
  if (s.done) throw UsageError("step called on a finished episode");
  if (std::isnan(ego_accel)) throw UsageError("ego acceleration is NaN");
  const double accel = std::clamp(ego_accel, c.a_min, c.a_max);
  const double h = c.dt / c.substeps;
  const double goal = c.path_length();

  StepOutcome out;
  for (int k = 0; k < c.substeps; ++k) {
    const double v0 = s.ego.speed;
    const double v1 = std::clamp(v0 + accel * h, 0.0, c.v_max);
    s.ego.speed = v1;
    s.ego.position += 0.5 * (v0 + v1) * h;
    advance_traffic(c, s.others, h);
    if (collides(c, s)) {
      out.collision = true;
      break;
    }
    if (s.ego.position >= goal) {
      out.reached_goal = true;
      break;
    }
  }
  s.ego.heading = ego_pose(c, s.ego.position).heading;
  spawn_arrivals(c, s);
  ++s.step_count;

  out.ego_speed = s.ego.speed;
  out.done = out.collision || out.reached_goal || s.step_count >= c.max_steps;
  s.done = out.done;
  return out;
}

Observation observe(const SimConfig& c, const SimState& s) {
  Observation o{};
  o[0] = 2.0 * s.ego.speed / c.v_max - 1.0;
  o[1] = wrap_angle(s.ego.heading) / kPi;

  std::array<double, kNeighborSlots> best_dist;
  best_dist.fill(c.sensing_range);
  std::array<const OtherVehicle*, kNeighborSlots> best{};
  std::array<double, kNeighborSlots> best_bearing{};

  const Pose ego = ego_pose(c, s.ego.position);
  for (const auto& v : s.others) {
    const Pose p = other_pose(c, v);
    const double dx = p.x - ego.x;
    const double dy = p.y - ego.y;
    const double d = std::hypot(dx, dy);
    if (d > c.sensing_range) continue;
    const double bearing = wrap_angle(std::atan2(dy, dx) - ego.heading);
    const int slot = slot_for_bearing(bearing);
    if (best[slot] == nullptr || d < best_dist[slot]) {
      best[slot] = &v;
      best_dist[slot] = d;
      best_bearing[slot] = bearing;
    }
  }

  const double evx = s.ego.speed * std::cos(ego.heading);
  const double evy = s.ego.speed * std::sin(ego.heading);
  for (std::size_t k = 0; k < kNeighborSlots; ++k) {
    double* triple = &o[2 + 3 * k];
    if (best[k] == nullptr) {
      triple[0] = 1.0;
      triple[1] = 0.0;
      triple[2] = 0.0;
      continue;
    }
    const Pose p = other_pose(c, *best[k]);
    const double d = best_dist[k];
    double rate = 0.0;
    if (d > 0.0) {
      const double rvx = best[k]->speed * std::cos(p.heading) - evx;
      const double rvy = best[k]->speed * std::sin(p.heading) - evy;
      rate = (rvx * (p.x - ego.x) + rvy * (p.y - ego.y)) / d;
    }
    triple[0] = 2.0 * d / c.sensing_range - 1.0;
    triple[1] = best_bearing[k] / kPi;
    triple[2] = std::clamp(rate / c.v_max, -1.0, 1.0);
  }
  return o;
}

double agent_reward(const StepOutcome& outcome, const SimConfig& config) {
  return outcome.ego_speed / config.v_max - (outcome.collision ? 1.0 : 0.0);
}

double adversary_reward(const StepOutcome& outcome) { return outcome.collision ? 1.0 : 0.0; }

void write_trace_header(std::ostream& out) {
  out << "step,ego_pos,ego_speed,n_others,collision,reached_goal\n";
}

void write_trace_row(std::ostream& out, const SimState& s, const StepOutcome& o) {
  out << s.step_count << ',' << s.ego.position << ',' << s.ego.speed << ',' << s.others.size()
      << ',' << (o.collision ? 1 : 0) << ',' << (o.reached_goal ? 1 : 0) << '\n';
}

Env::Env(SimConfig config) : config_(std::move(config)) { config_.validate(); }

const Observation& Env::reset(std::uint64_t seed) {
  state_ = sim::reset(config_, seed);
  obs_ = observe(config_, state_);
  return obs_;
}

StepOutcome Env::step(double ego_accel) {
  const StepOutcome out = sim::step(config_, state_, ego_accel);
  obs_ = observe(config_, state_);
  return out;
}

void Env::set_state(SimState state) {
  state_ = std::move(state);
  obs_ = observe(config_, state_);
}

}  // namespace igcarl::sim
