#pragma once
// Partially observable trial state machine: foveal observations, reach-gated
// navigation, the trial clock and termination.

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "adp/geometry.hpp"
#include "adp/map_model.hpp"

namespace adp {

enum class TrialStatus { kRunning, kSuccess, kTimeout };

struct NavigationAttempt {
  std::optional<int> target_hold;  // empty when the request snapped to no hold
  double t = 0.0;
  bool success = false;
  friend bool operator==(const NavigationAttempt&, const NavigationAttempt&) = default;
};

// Fovea (cursor) position relative to the agent.
struct AttentionSample {
  double t = 0.0;
  Point position;
  friend bool operator==(const AttentionSample&, const AttentionSample&) = default;
};

struct PathEntry {
  int hold_id = 0;
  double t = 0.0;
  friend bool operator==(const PathEntry&, const PathEntry&) = default;
};

struct EnvConfig {
  double step_duration = 0.1;
  double time_limit = 60.0;
  // Per-step fovea travel cap in map units; <= 0 means 2 x reach radius.
  double fovea_max_velocity = 0.0;
  // Snap tolerance for move targets as a fraction of map width.
  double snap_fraction = 0.02;

  double fovea_velocity(const MapSpec& map) const {
    return fovea_max_velocity > 0.0 ? fovea_max_velocity : 2.0 * map.reach_radius;
  }
};

inline double trial_clock(int step_count, const EnvConfig& cfg = {}) { return step_count * cfg.step_duration; }

inline bool clock_expired(int step_count, const EnvConfig& cfg = {}) {
  return trial_clock(step_count, cfg) >= cfg.time_limit - 1e-9;
}

struct TrialState {
  Point agent_position;
  Point fovea_position;
  std::optional<int> current_hold;
  int step_count = 0;
  std::vector<PathEntry> path;
  std::vector<NavigationAttempt> attempts;
  std::vector<AttentionSample> attention;  // one sample per environment step
  TrialStatus status = TrialStatus::kRunning;
  std::optional<std::size_t> reached_goal;

  double elapsed(const EnvConfig& cfg = {}) const { return trial_clock(step_count, cfg); }
};

inline TrialState initial_state(const MapSpec& map) {
  TrialState s;
  s.agent_position = map.start;
  s.fovea_position = map.start;
  return s;
}

struct Disc {
  Point center;
  double radius = 0.0;
};

struct Observation {
  std::vector<Hold> visible_holds;
  Point fovea_position;
  Disc observed_disc;
};

inline Observation observe(const TrialState& state, const MapSpec& map) {
  Observation obs;
  obs.fovea_position = state.fovea_position;
  obs.observed_disc = {state.fovea_position, map.fovea_radius};
  for (const Hold& h : map.holds)
    if (distance(h.position, state.fovea_position) <= map.fovea_radius) obs.visible_holds.push_back(h);
  return obs;
}

// Both components optional; an empty component means STAY.
struct Action {
  std::optional<Point> agent_target;
  std::optional<Point> fovea_target;
};

/// Applies one agent action.
///
/// A move request snaps to the nearest hold within the snap tolerance and
/// succeeds only if that hold is within reach; the attempt is logged either
/// way. The fovea travels toward its target at most `fovea_velocity` per
/// environment step, so long saccades consume several steps. Every consumed
/// step appends one attention sample. The trial ends with SUCCESS as soon as
/// the agent lands inside a goal, or TIMEOUT when the clock reaches the limit.
inline TrialState apply_action(TrialState state, const Action& action, const MapSpec& map, const EnvConfig& cfg = {}) {
  if (state.status != TrialStatus::kRunning) throw std::logic_error("apply_action: trial is not running");
  if ((action.agent_target && !is_finite(*action.agent_target)) ||
      (action.fovea_target && !is_finite(*action.fovea_target)))
    throw std::invalid_argument("apply_action: non-finite action coordinates");

  // Fovea schedule: collinear sub-steps, the last one landing on the target.
  std::vector<Point> fovea_steps;
  if (action.fovea_target) {
    const Point from = state.fovea_position;
    const Point to = *action.fovea_target;
    const double dist = distance(from, to);
    const double vmax = cfg.fovea_velocity(map);
    const int n = std::max(1, static_cast<int>(std::ceil(dist / vmax - 1e-9)));
    for (int i = 1; i <= n; ++i) {
      const double frac = std::min(1.0, (vmax * i) / std::max(dist, 1e-300));
      fovea_steps.push_back(i == n ? to : from + (to - from) * frac);
    }
  } else {
    fovea_steps.push_back(state.fovea_position);
  }

  bool moved = false;
  if (action.agent_target) {
    const double t_attempt = trial_clock(state.step_count + 1, cfg);
    const double snap = cfg.snap_fraction * map.bounds.width;
    const Hold* target = nullptr;
    double best = snap;
    for (const Hold& h : map.holds) {
      const double d = distance(h.position, *action.agent_target);
      if (d <= best) {
        best = d;
        target = &h;
      }
    }
    NavigationAttempt attempt{target ? std::optional<int>(target->id) : std::nullopt, t_attempt, false};
    if (target != nullptr && within_reach(state.agent_position, target->position, map.reach_radius)) {
      attempt.success = true;
      state.agent_position = target->position;
      state.current_hold = target->id;
      state.path.push_back({target->id, t_attempt});
      moved = true;
    }
    state.attempts.push_back(attempt);
  }

  for (std::size_t i = 0; i < fovea_steps.size(); ++i) {
    state.fovea_position = fovea_steps[i];
    ++state.step_count;
    state.attention.push_back({state.elapsed(cfg), state.fovea_position - state.agent_position});
    if (i == 0 && moved) {
      if (auto g = map.goal_containing(state.agent_position)) {
        state.status = TrialStatus::kSuccess;
        state.reached_goal = *g;
        break;
      }
    }
    if (clock_expired(state.step_count, cfg)) {
      state.status = TrialStatus::kTimeout;
      break;
    }
  }
  return state;
}

}  // namespace adp
