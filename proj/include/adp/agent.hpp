#pragma once
// The prospection agent: one energy landscape per trial, a batch of particle
// rollouts per environment step.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <utility>
#include <vector>

#include "adp/landscape.hpp"
#include "adp/map_model.hpp"
#include "adp/planner.hpp"
#include "adp/rng.hpp"
#include "adp/task_env.hpp"

namespace adp {

// The parts of a map visible to a participant before exploring.
struct MapGeometry {
  Bounds bounds;
  std::vector<Goal> goals;
  Point start;
  double reach_radius = 0.0;
  double fovea_radius = 0.0;

  static MapGeometry of(const MapSpec& map) {
    return {map.bounds, map.goals, map.start, map.reach_radius, map.fovea_radius};
  }
};

// Per-step diagnostics, kept for inspection and tests.
struct StepTrace {
  ErrorMap psi;
  ConsensusResult consensus;
  std::size_t total_rollout_steps = 0;
};

class AdpAgent {
 public:
  AdpAgent(const MapGeometry& geometry, const AgentParams& params, std::uint64_t seed)
      : geometry_(geometry),
        params_(params),
        landscape_(init_landscape(geometry.bounds, geometry.goals,
                                  {params.grid_width, params.grid_height, params.floor_offset})),
        rng_(seed) {}

  const EnergyLandscape& landscape() const { return landscape_; }
  EnergyLandscape& landscape() { return landscape_; }
  const AgentParams& params() const { return params_; }
  const StepTrace& last_trace() const { return trace_; }
  const std::vector<Hold>& known_holds() const { return known_; }

  double reach_cells() const { return std::round(geometry_.reach_radius / landscape_.cell_size); }
  double fovea_cells() const { return geometry_.fovea_radius / landscape_.cell_size; }

  /// One decision. Order: failed-reach bookkeeping, observation, k rollouts
  /// on a frozen snapshot, error map from the snapshot, learning in particle
  /// order, decay, then fovea and move selection.
  Action step(const TrialState& state, const Observation& obs) {
    absorb_attempts(state);
    integrate_observation(landscape_, obs, params_.well_radius);
    for (const Hold& h : obs.visible_holds) remember(h);

    const Cell origin = landscape_.cell_of(state.agent_position);
    const EnergyLandscape snapshot = landscape_;
    std::vector<Rollout> batch;
    batch.reserve(static_cast<std::size_t>(std::max(0, params_.k)));
    {
      TransitionSampler sampler(snapshot, reach_cells(), params_.tau);
      for (int i = 0; i < params_.k; ++i) batch.push_back(rollout(sampler, origin, params_, rng_));
    }
    trace_.psi = accumulate_error(batch, snapshot);
    trace_.total_rollout_steps = 0;
    for (const Rollout& r : batch) {
      trace_.total_rollout_steps += r.steps();
      learn_from_rollout(landscape_, r, params_.alpha, params_.learn_radius);
    }
    decay(landscape_, params_.decay);

    Action action;
    if (auto fovea = select_fovea(trace_.psi, fovea_cells(), landscape_.cell_of(state.fovea_position)))
      action.fovea_target = landscape_.center(*fovea);

    std::vector<int> excluded;
    for (const auto& [from, to] : refuted_)
      if (from == position_key(state)) excluded.push_back(to);
    ConsensusContext ctx{known_, geometry_.goals, &landscape_, params_.well_radius, state.current_hold, excluded};
    trace_.consensus = move_consensus(batch, params_.eta, ctx);
    if (trace_.consensus.hold) action.agent_target = known_position(*trace_.consensus.hold);
    return action;
  }

 private:
  static int position_key(const TrialState& s) { return s.current_hold.value_or(-1); }

  void remember(const Hold& h) {
    if (std::none_of(known_.begin(), known_.end(), [&](const Hold& k) { return k.id == h.id; })) known_.push_back(h);
  }

  Point known_position(int id) const {
    for (const Hold& h : known_)
      if (h.id == id) return h.position;
    return {};
  }

  // A failed reach marks the gap as impassable in the landscape and is
  // remembered so the same hold is not retried from the same position.
  void absorb_attempts(const TrialState& state) {
    for (; seen_attempts_ < state.attempts.size(); ++seen_attempts_) {
      const NavigationAttempt& a = state.attempts[seen_attempts_];
      if (a.success || !a.target_hold) continue;
      refuted_.insert({position_key(state), *a.target_hold});
      record_failed_reach(landscape_, landscape_.cell_of(state.agent_position),
                          landscape_.cell_of(known_position(*a.target_hold)), params_.well_radius);
    }
  }

  MapGeometry geometry_;
  AgentParams params_;
  EnergyLandscape landscape_;
  Rng rng_;
  std::vector<Hold> known_;
  std::set<std::pair<int, int>> refuted_;
  std::size_t seen_attempts_ = 0;
  StepTrace trace_;
};

}  // namespace adp
