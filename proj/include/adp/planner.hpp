#pragma once
// Particle rollouts over the energy landscape and the quantities derived from
// a rollout batch: learning updates, the error map, the fovea target and the
// move consensus.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "adp/landscape.hpp"
#include "adp/map_model.hpp"
#include "adp/rng.hpp"

namespace adp {

struct AgentParams {
  int k = 50;                    // particles per step
  double tau = 0.08;             // softmax temperature
  double mass = 4.0;             // m
  double alpha = 0.25;           // learning rate
  double eta = 0.05;             // consensus threshold, circular-variance units
  double decay = 0.02;           // d
  double floor_offset = 0.35;    // C
  double momentum_init = 1.0;    // p0, also the momentum cap
  double base_drain = 0.12;      // delta, momentum lost per step
  int max_rollout_length = 40;   // L_max
  double well_radius = 1.5;      // rho, cells
  double learn_radius = 1.0;     // cells updated around each trajectory step
  int grid_width = 100;
  int grid_height = 100;

  friend bool operator==(const AgentParams&, const AgentParams&) = default;
};

struct Rollout {
  std::vector<Cell> trajectory;   // X_0 .. X_n
  std::vector<double> momentum;   // momentum after arriving at X_j; momentum[0] = p0
  double terminal_energy = 0.0;   // snapshot energy at X_n
  double first_step_angle = 0.0;  // atan2 of X_1 - X_0; 0 when n == 0

  std::size_t steps() const { return trajectory.empty() ? 0 : trajectory.size() - 1; }
};

/// Next-cell distributions for one frozen snapshot. Rows are built lazily per
/// source cell, so a batch of k rollouts pays for each visited cell once.
class TransitionSampler {
 public:
  TransitionSampler(const EnergyLandscape& snapshot, double radius_cells, double tau)
      : e_(snapshot), radius_(radius_cells), tau_(tau), slot_(snapshot.size(), -1) {}

  Cell sample(Cell from, Rng& rng) {
    const Row& row = row_for(from);
    const double u = rng.uniform() * row.cumulative.back();
    auto it = std::upper_bound(row.cumulative.begin(), row.cumulative.end(), u);
    if (it == row.cumulative.end()) --it;
    return e_.cell_at(row.cells[static_cast<std::size_t>(it - row.cumulative.begin())]);
  }

  // Normalized probabilities over mask(from), in mask order.
  std::vector<double> probabilities(Cell from) {
    const Row& row = row_for(from);
    std::vector<double> p(row.cumulative.size());
    double prev = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] = (row.cumulative[i] - prev) / row.cumulative.back();
      prev = row.cumulative[i];
    }
    return p;
  }

  const EnergyLandscape& snapshot() const { return e_; }

 private:
  struct Row {
    std::vector<std::size_t> cells;
    std::vector<double> cumulative;
  };

  const Row& row_for(Cell from) {
    const std::size_t idx = e_.index(from);
    if (slot_[idx] >= 0) return rows_[static_cast<std::size_t>(slot_[idx])];
    Row row;
    double lowest = std::numeric_limits<double>::infinity();
    for_each_in_mask(e_, from, radius_, [&](std::size_t i) {
      row.cells.push_back(i);
      lowest = std::min(lowest, e_.energy[i]);
    });
    // Shifting by the minimum keeps exp() finite for any temperature.
    row.cumulative.reserve(row.cells.size());
    double acc = 0.0;
    for (std::size_t i : row.cells) {
      acc += std::exp(-(e_.energy[i] - lowest) / tau_);
      row.cumulative.push_back(acc);
    }
    slot_[idx] = static_cast<int>(rows_.size());
    rows_.push_back(std::move(row));
    return rows_.back();
  }

  const EnergyLandscape& e_;
  double radius_;
  double tau_;
  std::vector<int> slot_;
  std::vector<Row> rows_;
};

// Momentum at or below this counts as spent; absorbs drain round-off.
inline constexpr double kMomentumEpsilon = 1e-12;

inline double momentum_update(double momentum, double e_prev, double e_next, const AgentParams& p) {
  return std::min(p.momentum_init, momentum - p.base_drain - (e_next - e_prev) / p.mass);
}

/// One particle: softmax steps over the reach mask until momentum is spent
/// or the length cap is hit.
inline Rollout rollout(TransitionSampler& sampler, Cell origin, const AgentParams& p, Rng& rng) {
  const EnergyLandscape& e = sampler.snapshot();
  Rollout r;
  r.trajectory.push_back(origin);
  r.momentum.push_back(p.momentum_init);
  double momentum = p.momentum_init;
  Cell cur = origin;
  while (static_cast<int>(r.steps()) < p.max_rollout_length) {
    const Cell next = sampler.sample(cur, rng);
    momentum = momentum_update(momentum, e.at(cur), e.at(next), p);
    r.trajectory.push_back(next);
    r.momentum.push_back(momentum);
    cur = next;
    if (momentum <= kMomentumEpsilon) break;
  }
  r.terminal_energy = e.at(cur);
  if (r.steps() > 0) {
    const Cell& a = r.trajectory[0];
    const Cell& b = r.trajectory[1];
    r.first_step_angle = std::atan2(static_cast<double>(b.y - a.y), static_cast<double>(b.x - a.x));
  }
  return r;
}

inline Rollout rollout(const EnergyLandscape& snapshot, Cell origin, double reach_cells, const AgentParams& p, Rng& rng) {
  TransitionSampler sampler(snapshot, reach_cells, p.tau);
  return rollout(sampler, origin, p, rng);
}

/// Pulls the cells around every trajectory step toward the rollout's terminal
/// energy, weighted by the momentum at that step (negative momentum counts as
/// zero), then re-clips.
inline void learn_from_rollout(EnergyLandscape& e, const Rollout& r, double alpha, double learn_radius) {
  if (r.trajectory.empty() || alpha == 0.0) return;
  const double target = e.at(r.trajectory.back());
  for (std::size_t j = 0; j < r.trajectory.size(); ++j) {
    const double w = alpha * std::max(0.0, r.momentum[j]);
    if (w == 0.0) continue;
    for_each_in_mask(e, r.trajectory[j], learn_radius, [&](std::size_t i) {
      e.energy[i] += w * (target - e.energy[i]);
      e.clip(i);
    });
  }
}

struct ErrorMap {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  double at(Cell c) const { return values[static_cast<std::size_t>(c.y) * width + c.x]; }
};

// Sums the snapshot energy under every landing step (X_1 .. X_n).
inline ErrorMap accumulate_error(std::span<const Rollout> rollouts, const EnergyLandscape& snapshot) {
  ErrorMap psi{snapshot.width, snapshot.height, std::vector<double>(snapshot.size(), 0.0)};
  for (const Rollout& r : rollouts)
    for (std::size_t j = 1; j < r.trajectory.size(); ++j) psi.values[snapshot.index(r.trajectory[j])] += snapshot.at(r.trajectory[j]);
  return psi;
}

/// Cell maximizing the sum of psi over its fovea-sized disc. Near-ties
/// (relative 1e-9) go to the cell closest to `current`, then to the lowest
/// row-major index. Returns nullopt when psi is identically zero.
inline std::optional<Cell> select_fovea(const ErrorMap& psi, double fovea_radius_cells, Cell current) {
  const auto& offsets = disc_offsets(fovea_radius_cells);
  std::vector<double> score(psi.values.size(), 0.0);
  bool any = false;
  for (std::size_t q = 0; q < psi.values.size(); ++q) {
    const double v = psi.values[q];
    if (v == 0.0) continue;
    any = true;
    const int qx = static_cast<int>(q % psi.width);
    const int qy = static_cast<int>(q / psi.width);
    for (const Cell& o : offsets) {
      const int x = qx + o.x;
      const int y = qy + o.y;
      if (x >= 0 && y >= 0 && x < psi.width && y < psi.height) score[static_cast<std::size_t>(y) * psi.width + x] += v;
    }
  }
  if (!any) return std::nullopt;
  const double best = *std::max_element(score.begin(), score.end());
  const double tol = std::abs(best) * 1e-9;
  std::optional<Cell> pick;
  double pick_d2 = 0.0;
  for (std::size_t i = 0; i < score.size(); ++i) {
    if (score[i] < best - tol) continue;
    const Cell c{static_cast<int>(i % psi.width), static_cast<int>(i / psi.width)};
    const double d2 = std::pow(c.x - current.x, 2) + std::pow(c.y - current.y, 2);
    if (!pick || d2 < pick_d2) {
      pick = c;
      pick_d2 = d2;
    }
  }
  return pick;
}

// 1 - |mean resultant vector|; 1 for an empty set.
inline double circular_variance(std::span<const double> angles) {
  if (angles.empty()) return 1.0;
  double sx = 0.0;
  double sy = 0.0;
  for (double a : angles) {
    sx += std::cos(a);
    sy += std::sin(a);
  }
  const double n = static_cast<double>(angles.size());
  return 1.0 - std::hypot(sx / n, sy / n);
}

// What the agent knows when deciding whether to move.
struct ConsensusContext {
  std::span<const Hold> known_holds;
  std::span<const Goal> goals;
  const EnergyLandscape* grid = nullptr;  // geometry only
  double well_radius = 1.5;               // cells
  std::optional<int> current_hold;
  std::span<const int> excluded;          // holds known to be out of reach from here
};

struct ConsensusResult {
  std::optional<int> hold;
  double variance = 1.0;
  std::size_t moving = 0;  // particles whose first step left the current hold
};

/// Move consensus over the first steps of a batch.
///
/// First steps that stay put (same cell, or the well of the hold the agent is
/// on) count as "stay"; others map to the nearest known hold whose well they
/// land in, or to "none". The circular variance is taken over the moving
/// steps. A hold is returned only if it strictly out-polls both "stay" and
/// "none" and the variance is below eta. Hold ties go to the hold nearest a
/// goal, then the lower id.
inline ConsensusResult move_consensus(std::span<const Rollout> rollouts, double eta, const ConsensusContext& ctx) {
  ConsensusResult res;
  const double well_map = ctx.well_radius * ctx.grid->cell_size;
  std::size_t stay = 0;
  std::size_t none = 0;
  std::map<int, std::size_t> votes;
  std::vector<double> angles;
  for (const Rollout& r : rollouts) {
    if (r.steps() == 0) continue;
    const Cell& first = r.trajectory[1];
    if (first == r.trajectory[0]) {
      ++stay;
      continue;
    }
    const Point c = ctx.grid->center(first);
    const Hold* nearest = nullptr;
    double best = well_map;
    for (const Hold& h : ctx.known_holds) {
      const double d = distance(c, h.position);
      if (d <= best) {
        best = d;
        nearest = &h;
      }
    }
    if (nearest != nullptr && ctx.current_hold && nearest->id == *ctx.current_hold) {
      ++stay;
      continue;
    }
    angles.push_back(r.first_step_angle);
    if (nearest == nullptr || std::find(ctx.excluded.begin(), ctx.excluded.end(), nearest->id) != ctx.excluded.end())
      ++none;
    else
      ++votes[nearest->id];
  }
  res.moving = angles.size();
  res.variance = circular_variance(angles);
  if (votes.empty()) return res;

  const auto goal_distance = [&](int id) {
    const Hold* h = nullptr;
    for (const Hold& k : ctx.known_holds)
      if (k.id == id) h = &k;
    double d = std::numeric_limits<double>::infinity();
    for (const Goal& g : ctx.goals) d = std::min(d, distance(h->position, g.position));
    return d;
  };
  int best_id = votes.begin()->first;
  for (const auto& [id, count] : votes) {
    const std::size_t best_count = votes[best_id];
    if (count > best_count || (count == best_count && id != best_id && goal_distance(id) < goal_distance(best_id)))
      best_id = id;
  }
  const std::size_t top = votes[best_id];
  if (top <= stay || top <= none) return res;
  if (res.variance < eta) res.hold = best_id;
  return res;
}

}  // namespace adp
