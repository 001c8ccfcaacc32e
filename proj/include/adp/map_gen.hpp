#pragma once
// Procedural map generation: a winding solution path, dead-end decoy branches,
// and isolated filler holds that sit just beyond reach of everything else.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "adp/map_model.hpp"
#include "adp/rng.hpp"

namespace adp {

struct MapGenConfig {
  std::string id_prefix = "gen";
  Bounds bounds{1000.0, 1000.0};
  double reach_radius = 160.0;
  double fovea_radius = 150.0;
  double goal_radius = 40.0;
  int n_holds = 50;
  int n_goals = 1;
  int path_hops = 6;           // holds on the main solution path
  double gap_min = 0.55;       // hop length as a fraction of reach_radius
  double gap_max = 0.90;       // must be <= 1 for solvable maps
  double max_turn = 0.9;       // radians of heading change per hop
  int decoy_branches = 2;
  int decoy_length = 3;
  bool solvable = true;
  int retry_budget = 200;
};

namespace detail {

struct GenState {
  const MapGenConfig& cfg;
  Rng& rng;
  std::vector<Point> path;    // main path(s), in growth order
  std::vector<Point> decoys;
  std::vector<Point> goals;

  double margin() const { return 0.03 * std::min(cfg.bounds.width, cfg.bounds.height); }

  bool inside(const Point& p) const {
    return p.x >= margin() && p.y >= margin() && p.x <= cfg.bounds.width - margin() &&
           p.y <= cfg.bounds.height - margin();
  }

  static bool clear_of(const Point& p, const std::vector<Point>& pts, double min_dist, const Point* except) {
    for (const Point& q : pts) {
      if (except != nullptr && q == *except) continue;
      if (distance(p, q) <= min_dist) return false;
    }
    return true;
  }

  // Grows a self-avoiding chain from `from`; each new point touches only its
  // predecessor. Returns false if the chain could not be completed.
  bool grow_chain(Point from, double heading, int hops, std::vector<Point>& out, bool avoid_goals) {
    const double r = cfg.reach_radius;
    Point prev = from;
    for (int h = 0; h < hops; ++h) {
      bool placed = false;
      for (int attempt = 0; attempt < 60 && !placed; ++attempt) {
        const double turn = rng.uniform(-cfg.max_turn, cfg.max_turn) * (attempt < 30 ? 1.0 : 2.0);
        const double gap = rng.uniform(cfg.gap_min, cfg.gap_max) * r;
        const double th = heading + turn;
        const Point next{prev.x + gap * std::cos(th), prev.y + gap * std::sin(th)};
        if (!inside(next)) continue;
        if (!clear_of(next, path, r * 1.02, &prev)) continue;
        if (!clear_of(next, decoys, r * 1.02, &prev)) continue;
        if (!clear_of(next, out, r * 1.02, &prev)) continue;
        if (distance(next, from) <= r * 1.02 && h > 0) continue;
        if (avoid_goals && !clear_of(next, goals, cfg.goal_radius + r * 0.5, nullptr)) continue;
        out.push_back(next);
        prev = next;
        heading = th;
        placed = true;
      }
      if (!placed) return false;
    }
    return true;
  }
};

inline double round_coord(double v) { return std::round(v * 100.0) / 100.0; }

}  // namespace detail

/// Deterministic for a fixed (seed, config). Throws ConfigError when the
/// configuration cannot be satisfied within `retry_budget` attempts.
inline MapSpec generate_map(std::uint64_t seed, const MapGenConfig& cfg) {
  if (cfg.n_holds < 1) throw ConfigError("n_holds must be >= 1");
  if (cfg.n_goals < 1) throw ConfigError("n_goals must be >= 1");
  if (!(cfg.gap_min > 0.0) || cfg.gap_max < cfg.gap_min) throw ConfigError("gap distribution must satisfy 0 < gap_min <= gap_max");
  if (cfg.solvable && cfg.gap_max > 1.0) throw ConfigError("solvable maps need gap_max <= 1");
  if (cfg.path_hops < 1) throw ConfigError("path_hops must be >= 1");
  const int structural = cfg.path_hops * cfg.n_goals + cfg.decoy_branches * cfg.decoy_length;
  if (structural > cfg.n_holds) throw ConfigError("n_holds too small for path_hops/decoy configuration");

  Rng rng(splitmix64(seed));
  for (int attempt = 0; attempt < cfg.retry_budget; ++attempt) {
    detail::GenState st{cfg, rng, {}, {}, {}};
    const Point start{cfg.bounds.width / 2.0, cfg.bounds.height / 2.0};

    // Main path(s): the first from the start, further ones branch off it.
    bool ok = true;
    std::vector<std::vector<Point>> branches;
    for (int g = 0; g < cfg.n_goals && ok; ++g) {
      Point from = start;
      if (g > 0) from = st.path[rng.below(st.path.size())];
      std::vector<Point> chain;
      ok = st.grow_chain(from, rng.uniform(0.0, 2.0 * std::numbers::pi), cfg.path_hops, chain, g > 0);
      if (!ok) break;
      st.path.insert(st.path.end(), chain.begin(), chain.end());
      st.goals.push_back(chain.back());
      branches.push_back(std::move(chain));
    }
    if (!ok) continue;

    // Decoys: dead ends leaving the main path, aimed roughly at the goal.
    for (int d = 0; d < cfg.decoy_branches && ok; ++d) {
      const auto& main = branches.front();
      if (main.size() < 2) break;
      const Point from = main[rng.below(main.size() - 1)];
      const Point& goal = st.goals.front();
      const double heading = std::atan2(goal.y - from.y, goal.x - from.x);
      std::vector<Point> chain;
      if (!st.grow_chain(from, heading, cfg.decoy_length, chain, true)) {
        ok = false;
        break;
      }
      st.decoys.insert(st.decoys.end(), chain.begin(), chain.end());
    }
    if (!ok) continue;

    // Filler: isolated holds just out of reach of the structure.
    std::vector<Point> all = st.path;
    all.insert(all.end(), st.decoys.begin(), st.decoys.end());
    std::vector<Point> filler;
    const int n_filler = cfg.n_holds - static_cast<int>(all.size());
    for (int f = 0, tries = 0; f < n_filler && tries < 20000; ++tries) {
      const Point p{rng.uniform(st.margin(), cfg.bounds.width - st.margin()),
                    rng.uniform(st.margin(), cfg.bounds.height - st.margin())};
      if (distance(p, start) <= cfg.reach_radius * 1.02) continue;
      if (!detail::GenState::clear_of(p, all, cfg.reach_radius * 1.02, nullptr)) continue;
      if (!detail::GenState::clear_of(p, st.goals, cfg.goal_radius + cfg.reach_radius * 1.02, nullptr)) continue;
      if (!detail::GenState::clear_of(p, filler, 0.15 * cfg.reach_radius, nullptr)) continue;
      filler.push_back(p);
      ++f;
    }
    if (static_cast<int>(filler.size()) < n_filler) continue;
    all.insert(all.end(), filler.begin(), filler.end());

    // Shuffle so hold ids carry no structural information.
    for (std::size_t i = all.size(); i > 1; --i) std::swap(all[i - 1], all[rng.below(i)]);

    MapSpec map;
    map.id = cfg.id_prefix + "-" + std::to_string(seed);
    map.bounds = cfg.bounds;
    map.start = start;
    map.reach_radius = cfg.reach_radius;
    map.fovea_radius = cfg.fovea_radius;
    for (const Point& g : st.goals) map.goals.push_back({{detail::round_coord(g.x), detail::round_coord(g.y)}, cfg.goal_radius});
    for (std::size_t i = 0; i < all.size(); ++i)
      map.holds.push_back({static_cast<int>(i), {detail::round_coord(all[i].x), detail::round_coord(all[i].y)}});
    map.notes = "generated";

    validate(map);
    if (cfg.solvable && !min_path(map).reachable()) continue;
    return map;
  }
  throw ConfigError("map configuration unsatisfiable within retry budget (" + std::to_string(cfg.retry_budget) + ")");
}

}  // namespace adp
