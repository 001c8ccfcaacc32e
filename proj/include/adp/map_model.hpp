#pragma once
// Ground-truth map representation: holds, goals, the reachability graph and
// the optimal-path oracle.

#include <algorithm>
#include <cstddef>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "adp/geometry.hpp"

namespace adp {

class MapError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Unsatisfiable or invalid experiment/generator configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Hold {
  int id = 0;
  Point position;
  friend bool operator==(const Hold&, const Hold&) = default;
};

struct Goal {
  Point position;
  double radius = 0.0;
  friend bool operator==(const Goal&, const Goal&) = default;
};

struct Bounds {
  double width = 1000.0;
  double height = 1000.0;
  friend bool operator==(const Bounds&, const Bounds&) = default;

  bool contains(const Point& p) const {
    return p.x >= 0.0 && p.y >= 0.0 && p.x <= width && p.y <= height;
  }
};

struct MapSpec {
  std::string id;
  Bounds bounds;
  std::vector<Hold> holds;
  Point start;
  std::vector<Goal> goals;
  double reach_radius = 0.0;
  double fovea_radius = 0.0;
  // Free-form provenance (e.g. how radii were estimated); round-trips through
  // the file format but carries no semantics.
  std::string notes;

  friend bool operator==(const MapSpec&, const MapSpec&) = default;

  const Hold* find_hold(int hold_id) const {
    auto it = std::find_if(holds.begin(), holds.end(), [&](const Hold& h) { return h.id == hold_id; });
    return it == holds.end() ? nullptr : &*it;
  }

  // Index of the first goal containing p (boundary inclusive), if any.
  std::optional<std::size_t> goal_containing(const Point& p) const {
    for (std::size_t i = 0; i < goals.size(); ++i) {
      if (distance(p, goals[i].position) <= goals[i].radius) return i;
    }
    return std::nullopt;
  }
};

// Throws MapError naming the first violated invariant.
inline void validate(const MapSpec& map) {
  if (!(map.bounds.width > 0.0) || !(map.bounds.height > 0.0)) throw MapError("bounds: width and height must be > 0");
  if (map.goals.empty()) throw MapError("goals: at least one goal required");
  if (!(map.reach_radius > 0.0)) throw MapError("reach_radius: must be > 0");
  if (!(map.fovea_radius > 0.0)) throw MapError("fovea_radius: must be > 0");
  if (!map.bounds.contains(map.start)) throw MapError("start: outside map bounds");
  for (std::size_t i = 0; i < map.goals.size(); ++i) {
    const Goal& g = map.goals[i];
    if (!(g.radius > 0.0)) throw MapError("goals[" + std::to_string(i) + "].radius: must be > 0");
    if (!map.bounds.contains(g.position)) throw MapError("goals[" + std::to_string(i) + "].position: outside map bounds");
  }
  std::unordered_set<int> seen;
  for (std::size_t i = 0; i < map.holds.size(); ++i) {
    const Hold& h = map.holds[i];
    if (!seen.insert(h.id).second) throw MapError("holds[" + std::to_string(i) + "].id: duplicate id " + std::to_string(h.id));
    if (!map.bounds.contains(h.position)) throw MapError("holds[" + std::to_string(i) + "].position: outside map bounds");
  }
}

// Reach test shared by the graph, the environment and the metrics.
inline bool within_reach(const Point& a, const Point& b, double reach_radius) {
  return distance(a, b) <= reach_radius;
}

/// Hold connectivity. Node i of `adjacency` corresponds to `map.holds[i]`;
/// `start_adjacent` lists the hold indices within reach of the start point.
struct ReachGraph {
  std::vector<std::pair<int, int>> edges;  // hold ids, first < second
  std::vector<std::vector<std::size_t>> adjacency;
  std::vector<std::size_t> start_adjacent;

  bool has_edge(int a, int b) const {
    if (a > b) std::swap(a, b);
    return std::find(edges.begin(), edges.end(), std::pair{a, b}) != edges.end();
  }
};

inline ReachGraph build_reach_graph(const MapSpec& map) {
  ReachGraph g;
  const std::size_t n = map.holds.size();
  g.adjacency.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (within_reach(map.start, map.holds[i].position, map.reach_radius)) g.start_adjacent.push_back(i);
    for (std::size_t j = i + 1; j < n; ++j) {
      if (within_reach(map.holds[i].position, map.holds[j].position, map.reach_radius)) {
        g.adjacency[i].push_back(j);
        g.adjacency[j].push_back(i);
        g.edges.emplace_back(std::min(map.holds[i].id, map.holds[j].id), std::max(map.holds[i].id, map.holds[j].id));
      }
    }
  }
  std::sort(g.edges.begin(), g.edges.end());
  return g;
}

struct PathSolution {
  std::optional<int> hop_count;  // empty when no goal is reachable
  std::vector<int> witness;      // hold ids, start excluded

  bool reachable() const { return hop_count.has_value(); }
};

// Breadth-first search from the synthetic start node to any hold lying inside
// a goal radius.
inline PathSolution min_path(const MapSpec& map, const ReachGraph& graph) {
  const std::size_t n = map.holds.size();
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> parent(n, kNone);
  std::vector<int> depth(n, -1);
  std::queue<std::size_t> frontier;
  for (std::size_t i : graph.start_adjacent) {
    depth[i] = 1;
    frontier.push(i);
  }
  while (!frontier.empty()) {
    const std::size_t cur = frontier.front();
    frontier.pop();
    if (map.goal_containing(map.holds[cur].position)) {
      PathSolution sol;
      sol.hop_count = depth[cur];
      for (std::size_t v = cur; v != kNone; v = parent[v]) sol.witness.push_back(map.holds[v].id);
      std::reverse(sol.witness.begin(), sol.witness.end());
      return sol;
    }
    for (std::size_t next : graph.adjacency[cur]) {
      if (depth[next] >= 0) continue;
      depth[next] = depth[cur] + 1;
      parent[next] = cur;
      frontier.push(next);
    }
  }
  return {};
}

inline PathSolution min_path(const MapSpec& map) { return min_path(map, build_reach_graph(map)); }

}  // namespace adp
