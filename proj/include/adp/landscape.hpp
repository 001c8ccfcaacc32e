#pragma once
// The agent's belief: a W x H energy raster bounded below by a
// distance-to-goal floor and above by 1.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "adp/geometry.hpp"
#include "adp/map_model.hpp"
#include "adp/task_env.hpp"

namespace adp {

struct Cell {
  int x = 0;
  int y = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

inline constexpr double kEmptyEnergy = 1.0;

// Integer offsets (dx, dy) with dx^2 + dy^2 <= radius^2, in row-major order.
// Offsets for a given radius are computed once and shared.
inline const std::vector<Cell>& disc_offsets(double radius) {
  static std::mutex mu;
  static std::map<double, std::vector<Cell>> cache;
  std::lock_guard lock(mu);
  auto it = cache.find(radius);
  if (it != cache.end()) return it->second;
  std::vector<Cell> offsets;
  const int r = static_cast<int>(std::floor(radius));
  const double r2 = radius * radius + 1e-9;
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx)
      if (dx * dx + dy * dy <= r2) offsets.push_back({dx, dy});
  return cache.emplace(radius, std::move(offsets)).first->second;
}

struct EnergyLandscape {
  int width = 0;
  int height = 0;
  double cell_size = 1.0;  // map units per cell
  std::vector<double> energy;
  std::vector<double> floor;
  std::vector<double> initial;

  std::size_t index(Cell c) const { return static_cast<std::size_t>(c.y) * width + c.x; }
  Cell cell_at(std::size_t i) const { return {static_cast<int>(i % width), static_cast<int>(i / width)}; }
  bool contains(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < width && c.y < height; }
  double at(Cell c) const { return energy[index(c)]; }
  std::size_t size() const { return energy.size(); }

  Cell cell_of(const Point& p) const {
    const int cx = std::clamp(static_cast<int>(std::floor(p.x / cell_size)), 0, width - 1);
    const int cy = std::clamp(static_cast<int>(std::floor(p.y / cell_size)), 0, height - 1);
    return {cx, cy};
  }
  Point center(Cell c) const { return {(c.x + 0.5) * cell_size, (c.y + 0.5) * cell_size}; }

  void clip(std::size_t i) { energy[i] = std::clamp(energy[i], floor[i], kEmptyEnergy); }
};

/// Cells whose centers lie within `radius` cells of `center`, clipped at the
/// grid edges. Radius 0 yields the center alone.
inline std::vector<Cell> mask(Cell center, double radius, int width, int height) {
  std::vector<Cell> out;
  for (const Cell& o : disc_offsets(radius)) {
    const Cell c{center.x + o.x, center.y + o.y};
    if (c.x >= 0 && c.y >= 0 && c.x < width && c.y < height) out.push_back(c);
  }
  return out;
}

inline std::vector<Cell> mask(const EnergyLandscape& e, Cell center, double radius) {
  return mask(center, radius, e.width, e.height);
}

// Calls fn(index) for every in-grid cell of the disc.
template <typename Fn>
void for_each_in_mask(const EnergyLandscape& e, Cell center, double radius, Fn&& fn) {
  for (const Cell& o : disc_offsets(radius)) {
    const Cell c{center.x + o.x, center.y + o.y};
    if (e.contains(c)) fn(e.index(c));
  }
}

struct LandscapeConfig {
  int width = 100;
  int height = 100;
  double floor_offset = 0.35;  // C
};

/// E_floor is the distance from each cell center to the nearest goal,
/// normalized by the map diagonal and scaled into [0, 1 - C]. The belief
/// starts at E_floor + C.
inline EnergyLandscape init_landscape(const Bounds& bounds, std::span<const Goal> goals, const LandscapeConfig& cfg) {
  if (cfg.width < 16 || cfg.height < 16) throw std::invalid_argument("init_landscape: raster must be at least 16x16");
  if (goals.empty()) throw std::invalid_argument("init_landscape: at least one goal required");
  if (cfg.floor_offset < 0.0 || cfg.floor_offset >= 1.0) throw std::invalid_argument("init_landscape: C must be in [0, 1)");
  EnergyLandscape e;
  e.width = cfg.width;
  e.height = cfg.height;
  e.cell_size = std::max(bounds.width / cfg.width, bounds.height / cfg.height);
  const double diag = std::hypot(bounds.width, bounds.height);
  const std::size_t n = static_cast<std::size_t>(cfg.width) * cfg.height;
  e.floor.resize(n);
  e.initial.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Point p = e.center(e.cell_at(i));
    double nearest = std::numeric_limits<double>::infinity();
    for (const Goal& g : goals) nearest = std::min(nearest, distance(p, g.position));
    e.floor[i] = std::min(1.0, nearest / diag) * (1.0 - cfg.floor_offset);
    e.initial[i] = std::min(1.0, e.floor[i] + cfg.floor_offset);
  }
  e.energy = e.initial;
  return e;
}

/// Writes what the fovea saw: holds become wells at floor energy (radius
/// `well_radius` cells), the rest of the observed disc becomes maximal
/// energy. Re-applying the same observation is a no-op.
inline void integrate_observation(EnergyLandscape& e, const Observation& obs, double well_radius) {
  const double r_cells = obs.observed_disc.radius / e.cell_size;
  const Point c = obs.observed_disc.center;
  const Cell cc = e.cell_of(c);
  const double r_map_sq = obs.observed_disc.radius * obs.observed_disc.radius;
  // Scan a slightly larger disc and test exact membership in map units.
  for_each_in_mask(e, cc, r_cells + 1.5, [&](std::size_t i) {
    if (distance_sq(e.center(e.cell_at(i)), c) <= r_map_sq) e.energy[i] = kEmptyEnergy;
  });
  const double well_map = well_radius * e.cell_size;
  for (const Hold& h : obs.visible_holds) {
    const Cell hc = e.cell_of(h.position);
    for_each_in_mask(e, hc, well_radius + 1.5, [&](std::size_t i) {
      if (distance(e.center(e.cell_at(i)), h.position) <= well_map) e.energy[i] = e.floor[i];
    });
  }
}

// E <- clip(E + d (E_t0 - E), E_floor, 1)
inline void decay(EnergyLandscape& e, double rate) {
  for (std::size_t i = 0; i < e.size(); ++i) {
    // Convex form: exact at d = 0 and d = 1.
    e.energy[i] = (1.0 - rate) * e.energy[i] + rate * e.initial[i];
    e.clip(i);
  }
}

/// Raises the capsule of radius `well_radius / 2` cells around the segment
/// between two cell centers to maximal energy. A degenerate segment is a
/// no-op.
inline void record_failed_reach(EnergyLandscape& e, Cell from, Cell to, double well_radius) {
  if (from == to) return;
  const Point a{from.x + 0.5, from.y + 0.5};
  const Point b{to.x + 0.5, to.y + 0.5};
  const double cap = well_radius / 2.0;
  const int x0 = std::max(0, static_cast<int>(std::floor(std::min(a.x, b.x) - cap)) - 1);
  const int x1 = std::min(e.width - 1, static_cast<int>(std::ceil(std::max(a.x, b.x) + cap)) + 1);
  const int y0 = std::max(0, static_cast<int>(std::floor(std::min(a.y, b.y) - cap)) - 1);
  const int y1 = std::min(e.height - 1, static_cast<int>(std::ceil(std::max(a.y, b.y) + cap)) + 1);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x)
      if (distance_to_segment({x + 0.5, y + 0.5}, a, b) <= cap) e.energy[e.index({x, y})] = kEmptyEnergy;
}

/// Dense matrix export: a header line `# W H`, then H rows of W
/// whitespace-separated values (row 0 = lowest y), printed with round-trip
/// precision.
inline void write_matrix(std::ostream& out, std::span<const double> values, int width, int height) {
  if (values.size() != static_cast<std::size_t>(width) * height) throw std::invalid_argument("write_matrix: size mismatch");
  out << "# " << width << ' ' << height << '\n';
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (x) out << ' ';
      out << values[static_cast<std::size_t>(y) * width + x];
    }
    out << '\n';
  }
}

inline std::vector<double> read_matrix(std::istream& in, int& width, int& height) {
  std::string hash;
  if (!(in >> hash >> width >> height) || hash != "#") throw std::runtime_error("read_matrix: bad header");
  std::vector<double> values(static_cast<std::size_t>(width) * height);
  for (double& v : values)
    if (!(in >> v)) throw std::runtime_error("read_matrix: truncated matrix");
  return values;
}

}  // namespace adp
