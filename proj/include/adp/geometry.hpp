#pragma once

#include <cmath>
#include <compare>

namespace adp {

// A point in map units.
struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
  Point operator+(const Point& o) const { return {x + o.x, y + o.y}; }
  Point operator-(const Point& o) const { return {x - o.x, y - o.y}; }
  Point operator*(double s) const { return {x * s, y * s}; }
};

inline double norm(const Point& p) { return std::hypot(p.x, p.y); }
inline double distance(const Point& a, const Point& b) { return norm(a - b); }
inline double distance_sq(const Point& a, const Point& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}
inline bool is_finite(const Point& p) { return std::isfinite(p.x) && std::isfinite(p.y); }

// Distance from p to the closed segment [a, b].
inline double distance_to_segment(const Point& p, const Point& a, const Point& b) {
  const Point ab = b - a;
  const double len_sq = ab.x * ab.x + ab.y * ab.y;
  if (len_sq == 0.0) return distance(p, a);
  double t = ((p.x - a.x) * ab.x + (p.y - a.y) * ab.y) / len_sq;
  t = t < 0.0 ? 0.0 : (t > 1.0 ? 1.0 : t);
  return distance(p, a + ab * t);
}

}  // namespace adp
