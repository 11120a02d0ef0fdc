// core.hpp
//
// Geometric primitives and domain entities shared by the index, the query
// engines and the baseline.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tq {

using coord_t = double;
using TrajId = std::uint64_t;
using FacilityId = std::uint64_t;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Point {
  coord_t x = 0;
  coord_t y = 0;

  friend bool operator==(const Point&, const Point&) = default;
};

inline bool is_finite(Point p) { return std::isfinite(p.x) && std::isfinite(p.y); }

// Axis-aligned rectangle. Quadtree cells are treated as half-open
// [min, max) except along the world's max edge; see quadrant_of().
struct Rect {
  Point min;
  Point max;

  friend bool operator==(const Rect&, const Rect&) = default;

  bool valid() const { return min.x <= max.x && min.y <= max.y; }
  Point center() const { return {(min.x + max.x) / 2, (min.y + max.y) / 2}; }
  coord_t width() const { return max.x - min.x; }
  coord_t height() const { return max.y - min.y; }

  // Closed containment test.
  bool contains(Point p) const {
    return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y;
  }
  bool contains(const Rect& r) const {
    return r.min.x >= min.x && r.max.x <= max.x && r.min.y >= min.y && r.max.y <= max.y;
  }
  bool intersects(const Rect& r) const {
    return r.min.x <= max.x && r.max.x >= min.x && r.min.y <= max.y && r.max.y >= min.y;
  }
  Rect expanded(coord_t d) const { return {{min.x - d, min.y - d}, {max.x + d, max.y + d}}; }
  Rect intersection(const Rect& r) const {
    return {{std::max(min.x, r.min.x), std::max(min.y, r.min.y)},
            {std::min(max.x, r.max.x), std::min(max.y, r.max.y)}};
  }
};

// Quadrant digits follow Morton order with x as the low bit:
//   0 = (low x, low y), 1 = (high x, low y), 2 = (low x, high y), 3 = (high x, high y).
// A coordinate equal to the split line goes to the high side.
inline int quadrant_of(const Rect& cell, Point p) {
  const Point mid = cell.center();
  return (p.x < mid.x ? 0 : 1) | (p.y < mid.y ? 0 : 2);
}

inline Rect quadrant(const Rect& cell, int q) {
  const Point mid = cell.center();
  Rect r = cell;
  if (q & 1) r.min.x = mid.x; else r.max.x = mid.x;
  if (q & 2) r.min.y = mid.y; else r.max.y = mid.y;
  return r;
}

inline std::array<Rect, 4> quadrants(const Rect& cell) {
  return {quadrant(cell, 0), quadrant(cell, 1), quadrant(cell, 2), quadrant(cell, 3)};
}

inline coord_t dist(Point p, Point q) { return std::hypot(p.x - q.x, p.y - q.y); }

inline coord_t dist2(Point p, Point q) {
  const coord_t dx = p.x - q.x;
  const coord_t dy = p.y - q.y;
  return dx * dx + dy * dy;
}

// The single proximity predicate used everywhere (index, baseline, oracle), so
// that boundary decisions never differ between code paths.
inline bool within(Point p, Point q, coord_t psi) { return dist2(p, q) <= psi * psi; }

inline coord_t dist2_to_rect(Point p, const Rect& r) {
  const coord_t dx = std::max({r.min.x - p.x, coord_t{0}, p.x - r.max.x});
  const coord_t dy = std::max({r.min.y - p.y, coord_t{0}, p.y - r.max.y});
  return dx * dx + dy * dy;
}

// True when some point of r may lie within psi of s. Never false for a point
// of r that within() accepts.
inline bool rect_within(const Rect& r, Point s, coord_t psi) {
  return dist2_to_rect(s, r) <= psi * psi;
}

enum class ServiceMode : std::uint8_t { Binary, PointCountFraction, LengthFraction };

struct ServiceParams {
  coord_t psi = 200.0;
  ServiceMode mode = ServiceMode::Binary;

  void validate() const {
    if (!(psi > 0) || !std::isfinite(psi)) throw Error("psi must be a positive finite distance");
  }
};

struct UserTrajectory {
  TrajId id = 0;
  std::vector<Point> points;
};

struct FacilityTrajectory {
  FacilityId id = 0;
  std::vector<Point> stops;
};

// A piece of a facility restricted to one quadtree cell: the stops that can
// serve some point of that cell.
struct FacilityComponent {
  FacilityId facility = 0;
  std::uint32_t component = 0;
  std::vector<Point> stops;  // whole_component sorts these by x
  Rect cell;

  bool empty() const { return stops.empty(); }
};

// Hands out component ids that are unique for the lifetime of one query
// evaluation.
class ComponentCounter {
 public:
  std::uint32_t next() { return next_++; }

 private:
  std::uint32_t next_ = 0;
};

inline bool point_served(Point p, std::span<const Point> stops, coord_t psi) {
  for (const Point& s : stops)
    if (within(p, s, psi)) return true;
  return false;
}

inline bool x_less(const Point& a, const Point& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); }

// point_served over stops sorted with x_less. Only stops in a slightly widened
// x-window are tested; within() still decides.
inline bool point_served_sorted(Point p, std::span<const Point> stops, coord_t psi) {
  const coord_t w = psi * (1 + 1e-9) + 1e-9 * std::max(coord_t{1}, std::abs(p.x));
  auto it = std::lower_bound(stops.begin(), stops.end(), p.x - w,
                             [](const Point& s, coord_t x) { return s.x < x; });
  for (; it != stops.end() && it->x <= p.x + w; ++it)
    if (within(p, *it, psi)) return true;
  return false;
}

inline Rect mbr(std::span<const Point> pts) {
  if (pts.empty()) throw Error("bounding rectangle of an empty point set");
  Rect r{pts.front(), pts.front()};
  for (const Point& p : pts) {
    r.min.x = std::min(r.min.x, p.x);
    r.min.y = std::min(r.min.y, p.y);
    r.max.x = std::max(r.max.x, p.x);
    r.max.y = std::max(r.max.y, p.y);
  }
  return r;
}

// Extended minimum bounding rectangle: everything the facility can serve.
inline Rect embr(const FacilityTrajectory& f, coord_t psi) {
  if (f.stops.empty()) throw Error("facility " + std::to_string(f.id) + " has no stops");
  return mbr(f.stops).expanded(psi);
}

inline FacilityComponent whole_component(const FacilityTrajectory& f, const Rect& cell,
                                         ComponentCounter& ids) {
  FacilityComponent c{f.id, ids.next(), f.stops, cell};
  std::sort(c.stops.begin(), c.stops.end(), x_less);
  return c;
}

// Splits a component over the four child cells of its cell. A stop is kept in
// every child it can serve, so siblings may share stops. Children that no
// stop can serve get std::nullopt.
inline std::array<std::optional<FacilityComponent>, 4> intersecting_components(
    const std::array<Rect, 4>& cells, const FacilityComponent& f, coord_t psi,
    ComponentCounter& ids) {
  std::array<std::optional<FacilityComponent>, 4> out;
  for (int q = 0; q < 4; ++q) {
    std::vector<Point> kept;
    for (const Point& s : f.stops)
      if (rect_within(cells[q], s, psi)) kept.push_back(s);
    if (!kept.empty()) out[q] = FacilityComponent{f.facility, ids.next(), std::move(kept), cells[q]};
  }
  return out;
}

inline coord_t trajectory_length(std::span<const Point> pts) {
  coord_t total = 0;
  for (std::size_t i = 1; i < pts.size(); ++i) total += dist(pts[i - 1], pts[i]);
  return total;
}

inline coord_t trajectory_length(const UserTrajectory& u) { return trajectory_length(u.points); }

// Service values are held as exact multiples of 2^-85 in 128 bits. Credits
// and bounds built from the same per-point and per-segment weights then add up
// exactly, in any order. Fractions are truncated to the grid, which moves a
// user's score by less than 2^-80.
using Score = unsigned __int128;
inline constexpr int kScoreBits = 85;
inline constexpr Score kFullScore = Score{1} << kScoreBits;

inline double to_double(Score s) { return static_cast<double>(s) * 0x1p-85; }

// One point's share of a trajectory with n points.
inline Score point_weight(std::size_t n) { return kFullScore / n; }

// Segment i's share of the trajectory length.
inline Score segment_weight(std::span<const Point> pts, std::size_t i, coord_t total) {
  if (!(total > 0)) return 0;
  return static_cast<Score>(dist(pts[i], pts[i + 1]) / total * 0x1p85);
}

inline std::string score_str(Score s) {
  if (s == 0) return "0";
  std::string out;
  for (; s > 0; s /= 10) out.push_back(static_cast<char>('0' + static_cast<int>(s % 10)));
  std::reverse(out.begin(), out.end());
  return out;
}

inline std::optional<Score> parse_score(std::string_view s) {
  if (s.empty() || s.size() > 39) return std::nullopt;
  Score v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') return std::nullopt;
    const Score next = v * 10 + static_cast<Score>(c - '0');
    if (next / 10 != v) return std::nullopt;
    v = next;
  }
  return v;
}

inline void validate(const UserTrajectory& u) {
  if (u.points.size() < 2)
    throw Error("user trajectory " + std::to_string(u.id) + " has fewer than 2 points");
  for (const Point& p : u.points)
    if (!is_finite(p)) throw Error("user trajectory " + std::to_string(u.id) + " has a non-finite point");
}

inline void validate(const FacilityTrajectory& f) {
  if (f.stops.empty()) throw Error("facility " + std::to_string(f.id) + " has no stops");
  for (const Point& p : f.stops)
    if (!is_finite(p)) throw Error("facility " + std::to_string(f.id) + " has a non-finite stop");
}

inline const char* to_string(ServiceMode m) {
  switch (m) {
    case ServiceMode::Binary: return "binary";
    case ServiceMode::PointCountFraction: return "point-count";
    case ServiceMode::LengthFraction: return "length";
  }
  return "?";
}

inline ServiceMode parse_service_mode(const std::string& s) {
  if (s == "binary") return ServiceMode::Binary;
  if (s == "point-count" || s == "points") return ServiceMode::PointCountFraction;
  if (s == "length") return ServiceMode::LengthFraction;
  throw Error("unknown service mode '" + s + "'");
}

}  // namespace tq
