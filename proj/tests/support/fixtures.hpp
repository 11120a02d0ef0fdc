// Shared fixtures and reference implementations for the test suites.

#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "tqtree/core.hpp"
#include "tqtree/ingest.hpp"
#include "tqtree/service.hpp"
#include "tqtree/tqtree.hpp"

namespace fixtures {

using tq::FacilityTrajectory;
using tq::Point;
using tq::Rect;
using tq::UserTrajectory;

// Twelve commuters on a 16 x 16 map, three bus routes, psi = 0.9, beta = 2.
// Routes 25 and 65 cover the upper half and the east; route 46 the south-west
// quadrant, where four trips start and end.
struct Figure1 {
  static constexpr double psi = 0.9;
  static constexpr std::size_t beta = 2;
  Rect bounds{{0, 0}, {16, 16}};
  std::vector<UserTrajectory> users;
  std::vector<FacilityTrajectory> facilities;

  Figure1() {
    auto u = [&](tq::TrajId id, Point a, Point b) { users.push_back({id, {a, b}}); };
    u(1, {2, 12}, {10, 12});
    u(2, {3, 14}, {12, 14});
    u(3, {9, 6}, {11, 5});
    u(4, {1, 10}, {9, 10});
    u(5, {0.5, 0.5}, {4.5, 0.5});
    u(6, {1.5, 1.5}, {4.5, 3});
    u(7, {3, 3}, {1, 6});
    u(8, {2, 5}, {7, 3});
    u(9, {6, 10}, {14, 6});
    u(10, {0.5, 0.8}, {14, 14});
    u(11, {4.5, 3.3}, {13, 12});
    u(12, {10, 2}, {14, 3});
    facilities.push_back({25, {{2, 12}, {10, 12}, {3, 14}, {12, 14}, {1, 10}, {9, 10}}});
    facilities.push_back({46, {{0.5, 0.5}, {1.5, 1.5}, {3, 3}, {2, 5}, {4.5, 0.5}, {4.5, 3}, {1, 6}, {7, 3}}});
    facilities.push_back({65, {{6, 10}, {14, 6}, {14, 14}, {13, 12}, {10, 2}, {14, 3}}});
  }

  const FacilityTrajectory& facility(tq::FacilityId id) const {
    for (const auto& f : facilities)
      if (f.id == id) return f;
    throw tq::Error("no such facility");
  }

  std::vector<FacilityTrajectory> group(std::initializer_list<tq::FacilityId> ids) const {
    std::vector<FacilityTrajectory> g;
    for (auto id : ids) g.push_back(facility(id));
    return g;
  }

  tq::TQTree tree(tq::TreeVariant v = tq::TreeVariant::TwoPoint, tq::ServiceMode m = tq::ServiceMode::Binary,
                  bool zorder = true) const {
    tq::TreeOptions o;
    o.beta = beta;
    o.variant = v;
    o.mode = m;
    o.zorder = zorder;
    return tq::TQTree::build(users, bounds, o);
  }

  // A facility whose stops reach part of the south-west quadrant only.
  static FacilityTrajectory figure5_facility() { return {99, {{2, 1}, {6, 3}, {2, 6}, {6, 6}}}; }
};

// Witness against diminishing returns: A = {a}, B = {a, b}, extra facility x.
// The single user's source is near b only, its destination near x only.
struct Lemma1 {
  static constexpr double psi = 1.0;
  std::vector<UserTrajectory> users{{1, {{0, 0}, {10, 0}}}, {2, {{20, 20}, {21, 20}}}};
  FacilityTrajectory a{1, {{20, 20}, {21, 20}}};
  FacilityTrajectory b{2, {{0, 0.5}}};
  FacilityTrajectory x{3, {{10, 0.5}}};
};

// Random instance over [0, extent]^2 with the given trajectory shape.
struct Instance {
  std::vector<UserTrajectory> users;
  std::vector<FacilityTrajectory> facilities;
  Rect bounds;
  double psi = 0;
};

inline Instance random_instance(std::uint64_t seed, std::size_t nusers, std::size_t nfac, std::size_t stops,
                                std::size_t min_pts, std::size_t max_pts, bool clustered = true) {
  tq::SyntheticSpec s;
  s.users = nusers;
  s.facilities = nfac;
  s.stops = stops;
  s.min_points = min_pts;
  s.max_points = max_pts;
  s.distribution = clustered ? tq::Distribution::Clustered : tq::Distribution::Uniform;
  s.hotspots = 6;
  s.hotspot_radius = 400;
  s.extent = 5000;
  s.seed = seed;
  const auto w = tq::generate_synthetic(s);
  Instance in;
  in.users = w.data.users;
  in.facilities = w.data.facilities;
  in.bounds = w.bounds;
  std::mt19937_64 rng(seed * 7919 + 13);
  in.psi = 80 + static_cast<double>(rng() % 240);
  // Put some points exactly on split lines and exactly psi away from a stop
  // so boundary rules are exercised.
  if (!in.users.empty() && !in.facilities.empty()) {
    in.users[0].points[0] = {2500, 2500};
    const Point s0 = in.facilities[0].stops[0];
    Point p{s0.x + in.psi, s0.y};
    if (in.bounds.contains(p)) in.users[in.users.size() / 2].points.back() = p;
  }
  return in;
}

inline tq::TreeOptions options(std::size_t beta, tq::TreeVariant v, tq::ServiceMode m, bool zorder = true) {
  tq::TreeOptions o;
  o.beta = beta;
  o.variant = v;
  o.mode = m;
  o.zorder = zorder;
  return o;
}

inline const tq::TreeVariant kVariants[] = {tq::TreeVariant::TwoPoint, tq::TreeVariant::Segmented,
                                            tq::TreeVariant::FullTrajectory};
inline const tq::ServiceMode kModes[] = {tq::ServiceMode::Binary, tq::ServiceMode::PointCountFraction,
                                         tq::ServiceMode::LengthFraction};

// Trajectories the two-point variant accepts in the given mode.
inline std::size_t max_points_for(tq::TreeVariant v, tq::ServiceMode m, std::size_t wanted) {
  return v == tq::TreeVariant::TwoPoint && m != tq::ServiceMode::Binary ? 2 : wanted;
}

}  // namespace fixtures
