#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "tqtree/core.hpp"

using namespace tq;

TEST(Dist, PythagoreanTriple) { EXPECT_DOUBLE_EQ(dist({0, 0}, {3, 4}), 5.0); }

TEST(Dist, Identity) { EXPECT_EQ(dist({1, 1}, {1, 1}), 0.0); }

TEST(Dist, MatchesHypotAndIsAMetric) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> c(-1e4, 1e4);
  for (int i = 0; i < 100; ++i) {
    const Point p{c(rng), c(rng)}, q{c(rng), c(rng)}, r{c(rng), c(rng)};
    const double dx = p.x - q.x, dy = p.y - q.y;
    EXPECT_NEAR(dist(p, q), std::sqrt(dx * dx + dy * dy), 1e-9 * std::max(1.0, dist(p, q)));
    EXPECT_EQ(dist(p, q), dist(q, p));
    EXPECT_LE(dist(p, r), (dist(p, q) + dist(q, r)) * (1 + 1e-9));
  }
}

TEST(PointServed, BoundaryCounts) {
  const double psi = 3.7;
  const std::vector<Point> stops{{0, psi}};
  EXPECT_TRUE(point_served({0, 0}, stops, psi));
  EXPECT_FALSE(point_served({0, -0.001}, stops, psi));
}

TEST(PointServed, NoStops) { EXPECT_FALSE(point_served({0, 0}, {}, 1.0)); }

TEST(PointServed, MatchesLinearScan) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> c(0, 100);
  for (int i = 0; i < 200; ++i) {
    std::vector<Point> stops(1 + rng() % 5);
    for (auto& s : stops) s = {c(rng), c(rng)};
    const Point p{c(rng), c(rng)};
    const double psi = 1 + c(rng) / 5;
    bool any = false;
    for (const auto& s : stops) any = any || std::hypot(p.x - s.x, p.y - s.y) <= psi;
    EXPECT_EQ(point_served(p, stops, psi), any);
  }
}

TEST(Embr, SingleStop) {
  const Rect r = embr({1, {{5, 5}}}, 1);
  EXPECT_EQ(r, (Rect{{4, 4}, {6, 6}}));
}

TEST(Embr, TwoStops) {
  const Rect r = embr({1, {{0, 0}, {10, 2}}}, 2);
  EXPECT_EQ(r, (Rect{{-2, -2}, {12, 4}}));
}

TEST(Embr, EmptyFacilityRejected) { EXPECT_THROW(embr({1, {}}, 1), Error); }

TEST(Embr, ContainsEveryServablePoint) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> c(0, 50);
  for (int t = 0; t < 50; ++t) {
    FacilityTrajectory f{1, {}};
    for (int i = 0; i < 4; ++i) f.stops.push_back({c(rng), c(rng)});
    const double psi = 1 + c(rng) / 10;
    const Rect e = embr(f, psi);
    for (int i = 0; i < 400; ++i) {
      const Point p{c(rng) * 1.4 - 10, c(rng) * 1.4 - 10};
      if (point_served(p, f.stops, psi)) {
        EXPECT_TRUE(e.contains(p));
      }
    }
  }
}

TEST(Quadrant, SplitLineGoesHigh) {
  const Rect cell{{0, 0}, {8, 8}};
  EXPECT_EQ(quadrant_of(cell, {3.9, 3.9}), 0);
  EXPECT_EQ(quadrant_of(cell, {4, 0}), 1);
  EXPECT_EQ(quadrant_of(cell, {0, 4}), 2);
  EXPECT_EQ(quadrant_of(cell, {4, 4}), 3);
  EXPECT_EQ(quadrant_of(cell, {8, 8}), 3);
  EXPECT_EQ(quadrant(cell, 2), (Rect{{0, 4}, {4, 8}}));
}

TEST(IntersectingComponents, ContainedStopsGiveOneComponent) {
  ComponentCounter ids;
  const Rect cell{{0, 0}, {16, 16}};
  const FacilityComponent f{7, ids.next(), {{2, 14}, {3, 12}}, cell};
  const auto parts = intersecting_components(quadrants(cell), f, 1.0, ids);
  int n = 0;
  for (int q = 0; q < 4; ++q) n += parts[q] ? 1 : 0;
  EXPECT_EQ(n, 1);
  ASSERT_TRUE(parts[2]);
  EXPECT_EQ(parts[2]->facility, 7u);
  EXPECT_EQ(parts[2]->stops.size(), 2u);
}

TEST(IntersectingComponents, CenterStopInAllChildren) {
  ComponentCounter ids;
  const Rect cell{{0, 0}, {16, 16}};
  const FacilityComponent f{7, ids.next(), {{8, 8}}, cell};
  const auto parts = intersecting_components(quadrants(cell), f, 0.5, ids);
  for (int q = 0; q < 4; ++q) {
    ASSERT_TRUE(parts[q]);
    EXPECT_EQ(parts[q]->stops, (std::vector<Point>{{8, 8}}));
  }
  EXPECT_NE(parts[0]->component, parts[1]->component);
}

TEST(IntersectingComponents, ChildrenKeepEveryServingStop) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> c(0, 16);
  for (int t = 0; t < 40; ++t) {
    ComponentCounter ids;
    const Rect cell{{0, 0}, {16, 16}};
    FacilityComponent f{1, ids.next(), {}, cell};
    for (int i = 0; i < 5; ++i) f.stops.push_back({c(rng), c(rng)});
    const double psi = 0.5 + c(rng) / 8;
    const auto cells = quadrants(cell);
    const auto parts = intersecting_components(cells, f, psi, ids);
    for (int i = 0; i < 400; ++i) {
      const Point p{c(rng), c(rng)};
      const int q = quadrant_of(cell, p);
      const bool parent = point_served(p, f.stops, psi);
      const bool child = parts[q] && point_served(p, parts[q]->stops, psi);
      EXPECT_EQ(parent, child);
    }
  }
}

TEST(TrajectoryLength, Examples) {
  EXPECT_DOUBLE_EQ(trajectory_length(UserTrajectory{1, {{0, 0}, {3, 4}}}), 5.0);
  EXPECT_DOUBLE_EQ(trajectory_length(UserTrajectory{1, {{0, 0}, {1, 0}, {1, 1}}}), 2.0);
}

TEST(TrajectoryLength, MatchesPairwiseSum) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> c(0, 100);
  for (int t = 0; t < 50; ++t) {
    UserTrajectory u{1, {}};
    for (std::size_t i = 0; i < 2 + rng() % 8; ++i) u.points.push_back({c(rng), c(rng)});
    double s = 0;
    for (std::size_t i = 1; i < u.points.size(); ++i)
      s += std::hypot(u.points[i].x - u.points[i - 1].x, u.points[i].y - u.points[i - 1].y);
    EXPECT_NEAR(trajectory_length(u), s, 1e-9 * s);
  }
}

TEST(Validate, RejectsShortOrNonFinite) {
  EXPECT_THROW(validate(UserTrajectory{1, {{0, 0}}}), Error);
  EXPECT_THROW(validate(UserTrajectory{1, {{0, 0}, {NAN, 1}}}), Error);
  EXPECT_THROW(validate(FacilityTrajectory{1, {}}), Error);
  EXPECT_THROW(ServiceParams({0.0, ServiceMode::Binary}).validate(), Error);
  EXPECT_NO_THROW(validate(UserTrajectory{1, {{0, 0}, {0, 0}}}));
}

TEST(ServiceModeNames, RoundTrip) {
  for (auto m : {ServiceMode::Binary, ServiceMode::PointCountFraction, ServiceMode::LengthFraction})
    EXPECT_EQ(parse_service_mode(to_string(m)), m);
  EXPECT_THROW(parse_service_mode("bogus"), Error);
}
