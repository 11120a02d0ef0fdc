#include <gtest/gtest.h>

#include <random>

#include "support/fixtures.hpp"
#include "tqtree/service.hpp"

using namespace tq;

namespace {

const ServiceParams kBinary{fixtures::Figure1::psi, ServiceMode::Binary};

// Served flags computed point by point, independent of ServedPoints.
double reference_single(const UserTrajectory& u, const std::vector<FacilityTrajectory>& group, double psi,
                        ServiceMode mode) {
  std::vector<bool> s(u.points.size());
  for (std::size_t i = 0; i < u.points.size(); ++i)
    for (const auto& f : group)
      for (const auto& st : f.stops)
        if (std::hypot(u.points[i].x - st.x, u.points[i].y - st.y) <= psi) s[i] = true;
  const std::size_t n = u.points.size();
  if (mode == ServiceMode::Binary) return s[0] && s[n - 1] ? 1 : 0;
  if (mode == ServiceMode::PointCountFraction) return static_cast<double>(std::count(s.begin(), s.end(), true)) / n;
  double got = 0, total = 0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double d = std::hypot(u.points[i + 1].x - u.points[i].x, u.points[i + 1].y - u.points[i].y);
    total += d;
    if (s[i] && s[i + 1]) got += d;
  }
  return total > 0 ? got / total : 0;
}

}  // namespace

TEST(ServiceSingle, Figure1Users) {
  fixtures::Figure1 fx;
  const auto& f46 = fx.facility(46);
  EXPECT_EQ(service_single(fx.users[4], f46, kBinary), 1.0);  // u5
  EXPECT_EQ(service_single(fx.users[0], f46, kBinary), 0.0);  // u1
}

TEST(ServiceSingle, PointCountHalf) {
  const UserTrajectory u{1, {{0, 0}, {10, 0}, {20, 0}, {30, 0}}};
  const FacilityTrajectory f{1, {{0, 0}, {20, 0.5}}};
  EXPECT_DOUBLE_EQ(service_single(u, f, {1.0, ServiceMode::PointCountFraction}), 0.5);
}

TEST(ServiceSingle, LengthCountsSegmentsWithBothEndsServed) {
  const UserTrajectory u{1, {{0, 0}, {3, 0}, {3, 4}, {10, 4}}};
  const FacilityTrajectory f{1, {{0, 0}, {3, 0}, {3, 4}}};
  EXPECT_DOUBLE_EQ(service_single(u, f, {0.1, ServiceMode::LengthFraction}), 7.0 / 14.0);
}

TEST(ServiceSingle, ZeroLengthTrajectoryScoresZeroInLengthMode) {
  const UserTrajectory u{1, {{1, 1}, {1, 1}}};
  const FacilityTrajectory f{1, {{1, 1}}};
  EXPECT_EQ(service_single(u, f, {1, ServiceMode::LengthFraction}), 0.0);
  EXPECT_EQ(service_single(u, f, {1, ServiceMode::Binary}), 1.0);
}

TEST(ServiceSingle, OneStopMayServeBothEnds) {
  const UserTrajectory u{1, {{0, 0}, {0.5, 0}}};
  EXPECT_EQ(service_single(u, {1, {{0.25, 0}}}, {1, ServiceMode::Binary}), 1.0);
}

TEST(ServiceSingle, MatchesPointwiseReference) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> c(0, 50);
  for (int t = 0; t < 100; ++t) {
    UserTrajectory u{1, {}};
    for (std::size_t i = 0; i < 2 + rng() % 6; ++i) u.points.push_back({c(rng), c(rng)});
    FacilityTrajectory f{1, {}};
    for (int i = 0; i < 6; ++i) f.stops.push_back({c(rng), c(rng)});
    for (auto m : fixtures::kModes) {
      const double v = service_single(u, f, {8, m});
      EXPECT_NEAR(v, reference_single(u, {f}, 8, m), 1e-12);
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(ServiceSet, Figure1Values) {
  fixtures::Figure1 fx;
  EXPECT_EQ(service_set(fx.users, fx.facility(46), kBinary), 4.0);
  EXPECT_EQ(service_set(fx.users, fx.facility(25), kBinary), 3.0);
  EXPECT_EQ(service_set(fx.users, fx.facility(65), kBinary), 2.0);
  EXPECT_EQ(service_set({}, fx.facility(65), kBinary), 0.0);
}

TEST(ServiceGroup, Figure1Pairs) {
  fixtures::Figure1 fx;
  EXPECT_EQ(service_group(fx.users, fx.group({46, 65}), kBinary), 8.0);
  EXPECT_EQ(service_group(fx.users, fx.group({25, 46}), kBinary), 7.0);
  EXPECT_EQ(service_group(fx.users, fx.group({25, 65}), kBinary), 5.0);
  EXPECT_EQ(service_group(fx.users, fx.group({65}), kBinary), service_set(fx.users, fx.facility(65), kBinary));
}

TEST(ServiceGroup, EmptyGroupIsAnError) {
  fixtures::Figure1 fx;
  EXPECT_THROW(service_group(fx.users, {}, kBinary), Error);
}

TEST(ServiceGroup, Lemma1Witness) {
  fixtures::Lemma1 w;
  const ServiceParams p{w.psi, ServiceMode::Binary};
  const std::vector<FacilityTrajectory> A{w.a}, Ax{w.a, w.x}, B{w.a, w.b}, Bx{w.a, w.b, w.x};
  EXPECT_EQ(service_group(w.users, Ax, p), service_group(w.users, A, p));
  EXPECT_EQ(service_group(w.users, Bx, p), service_group(w.users, B, p) + 1);
}

TEST(ServiceGroup, MonotoneDedupedAndBounded) {
  std::mt19937_64 rng(33);
  for (int t = 0; t < 30; ++t) {
    auto in = fixtures::random_instance(100 + t, 120, 5, 6, 2, 5);
    for (auto m : fixtures::kModes) {
      const ServiceParams p{in.psi, m};
      std::vector<FacilityTrajectory> g;
      double prev = 0, sum = 0, best = 0;
      for (const auto& f : in.facilities) {
        g.push_back(f);
        const double v = service_group(in.users, g, p);
        const double s = service_set(in.users, f, p);
        sum += s;
        best = std::max(best, s);
        EXPECT_GE(v, prev - 1e-9);
        EXPECT_GE(v, best - 1e-9);
        // Only per-point credit is subadditive; joint service can complete trips.
        if (m == ServiceMode::PointCountFraction) {
          EXPECT_LE(v, sum + 1e-9);
        }
        EXPECT_LE(v, static_cast<double>(in.users.size()));
        auto twice = g;
        twice.push_back(f);
        EXPECT_EQ(service_group(in.users, twice, p), v);
        prev = v;
      }
      for (const auto& u : in.users)
        EXPECT_NEAR(service_group(std::vector<UserTrajectory>{u}, g, p), reference_single(u, g, in.psi, m), 1e-12);
    }
  }
}

TEST(ServiceLedger, MergeIsIdempotentAndCommutative) {
  ServiceLedger a, b;
  a.mark(0, 4, 1);
  a.mark(2, 3, 0);
  b.mark(0, 4, 3);
  b.mark(1, 2, 1);
  ServiceLedger ab = a, ba = b;
  ab.merge(b);
  ba.merge(a);
  EXPECT_EQ(ab, ba);
  ServiceLedger again = ab;
  again.merge(b);
  EXPECT_EQ(again, ab);
  EXPECT_EQ(ab.find(0)->count(), 2u);
}

TEST(ServedPoints, SetReportsFreshness) {
  ServedPoints s(130);
  EXPECT_TRUE(s.set(129));
  EXPECT_FALSE(s.set(129));
  EXPECT_TRUE(s.test(129));
  EXPECT_EQ(s.count(), 1u);
}

TEST(MakeUnion, OneFacility) {
  ComponentCounter ids;
  std::vector<FacilityComponent> c;
  for (int i = 0; i < 4; ++i) c.push_back({5, ids.next(), {{0, 0}}, {}});
  EXPECT_EQ(make_union(c).set_count(), 1u);
}

TEST(MakeUnion, TwoFacilities) {
  ComponentCounter ids;
  std::vector<FacilityComponent> c;
  for (FacilityId f : {1, 2, 1, 2}) c.push_back({f, ids.next(), {{0, 0}}, {}});
  auto u = make_union(c);
  EXPECT_EQ(u.set_count(), 2u);
  EXPECT_TRUE(u.same(0, 2));
  EXPECT_FALSE(u.same(0, 1));
}

TEST(MakeUnion, SetCountEqualsDistinctFacilities) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 50; ++t) {
    ComponentCounter ids;
    std::vector<FacilityComponent> c;
    std::set<FacilityId> distinct;
    for (std::size_t i = 0; i < 1 + rng() % 40; ++i) {
      const FacilityId f = rng() % 9;
      distinct.insert(f);
      c.push_back({f, ids.next(), {}, {}});
    }
    auto u = make_union(c);
    EXPECT_EQ(u.set_count(), distinct.size());
    for (std::size_t i = 0; i < c.size(); ++i)
      for (std::size_t j = 0; j < c.size(); ++j) EXPECT_EQ(u.same(i, j), c[i].facility == c[j].facility);
  }
}
