#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "support/fixtures.hpp"
#include "tqtree/baseline.hpp"
#include "tqtree/kmaxrrst.hpp"

using namespace tq;

namespace {

bool same_point(const IndexedPoint& a, const IndexedPoint& b) {
  return std::tie(a.owner, a.index) < std::tie(b.owner, b.index);
}

}  // namespace

TEST(PointIndex, EmptyIndex) {
  const PointIndex ix = PointIndex::build({}, {{0, 0}, {10, 10}}, 4);
  EXPECT_TRUE(ix.range_query({5, 5}, 3).empty());
}

TEST(PointIndex, BoundaryPointIncluded) {
  const std::vector<UserTrajectory> us{{1, {{0, 0}, {3, 4}}}};
  const PointIndex ix = PointIndex::build(us, {{0, 0}, {10, 10}}, 1);
  EXPECT_EQ(ix.range_query({0, 0}, 5).size(), 2u);
  EXPECT_EQ(ix.range_query({0, 0}, 4.999).size(), 1u);
  EXPECT_THROW(ix.range_query({0, 0}, 0), Error);
}

TEST(PointIndex, EveryPointIndexedOnce) {
  auto in = fixtures::random_instance(4, 800, 1, 1, 2, 6);
  const PointIndex ix = PointIndex::build(in.users, in.bounds, 8);
  std::size_t n = 0;
  for (const auto& u : in.users) n += u.points.size();
  EXPECT_EQ(ix.size(), n);
  std::vector<IndexedPoint> all(ix.items().begin(), ix.items().end());
  std::sort(all.begin(), all.end(), same_point);
  for (std::size_t i = 1; i < all.size(); ++i)
    EXPECT_FALSE(all[i - 1].owner == all[i].owner && all[i - 1].index == all[i].index);
}

TEST(PointIndex, RangeQueryMatchesLinearScan) {
  std::mt19937_64 rng(12);
  for (int s = 0; s < 10; ++s) {
    auto in = fixtures::random_instance(20 + s, 700, 1, 1, 2, 5);
    const PointIndex ix = PointIndex::build(in.users, in.bounds, 1 + s * 3);
    std::uniform_real_distribution<double> c(0, in.bounds.max.x);
    for (int q = 0; q < 30; ++q) {
      const Point center{c(rng), c(rng)};
      const double psi = 50 + c(rng) / 10;
      auto got = ix.range_query(center, psi);
      std::vector<IndexedPoint> want;
      for (std::uint32_t u = 0; u < in.users.size(); ++u)
        for (std::uint32_t i = 0; i < in.users[u].points.size(); ++i) {
          const Point p = in.users[u].points[i];
          if (std::hypot(p.x - center.x, p.y - center.y) <= psi) want.push_back({p, u, i});
        }
      std::sort(got.begin(), got.end(), same_point);
      std::sort(want.begin(), want.end(), same_point);
      EXPECT_EQ(got, want);
    }
  }
}

TEST(BaselineService, Figure1) {
  fixtures::Figure1 fx;
  const PointIndex ix = PointIndex::build(fx.users, fx.bounds, 2);
  const ServiceParams p{fixtures::Figure1::psi, ServiceMode::Binary};
  EXPECT_EQ(baseline_service(ix, fx.users, fx.facility(46), p), 4.0);
  EXPECT_EQ(baseline_service(ix, fx.users, FacilityTrajectory{1, {}}, p), 0.0);
  const auto top = baseline_topk(ix, fx.users, fx.facilities, 1, p);
  ASSERT_EQ(top.size(), 1u);
  EXPECT_EQ(top[0].id, 46u);
  EXPECT_EQ(baseline_topk(ix, fx.users, fx.facilities, 3, p).size(), 3u);
}

TEST(BaselineService, MatchesLinearScanAndTree) {
  for (int s = 0; s < 12; ++s)
    for (auto m : fixtures::kModes) {
      auto in = fixtures::random_instance(60 + s, 500, 10, 12, 2, 6);
      const PointIndex ix = PointIndex::build(in.users, in.bounds, 16);
      const ServiceParams p{in.psi, m};
      for (const auto& f : in.facilities) EXPECT_EQ(baseline_service(ix, in.users, f, p), service_set(in.users, f, p));
      const auto bl = baseline_topk(ix, in.users, in.facilities, 4, p, 2);
      EXPECT_EQ(bl, linear_topk(in.users, in.facilities, 4, p));
      const TQTree t = TQTree::build(in.users, in.bounds, fixtures::options(8, TreeVariant::Segmented, m));
      EXPECT_EQ(top_k_facilities(t, in.facilities, 4, p).ranked, bl);
    }
}
