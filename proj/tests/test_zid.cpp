#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "tqtree/zid.hpp"

using namespace tq;

TEST(ZId, RendersAndParses) {
  EXPECT_EQ(ZId{}.str(), "*");
  const ZId z = ZId{}.child(0).child(3);
  EXPECT_EQ(z.str(), "0.3");
  EXPECT_EQ(ZId::parse("0.3"), z);
  EXPECT_EQ(ZId::parse("*"), ZId{});
  EXPECT_THROW(ZId::parse("0.4"), Error);
  EXPECT_THROW(ZId::parse("0."), Error);
  EXPECT_THROW(ZId::parse("01"), Error);
}

TEST(ZId, PrefixOrdersFirst) {
  const std::vector<std::string> sorted{"*", "0", "0.0", "0.0.3", "0.1", "0.3", "1", "1.2", "2", "3", "3.3.3"};
  std::vector<ZId> ids;
  for (const auto& s : sorted) ids.push_back(ZId::parse(s));
  std::vector<ZId> shuffled = ids;
  std::mt19937 rng(1);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  std::sort(shuffled.begin(), shuffled.end());
  EXPECT_EQ(shuffled, ids);
}

TEST(ZId, OrderMatchesDigitStrings) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 500; ++t) {
    auto make = [&] {
      std::string s;
      const int d = 1 + static_cast<int>(rng() % 6);
      for (int i = 0; i < d; ++i) s.push_back(static_cast<char>('0' + rng() % 4));
      return s;
    };
    const std::string a = make(), b = make();
    auto dotted = [](const std::string& s) {
      std::string o;
      for (char c : s) {
        if (!o.empty()) o.push_back('.');
        o.push_back(c);
      }
      return o;
    };
    EXPECT_EQ(ZId::parse(dotted(a)) < ZId::parse(dotted(b)), a < b) << a << " " << b;
    EXPECT_EQ(ZId::parse(dotted(a)).is_prefix_of(ZId::parse(dotted(b))), b.rfind(a, 0) == 0);
  }
}

TEST(ZId, SequencesCompareLexicographically) {
  const std::vector<ZId> a{ZId::parse("1"), ZId::parse("2")}, b{ZId::parse("1"), ZId::parse("2.0")},
      c{ZId::parse("1")};
  EXPECT_TRUE(compare_zids(a, b) < 0);
  EXPECT_TRUE(compare_zids(c, a) < 0);
  EXPECT_TRUE(compare_zids(a, a) == 0);
}

TEST(ZPartition, SplitsUntilCapacity) {
  ZPartition p;
  const Rect cell{{0, 0}, {8, 8}};
  const std::vector<Point> pts{{0.5, 0.5}, {1.5, 1.5}, {3, 3}, {2, 5}};
  p.build(cell, pts, {}, 2, 16);
  std::vector<std::string> ids;
  for (const Point& q : pts) ids.push_back(p.node(p.locate(q)).id.str());
  EXPECT_EQ(ids, (std::vector<std::string>{"0.0", "0.0", "0.3", "2"}));
}

TEST(ZPartition, GroupKeysForceDistinctLeaves) {
  ZPartition p;
  const Rect cell{{0, 0}, {8, 8}};
  const std::vector<Point> pts{{4.5, 0.5}, {4.5, 3}, {1, 6}, {7, 3}};
  const std::vector<std::uint64_t> groups{0, 0, 1, 2};
  p.build(cell, pts, groups, 2, 16);
  std::vector<std::string> ids;
  for (const Point& q : pts) ids.push_back(p.node(p.locate(q)).id.str());
  EXPECT_EQ(ids, (std::vector<std::string>{"1.0", "1.2", "2", "1.3"}));
}

TEST(ZPartition, CoincidentPointsStopAtMaxDepth) {
  ZPartition p;
  const std::vector<Point> pts(5, Point{1, 1});
  p.build({{0, 0}, {8, 8}}, pts, {}, 2, 6);
  EXPECT_EQ(p.node(p.locate({1, 1})).id.depth(), 6);
}

TEST(ZPartition, RebuildFromIdsReproducesLeaves) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> c(0, 100);
  for (int t = 0; t < 20; ++t) {
    std::vector<Point> pts(1 + rng() % 60);
    for (auto& q : pts) q = {c(rng), c(rng)};
    ZPartition a;
    a.build({{0, 0}, {100, 100}}, pts, {}, 3, 20);
    std::vector<ZId> ids;
    for (const auto& q : pts) ids.push_back(a.node(a.locate(q)).id);
    ZPartition b;
    b.rebuild_from_ids({{0, 0}, {100, 100}}, ids);
    EXPECT_EQ(a.size(), b.size());
    for (const auto& q : pts) EXPECT_EQ(a.node(a.locate(q)).id, b.node(b.locate(q)).id);
  }
}

TEST(ZPartition, CoveredLeavesAreThoseWithinPsi) {
  ZPartition p;
  const Rect cell{{0, 0}, {8, 8}};
  const std::vector<Point> pts{{0.5, 0.5}, {1.5, 1.5}, {3, 3}, {2, 5}};
  p.build(cell, pts, {}, 2, 16);
  const std::vector<Point> stops{{2, 1}, {6, 3}, {2, 6}, {6, 6}};
  std::vector<std::string> got;
  p.for_each_covered_leaf(stops, 0.9, [&](std::uint32_t n) { got.push_back(p.node(n).id.str()); });
  std::sort(got.begin(), got.end());
  EXPECT_EQ(got, (std::vector<std::string>{"0.0", "0.1", "1", "2", "3"}));
}
