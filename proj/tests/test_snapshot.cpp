#include <gtest/gtest.h>

#include "support/fixtures.hpp"
#include "tqtree/kmaxrrst.hpp"
#include "tqtree/snapshot.hpp"

using namespace tq;

TEST(Snapshot, Figure1RoundTrip) {
  fixtures::Figure1 fx;
  const TQTree t = fx.tree();
  const std::string a = snapshot_string(t);
  const TQTree back = load_snapshot_string(a);
  EXPECT_EQ(snapshot_string(back), a);
  EXPECT_EQ(top_k_facilities(back, fx.facilities, 1, {fixtures::Figure1::psi, ServiceMode::Binary}).ranked[0].id, 46u);
}

TEST(Snapshot, RandomTreesRoundTripByteForByte) {
  for (int s = 0; s < 6; ++s)
    for (auto v : fixtures::kVariants)
      for (auto m : fixtures::kModes) {
        auto in = fixtures::random_instance(60 + s, 400, 6, 8, 2, fixtures::max_points_for(v, m, 5));
        TQTree t = TQTree::build({in.users.begin(), in.users.begin() + 300}, in.bounds, fixtures::options(3 + s, v, m, s != 2));
        for (std::size_t i = 300; i < in.users.size(); ++i) t.insert(in.users[i]);
        const std::string a = snapshot_string(t);
        const TQTree back = load_snapshot_string(a);
        EXPECT_EQ(snapshot_string(back), a);
        const ServiceParams p{in.psi, m};
        EXPECT_EQ(top_k_facilities(back, in.facilities, 3, p).ranked, top_k_facilities(t, in.facilities, 3, p).ranked);
        // The loaded tree still accepts inserts.
        TQTree grown = back;
        grown.insert({999999, in.users.front().points});
        EXPECT_TRUE(grown.check_invariants().empty());
      }
}

TEST(Snapshot, RejectsCorruption) {
  fixtures::Figure1 fx;
  std::string a = snapshot_string(fx.tree());
  EXPECT_THROW(load_snapshot_string("tqtree-snapshot 2\n"), Error);
  EXPECT_THROW(load_snapshot_string(a.substr(0, a.size() / 2)), Error);
  const auto pos = a.find(" 0.0 1.0 ");
  ASSERT_NE(pos, std::string::npos);
  std::string bad = a;
  bad.replace(pos, 9, " 0.1 1.0 ");
  EXPECT_THROW(load_snapshot_string(bad), Error);
}
