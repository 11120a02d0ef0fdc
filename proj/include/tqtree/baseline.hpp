// baseline.hpp
//
// The comparison method: a point quadtree over every user point, queried with
// one circular range query per facility stop. Also the pure linear-scan
// oracle used by the tests.

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "tqtree/core.hpp"
#include "tqtree/kmaxrrst.hpp"
#include "tqtree/parallel.hpp"
#include "tqtree/service.hpp"

namespace tq {

struct IndexedPoint {
  Point p;
  std::uint32_t owner = 0;  // index into the user array
  std::uint32_t index = 0;  // point index within the trajectory

  friend bool operator==(const IndexedPoint&, const IndexedPoint&) = default;
};

class PointIndex {
 public:
  struct Node {
    Rect cell;
    std::int32_t child = -1;
    std::uint32_t begin = 0;  // leaf range in items()
    std::uint32_t end = 0;
    bool leaf() const { return child < 0; }
  };

  PointIndex() = default;

  static PointIndex build(std::span<const UserTrajectory> users, const Rect& bounds, std::size_t leaf_capacity,
                          int max_depth = 24) {
    if (leaf_capacity < 1) throw Error("leaf capacity must be at least 1");
    PointIndex ix;
    ix.bounds_ = bounds;
    std::vector<IndexedPoint> pts;
    for (std::uint32_t u = 0; u < users.size(); ++u)
      for (std::uint32_t i = 0; i < users[u].points.size(); ++i) {
        if (!bounds.contains(users[u].points[i])) throw Error("user point outside the index bounds");
        pts.push_back({users[u].points[i], u, i});
      }
    ix.items_.reserve(pts.size());
    ix.nodes_.push_back(Node{bounds});
    ix.grow(0, pts, 0, leaf_capacity, max_depth);
    return ix;
  }

  std::size_t size() const { return items_.size(); }
  std::span<const IndexedPoint> items() const { return items_; }
  std::span<const Node> nodes() const { return nodes_; }

  template <class Visit>
  void for_each_within(Point center, coord_t psi, Visit&& visit) const {
    if (nodes_.empty()) return;
    std::vector<std::uint32_t> stack{0};
    while (!stack.empty()) {
      const Node& n = nodes_[stack.back()];
      stack.pop_back();
      if (!rect_within(n.cell, center, psi)) continue;
      if (n.leaf()) {
        for (std::uint32_t i = n.begin; i < n.end; ++i)
          if (within(items_[i].p, center, psi)) visit(items_[i]);
      } else {
        for (int q = 3; q >= 0; --q) stack.push_back(static_cast<std::uint32_t>(n.child + q));
      }
    }
  }

  std::vector<IndexedPoint> range_query(Point center, coord_t psi) const {
    if (!(psi > 0)) throw Error("psi must be positive");
    std::vector<IndexedPoint> out;
    for_each_within(center, psi, [&](const IndexedPoint& p) { out.push_back(p); });
    return out;
  }

 private:
  void grow(std::uint32_t n, std::vector<IndexedPoint>& pts, int depth, std::size_t cap, int max_depth) {
    if (pts.size() <= cap || depth >= max_depth) {
      nodes_[n].begin = static_cast<std::uint32_t>(items_.size());
      items_.insert(items_.end(), pts.begin(), pts.end());
      nodes_[n].end = static_cast<std::uint32_t>(items_.size());
      return;
    }
    const Rect cell = nodes_[n].cell;
    const auto first = static_cast<std::uint32_t>(nodes_.size());
    nodes_[n].child = static_cast<std::int32_t>(first);
    for (int q = 0; q < 4; ++q) nodes_.push_back(Node{quadrant(cell, q)});
    std::array<std::vector<IndexedPoint>, 4> parts;
    for (const IndexedPoint& p : pts) parts[quadrant_of(cell, p.p)].push_back(p);
    pts.clear();
    pts.shrink_to_fit();
    for (int q = 0; q < 4; ++q) grow(first + q, parts[q], depth + 1, cap, max_depth);
  }

  Rect bounds_;
  std::vector<IndexedPoint> items_;
  std::vector<Node> nodes_;
};

inline ServiceLedger baseline_ledger(const PointIndex& ix, std::span<const UserTrajectory> users,
                                     const FacilityTrajectory& f, coord_t psi) {
  ServiceLedger l;
  for (const Point& s : f.stops)
    ix.for_each_within(s, psi, [&](const IndexedPoint& p) {
      l.mark(p.owner, users[p.owner].points.size(), p.index);
    });
  return l;
}

inline double baseline_service(const PointIndex& ix, std::span<const UserTrajectory> users,
                               const FacilityTrajectory& f, const ServiceParams& params) {
  params.validate();
  return baseline_ledger(ix, users, f, params.psi).score(users, params.mode);
}

inline std::vector<RankedFacility> baseline_topk(const PointIndex& ix, std::span<const UserTrajectory> users,
                                                 std::span<const FacilityTrajectory> F, std::size_t k,
                                                 const ServiceParams& params, unsigned threads = 1) {
  check_facilities(F, k);
  params.validate();
  std::vector<RankedFacility> all(F.size());
  parallel_for(F.size(), threads, [&](std::size_t i) {
    const ServiceLedger l = baseline_ledger(ix, users, F[i], params.psi);
    const Score v = l.total(users, params.mode);
    all[i] = {F[i].id, v, to_double(v), l.users_served(users, params.mode)};
  });
  return rank_top_k(std::move(all), k);
}

// Pure linear scans, no index.

inline ServiceLedger linear_ledger(std::span<const UserTrajectory> users, const FacilityTrajectory& f, coord_t psi) {
  ServiceLedger l;
  for (std::uint32_t u = 0; u < users.size(); ++u) {
    ServedPoints s = served_points(users[u], f, psi);
    if (s.any()) l.put(u, std::move(s));
  }
  return l;
}

inline std::vector<RankedFacility> linear_topk(std::span<const UserTrajectory> users,
                                               std::span<const FacilityTrajectory> F, std::size_t k,
                                               const ServiceParams& params) {
  check_facilities(F, k);
  params.validate();
  std::vector<RankedFacility> all;
  for (const FacilityTrajectory& f : F) {
    RankedFacility r{f.id, 0, 0, 0};
    for (const UserTrajectory& u : users) {
      const Score s = service_credit(u, f, params);
      r.value += s;
      r.users_served += s > 0 ? 1 : 0;
    }
    r.score = to_double(r.value);
    all.push_back(r);
  }
  return rank_top_k(std::move(all), k);
}

}  // namespace tq
