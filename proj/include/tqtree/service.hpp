// service.hpp
//
// Service-value semantics. Every code path that produces a score (linear
// scan, TQ-tree search, point-quadtree baseline, coverage solvers) goes through
// credit_from_served() and adds exact Score values, so the same served sets
// always yield identical scores.

#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <numeric>
#include <span>
#include <unordered_map>
#include <vector>

#include "tqtree/core.hpp"

namespace tq {

// Dense bitset over the point indices of one user trajectory.
class ServedPoints {
 public:
  ServedPoints() = default;
  // The first 64 points live inline; longer trajectories spill to the heap.
  explicit ServedPoints(std::size_t n) : n_(n), more_(n > 64 ? (n - 1) / 64 : 0, 0) {}

  std::size_t size() const { return n_; }

  bool test(std::size_t i) const { return (word(i >> 6) >> (i & 63)) & 1u; }

  // Returns true when the bit was newly set.
  bool set(std::size_t i) {
    std::uint64_t& w = word(i >> 6);
    const std::uint64_t bit = std::uint64_t{1} << (i & 63);
    const bool fresh = (w & bit) == 0;
    w |= bit;
    return fresh;
  }

  std::size_t count() const {
    std::size_t c = static_cast<std::size_t>(std::popcount(first_));
    for (std::uint64_t w : more_) c += static_cast<std::size_t>(std::popcount(w));
    return c;
  }

  bool any() const {
    return first_ != 0 || std::any_of(more_.begin(), more_.end(), [](std::uint64_t w) { return w != 0; });
  }

  void merge(const ServedPoints& o) {
    if (o.n_ != n_) throw Error("merging served sets of different trajectories");
    first_ |= o.first_;
    for (std::size_t i = 0; i < more_.size(); ++i) more_[i] |= o.more_[i];
  }

  friend bool operator==(const ServedPoints&, const ServedPoints&) = default;

 private:
  std::uint64_t& word(std::size_t w) { return w == 0 ? first_ : more_[w - 1]; }
  std::uint64_t word(std::size_t w) const { return w == 0 ? first_ : more_[w - 1]; }

  std::size_t n_ = 0;
  std::uint64_t first_ = 0;
  std::vector<std::uint64_t> more_;
};

// S(u, .) given which points of u are served.
//   Binary:             1 iff first and last point are served.
//   PointCountFraction: served points / |u|.
//   LengthFraction:     length of segments with both endpoints served / length(u).
inline Score credit_from_served(std::span<const Point> pts, const ServedPoints& served, ServiceMode mode) {
  const std::size_t n = pts.size();
  switch (mode) {
    case ServiceMode::Binary:
      return served.test(0) && served.test(n - 1) ? kFullScore : 0;
    case ServiceMode::PointCountFraction:
      return static_cast<Score>(served.count()) * point_weight(n);
    case ServiceMode::LengthFraction: {
      const coord_t total = trajectory_length(pts);
      Score got = 0;
      for (std::size_t i = 0; i + 1 < n; ++i)
        if (served.test(i) && served.test(i + 1)) got += segment_weight(pts, i, total);
      return std::min(got, kFullScore);
    }
  }
  return 0;
}

inline double score_from_served(std::span<const Point> pts, const ServedPoints& served, ServiceMode mode) {
  return to_double(credit_from_served(pts, served, mode));
}

// Per-user served point sets accumulated during one evaluation. Keys are
// indices into the user array the evaluation runs over.
class ServiceLedger {
 public:
  ServedPoints& at(std::uint32_t user, std::size_t npoints) {
    auto it = served_.find(user);
    if (it == served_.end()) it = served_.emplace(user, ServedPoints(npoints)).first;
    return it->second;
  }

  const ServedPoints* find(std::uint32_t user) const {
    auto it = served_.find(user);
    return it == served_.end() ? nullptr : &it->second;
  }

  // Returns true when the point was newly marked.
  bool mark(std::uint32_t user, std::size_t npoints, std::size_t point) {
    return at(user, npoints).set(point);
  }

  void put(std::uint32_t user, ServedPoints s) { served_.insert_or_assign(user, std::move(s)); }

  // Set union per user; idempotent and commutative.
  void merge(const ServiceLedger& o) {
    for (const auto& [u, s] : o.served_) {
      auto it = served_.find(u);
      if (it == served_.end()) served_.emplace(u, s);
      else it->second.merge(s);
    }
  }

  std::size_t size() const { return served_.size(); }
  bool empty() const { return served_.empty(); }

  std::vector<std::uint32_t> sorted_users() const {
    std::vector<std::uint32_t> out;
    out.reserve(served_.size());
    for (const auto& kv : served_) out.push_back(kv.first);
    std::sort(out.begin(), out.end());
    return out;
  }

  Score total(std::span<const UserTrajectory> users, ServiceMode mode) const {
    Score t = 0;
    for (const auto& [u, s] : served_) t += credit_from_served(users[u].points, s, mode);
    return t;
  }

  double score(std::span<const UserTrajectory> users, ServiceMode mode) const { return to_double(total(users, mode)); }

  std::size_t users_served(std::span<const UserTrajectory> users, ServiceMode mode) const {
    std::size_t c = 0;
    for (const auto& [u, s] : served_)
      if (credit_from_served(users[u].points, s, mode) > 0) ++c;
    return c;
  }

  friend bool operator==(const ServiceLedger& a, const ServiceLedger& b) {
    // Users whose set is empty carry no information.
    auto nonempty = [](const ServiceLedger& l) {
      std::size_t c = 0;
      for (const auto& kv : l.served_) c += kv.second.any() ? 1 : 0;
      return c;
    };
    if (nonempty(a) != nonempty(b)) return false;
    for (const auto& [u, s] : a.served_) {
      if (!s.any()) continue;
      const ServedPoints* t = b.find(u);
      if (!t || !(*t == s)) return false;
    }
    return true;
  }

 private:
  std::unordered_map<std::uint32_t, ServedPoints> served_;
};

inline ServedPoints served_points(const UserTrajectory& u, const FacilityTrajectory& f, coord_t psi) {
  ServedPoints s(u.points.size());
  for (std::size_t i = 0; i < u.points.size(); ++i)
    if (point_served(u.points[i], f.stops, psi)) s.set(i);
  return s;
}

inline Score service_credit(const UserTrajectory& u, const FacilityTrajectory& f, const ServiceParams& params) {
  return credit_from_served(u.points, served_points(u, f, params.psi), params.mode);
}

inline double service_single(const UserTrajectory& u, const FacilityTrajectory& f,
                             const ServiceParams& params) {
  return to_double(service_credit(u, f, params));
}

inline double service_set(std::span<const UserTrajectory> users, const FacilityTrajectory& f,
                          const ServiceParams& params) {
  Score total = 0;
  for (const UserTrajectory& u : users) total += service_credit(u, f, params);
  return to_double(total);
}

// Group service: per user, the union of served points over the group, scored
// once. In Binary mode the source and destination may be served by different
// members.
inline double service_group(std::span<const UserTrajectory> users,
                            std::span<const FacilityTrajectory> group, const ServiceParams& params) {
  if (group.empty()) throw Error("service_group: empty facility group");
  Score total = 0;
  for (const UserTrajectory& u : users) {
    ServedPoints s(u.points.size());
    for (const FacilityTrajectory& f : group) s.merge(served_points(u, f, params.psi));
    total += credit_from_served(u.points, s, params.mode);
  }
  return to_double(total);
}

// Union-find with path halving and union by size.
class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n = 0) : parent_(n), size_(n, 1) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }

  std::size_t find(std::size_t a) {
    while (parent_[a] != a) {
      parent_[a] = parent_[parent_[a]];
      a = parent_[a];
    }
    return a;
  }

  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    return true;
  }

  std::size_t size() const { return parent_.size(); }

  std::size_t set_count() {
    std::size_t c = 0;
    for (std::size_t i = 0; i < parent_.size(); ++i) c += find(i) == i ? 1 : 0;
    return c;
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> size_;
};

// Groups facility components so that credit is attributed per facility.
// Components are addressed by their position in the input list.
class UnionState {
 public:
  explicit UnionState(std::span<const FacilityComponent> comps) : sets_(comps.size()) {
    std::unordered_map<FacilityId, std::size_t> first;
    for (std::size_t i = 0; i < comps.size(); ++i) {
      auto [it, fresh] = first.emplace(comps[i].facility, i);
      if (!fresh) sets_.unite(it->second, i);
    }
  }

  std::size_t find(std::size_t i) { return sets_.find(i); }
  bool same(std::size_t a, std::size_t b) { return sets_.find(a) == sets_.find(b); }
  std::size_t set_count() { return sets_.set_count(); }

 private:
  DisjointSets sets_;
};

inline UnionState make_union(std::span<const FacilityComponent> comps) { return UnionState(comps); }

}  // namespace tq
