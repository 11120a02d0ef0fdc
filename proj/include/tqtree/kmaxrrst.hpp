// kmaxrrst.hpp
//
// Facility service evaluation over a TQTree and the best-first top-k
// facility search.
//
// A facility is evaluated from the deepest q-node whose cell contains its
// EMBR. Each <q-node, component> pair scores the node's own UL (after z-order
// pruning) and hands the children to the sub-components that can still serve
// them. Entries stored above the containing node can also collect partial
// credit in some modes (a segment or a multi-point trajectory with only some
// points near the facility); those ancestors are scanned as node-only pairs.

#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <functional>
#include <iterator>
#include <optional>
#include <queue>
#include <span>
#include <unordered_set>
#include <vector>

#include "tqtree/core.hpp"
#include "tqtree/parallel.hpp"
#include "tqtree/service.hpp"
#include "tqtree/tqtree.hpp"
#include "tqtree/zid.hpp"

namespace tq {

// Score: credit only what contributes to the facility's own service value.
// Coverage: record every served point a later group evaluation could use.
enum class CreditScope : std::uint8_t { Score, Coverage };

enum class ZFilter : std::uint8_t {
  StartAndEnd,  // start and end partitions both covered
  AnyPoint,     // some point of the entry in a covered partition
};

// Entries only matter when both of their indexed endpoints can be served in
// Binary mode over whole trajectories and in Length mode over pairs of points.
// Every other combination gives credit for single points.
inline ZFilter zfilter_for(TreeVariant v, ServiceMode m, CreditScope scope) {
  if (scope == CreditScope::Coverage) return ZFilter::AnyPoint;
  switch (m) {
    case ServiceMode::Binary:
      return v == TreeVariant::Segmented ? ZFilter::AnyPoint : ZFilter::StartAndEnd;
    case ServiceMode::PointCountFraction:
      return ZFilter::AnyPoint;
    case ServiceMode::LengthFraction:
      return v == TreeVariant::FullTrajectory ? ZFilter::AnyPoint : ZFilter::StartAndEnd;
  }
  return ZFilter::AnyPoint;
}

// Entries stored at ancestors of the containing node have points in at least
// two children of that ancestor. They need scanning whenever credit can come
// from a subset of their points.
inline bool scans_ancestors(TreeVariant v, ServiceMode m, CreditScope scope) {
  return zfilter_for(v, m, scope) == ZFilter::AnyPoint || v == TreeVariant::FullTrajectory;
}

struct EvalContext {
  const TQTree& tree;
  ServiceParams params;
  CreditScope scope = CreditScope::Score;
  ZFilter filter = ZFilter::AnyPoint;
  std::size_t entries_scanned = 0;

  EvalContext(const TQTree& t, const ServiceParams& p, CreditScope s = CreditScope::Score)
      : tree(t), params(p), scope(s), filter(zfilter_for(t.options().variant, p.mode, s)) {
    params.validate();
    if (p.mode != t.options().mode)
      throw Error(std::string("query mode ") + to_string(p.mode) + " does not match index mode " +
                  to_string(t.options().mode));
  }
};

// Per-facility accumulated credit.
struct FacilityLedger {
  ServiceLedger served;
  std::unordered_set<std::uint64_t> credited;  // segments already counted (Length mode)
};

// UL positions of the entries of `node` that may be served by `stops`.
inline std::vector<std::uint32_t> z_reduce(const TQTree& tree, const QNode& node,
                                           std::span<const Point> stops, coord_t psi, ZFilter filter) {
  std::vector<std::uint32_t> out;
  if (node.ul.empty() || stops.empty()) return out;
  if (!tree.options().zorder) {
    out.resize(node.ul.size());
    for (std::uint32_t i = 0; i < out.size(); ++i) out[i] = i;
    return out;
  }
  // Covered leaves arrive as ascending z-order ranges; the UL is sorted the
  // same way, so a start range maps to one contiguous run of entries.
  using Ranges = std::vector<std::pair<std::uint32_t, std::uint32_t>>;
  auto covered_ranges = [&](const ZPartition& part, auto&& wanted) {
    Ranges r;
    part.for_each_covered_range(
        stops, psi,
        [&](std::uint32_t lo, std::uint32_t hi) {
          if (!r.empty() && r.back().second == lo)
            r.back().second = hi;
          else
            r.emplace_back(lo, hi);
        },
        wanted);
    return r;
  };
  auto all = [](std::uint32_t, std::uint32_t) { return true; };
  const Ranges starts = covered_ranges(node.start_part, all);

  if (filter == ZFilter::StartAndEnd) {
    if (starts.empty()) return out;
    // End subtrees holding no candidate's end leaf are skipped.
    const std::size_t words = (node.end_part.leaf_total() + 63) / 64;
    thread_local std::vector<std::uint64_t> want;
    want.assign(words, 0);
    for (const auto& [lo, hi] : starts)
      for (std::uint32_t i = node.start_offsets[lo]; i < node.start_offsets[hi]; ++i)
        want[node.end_pos[i] / 64] |= std::uint64_t{1} << (node.end_pos[i] % 64);
    auto wanted = [&](std::uint32_t lo, std::uint32_t hi) {
      std::uint32_t wl = lo / 64;
      const std::uint32_t wh = (hi - 1) / 64;
      const std::uint64_t head = ~std::uint64_t{0} << (lo % 64);
      const std::uint64_t tail = ~std::uint64_t{0} >> (63 - (hi - 1) % 64);
      if (wl == wh) return (want[wl] & head & tail) != 0;
      if (want[wl] & head) return true;
      for (++wl; wl < wh; ++wl)
        if (want[wl]) return true;
      return (want[wh] & tail) != 0;
    };
    const Ranges ends = covered_ranges(node.end_part, wanted);
    if (ends.empty()) return out;
    thread_local std::vector<std::uint64_t> hit;
    hit.assign(words, 0);
    for (auto [lo, hi] : ends) {
      for (; lo < hi && lo % 64 != 0; ++lo) hit[lo / 64] |= std::uint64_t{1} << (lo % 64);
      for (; lo + 64 <= hi; lo += 64) hit[lo / 64] = ~std::uint64_t{0};
      for (; lo < hi; ++lo) hit[lo / 64] |= std::uint64_t{1} << (lo % 64);
    }
    for (const auto& [lo, hi] : starts)
      for (std::uint32_t i = node.start_offsets[lo]; i < node.start_offsets[hi]; ++i) {
        const std::uint32_t p = node.end_pos[i];
        if (hit[p / 64] >> (p % 64) & 1) out.push_back(i);
      }
    return out;
  }

  for (const auto& [lo, hi] : starts)
    for (std::uint32_t i = node.start_offsets[lo]; i < node.start_offsets[hi]; ++i) out.push_back(i);
  std::vector<std::uint32_t> more;
  for (const auto& [lo, hi] : covered_ranges(node.end_part, all))
    more.insert(more.end(), node.end_members.begin() + node.end_offsets[lo],
                node.end_members.begin() + node.end_offsets[hi]);
  if (more.empty()) return out;
  std::sort(more.begin(), more.end());
  std::vector<std::uint32_t> merged;
  merged.reserve(out.size() + more.size());
  std::set_union(out.begin(), out.end(), more.begin(), more.end(), std::back_inserter(merged));
  merged.erase(std::unique(merged.begin(), merged.end()), merged.end());
  return merged;
}

// Filter over explicit z-ids: keep entries whose start and end z-ids are both
// covered. An id counts as covered when it, or one of its prefixes, is listed.
inline std::vector<ULEntry> z_reduce(std::span<const ULEntry> ul, std::span<const ZId> covered) {
  auto hit = [&](const ZId& z) {
    return std::any_of(covered.begin(), covered.end(), [&](const ZId& c) { return c.is_prefix_of(z); });
  };
  std::vector<ULEntry> out;
  for (const ULEntry& e : ul)
    if (hit(e.zstart)) out.push_back(e);
  std::erase_if(out, [&](const ULEntry& e) { return !hit(e.zend); });
  return out;
}

// Credit of one entry under the given stops (sorted with x_less); updates the
// ledger and returns the increase in the facility's service value.
inline Score credit_entry(EvalContext& cx, const ULEntry& e, std::span<const Point> stops,
                           FacilityLedger& fl) {
  const TQTree& t = cx.tree;
  const UserTrajectory& u = t.users()[e.traj];
  const std::size_t n = u.points.size();
  const coord_t psi = cx.params.psi;
  const ServiceMode mode = cx.params.mode;
  ++cx.entries_scanned;

  if (t.options().variant != TreeVariant::Segmented) {
    if (fl.served.find(e.traj)) return 0;
    ServedPoints s(n);
    if (t.options().variant == TreeVariant::TwoPoint) {
      const bool a = point_served_sorted(e.first, stops, psi);
      if (!a && mode == ServiceMode::Binary && cx.scope == CreditScope::Score) return 0;
      if (a) s.set(0);
      if (point_served_sorted(e.last, stops, psi)) s.set(n - 1);
    } else {
      for (std::size_t i = 0; i < n; ++i)
        if (point_served_sorted(u.points[i], stops, psi)) s.set(i);
    }
    const Score score = credit_from_served(u.points, s, mode);
    const bool keep = cx.scope == CreditScope::Score ? score > 0 : s.any();
    if (!keep) return 0;
    fl.served.put(e.traj, std::move(s));
    return score;
  }

  const bool a = point_served_sorted(u.points[e.seg], stops, psi);
  const bool b = point_served_sorted(u.points[e.seg + 1], stops, psi);
  if (!a && !b) return 0;
  ServedPoints& s = fl.served.at(e.traj, n);
  switch (mode) {
    case ServiceMode::Binary: {
      const bool before = s.test(0) && s.test(n - 1);
      if (a) s.set(e.seg);
      if (b) s.set(e.seg + 1);
      return !before && s.test(0) && s.test(n - 1) ? kFullScore : 0;
    }
    case ServiceMode::PointCountFraction: {
      int fresh = 0;
      if (a && s.set(e.seg)) ++fresh;
      if (b && s.set(e.seg + 1)) ++fresh;
      return static_cast<Score>(fresh) * point_weight(n);
    }
    case ServiceMode::LengthFraction: {
      if (a) s.set(e.seg);
      if (b) s.set(e.seg + 1);
      if (!(a && b)) return 0;
      const std::uint64_t key = (std::uint64_t{e.traj} << 32) | e.seg;
      return fl.credited.insert(key).second ? e.bound : 0;
    }
  }
  return 0;
}

inline Score evaluate_node_trajectories(EvalContext& cx, std::uint32_t node, const FacilityComponent& f,
                                         FacilityLedger& fl) {
  const QNode& q = cx.tree.node(node);
  if (f.empty() || q.ul.empty()) return 0;
  if (cx.scope == CreditScope::Score && q.own_bound == 0) return 0;
  std::vector<Point> sorted;
  std::span<const Point> stops = f.stops;
  if (!std::is_sorted(stops.begin(), stops.end(), x_less)) {
    sorted.assign(stops.begin(), stops.end());
    std::sort(sorted.begin(), sorted.end(), x_less);
    stops = sorted;
  }
  Score total = 0;
  for (std::uint32_t i : z_reduce(cx.tree, q, stops, cx.params.psi, cx.filter)) {
    const ULEntry& e = q.ul[i];
    if (cx.scope == CreditScope::Score && e.bound == 0) continue;
    total += credit_entry(cx, e, stops, fl);
  }
  return total;
}

inline std::array<Rect, 4> child_cells(const TQTree& t, const QNode& q) {
  return {t.node(q.child).cell, t.node(q.child + 1).cell, t.node(q.child + 2).cell, t.node(q.child + 3).cell};
}

// Exact credit of the subtree rooted at `node` for component f.
inline Score evaluate_service(EvalContext& cx, std::uint32_t node, const FacilityComponent& f,
                               FacilityLedger& fl, ComponentCounter& ids) {
  if (f.empty()) return 0;
  const QNode& q = cx.tree.node(node);
  if (q.leaf()) return evaluate_node_trajectories(cx, node, f, fl);
  Score total = 0;
  const auto parts = intersecting_components(child_cells(cx.tree, q), f, cx.params.psi, ids);
  for (int c = 0; c < 4; ++c)
    if (parts[c]) total += evaluate_service(cx, static_cast<std::uint32_t>(q.child + c), *parts[c], fl, ids);
  total += evaluate_node_trajectories(cx, node, f, fl);
  return total;
}

// Deepest q-node containing the facility's EMBR (clipped to the index
// bounds), or nullopt when the EMBR misses the bounds entirely.
inline std::optional<std::uint32_t> containing_qnode(const TQTree& t, const FacilityTrajectory& f, coord_t psi) {
  const Rect e = embr(f, psi);
  if (!e.intersects(t.bounds())) return std::nullopt;
  const Rect r = e.intersection(t.bounds());
  std::uint32_t n = 0;
  while (!t.node(n).leaf()) {
    const QNode& q = t.node(n);
    const int a = quadrant_of(q.cell, r.min);
    if (quadrant_of(q.cell, r.max) != a) break;
    n = static_cast<std::uint32_t>(q.child + a);
  }
  return n;
}

struct QFPair {
  std::uint32_t node = 0;
  FacilityComponent comp;
  bool descend = true;  // false: only this node's UL, not its subtree
};

struct ExplorationState {
  FacilityId id = 0;
  std::uint32_t index = 0;  // position in the facility list
  std::vector<QFPair> qflist;
  Score aserve = 0;
  Score hserve = 0;
  FacilityLedger ledger;

  Score fserve() const { return aserve + hserve; }
};

inline Score pair_bound(const TQTree& t, const QFPair& p) {
  return p.descend ? t.node(p.node).s_ub : t.node(p.node).own_bound;
}

inline ExplorationState initial_state(const EvalContext& cx, const FacilityTrajectory& f, std::uint32_t index,
                                      ComponentCounter& ids) {
  validate(f);
  ExplorationState s;
  s.id = f.id;
  s.index = index;
  const auto c = containing_qnode(cx.tree, f, cx.params.psi);
  if (!c) return s;
  const TreeOptions& o = cx.tree.options();
  if (scans_ancestors(o.variant, cx.params.mode, cx.scope)) {
    const auto path = cx.tree.path_to(*c);
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
      if (cx.tree.node(path[i]).ul.empty()) continue;
      s.qflist.push_back({path[i], whole_component(f, cx.tree.node(path[i]).cell, ids), false});
    }
  }
  s.qflist.push_back({*c, whole_component(f, cx.tree.node(*c).cell, ids), true});
  for (const QFPair& p : s.qflist) s.hserve += pair_bound(cx.tree, p);
  return s;
}

// One relaxation: every pair's own UL moves into aserve and the pair is
// replaced by its children that the component can still serve.
inline void relax_state(EvalContext& cx, ExplorationState& s, ComponentCounter& ids) {
  std::vector<QFPair> next;
  for (QFPair& p : s.qflist) {
    s.aserve += evaluate_node_trajectories(cx, p.node, p.comp, s.ledger);
    const QNode& q = cx.tree.node(p.node);
    if (!p.descend || q.leaf()) continue;
    auto parts = intersecting_components(child_cells(cx.tree, q), p.comp, cx.params.psi, ids);
    for (int c = 0; c < 4; ++c) {
      if (!parts[c]) continue;
      const auto child = static_cast<std::uint32_t>(q.child + c);
      if (cx.scope == CreditScope::Score && cx.tree.node(child).s_ub == 0) continue;
      next.push_back({child, std::move(*parts[c]), true});
    }
  }
  s.qflist = std::move(next);
  Score h = 0;
  for (const QFPair& p : s.qflist) h += pair_bound(cx.tree, p);
  s.hserve = h;
}

// Full evaluation of one facility: its ledger of served points.
inline FacilityLedger facility_ledger(EvalContext& cx, const FacilityTrajectory& f) {
  ComponentCounter ids;
  ExplorationState s = initial_state(cx, f, 0, ids);
  for (QFPair& p : s.qflist) {
    if (p.descend) evaluate_service(cx, p.node, p.comp, s.ledger, ids);
    else evaluate_node_trajectories(cx, p.node, p.comp, s.ledger);
  }
  return std::move(s.ledger);
}

inline double facility_service(const TQTree& t, const FacilityTrajectory& f, const ServiceParams& params) {
  EvalContext cx(t, params);
  return facility_ledger(cx, f).served.score(t.users(), params.mode);
}

struct RankedFacility {
  FacilityId id = 0;
  Score value = 0;
  double score = 0;
  std::size_t users_served = 0;

  friend bool operator==(const RankedFacility&, const RankedFacility&) = default;
};

// Score descending, id ascending.
inline bool ranks_before(const RankedFacility& a, const RankedFacility& b) {
  if (a.value != b.value) return a.value > b.value;
  return a.id < b.id;
}

inline std::vector<RankedFacility> rank_top_k(std::vector<RankedFacility> all, std::size_t k) {
  std::sort(all.begin(), all.end(), ranks_before);
  if (all.size() > k) all.resize(k);
  return all;
}

struct SearchEvent {
  enum class Kind { Relax, Finalize } kind = Kind::Relax;
  FacilityId id = 0;
  Score before = 0;  // fserve before the step
  Score after = 0;   // fserve after a relaxation, exact score on finalize
};

struct SearchStats {
  std::size_t relaxations = 0;
  std::size_t finalized = 0;
  std::size_t entries_scanned = 0;
};

struct TopKResult {
  std::vector<RankedFacility> ranked;
  SearchStats stats;
};

struct TopKOptions {
  bool eager = false;    // evaluate every facility completely, then sort
  unsigned threads = 1;  // used by eager evaluation only
  std::function<void(const SearchEvent&)> observer;
};

inline void check_facilities(std::span<const FacilityTrajectory> F, std::size_t k) {
  if (k < 1) throw Error("k must be at least 1");
  if (F.empty()) throw Error("facility set is empty");
  std::unordered_set<FacilityId> seen;
  for (const FacilityTrajectory& f : F) {
    validate(f);
    if (!seen.insert(f.id).second) throw Error("duplicate facility id " + std::to_string(f.id));
  }
}

inline TopKResult top_k_facilities(const TQTree& t, std::span<const FacilityTrajectory> F, std::size_t k,
                                   const ServiceParams& params, const TopKOptions& opt = {}) {
  check_facilities(F, k);
  TopKResult res;
  const auto users = t.users();

  if (opt.eager) {
    std::vector<RankedFacility> all(F.size());
    std::vector<std::size_t> scanned(F.size(), 0);
    parallel_for(F.size(), opt.threads, [&](std::size_t i) {
      EvalContext cx(t, params);
      const FacilityLedger fl = facility_ledger(cx, F[i]);
      const Score v = fl.served.total(users, params.mode);
      all[i] = {F[i].id, v, to_double(v), fl.served.users_served(users, params.mode)};
      scanned[i] = cx.entries_scanned;
    });
    for (std::size_t s : scanned) res.stats.entries_scanned += s;
    res.stats.finalized = F.size();
    res.ranked = rank_top_k(std::move(all), k);
    return res;
  }

  EvalContext cx(t, params);
  ComponentCounter ids;
  std::vector<ExplorationState> states;
  states.reserve(F.size());
  for (std::uint32_t i = 0; i < F.size(); ++i) states.push_back(initial_state(cx, F[i], i, ids));

  struct Item {
    Score key;
    FacilityId id;
    std::uint32_t state;
  };
  auto lower = [](const Item& a, const Item& b) {
    if (a.key != b.key) return a.key < b.key;
    return a.id > b.id;
  };
  std::priority_queue<Item, std::vector<Item>, decltype(lower)> pq(lower);
  for (std::uint32_t i = 0; i < states.size(); ++i) pq.push({states[i].fserve(), states[i].id, i});

  std::vector<RankedFacility> done;
  auto kth_score = [&] {
    std::vector<RankedFacility> top = rank_top_k(done, k);
    return top.back().value;
  };

  while (!pq.empty()) {
    if (done.size() >= k && pq.top().key < kth_score()) break;
    const Item it = pq.top();
    pq.pop();
    ExplorationState& s = states[it.state];
    if (s.qflist.empty()) {
      const Score score = s.ledger.served.total(users, params.mode);
      done.push_back({s.id, score, to_double(score), s.ledger.served.users_served(users, params.mode)});
      ++res.stats.finalized;
      if (opt.observer) opt.observer({SearchEvent::Kind::Finalize, s.id, s.fserve(), score});
      s.ledger = FacilityLedger{};
      continue;
    }
    const Score before = s.fserve();
    relax_state(cx, s, ids);
    ++res.stats.relaxations;
    if (opt.observer) opt.observer({SearchEvent::Kind::Relax, s.id, before, s.fserve()});
    pq.push({s.fserve(), s.id, it.state});
  }
  res.stats.entries_scanned = cx.entries_scanned;
  res.ranked = rank_top_k(std::move(done), k);
  return res;
}

}  // namespace tq
