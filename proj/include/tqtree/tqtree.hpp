// tqtree.hpp
//
// The trajectory quadtree. A regular quadtree over the world bounds whose
// nodes (q-nodes) each keep a list UL of trajectory entries:
//
//   * internal q-node: entries whose points fall in at least two different
//     immediate children (inter-node entries);
//   * leaf q-node: entries lying entirely inside its cell (intra-node).
//
// With z-ordering enabled each UL is sorted by the z-ids of its entries'
// start and end points. The z-ids come from two partition trees over the
// q-node's cell: one refined on start points (at most beta per partition), one
// refined on end points (at most beta per partition, and entries that share a
// start z-id always get distinct end z-ids). The sorted UL is stored as
// consecutive buckets (z-nodes) of at most beta entries.
//
// Every q-node also stores s_ub, an upper bound on the service any facility
// can collect from entries in its subtree.

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "tqtree/core.hpp"
#include "tqtree/zid.hpp"

namespace tq {

enum class TreeVariant : std::uint8_t { TwoPoint, Segmented, FullTrajectory };

inline const char* to_string(TreeVariant v) {
  switch (v) {
    case TreeVariant::TwoPoint: return "two-point";
    case TreeVariant::Segmented: return "segmented";
    case TreeVariant::FullTrajectory: return "full";
  }
  return "?";
}

inline TreeVariant parse_tree_variant(const std::string& s) {
  if (s == "two-point" || s == "twopoint") return TreeVariant::TwoPoint;
  if (s == "segmented") return TreeVariant::Segmented;
  if (s == "full" || s == "full-trajectory") return TreeVariant::FullTrajectory;
  throw Error("unknown tree variant '" + s + "'");
}

struct TreeOptions {
  std::size_t beta = 64;
  TreeVariant variant = TreeVariant::TwoPoint;
  ServiceMode mode = ServiceMode::Binary;
  bool zorder = true;   // false gives the flat-list TQ(B) index
  int max_depth = 24;   // capacity rules are waived at this depth
  int max_zdepth = 24;

  friend bool operator==(const TreeOptions&, const TreeOptions&) = default;
};

struct ULEntry {
  std::uint32_t traj = 0;  // index into TQTree::users()
  std::uint32_t seg = 0;   // segment index for the segmented variant
  Point first;
  Point last;
  ZId zstart;
  ZId zend;
  std::uint32_t start_leaf = 0;  // node index in QNode::start_part
  std::uint32_t end_leaf = 0;    // node index in QNode::end_part
  std::uint32_t rest_begin = 0;  // interior-point z-ids in QNode::rest
  std::uint32_t rest_count = 0;
  Score bound = 0;              // this entry's share of s_ub
};

struct QNode {
  Rect cell;
  int depth = 0;
  std::int32_t parent = -1;
  std::int32_t child = -1;  // first of four consecutive children, -1 for a leaf

  std::vector<ULEntry> ul;
  std::vector<ZId> rest;
  ZPartition start_part;
  ZPartition end_part;
  std::vector<std::uint32_t> start_offsets;  // ul range per start leaf, by z-order position
  std::vector<std::uint32_t> end_pos;        // per ul entry: z-order position of its end leaf
  std::vector<std::uint32_t> end_offsets;    // CSR from end leaf z-order position to ul positions
  std::vector<std::uint32_t> end_members;

  Score own_bound = 0;
  Score s_ub = 0;

  bool leaf() const { return child < 0; }
};

struct TreeStats {
  std::size_t nodes = 0;
  std::size_t leaves = 0;
  int height = 0;
  std::size_t entries = 0;
  std::size_t znodes = 0;
  std::size_t max_ul = 0;
  std::size_t partitions = 0;
};

inline Rect world_bounds(std::span<const UserTrajectory> users, coord_t pad) {
  if (users.empty()) throw Error("cannot derive bounds from an empty user set");
  Rect r = mbr(users.front().points);
  for (const UserTrajectory& u : users) {
    const Rect b = mbr(u.points);
    r.min.x = std::min(r.min.x, b.min.x);
    r.min.y = std::min(r.min.y, b.min.y);
    r.max.x = std::max(r.max.x, b.max.x);
    r.max.y = std::max(r.max.y, b.max.y);
  }
  return r.expanded(pad);
}

class TQTree {
 public:
  TQTree() = default;

  static TQTree build(std::vector<UserTrajectory> users, const Rect& bounds, const TreeOptions& opt) {
    TQTree t;
    t.init(bounds, opt);
    for (const UserTrajectory& u : users) t.admit(u);
    t.users_ = std::move(users);
    std::vector<ULEntry> entries;
    for (std::uint32_t i = 0; i < t.users_.size(); ++i) t.make_entries(i, entries);
    t.build_node(0, std::move(entries));
    t.compute_bounds(0);
    return t;
  }

  static TQTree empty(const Rect& bounds, const TreeOptions& opt) {
    return build({}, bounds, opt);
  }

  void insert(UserTrajectory u) {
    admit(u);
    const auto idx = static_cast<std::uint32_t>(users_.size());
    users_.push_back(std::move(u));
    std::vector<ULEntry> entries;
    make_entries(idx, entries);
    for (ULEntry& e : entries) insert_entry(e);
  }

  const TreeOptions& options() const { return opt_; }
  const Rect& bounds() const { return bounds_; }
  std::span<const UserTrajectory> users() const { return users_; }
  std::span<const QNode> nodes() const { return nodes_; }
  const QNode& node(std::size_t i) const { return nodes_[i]; }
  const QNode& root() const { return nodes_.front(); }

  Score subtree_bound(std::size_t n) const { return nodes_[n].s_ub; }

  // Quadrant of `cell` holding every point of the entry, or -1 when the
  // points straddle children.
  int common_quadrant(const Rect& cell, const ULEntry& e) const {
    const int q = quadrant_of(cell, e.first);
    if (quadrant_of(cell, e.last) != q) return -1;
    if (opt_.variant == TreeVariant::FullTrajectory) {
      for (const Point& p : users_[e.traj].points)
        if (quadrant_of(cell, p) != q) return -1;
    }
    return q;
  }

  // Point indices (into the user's point list) covered by an entry.
  std::pair<std::size_t, std::size_t> entry_span(const ULEntry& e) const {
    const std::size_t n = users_[e.traj].points.size();
    switch (opt_.variant) {
      case TreeVariant::TwoPoint: return {0, n - 1};
      case TreeVariant::Segmented: return {e.seg, e.seg + 1};
      case TreeVariant::FullTrajectory: return {0, n - 1};
    }
    return {0, 0};
  }

  std::span<const ZId> rest_zids(const QNode& q, const ULEntry& e) const {
    return std::span<const ZId>(q.rest).subspan(e.rest_begin, e.rest_count);
  }

  // Orders entries by (start z-id, end z-id, interior z-ids, trajectory, segment).
  bool entry_less(const QNode& q, const ULEntry& a, const ULEntry& b) const {
    if (opt_.zorder) {
      if (auto c = a.zstart <=> b.zstart; c != 0) return c < 0;
      if (auto c = a.zend <=> b.zend; c != 0) return c < 0;
      if (auto c = compare_zids(rest_zids(q, a), rest_zids(q, b)); c != 0) return c < 0;
    }
    if (a.traj != b.traj) return a.traj < b.traj;
    return a.seg < b.seg;
  }

  std::size_t znode_count(const QNode& q) const { return (q.ul.size() + opt_.beta - 1) / opt_.beta; }

  TreeStats stats() const {
    TreeStats s;
    s.nodes = nodes_.size();
    for (const QNode& q : nodes_) {
      s.leaves += q.leaf() ? 1 : 0;
      s.height = std::max(s.height, q.depth);
      s.entries += q.ul.size();
      s.znodes += znode_count(q);
      s.max_ul = std::max(s.max_ul, q.ul.size());
      s.partitions += q.start_part.size() + q.end_part.size();
    }
    return s;
  }

  std::size_t expected_entries() const {
    std::size_t n = 0;
    for (const UserTrajectory& u : users_)
      n += opt_.variant == TreeVariant::Segmented ? u.points.size() - 1 : 1;
    return n;
  }

  // Root-to-node path, root first.
  std::vector<std::uint32_t> path_to(std::uint32_t n) const {
    std::vector<std::uint32_t> p;
    for (std::int32_t c = static_cast<std::int32_t>(n); c >= 0; c = nodes_[c].parent)
      p.push_back(static_cast<std::uint32_t>(c));
    std::reverse(p.begin(), p.end());
    return p;
  }

  Score entry_bound(std::uint32_t traj, std::uint32_t seg) const {
    const UserTrajectory& u = users_[traj];
    const std::size_t n = u.points.size();
    switch (opt_.mode) {
      case ServiceMode::Binary:
        if (opt_.variant != TreeVariant::Segmented) return kFullScore;
        return seg == 0 || seg + 2 == n ? kFullScore : 0;
      case ServiceMode::PointCountFraction:
        if (opt_.variant != TreeVariant::Segmented) return kFullScore;
        return 2 * point_weight(n);
      case ServiceMode::LengthFraction: {
        const coord_t total = trajectory_length(u);
        if (!(total > 0)) return 0;
        if (opt_.variant != TreeVariant::Segmented) return kFullScore;
        return segment_weight(u.points, seg, total);
      }
    }
    return 0;
  }

  // Returns a description of every violated structural invariant.
  std::vector<std::string> check_invariants() const;

  // Used by the snapshot loader.
  struct Access;

 private:
  void init(const Rect& bounds, const TreeOptions& opt) {
    if (opt.beta < 1) throw Error("beta must be at least 1");
    if (!bounds.valid() || !is_finite(bounds.min) || !is_finite(bounds.max))
      throw Error("invalid world bounds");
    if (opt.max_depth < 0 || opt.max_zdepth < 0 || opt.max_zdepth > ZId::kMaxDepth)
      throw Error("invalid depth limits");
    opt_ = opt;
    bounds_ = bounds;
    nodes_.clear();
    ids_.clear();
    nodes_.push_back(make_node(bounds, 0, -1));
  }

  static QNode make_node(const Rect& cell, int depth, std::int32_t parent) {
    QNode q;
    q.cell = cell;
    q.depth = depth;
    q.parent = parent;
    return q;
  }

  void admit(const UserTrajectory& u) {
    validate(u);
    if (opt_.variant == TreeVariant::TwoPoint && opt_.mode != ServiceMode::Binary && u.points.size() != 2)
      throw Error("user trajectory " + std::to_string(u.id) +
                  ": the two-point index only supports fractional service for 2-point trajectories");
    for (const Point& p : u.points)
      if (!bounds_.contains(p))
        throw Error("user trajectory " + std::to_string(u.id) + " has a point outside the index bounds");
    if (!ids_.insert(u.id).second) throw Error("duplicate user trajectory id " + std::to_string(u.id));
  }

  void make_entries(std::uint32_t traj, std::vector<ULEntry>& out) const {
    const auto& pts = users_[traj].points;
    if (opt_.variant == TreeVariant::Segmented) {
      for (std::uint32_t j = 0; j + 1 < pts.size(); ++j) {
        ULEntry e;
        e.traj = traj;
        e.seg = j;
        e.first = pts[j];
        e.last = pts[j + 1];
        e.bound = entry_bound(traj, j);
        out.push_back(e);
      }
    } else {
      ULEntry e;
      e.traj = traj;
      e.first = pts.front();
      e.last = pts.back();
      e.bound = entry_bound(traj, 0);
      out.push_back(e);
    }
  }

  std::uint32_t split_qnode(std::uint32_t n) {
    const auto first = static_cast<std::uint32_t>(nodes_.size());
    const Rect cell = nodes_[n].cell;
    const int depth = nodes_[n].depth;
    for (int q = 0; q < 4; ++q)
      nodes_.push_back(make_node(quadrant(cell, q), depth + 1, static_cast<std::int32_t>(n)));
    nodes_[n].child = static_cast<std::int32_t>(first);
    return first;
  }

  void build_node(std::uint32_t n, std::vector<ULEntry> entries) {
    if (entries.size() <= opt_.beta || nodes_[n].depth >= opt_.max_depth) {
      nodes_[n].ul = std::move(entries);
      finalize_ul(n);
      return;
    }
    const std::uint32_t first = split_qnode(n);
    std::array<std::vector<ULEntry>, 4> parts;
    std::vector<ULEntry> spanning;
    const Rect cell = nodes_[n].cell;
    for (ULEntry& e : entries) {
      const int q = common_quadrant(cell, e);
      if (q < 0) spanning.push_back(e);
      else parts[q].push_back(e);
    }
    entries.clear();
    entries.shrink_to_fit();
    nodes_[n].ul = std::move(spanning);
    finalize_ul(n);
    for (int q = 0; q < 4; ++q) build_node(first + q, std::move(parts[q]));
  }

  Score compute_bounds(std::uint32_t n) {
    QNode& q = nodes_[n];
    Score s = q.own_bound;
    if (!q.leaf()) {
      const auto c = static_cast<std::uint32_t>(q.child);
      for (std::uint32_t i = 0; i < 4; ++i) s += compute_bounds(c + i);
    }
    nodes_[n].s_ub = s;
    return s;
  }

  void refresh_bound(std::uint32_t n) {
    QNode& q = nodes_[n];
    Score s = q.own_bound;
    if (!q.leaf())
      for (int i = 0; i < 4; ++i) s += nodes_[q.child + i].s_ub;
    q.s_ub = s;
  }

  static Score sum_bounds(const std::vector<ULEntry>& ul) {
    Score s = 0;
    for (const ULEntry& e : ul) s += e.bound;
    return s;
  }

  void assign_rest(QNode& q) {
    q.rest.clear();
    if (opt_.variant != TreeVariant::FullTrajectory) return;
    for (ULEntry& e : q.ul) {
      const auto& pts = users_[e.traj].points;
      e.rest_begin = static_cast<std::uint32_t>(q.rest.size());
      e.rest_count = static_cast<std::uint32_t>(pts.size() - 2);
      for (std::size_t i = 1; i + 1 < pts.size(); ++i)
        q.rest.push_back(q.end_part.node(q.end_part.locate(pts[i])).id);
    }
  }

  void sort_ul(QNode& q) {
    std::sort(q.ul.begin(), q.ul.end(),
              [&](const ULEntry& a, const ULEntry& b) { return entry_less(q, a, b); });
  }

  void index_ul(QNode& q) {
    q.start_part.index_leaves();
    q.end_part.index_leaves();
    const std::uint32_t ns = q.start_part.leaf_total();
    q.start_offsets.assign(ns + 1, 0);
    for (const ULEntry& e : q.ul) ++q.start_offsets[q.start_part.leaf_pos(e.start_leaf) + 1];
    for (std::uint32_t i = 0; i < ns; ++i) q.start_offsets[i + 1] += q.start_offsets[i];
    q.end_pos.resize(q.ul.size());
    for (std::size_t i = 0; i < q.ul.size(); ++i) q.end_pos[i] = q.end_part.leaf_pos(q.ul[i].end_leaf);
    // End partitions index every entry point they hold except the first, so
    // that "any point covered" filters can be answered from the two trees.
    const std::size_t m = q.end_part.leaf_total();
    const ZPartition& ep = q.end_part;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
    pairs.reserve(q.ul.size());
    for (std::uint32_t i = 0; i < q.ul.size(); ++i) {
      const ULEntry& e = q.ul[i];
      pairs.emplace_back(ep.leaf_pos(e.end_leaf), i);
      if (opt_.variant == TreeVariant::FullTrajectory) {
        const auto& pts = users_[e.traj].points;
        for (std::size_t k = 1; k + 1 < pts.size(); ++k) pairs.emplace_back(ep.leaf_pos(ep.locate(pts[k])), i);
      }
    }
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
    q.end_offsets.assign(m + 1, 0);
    for (const auto& pr : pairs) ++q.end_offsets[pr.first + 1];
    for (std::size_t i = 0; i < m; ++i) q.end_offsets[i + 1] += q.end_offsets[i];
    q.end_members.resize(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) q.end_members[i] = pairs[i].second;
  }

  // Assigns z-ids to a freshly filled UL and sorts it.
  void finalize_ul(std::uint32_t n) {
    QNode& q = nodes_[n];
    if (!opt_.zorder) {
      sort_ul(q);
      q.own_bound = sum_bounds(q.ul);
      return;
    }
    std::vector<Point> pts(q.ul.size());
    for (std::size_t i = 0; i < q.ul.size(); ++i) pts[i] = q.ul[i].first;
    q.start_part.build(q.cell, pts, {}, opt_.beta, opt_.max_zdepth);
    std::vector<std::uint64_t> groups(q.ul.size());
    for (std::size_t i = 0; i < q.ul.size(); ++i) {
      ULEntry& e = q.ul[i];
      e.start_leaf = q.start_part.locate(e.first);
      e.zstart = q.start_part.node(e.start_leaf).id;
      groups[i] = e.start_leaf;
      pts[i] = e.last;
    }
    q.end_part.build(q.cell, pts, groups, opt_.beta, opt_.max_zdepth);
    for (ULEntry& e : q.ul) {
      e.end_leaf = q.end_part.locate(e.last);
      e.zend = q.end_part.node(e.end_leaf).id;
    }
    assign_rest(q);
    sort_ul(q);
    index_ul(q);
    q.own_bound = sum_bounds(q.ul);
  }

  // Adds one entry to an existing UL, re-partitioning only the start and end
  // partitions it lands in.
  void add_to_ul(std::uint32_t n, ULEntry e) {
    QNode& q = nodes_[n];
    if (!opt_.zorder) {
      q.ul.push_back(e);
      sort_ul(q);
      q.own_bound = sum_bounds(q.ul);
      return;
    }
    const std::size_t beta = opt_.beta;
    const int zmax = opt_.max_zdepth;

    e.start_leaf = q.start_part.add(e.first);
    e.zstart = q.start_part.node(e.start_leaf).id;
    q.ul.push_back(e);
    const std::uint32_t sl = e.start_leaf;
    if (q.start_part.node(sl).count > beta && q.start_part.node(sl).id.depth() < zmax) {
      std::vector<std::size_t> members;
      std::vector<Point> pts;
      for (std::size_t i = 0; i < q.ul.size(); ++i)
        if (q.ul[i].start_leaf == sl) {
          members.push_back(i);
          pts.push_back(q.ul[i].first);
        }
      q.start_part.regrow(sl, pts, {}, beta, zmax);
      for (std::size_t i : members) {
        q.ul[i].start_leaf = q.start_part.locate(q.ul[i].first);
        q.ul[i].zstart = q.start_part.node(q.ul[i].start_leaf).id;
      }
    }

    ULEntry& added = q.ul.back();
    added.end_leaf = q.end_part.add(added.last);
    added.zend = q.end_part.node(added.end_leaf).id;
    const std::uint32_t el = added.end_leaf;
    std::vector<std::size_t> members;
    std::vector<Point> pts;
    std::vector<std::uint64_t> groups;
    for (std::size_t i = 0; i < q.ul.size(); ++i)
      if (q.ul[i].end_leaf == el) {
        members.push_back(i);
        pts.push_back(q.ul[i].last);
        groups.push_back(q.ul[i].start_leaf);
      }
    if (q.end_part.needs_split(el, groups, beta, zmax)) {
      q.end_part.regrow(el, pts, groups, beta, zmax);
      for (std::size_t i : members) {
        q.ul[i].end_leaf = q.end_part.locate(q.ul[i].last);
        q.ul[i].zend = q.end_part.node(q.ul[i].end_leaf).id;
      }
    }
    assign_rest(q);
    sort_ul(q);
    index_ul(q);
    q.own_bound = sum_bounds(q.ul);
  }

  void insert_entry(const ULEntry& e) {
    std::uint32_t n = 0;
    for (;;) {
      QNode& q = nodes_[n];
      if (!q.leaf()) {
        const int c = common_quadrant(q.cell, e);
        if (c < 0) {
          add_to_ul(n, e);
          break;
        }
        n = static_cast<std::uint32_t>(q.child + c);
        continue;
      }
      if (q.ul.size() + 1 > opt_.beta && q.depth < opt_.max_depth) {
        std::vector<ULEntry> entries = std::move(q.ul);
        q.ul.clear();
        entries.push_back(e);
        build_node(n, std::move(entries));
        compute_bounds(n);
      } else {
        add_to_ul(n, e);
      }
      break;
    }
    for (std::int32_t c = static_cast<std::int32_t>(n); c >= 0; c = nodes_[c].parent)
      refresh_bound(static_cast<std::uint32_t>(c));
  }

  TreeOptions opt_;
  Rect bounds_;
  std::vector<UserTrajectory> users_;
  std::vector<QNode> nodes_;
  std::unordered_set<TrajId> ids_;
};

inline std::vector<std::string> TQTree::check_invariants() const {
  std::vector<std::string> bad;
  auto fail = [&](std::size_t n, const std::string& what) {
    bad.push_back("q-node " + std::to_string(n) + ": " + what);
  };

  std::size_t stored = 0;
  for (std::size_t n = 0; n < nodes_.size(); ++n) {
    const QNode& q = nodes_[n];
    stored += q.ul.size();

    for (const ULEntry& e : q.ul) {
      if (e.traj >= users_.size()) {
        fail(n, "entry refers to unknown trajectory");
        continue;
      }
      // Placement: every ancestor routes all points to the same child, and
      // this node either splits them (internal) or contains them (leaf).
      for (std::int32_t c = static_cast<std::int32_t>(n); nodes_[c].parent >= 0; c = nodes_[c].parent) {
        const QNode& p = nodes_[nodes_[c].parent];
        if (common_quadrant(p.cell, e) != c - p.child) fail(n, "entry not routed through its ancestors");
      }
      if (!q.leaf() && common_quadrant(q.cell, e) >= 0) fail(n, "inter-node entry fits in one child");
      const auto [lo, hi] = entry_span(e);
      const auto& pts = users_[e.traj].points;
      for (std::size_t i = lo; i <= hi; ++i) {
        if (opt_.variant == TreeVariant::TwoPoint && i != lo && i != hi) continue;
        if (!q.cell.contains(pts[i])) fail(n, "entry point outside cell");
      }
      if (e.bound != entry_bound(e.traj, e.seg)) fail(n, "entry bound mismatch");
    }

    if (q.own_bound != sum_bounds(q.ul)) fail(n, "own bound differs from entry sum");
    Score s = q.own_bound;
    if (!q.leaf())
      for (int i = 0; i < 4; ++i) s += nodes_[q.child + i].s_ub;
    if (s != q.s_ub) fail(n, "s_ub differs from own bound plus children");

    for (std::size_t i = 1; i < q.ul.size(); ++i)
      if (entry_less(q, q.ul[i], q.ul[i - 1])) fail(n, "UL not sorted");

    if (!opt_.zorder || q.ul.empty()) continue;
    std::vector<std::uint32_t> scount(q.start_part.size(), 0), ecount(q.end_part.size(), 0);
    std::vector<std::vector<std::uint64_t>> groups(q.end_part.size());
    for (const ULEntry& e : q.ul) {
      const std::uint32_t sl = q.start_part.locate(e.first);
      const std::uint32_t el = q.end_part.locate(e.last);
      if (sl != e.start_leaf || q.start_part.node(sl).id != e.zstart) fail(n, "stale start z-id");
      if (el != e.end_leaf || q.end_part.node(el).id != e.zend) fail(n, "stale end z-id");
      ++scount[sl];
      ++ecount[el];
      groups[el].push_back(e.start_leaf);
    }
    for (std::size_t i = 0; i < q.start_part.size(); ++i) {
      const auto& pn = q.start_part.node(i);
      if (pn.leaf() && scount[i] > opt_.beta && pn.id.depth() < opt_.max_zdepth)
        fail(n, "start partition " + pn.id.str() + " over capacity");
    }
    for (std::size_t i = 0; i < q.end_part.size(); ++i) {
      const auto& pn = q.end_part.node(i);
      if (!pn.leaf() || pn.id.depth() >= opt_.max_zdepth) continue;
      if (ecount[i] > opt_.beta) fail(n, "end partition " + pn.id.str() + " over capacity");
      auto g = groups[i];
      std::sort(g.begin(), g.end());
      if (std::adjacent_find(g.begin(), g.end()) != g.end())
        fail(n, "entries sharing a start z-id share end partition " + pn.id.str());
    }
  }
  if (stored != expected_entries())
    bad.push_back("storage: " + std::to_string(stored) + " entries, expected " + std::to_string(expected_entries()));
  return bad;
}

}  // namespace tq
