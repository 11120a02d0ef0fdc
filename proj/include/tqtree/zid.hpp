// zid.hpp
//
// Hierarchical z-order identifiers and the per-q-node partition trees that
// assign them.

#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tqtree/core.hpp"

namespace tq {

// A path of quadrant digits (0..3) from a q-node's cell down to one of its
// sub-partitions. Digits are packed most significant first, so comparing the
// packed words and then the depth orders a prefix before its extensions:
// "0" < "0.0" < "0.1" < "1".
class ZId {
 public:
  static constexpr int kMaxDepth = 31;

  constexpr ZId() = default;

  int depth() const { return depth_; }
  int digit(int i) const { return static_cast<int>((bits_ >> (62 - 2 * i)) & 3u); }

  ZId child(int d) const {
    if (depth_ >= kMaxDepth) throw Error("ZId depth limit exceeded");
    ZId z = *this;
    z.bits_ |= static_cast<std::uint64_t>(d & 3) << (62 - 2 * depth_);
    ++z.depth_;
    return z;
  }

  ZId prefix(int len) const {
    ZId z;
    z.depth_ = static_cast<std::uint8_t>(len);
    z.bits_ = len == 0 ? 0 : bits_ & ~((std::uint64_t{1} << (64 - 2 * len)) - 1);
    return z;
  }

  bool is_prefix_of(const ZId& o) const { return depth_ <= o.depth_ && o.prefix(depth_) == *this; }

  // "0.3", "2"; the undivided partition renders as "*".
  std::string str() const {
    if (depth_ == 0) return "*";
    std::string s;
    for (int i = 0; i < depth_; ++i) {
      if (i) s.push_back('.');
      s.push_back(static_cast<char>('0' + digit(i)));
    }
    return s;
  }

  static ZId parse(std::string_view s) {
    ZId z;
    if (s == "*") return z;
    bool want_digit = true;
    for (char c : s) {
      if (want_digit) {
        if (c < '0' || c > '3') throw Error("malformed z-id '" + std::string(s) + "'");
        z = z.child(c - '0');
      } else if (c != '.') {
        throw Error("malformed z-id '" + std::string(s) + "'");
      }
      want_digit = !want_digit;
    }
    if (want_digit) throw Error("malformed z-id '" + std::string(s) + "'");
    return z;
  }

  friend bool operator==(const ZId&, const ZId&) = default;
  friend std::strong_ordering operator<=>(const ZId& a, const ZId& b) {
    if (auto c = a.bits_ <=> b.bits_; c != 0) return c;
    return a.depth_ <=> b.depth_;
  }

 private:
  std::uint64_t bits_ = 0;
  std::uint8_t depth_ = 0;
};

// Lexicographic order over ZId sequences, shorter sequence first on a tie.
inline std::strong_ordering compare_zids(std::span<const ZId> a, std::span<const ZId> b) {
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i)
    if (auto c = a[i] <=> b[i]; c != 0) return c;
  return a.size() <=> b.size();
}

// Recursive quadrant split of a q-node's cell. A cell is split while it holds
// more than `beta` points or, when group keys are supplied, while two of its
// points share a key; splitting stops at `max_depth` regardless.
class ZPartition {
 public:
  struct Node {
    ZId id;
    Rect cell;
    std::int32_t child = -1;  // index of the first of four consecutive children
    std::uint32_t count = 0;  // points routed to this partition
    bool leaf() const { return child < 0; }
  };

  ZPartition() = default;

  void reset(const Rect& cell) {
    nodes_.clear();
    nodes_.push_back(Node{ZId{}, cell, -1, 0});
  }

  bool empty() const { return nodes_.empty(); }
  std::size_t size() const { return nodes_.size(); }
  const Node& node(std::size_t i) const { return nodes_[i]; }
  std::span<const Node> nodes() const { return nodes_; }

  std::size_t leaf_count() const {
    return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.leaf(); }));
  }

  void build(const Rect& cell, std::span<const Point> pts, std::span<const std::uint64_t> groups,
             std::size_t beta, int max_depth) {
    reset(cell);
    std::vector<std::uint32_t> idx(pts.size());
    for (std::uint32_t i = 0; i < idx.size(); ++i) idx[i] = i;
    grow(0, idx, pts, groups, beta, max_depth);
  }

  std::uint32_t locate(Point p) const {
    std::uint32_t n = 0;
    while (!nodes_[n].leaf())
      n = static_cast<std::uint32_t>(nodes_[n].child + quadrant_of(nodes_[n].cell, p));
    return n;
  }

  // Adds one point below the root counters; no splitting.
  std::uint32_t add(Point p) {
    std::uint32_t n = 0;
    ++nodes_[0].count;
    while (!nodes_[n].leaf()) {
      n = static_cast<std::uint32_t>(nodes_[n].child + quadrant_of(nodes_[n].cell, p));
      ++nodes_[n].count;
    }
    return n;
  }

  // Re-partitions leaf `n` over the given points (those currently routed to
  // it). Indices of existing nodes stay valid.
  void regrow(std::uint32_t n, std::span<const Point> pts, std::span<const std::uint64_t> groups,
              std::size_t beta, int max_depth) {
    std::vector<std::uint32_t> idx(pts.size());
    for (std::uint32_t i = 0; i < idx.size(); ++i) idx[i] = i;
    nodes_[n].count = 0;
    grow(n, idx, pts, groups, beta, max_depth);
  }

  bool needs_split(std::uint32_t n, std::span<const std::uint64_t> groups, std::size_t beta,
                   int max_depth) const {
    if (nodes_[n].id.depth() >= max_depth) return false;
    if (nodes_[n].count > beta) return true;
    if (groups.size() < 2) return false;
    std::vector<std::uint64_t> g(groups.begin(), groups.end());
    std::sort(g.begin(), g.end());
    return std::adjacent_find(g.begin(), g.end()) != g.end();
  }

  // Calls visit(leaf index) for every leaf whose cell lies within psi of some
  // stop, descending only through such cells.
  template <class Visit>
  void for_each_covered_leaf(std::span<const Point> stops, coord_t psi, Visit&& visit) const {
    if (nodes_.empty() || stops.empty()) return;
    // Each level keeps only the stops that reach its cell.
    std::vector<Point> buf;
    // Reserved for the deepest path so spans into buf stay valid.
    buf.reserve(stops.size() * (ZId::kMaxDepth + 2));
    covered_rec(0, stops, psi, buf, visit);
  }

  // Numbers the leaves in z-order. Must be rerun after the shape changes.
  void index_leaves() {
    first_.assign(nodes_.size(), 0);
    last_.assign(nodes_.size(), 0);
    std::uint32_t next = 0;
    number(0, next);
  }

  std::uint32_t leaf_total() const { return nodes_.empty() ? 0 : last_[0]; }
  std::uint32_t leaf_pos(std::uint32_t leaf) const { return first_[leaf]; }

  // Calls visit(lo, hi) with ascending, disjoint ranges of z-order leaf
  // positions that together are exactly the covered leaves. A cell lying
  // inside one stop's circle is reported whole.
  // `wanted(lo, hi)` may return false to skip a subtree.
  template <class Visit, class Wanted>
  void for_each_covered_range(std::span<const Point> stops, coord_t psi, Visit&& visit, Wanted&& wanted) const {
    if (nodes_.empty() || stops.empty()) return;
    thread_local std::vector<Point> scratch;
    const std::size_t need = stops.size() * (ZId::kMaxDepth + 2);
    if (scratch.size() < need) scratch.resize(need);
    range_rec(0, stops.data(), stops.size(), psi * psi, scratch.data(), visit, wanted);
  }

  template <class Visit>
  void for_each_covered_range(std::span<const Point> stops, coord_t psi, Visit&& visit) const {
    for_each_covered_range(stops, psi, visit, [](std::uint32_t, std::uint32_t) { return true; });
  }

  // Rebuilds the tree whose leaves carry the given ids: every proper prefix of
  // an id becomes an internal node.
  void rebuild_from_ids(const Rect& cell, std::span<const ZId> ids) {
    reset(cell);
    for (const ZId& z : ids) {
      std::uint32_t n = 0;
      for (int d = 0; d < z.depth(); ++d) {
        if (nodes_[n].leaf()) split_node(n);
        n = static_cast<std::uint32_t>(nodes_[n].child + z.digit(d));
      }
      if (!nodes_[n].leaf()) throw Error("z-id " + z.str() + " names an internal partition");
    }
  }

  void recount(std::span<const Point> pts) {
    for (Node& n : nodes_) n.count = 0;
    for (const Point& p : pts) add(p);
  }

 private:
  void number(std::uint32_t n, std::uint32_t& next) {
    first_[n] = next;
    if (nodes_[n].leaf()) {
      ++next;
    } else {
      for (int q = 0; q < 4; ++q) number(static_cast<std::uint32_t>(nodes_[n].child + q), next);
    }
    last_[n] = next;
  }

  // `scratch` has room for the stop lists of every level below n.
  template <class Visit, class Wanted>
  void range_rec(std::uint32_t n, const Point* cand, std::size_t ncand, coord_t r2, Point* scratch,
                 Visit& visit, Wanted& wanted) const {
    if (!wanted(first_[n], last_[n])) return;
    const Rect c = nodes_[n].cell;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < ncand; ++i) {
      const Point s = cand[i];
      const coord_t ax = c.min.x - s.x, bx = s.x - c.max.x;
      const coord_t ay = c.min.y - s.y, by = s.y - c.max.y;
      const coord_t nx = std::max(std::max(ax, bx), coord_t{0});
      const coord_t ny = std::max(std::max(ay, by), coord_t{0});
      const coord_t fx = -std::min(ax, bx), fy = -std::min(ay, by);
      const bool reach = nx * nx + ny * ny <= r2;
      if (reach && fx * fx + fy * fy <= r2) {
        visit(first_[n], last_[n]);
        return;
      }
      scratch[hits] = s;
      hits += reach;
    }
    if (hits == 0) return;
    const std::int32_t child = nodes_[n].child;
    if (child < 0) {
      visit(first_[n], last_[n]);
      return;
    }
    for (int q = 0; q < 4; ++q)
      range_rec(static_cast<std::uint32_t>(child + q), scratch, hits, r2, scratch + hits, visit, wanted);
  }

  template <class Visit>
  void covered_rec(std::uint32_t n, std::span<const Point> cand, coord_t psi, std::vector<Point>& buf,
                   Visit& visit) const {
    const Node& nd = nodes_[n];
    const std::size_t base = buf.size();
    for (const Point& s : cand)
      if (rect_within(nd.cell, s, psi)) buf.push_back(s);
    const std::size_t hits = buf.size() - base;
    if (hits > 0) {
      if (nd.leaf()) {
        visit(n);
      } else {
        for (int q = 0; q < 4; ++q)
          covered_rec(static_cast<std::uint32_t>(nd.child + q), std::span<const Point>(buf.data() + base, hits),
                      psi, buf, visit);
      }
    }
    buf.resize(base);
  }

  void split_node(std::uint32_t n) {
    const auto first = static_cast<std::int32_t>(nodes_.size());
    const ZId id = nodes_[n].id;
    const Rect cell = nodes_[n].cell;
    for (int q = 0; q < 4; ++q) nodes_.push_back(Node{id.child(q), quadrant(cell, q), -1, 0});
    nodes_[n].child = first;
  }

  void grow(std::uint32_t n, std::vector<std::uint32_t>& idx, std::span<const Point> pts,
            std::span<const std::uint64_t> groups, std::size_t beta, int max_depth) {
    nodes_[n].count = static_cast<std::uint32_t>(idx.size());
    if (!should_split(n, idx, groups, beta, max_depth)) return;
    split_node(n);
    std::array<std::vector<std::uint32_t>, 4> parts;
    for (std::uint32_t i : idx) parts[quadrant_of(nodes_[n].cell, pts[i])].push_back(i);
    idx.clear();
    idx.shrink_to_fit();
    const auto first = static_cast<std::uint32_t>(nodes_[n].child);
    for (int q = 0; q < 4; ++q) grow(first + q, parts[q], pts, groups, beta, max_depth);
  }

  bool should_split(std::uint32_t n, const std::vector<std::uint32_t>& idx,
                    std::span<const std::uint64_t> groups, std::size_t beta, int max_depth) const {
    if (nodes_[n].id.depth() >= max_depth || idx.size() < 2) return false;
    if (idx.size() > beta) return true;
    if (groups.empty()) return false;
    std::vector<std::uint64_t> g;
    g.reserve(idx.size());
    for (std::uint32_t i : idx) g.push_back(groups[i]);
    std::sort(g.begin(), g.end());
    return std::adjacent_find(g.begin(), g.end()) != g.end();
  }

  std::vector<Node> nodes_;
  std::vector<std::uint32_t> first_, last_;  // z-order leaf range below each node
};

}  // namespace tq
