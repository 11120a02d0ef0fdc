// snapshot.hpp
//
// Line-oriented text snapshot of a TQTree. Numbers are written in shortest
// round-trip form, and everything derivable (partition trees, bucket ranges)
// is rebuilt on load, so save -> load -> save reproduces the same bytes.
//
//   tqtree-snapshot 1
//   options <beta> <variant> <mode> <zorder> <max_depth> <max_zdepth>
//   bounds <minx> <miny> <maxx> <maxy>
//   users <count>
//   u <id> <npoints> <x> <y> ...
//   nodes <count>
//   n <depth> <parent> <child> <minx> <miny> <maxx> <maxy> <own_bound> <s_ub> <entries>
//   e <traj> <seg> <zstart> <zend> <bound> [<zid> ...]

#pragma once

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "tqtree/tqtree.hpp"

namespace tq {

namespace snapshot_detail {

inline std::string num(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw Error("cannot format number");
  return std::string(buf, p);
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  void line(const char* tag) {
    std::string l;
    do {
      if (!std::getline(in_, l)) throw Error(std::string("snapshot truncated, expected '") + tag + "'");
      ++lineno_;
    } while (l.empty());
    toks_.clear();
    pos_ = 0;
    std::istringstream ss(l);
    for (std::string t; ss >> t;) toks_.push_back(t);
    if (toks_.empty() || toks_[0] != tag) fail(std::string("expected '") + tag + "'");
    pos_ = 1;
  }

  std::string word() {
    if (pos_ >= toks_.size()) fail("missing field");
    return toks_[pos_++];
  }

  double real() {
    const std::string s = word();
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) fail("bad number '" + s + "'");
    return v;
  }

  Score score() {
    const std::string s = word();
    const auto v = parse_score(s);
    if (!v) fail("bad score '" + s + "'");
    return *v;
  }

  template <class T>
  T integer() {
    const std::string s = word();
    T v{};
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) fail("bad integer '" + s + "'");
    return v;
  }

  bool done() const { return pos_ >= toks_.size(); }

  [[noreturn]] void fail(const std::string& what) const {
    throw Error("snapshot line " + std::to_string(lineno_) + ": " + what);
  }

 private:
  std::istream& in_;
  std::vector<std::string> toks_;
  std::size_t pos_ = 0;
  std::size_t lineno_ = 0;
};

}  // namespace snapshot_detail

struct TQTree::Access {
  static void save(const TQTree& t, std::ostream& out) {
    using snapshot_detail::num;
    const TreeOptions& o = t.opt_;
    out << "tqtree-snapshot 1\n";
    out << "options " << o.beta << ' ' << to_string(o.variant) << ' ' << to_string(o.mode) << ' '
        << (o.zorder ? 1 : 0) << ' ' << o.max_depth << ' ' << o.max_zdepth << '\n';
    out << "bounds " << num(t.bounds_.min.x) << ' ' << num(t.bounds_.min.y) << ' ' << num(t.bounds_.max.x)
        << ' ' << num(t.bounds_.max.y) << '\n';
    out << "users " << t.users_.size() << '\n';
    for (const UserTrajectory& u : t.users_) {
      out << "u " << u.id << ' ' << u.points.size();
      for (const Point& p : u.points) out << ' ' << num(p.x) << ' ' << num(p.y);
      out << '\n';
    }
    out << "nodes " << t.nodes_.size() << '\n';
    for (const QNode& q : t.nodes_) {
      out << "n " << q.depth << ' ' << q.parent << ' ' << q.child << ' ' << num(q.cell.min.x) << ' '
          << num(q.cell.min.y) << ' ' << num(q.cell.max.x) << ' ' << num(q.cell.max.y) << ' '
          << score_str(q.own_bound) << ' ' << score_str(q.s_ub) << ' ' << q.ul.size() << '\n';
      for (const ULEntry& e : q.ul) {
        out << "e " << e.traj << ' ' << e.seg << ' ' << e.zstart.str() << ' ' << e.zend.str() << ' '
            << score_str(e.bound);
        for (const ZId& z : t.rest_zids(q, e)) out << ' ' << z.str();
        out << '\n';
      }
    }
  }

  static TQTree load(std::istream& in) {
    snapshot_detail::Reader r(in);
    r.line("tqtree-snapshot");
    if (r.word() != "1") r.fail("unsupported snapshot version");

    TreeOptions o;
    r.line("options");
    o.beta = r.integer<std::size_t>();
    o.variant = parse_tree_variant(r.word());
    o.mode = parse_service_mode(r.word());
    o.zorder = r.integer<int>() != 0;
    o.max_depth = r.integer<int>();
    o.max_zdepth = r.integer<int>();

    Rect b;
    r.line("bounds");
    b.min.x = r.real();
    b.min.y = r.real();
    b.max.x = r.real();
    b.max.y = r.real();

    TQTree t;
    t.init(b, o);
    r.line("users");
    const auto nusers = r.integer<std::size_t>();
    t.users_.reserve(nusers);
    for (std::size_t i = 0; i < nusers; ++i) {
      r.line("u");
      UserTrajectory u;
      u.id = r.integer<TrajId>();
      const auto np = r.integer<std::size_t>();
      for (std::size_t k = 0; k < np; ++k) {
        const double x = r.real();
        const double y = r.real();
        u.points.push_back({x, y});
      }
      t.admit(u);
      t.users_.push_back(std::move(u));
    }

    r.line("nodes");
    const auto nnodes = r.integer<std::size_t>();
    if (nnodes == 0) r.fail("snapshot has no nodes");
    t.nodes_.clear();
    t.nodes_.resize(nnodes);
    for (std::size_t n = 0; n < nnodes; ++n) {
      QNode& q = t.nodes_[n];
      r.line("n");
      q.depth = r.integer<int>();
      q.parent = r.integer<std::int32_t>();
      q.child = r.integer<std::int32_t>();
      q.cell.min.x = r.real();
      q.cell.min.y = r.real();
      q.cell.max.x = r.real();
      q.cell.max.y = r.real();
      q.own_bound = r.score();
      q.s_ub = r.score();
      if (q.parent >= static_cast<std::int32_t>(nnodes) || q.child + 4 > static_cast<std::int32_t>(nnodes))
        r.fail("node link out of range");
      const auto ne = r.integer<std::size_t>();
      std::vector<ZId> starts, ends;
      for (std::size_t k = 0; k < ne; ++k) {
        r.line("e");
        ULEntry e;
        e.traj = r.integer<std::uint32_t>();
        e.seg = r.integer<std::uint32_t>();
        if (e.traj >= t.users_.size()) r.fail("entry refers to unknown trajectory");
        const auto& pts = t.users_[e.traj].points;
        if (o.variant == TreeVariant::Segmented ? e.seg + 1 >= pts.size() : e.seg != 0)
          r.fail("bad segment index");
        e.first = pts[e.seg];
        e.last = o.variant == TreeVariant::Segmented ? pts[e.seg + 1] : pts.back();
        e.zstart = ZId::parse(r.word());
        e.zend = ZId::parse(r.word());
        e.bound = r.score();
        e.rest_begin = static_cast<std::uint32_t>(q.rest.size());
        while (!r.done()) q.rest.push_back(ZId::parse(r.word()));
        e.rest_count = static_cast<std::uint32_t>(q.rest.size() - e.rest_begin);
        starts.push_back(e.zstart);
        ends.push_back(e.zend);
        q.ul.push_back(e);
      }
      if (o.zorder) {
        ends.insert(ends.end(), q.rest.begin(), q.rest.end());
        q.start_part.rebuild_from_ids(q.cell, starts);
        q.end_part.rebuild_from_ids(q.cell, ends);
        std::vector<Point> sp, ep;
        for (ULEntry& e : q.ul) {
          e.start_leaf = q.start_part.locate(e.first);
          e.end_leaf = q.end_part.locate(e.last);
          if (q.start_part.node(e.start_leaf).id != e.zstart || q.end_part.node(e.end_leaf).id != e.zend)
            r.fail("entry z-ids disagree with its points");
          sp.push_back(e.first);
          ep.push_back(e.last);
        }
        const std::vector<ZId> rest = q.rest;
        t.assign_rest(q);
        if (q.rest != rest) r.fail("interior z-ids disagree with the trajectory");
        q.start_part.recount(sp);
        q.end_part.recount(ep);
        t.index_ul(q);
      }
    }
    for (std::size_t n = 0; n < nnodes; ++n) {
      const QNode& q = t.nodes_[n];
      if (sum_bounds(q.ul) != q.own_bound) throw Error("snapshot node " + std::to_string(n) + ": own bound mismatch");
    }
    const auto bad = t.check_invariants();
    if (!bad.empty()) throw Error("snapshot fails invariant: " + bad.front());
    return t;
  }
};

inline void save_snapshot(const TQTree& t, std::ostream& out) { TQTree::Access::save(t, out); }

inline std::string snapshot_string(const TQTree& t) {
  std::ostringstream ss;
  save_snapshot(t, ss);
  return ss.str();
}

inline TQTree load_snapshot(std::istream& in) { return TQTree::Access::load(in); }

inline TQTree load_snapshot_string(const std::string& s) {
  std::istringstream ss(s);
  return load_snapshot(ss);
}

inline void save_snapshot_file(const TQTree& t, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  save_snapshot(t, out);
  if (!out) throw Error("write failed for " + path);
}

inline TQTree load_snapshot_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  return load_snapshot(in);
}

}  // namespace tq
