// maxkcov.hpp
//
// Choosing k facilities that jointly serve the most. Each candidate is first
// reduced to its ledger of served user points (from a linear scan, the point
// quadtree or the TQ-tree); solvers then work on ledgers only, so every path
// that produces the same served sets produces the same answer.

#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tqtree/baseline.hpp"
#include "tqtree/core.hpp"
#include "tqtree/kmaxrrst.hpp"
#include "tqtree/parallel.hpp"
#include "tqtree/service.hpp"
#include "tqtree/tqtree.hpp"

namespace tq {

struct CoverageTable {
  std::vector<FacilityId> ids;
  std::vector<ServiceLedger> ledgers;

  std::size_t size() const { return ids.size(); }
};

struct CoverageSolution {
  std::vector<FacilityId> chosen;  // in selection order (greedy) or ascending (exact)
  std::vector<double> gains;       // per greedy round
  Score total = 0;
  double value = 0;
  std::size_t combinations = 0;    // exact solver only
};

inline CoverageTable coverage_table_linear(std::span<const UserTrajectory> users,
                                           std::span<const FacilityTrajectory> F, coord_t psi) {
  CoverageTable t;
  for (const FacilityTrajectory& f : F) {
    t.ids.push_back(f.id);
    t.ledgers.push_back(linear_ledger(users, f, psi));
  }
  return t;
}

inline CoverageTable coverage_table_baseline(const PointIndex& ix, std::span<const UserTrajectory> users,
                                             std::span<const FacilityTrajectory> F, coord_t psi,
                                             unsigned threads = 1) {
  CoverageTable t;
  t.ids.resize(F.size());
  t.ledgers.resize(F.size());
  parallel_for(F.size(), threads, [&](std::size_t i) {
    t.ids[i] = F[i].id;
    t.ledgers[i] = baseline_ledger(ix, users, F[i], psi);
  });
  return t;
}

inline CoverageTable coverage_table_tree(const TQTree& tree, std::span<const FacilityTrajectory> F,
                                         const ServiceParams& params, unsigned threads = 1) {
  CoverageTable t;
  t.ids.resize(F.size());
  t.ledgers.resize(F.size());
  parallel_for(F.size(), threads, [&](std::size_t i) {
    EvalContext cx(tree, params, CreditScope::Coverage);
    t.ids[i] = F[i].id;
    t.ledgers[i] = std::move(facility_ledger(cx, F[i]).served);
  });
  return t;
}

inline ServiceLedger merged_ledger(const CoverageTable& t, std::span<const std::size_t> picks) {
  ServiceLedger l;
  for (std::size_t i : picks) l.merge(t.ledgers[i]);
  return l;
}

// Increase of the canonical score when `add` is merged into `cur`.
inline Score marginal_gain(std::span<const UserTrajectory> users, const ServiceLedger& cur,
                            const ServiceLedger& add, ServiceMode mode) {
  Score gain = 0;
  for (std::uint32_t u : add.sorted_users()) {
    const ServedPoints& extra = *add.find(u);
    const ServedPoints* have = cur.find(u);
    if (!have) {
      gain += credit_from_served(users[u].points, extra, mode);
      continue;
    }
    ServedPoints both = *have;
    both.merge(extra);
    gain += credit_from_served(users[u].points, both, mode) - credit_from_served(users[u].points, *have, mode);
  }
  return gain;
}

inline CoverageSolution greedy_maxkcov(std::span<const UserTrajectory> users, const CoverageTable& t,
                                       std::size_t k, ServiceMode mode, unsigned threads = 1) {
  if (k < 1) throw Error("k must be at least 1");
  if (k > t.size()) throw Error("k exceeds the number of candidate facilities");
  CoverageSolution sol;
  ServiceLedger cur;
  std::vector<char> used(t.size(), 0);
  std::vector<Score> gains(t.size());
  for (std::size_t round = 0; round < k; ++round) {
    parallel_for(t.size(), threads, [&](std::size_t i) {
      gains[i] = used[i] ? 0 : marginal_gain(users, cur, t.ledgers[i], mode);
    });
    std::size_t best = t.size();
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (used[i]) continue;
      if (best == t.size() || gains[i] > gains[best] || (gains[i] == gains[best] && t.ids[i] < t.ids[best]))
        best = i;
    }
    used[best] = 1;
    cur.merge(t.ledgers[best]);
    sol.chosen.push_back(t.ids[best]);
    sol.gains.push_back(to_double(gains[best]));
  }
  sol.total = cur.total(users, mode);
  sol.value = to_double(sol.total);
  return sol;
}

inline std::size_t binomial_capped(std::size_t n, std::size_t k, std::size_t cap) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  long double c = 1;
  for (std::size_t i = 1; i <= k; ++i) {
    c = c * static_cast<long double>(n - k + i) / static_cast<long double>(i);
    if (c > static_cast<long double>(cap)) return cap + 1;
  }
  return static_cast<std::size_t>(c + 0.5L);
}

// Enumerates every k-subset; ties go to the lexicographically smallest id list.
inline CoverageSolution exact_maxkcov(std::span<const UserTrajectory> users, const CoverageTable& t,
                                      std::size_t k, ServiceMode mode, std::size_t budget = 1000000) {
  if (k < 1) throw Error("k must be at least 1");
  if (k > t.size()) throw Error("k exceeds the number of candidate facilities");
  const std::size_t combos = binomial_capped(t.size(), k, budget);
  if (combos > budget)
    throw Error("exact enumeration needs more than " + std::to_string(budget) + " combinations");

  std::vector<std::size_t> order(t.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return t.ids[a] < t.ids[b]; });

  CoverageSolution sol;
  std::vector<std::size_t> pos(k);
  for (std::size_t i = 0; i < k; ++i) pos[i] = i;
  bool have = false;
  std::vector<std::size_t> picks(k);
  for (;;) {
    for (std::size_t i = 0; i < k; ++i) picks[i] = order[pos[i]];
    const Score v = merged_ledger(t, picks).total(users, mode);
    ++sol.combinations;
    if (!have || v > sol.total) {
      have = true;
      sol.total = v;
      sol.value = to_double(v);
      sol.chosen.clear();
      for (std::size_t p : picks) sol.chosen.push_back(t.ids[p]);
    }
    std::size_t i = k;
    while (i > 0 && pos[i - 1] == t.size() - k + (i - 1)) --i;
    if (i == 0) break;
    ++pos[i - 1];
    for (std::size_t j = i; j < k; ++j) pos[j] = pos[j - 1] + 1;
  }
  return sol;
}

inline CoverageTable restrict_table(const CoverageTable& t, std::span<const FacilityId> keep) {
  CoverageTable r;
  for (std::size_t i = 0; i < t.size(); ++i)
    if (std::find(keep.begin(), keep.end(), t.ids[i]) != keep.end()) {
      r.ids.push_back(t.ids[i]);
      r.ledgers.push_back(t.ledgers[i]);
    }
  return r;
}

// Candidates are the k' best individual facilities from the TQ-tree search;
// the greedy then runs over their coverage ledgers.
inline CoverageSolution two_step_greedy(const TQTree& tree, std::span<const FacilityTrajectory> F,
                                        std::size_t k, std::size_t kprime, const ServiceParams& params,
                                        unsigned threads = 1) {
  if (k < 1 || kprime < k || kprime > F.size()) throw Error("two-step greedy needs k <= k' <= |F|");
  const TopKResult top = top_k_facilities(tree, F, kprime, params);
  std::vector<FacilityTrajectory> cand;
  for (const RankedFacility& r : top.ranked)
    for (const FacilityTrajectory& f : F)
      if (f.id == r.id) cand.push_back(f);
  const CoverageTable t = coverage_table_tree(tree, cand, params, threads);
  return greedy_maxkcov(tree.users(), t, k, params.mode, threads);
}

}  // namespace tq
