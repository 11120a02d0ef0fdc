// tqtool: build, query and benchmark TQ-tree indexes.
//
// Every subcommand reads a JSON run config (--config) and then applies flag
// overrides. Results go out as tab-separated text whose first line embeds the
// effective config.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tqtree/baseline.hpp"
#include "tqtree/ingest.hpp"
#include "tqtree/kmaxrrst.hpp"
#include "tqtree/maxkcov.hpp"
#include "tqtree/snapshot.hpp"
#include "tqtree/tqtree.hpp"

using json = nlohmann::ordered_json;
using namespace tq;

namespace {

using clk = std::chrono::steady_clock;

double ms_since(clk::time_point t0) { return std::chrono::duration<double, std::milli>(clk::now() - t0).count(); }

// ---------------------------------------------------------------------------
// config

json default_config() {
  return json{
      {"dataset",
       {{"kind", "synthetic"},
        {"path", ""},
        {"facilities_path", ""},
        {"delimiter", ","},
        {"header", true},
        {"columns",
         {{"pickup_lon", "pickup_longitude"},
          {"pickup_lat", "pickup_latitude"},
          {"dropoff_lon", "dropoff_longitude"},
          {"dropoff_lat", "dropoff_latitude"},
          {"user", "user"},
          {"time", "timestamp"},
          {"lon", "longitude"},
          {"lat", "latitude"}}},
        {"projection", "equirectangular"},
        {"expected_users", 0},
        {"users", 100000},
        {"min_points", 2},
        {"max_points", 2},
        {"facilities", 64},
        {"stops", 32},
        {"distribution", "clustered"},
        {"hotspots", 24},
        {"hotspot_radius", 600.0},
        {"clustered_share", 0.8},
        {"extent", 20000.0},
        {"seed", 1}}},
      {"bounds", json::array()},
      {"index", "TQ-zorder"},
      {"methods", {"BL", "TQ-basic", "TQ-zorder"}},
      {"variant", "two-point"},
      {"beta", 64},
      {"psi", 200.0},
      {"mode", "binary"},
      {"k", 8},
      {"kprime", 0},
      {"facility_count", 0},
      {"seed", 1},
      {"repetitions", 5},
      {"exact_budget", 1000000},
      {"sweep", {{"param", "stops"}, {"values", {8, 16, 32, 64}}}},
      {"snapshot", ""},
      {"output", ""},
      {"threads", 1},
      {"eager", false},
      {"timing", true}};
}

void merge_into(json& base, const json& over) {
  for (auto it = over.begin(); it != over.end(); ++it) {
    if (!base.contains(it.key())) throw Error("unknown config key '" + it.key() + "'");
    if (base[it.key()].is_object() && it.value().is_object())
      merge_into(base[it.key()], it.value());
    else
      base[it.key()] = it.value();
  }
}

// Flags that override config entries. Each flag writes one JSON pointer.
class Overrides {
 public:
  template <class T>
  void add(CLI::App* app, const std::string& flag, const std::string& pointer, const std::string& help) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app->add_option(flag, *value, help);
    appliers_.push_back([opt, value, pointer](json& cfg) {
      if (opt->count() > 0) cfg[json::json_pointer(pointer)] = *value;
    });
  }

  void add_flag(CLI::App* app, const std::string& flag, const std::string& pointer, const std::string& help) {
    auto value = std::make_shared<bool>(false);
    CLI::Option* opt = app->add_flag(flag, *value, help);
    appliers_.push_back([opt, value, pointer](json& cfg) {
      if (opt->count() > 0) cfg[json::json_pointer(pointer)] = *value;
    });
  }

  void apply(json& cfg) const {
    for (const auto& a : appliers_) a(cfg);
  }

 private:
  std::vector<std::function<void(json&)>> appliers_;
};

void add_common(CLI::App* app, Overrides& ov, std::string& config_path) {
  app->add_option("--config", config_path, "JSON run config");
  ov.add<std::string>(app, "--data", "/dataset/path", "dataset file (dump or CSV)");
  ov.add<std::string>(app, "--kind", "/dataset/kind", "synthetic | dump | two-point-csv | multipoint-csv");
  ov.add<std::string>(app, "--routes", "/dataset/facilities_path", "facility routes file for CSV datasets");
  ov.add<std::size_t>(app, "--users", "/dataset/users", "synthetic user count");
  ov.add<std::size_t>(app, "--points", "/dataset/max_points", "synthetic maximum points per trajectory");
  ov.add<std::size_t>(app, "--min-points", "/dataset/min_points", "synthetic minimum points per trajectory");
  ov.add<std::size_t>(app, "--facilities", "/dataset/facilities", "synthetic facility count");
  ov.add<std::size_t>(app, "--stops", "/dataset/stops", "synthetic stops per facility");
  ov.add<std::string>(app, "--distribution", "/dataset/distribution", "uniform | clustered");
  ov.add<std::size_t>(app, "--hotspots", "/dataset/hotspots", "synthetic hotspot count");
  ov.add<double>(app, "--extent", "/dataset/extent", "synthetic world side in meters");
  ov.add<std::uint64_t>(app, "--data-seed", "/dataset/seed", "synthetic generator seed");
  ov.add<std::string>(app, "--index", "/index", "BL | TQ-basic | TQ-zorder");
  ov.add<std::vector<std::string>>(app, "--methods", "/methods", "methods to compare");
  ov.add<std::string>(app, "--variant", "/variant", "two-point | segmented | full");
  ov.add<std::size_t>(app, "--beta", "/beta", "leaf and z-node capacity");
  ov.add<double>(app, "--psi", "/psi", "service distance");
  ov.add<std::string>(app, "--mode", "/mode", "binary | point-count | length");
  ov.add<std::size_t>(app, "-k,--k", "/k", "result size");
  ov.add<std::size_t>(app, "--kprime", "/kprime", "two-step greedy candidates (0 means 4k)");
  ov.add<std::size_t>(app, "-N,--facility-count", "/facility_count", "facilities sampled per repetition (0 means all)");
  ov.add<std::uint64_t>(app, "--seed", "/seed", "sampling seed");
  ov.add<std::size_t>(app, "-r,--repetitions", "/repetitions", "repetitions");
  ov.add<std::size_t>(app, "--exact-budget", "/exact_budget", "largest subset count for exact enumeration");
  ov.add<std::string>(app, "--sweep", "/sweep/param", "bench parameter: users | stops | facilities | k | beta | psi");
  ov.add<std::vector<std::string>>(app, "--values", "/sweep/values", "bench parameter values");
  ov.add<std::string>(app, "--snapshot", "/snapshot", "index snapshot file");
  ov.add<std::string>(app, "-o,--output", "/output", "results file (default stdout)");
  ov.add<unsigned>(app, "--threads", "/threads", "worker threads (1 keeps everything sequential)");
  ov.add_flag(app, "--eager", "/eager", "evaluate every facility fully instead of best-first");
  ov.add<bool>(app, "--timing", "/timing", "emit timing columns");
}

json load_config(const std::string& path, const Overrides& ov) {
  json cfg = default_config();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read config " + path);
    merge_into(cfg, json::parse(in));
  }
  ov.apply(cfg);
  for (json& v : cfg["sweep"]["values"])
    if (v.is_string()) v = json::parse(v.get<std::string>());
  // A bare --data implies a dump unless the kind says otherwise.
  if (!cfg["dataset"]["path"].get<std::string>().empty() && cfg["dataset"]["kind"] == "synthetic")
    cfg["dataset"]["kind"] = "dump";
  return cfg;
}

ServiceParams service_params(const json& c) {
  ServiceParams p{c["psi"].get<double>(), parse_service_mode(c["mode"].get<std::string>())};
  p.validate();
  return p;
}

TreeOptions tree_options(const json& c, bool zorder) {
  TreeOptions o;
  o.beta = c["beta"].get<std::size_t>();
  o.variant = parse_tree_variant(c["variant"].get<std::string>());
  o.mode = parse_service_mode(c["mode"].get<std::string>());
  o.zorder = zorder;
  return o;
}

enum class Method { BL, TQB, TQZ };

Method parse_method(const std::string& s) {
  if (s == "BL" || s == "bl") return Method::BL;
  if (s == "TQ-basic" || s == "TQ(B)" || s == "tqb") return Method::TQB;
  if (s == "TQ-zorder" || s == "TQ(Z)" || s == "tqz") return Method::TQZ;
  throw Error("unknown method '" + s + "'");
}

const char* method_name(Method m) {
  switch (m) {
    case Method::BL: return "BL";
    case Method::TQB: return "TQ(B)";
    case Method::TQZ: return "TQ(Z)";
  }
  return "?";
}

std::vector<Method> methods(const json& c) {
  std::vector<Method> ms;
  for (const auto& s : c["methods"]) ms.push_back(parse_method(s.get<std::string>()));
  if (ms.empty()) throw Error("no methods selected");
  return ms;
}

// ---------------------------------------------------------------------------
// data

struct World {
  Dataset data;
  Rect bounds;
};

SyntheticSpec synthetic_spec(const json& d) {
  SyntheticSpec s;
  s.users = d["users"].get<std::size_t>();
  s.min_points = d["min_points"].get<std::size_t>();
  s.max_points = d["max_points"].get<std::size_t>();
  s.facilities = d["facilities"].get<std::size_t>();
  s.stops = d["stops"].get<std::size_t>();
  s.distribution = parse_distribution(d["distribution"].get<std::string>());
  s.hotspots = d["hotspots"].get<std::size_t>();
  s.hotspot_radius = d["hotspot_radius"].get<double>();
  s.clustered_share = d["clustered_share"].get<double>();
  s.extent = d["extent"].get<double>();
  s.seed = d["seed"].get<std::uint64_t>();
  return s;
}

CsvOptions csv_options(const json& d) {
  CsvOptions o;
  const std::string delim = d["delimiter"].get<std::string>();
  if (delim.size() != 1) throw Error("delimiter must be one character");
  o.delimiter = delim[0];
  o.header = d["header"].get<bool>();
  const json& c = d["columns"];
  o.pickup_lon = c["pickup_lon"].get<std::string>();
  o.pickup_lat = c["pickup_lat"].get<std::string>();
  o.dropoff_lon = c["dropoff_lon"].get<std::string>();
  o.dropoff_lat = c["dropoff_lat"].get<std::string>();
  o.user = c["user"].get<std::string>();
  o.time = c["time"].get<std::string>();
  o.lon = c["lon"].get<std::string>();
  o.lat = c["lat"].get<std::string>();
  return o;
}

World load_world(const json& c) {
  const json& d = c["dataset"];
  const std::string kind = d["kind"].get<std::string>();
  World w;
  bool have_bounds = false;
  if (kind == "synthetic") {
    auto s = generate_synthetic(synthetic_spec(d));
    w.data = std::move(s.data);
    w.bounds = s.bounds;
    have_bounds = true;
  } else if (kind == "dump") {
    w.data = load_dataset_file(d["path"].get<std::string>());
  } else if (kind == "two-point-csv" || kind == "multipoint-csv") {
    ReadReport rep;
    auto in = open_input(d["path"].get<std::string>());
    const CsvOptions o = csv_options(d);
    w.data.users = kind == "two-point-csv" ? read_two_point_trips(in, o, &rep) : read_multipoint(in, o, &rep);
    std::cerr << "read " << rep.rows << " rows, accepted " << rep.accepted << ", skipped " << rep.skipped
              << ", dropped groups " << rep.dropped_groups << '\n';
    const std::string routes = d["facilities_path"].get<std::string>();
    if (!routes.empty()) {
      auto rin = open_input(routes);
      w.data.facilities = read_facility_routes(rin);
    }
    const std::string proj = d["projection"].get<std::string>();
    if (proj == "equirectangular") {
      project(w.data, fit_projection(w.data));
    } else if (proj != "none") {
      throw Error("unknown projection '" + proj + "'");
    }
  } else {
    throw Error("unknown dataset kind '" + kind + "'");
  }
  const auto expected = d["expected_users"].get<std::size_t>();
  if (expected > 0 && expected != w.data.users.size())
    throw Error("expected " + std::to_string(expected) + " users, read " + std::to_string(w.data.users.size()));
  const json& b = c["bounds"];
  if (b.size() == 4) {
    w.bounds = {{b[0].get<double>(), b[1].get<double>()}, {b[2].get<double>(), b[3].get<double>()}};
  } else if (!b.empty()) {
    throw Error("bounds must list minx miny maxx maxy");
  } else if (!have_bounds) {
    w.bounds = world_bounds(w.data.users, c["psi"].get<double>());
  }
  return w;
}

// Fisher-Yates on the generator's own uniform draws, so the sample depends
// only on the seed.
std::vector<FacilityTrajectory> sample_facilities(const std::vector<FacilityTrajectory>& pool, std::size_t n,
                                                  std::uint64_t seed) {
  if (n == 0 || n >= pool.size()) return pool;
  std::vector<std::size_t> idx(pool.size());
  std::iota(idx.begin(), idx.end(), 0);
  SplitRng rng(seed);
  for (std::size_t i = 0; i < n; ++i) std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  std::vector<FacilityTrajectory> out;
  for (std::size_t i : idx) out.push_back(pool[i]);
  return out;
}

// ---------------------------------------------------------------------------
// output

class Table {
 public:
  Table(const json& cfg, std::vector<std::string> columns) : cols_(std::move(columns)) {
    const std::string path = cfg["output"].get<std::string>();
    if (!path.empty()) {
      file_.open(path, std::ios::binary);
      if (!file_) throw Error("cannot write " + path);
    }
    // Where the results go does not change them.
    json shown = cfg;
    shown.erase("output");
    out() << "# config: " << shown.dump() << '\n';
    row(cols_);
  }

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != cols_.size()) throw Error("internal: row width mismatch");
    for (std::size_t i = 0; i < cells.size(); ++i) out() << (i ? "\t" : "") << cells[i];
    out() << '\n';
  }

  std::ostream& out() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::vector<std::string> cols_;
  std::ofstream file_;
};

std::string num(double v) { return snapshot_detail::num(v); }

std::string ms(const json& cfg, double v) {
  if (!cfg["timing"].get<bool>()) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string ranked_str(const std::vector<RankedFacility>& r) {
  std::string s;
  for (const auto& f : r) s += (s.empty() ? "" : ",") + std::to_string(f.id) + ":" + num(f.score);
  return s;
}

std::string ids_str(const std::vector<FacilityId>& ids) {
  std::string s;
  for (FacilityId id : ids) s += (s.empty() ? "" : ",") + std::to_string(id);
  return s;
}

double mean(const std::vector<double>& v) { return v.empty() ? 0 : std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

double median(std::vector<double> v) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : (v[m - 1] + v[m]) / 2;
}

// ---------------------------------------------------------------------------
// indexes

struct Indexes {
  std::vector<UserTrajectory> users;
  std::optional<PointIndex> bl;
  std::optional<TQTree> tqb, tqz;
  double bl_ms = 0, tqb_ms = 0, tqz_ms = 0;
};

// Builds what `ms` needs. A snapshot, if configured, supplies the users and
// stands in for the tree of its own kind.
Indexes build_indexes(const json& c, const std::vector<UserTrajectory>* users, const Rect& bounds,
                      const std::vector<Method>& ms) {
  Indexes ix;
  Rect b = bounds;
  const std::string snap = c["snapshot"].get<std::string>();
  if (!snap.empty()) {
    TQTree t = load_snapshot_file(snap);
    ix.users.assign(t.users().begin(), t.users().end());
    b = t.bounds();
    (t.options().zorder ? ix.tqz : ix.tqb) = std::move(t);
  } else {
    ix.users = *users;
  }
  const bool want_bl = std::count(ms.begin(), ms.end(), Method::BL) > 0;
  const bool want_b = std::count(ms.begin(), ms.end(), Method::TQB) > 0;
  const bool want_z = std::count(ms.begin(), ms.end(), Method::TQZ) > 0;
  if (want_bl) {
    const auto t0 = clk::now();
    ix.bl = PointIndex::build(ix.users, b, c["beta"].get<std::size_t>());
    ix.bl_ms = ms_since(t0);
  }
  if (want_b && !ix.tqb) {
    const auto t0 = clk::now();
    ix.tqb = TQTree::build(ix.users, b, tree_options(c, false));
    ix.tqb_ms = ms_since(t0);
  }
  if (want_z && !ix.tqz) {
    const auto t0 = clk::now();
    ix.tqz = TQTree::build(ix.users, b, tree_options(c, true));
    ix.tqz_ms = ms_since(t0);
  }
  return ix;
}

struct Run {
  std::vector<RankedFacility> ranked;
  double ms = 0;
  SearchStats stats;
};

Run run_topk(const json& c, const Indexes& ix, Method m, const std::vector<FacilityTrajectory>& F) {
  const ServiceParams p = service_params(c);
  const std::size_t k = c["k"].get<std::size_t>();
  const unsigned threads = resolve_threads(c["threads"].get<unsigned>());
  Run r;
  const auto t0 = clk::now();
  if (m == Method::BL) {
    r.ranked = baseline_topk(*ix.bl, ix.users, F, k, p, threads);
  } else {
    TopKOptions o;
    o.eager = c["eager"].get<bool>();
    o.threads = threads;
    TopKResult res = top_k_facilities(m == Method::TQB ? *ix.tqb : *ix.tqz, F, k, p, o);
    r.ranked = std::move(res.ranked);
    r.stats = res.stats;
  }
  r.ms = ms_since(t0);
  return r;
}

// ---------------------------------------------------------------------------
// subcommands

int cmd_gen(const json& c) {
  const json& d = c["dataset"];
  if (d["kind"] != "synthetic") throw Error("gen needs a synthetic dataset spec");
  const auto w = generate_synthetic(synthetic_spec(d));
  const std::string out = c["output"].get<std::string>();
  if (out.empty()) {
    save_dataset(w.data, std::cout);
  } else {
    save_dataset_file(w.data, out);
    std::cerr << "wrote " << w.data.users.size() << " users and " << w.data.facilities.size() << " facilities to "
              << out << '\n';
  }
  return 0;
}

int cmd_build(const json& c) {
  World w = load_world(c);
  const Method m = parse_method(c["index"].get<std::string>());
  Table t(c, {"index", "variant", "beta", "users", "entries", "nodes", "height", "build_ms", "invariants", "snapshot"});
  if (m == Method::BL) {
    const auto t0 = clk::now();
    const PointIndex ix = PointIndex::build(w.data.users, w.bounds, c["beta"].get<std::size_t>());
    const double el = ms_since(t0);
    t.row({"BL", "-", std::to_string(c["beta"].get<std::size_t>()), std::to_string(w.data.users.size()),
           std::to_string(ix.size()), std::to_string(ix.nodes().size()), "-", ms(c, el), "n/a", "-"});
    return 0;
  }
  const auto t0 = clk::now();
  const TQTree tree = TQTree::build(w.data.users, w.bounds, tree_options(c, m == Method::TQZ));
  const double el = ms_since(t0);
  const auto bad = tree.check_invariants();
  for (const auto& b : bad) std::cerr << "invariant violated: " << b << '\n';
  std::string snap = c["snapshot"].get<std::string>();
  bool snap_ok = true;
  if (!snap.empty()) {
    save_snapshot_file(tree, snap);
    // The written file must load back to the same bytes.
    snap_ok = snapshot_string(load_snapshot_file(snap)) == snapshot_string(tree);
    if (!snap_ok) std::cerr << "snapshot round trip differs\n";
  }
  const TreeStats s = tree.stats();
  t.row({method_name(m), to_string(tree.options().variant), std::to_string(tree.options().beta),
         std::to_string(tree.users().size()), std::to_string(s.entries), std::to_string(s.nodes),
         std::to_string(s.height), ms(c, el), bad.empty() ? "ok" : std::to_string(bad.size()) + " violated",
         snap.empty() ? "-" : snap});
  std::cerr << "built " << method_name(m) << " over " << tree.users().size() << " users in " << el << " ms\n";
  return bad.empty() && snap_ok ? 0 : 1;
}

int cmd_topk(const json& c) {
  const std::vector<Method> ms_ = methods(c);
  World w = load_world(c);
  if (w.data.facilities.empty()) throw Error("dataset has no facilities");
  Indexes ix = build_indexes(c, &w.data.users, w.bounds, ms_);
  Table t(c, {"rep", "method", "latency_ms", "relaxations", "finalized", "entries_scanned", "result", "agree"});
  const auto reps = c["repetitions"].get<std::size_t>();
  const auto seed = c["seed"].get<std::uint64_t>();
  bool all_agree = true;
  for (std::size_t r = 0; r < reps; ++r) {
    const auto F = sample_facilities(w.data.facilities, c["facility_count"].get<std::size_t>(), seed + r);
    std::vector<Run> runs;
    for (Method m : ms_) runs.push_back(run_topk(c, ix, m, F));
    bool agree = true;
    for (const Run& x : runs) agree = agree && x.ranked == runs.front().ranked;
    all_agree = all_agree && agree;
    for (std::size_t i = 0; i < ms_.size(); ++i) {
      const bool tree = ms_[i] != Method::BL;
      t.row({std::to_string(r), method_name(ms_[i]), ms(c, runs[i].ms),
             tree ? std::to_string(runs[i].stats.relaxations) : "-",
             tree ? std::to_string(runs[i].stats.finalized) : "-",
             tree ? std::to_string(runs[i].stats.entries_scanned) : "-", ranked_str(runs[i].ranked),
             agree ? "yes" : "NO"});
    }
  }
  if (!all_agree) std::cerr << "methods disagree on at least one repetition\n";
  return all_agree ? 0 : 1;
}

int cmd_maxkcov(const json& c) {
  const std::vector<Method> ms_ = methods(c);
  World w = load_world(c);
  if (w.data.facilities.empty()) throw Error("dataset has no facilities");
  Indexes ix = build_indexes(c, &w.data.users, w.bounds, ms_);
  const ServiceParams p = service_params(c);
  const auto k = c["k"].get<std::size_t>();
  const unsigned threads = resolve_threads(c["threads"].get<unsigned>());
  const auto budget = c["exact_budget"].get<std::size_t>();
  Table t(c, {"rep", "method", "latency_ms", "kprime", "chosen", "value", "exact_value", "ratio"});
  const auto reps = c["repetitions"].get<std::size_t>();
  const auto seed = c["seed"].get<std::uint64_t>();
  bool ok = true;
  for (std::size_t r = 0; r < reps; ++r) {
    const auto F = sample_facilities(w.data.facilities, c["facility_count"].get<std::size_t>(), seed + r);
    if (k > F.size()) throw Error("k exceeds the facility count");
    std::size_t kp = c["kprime"].get<std::size_t>();
    if (kp == 0) kp = 4 * k;
    kp = std::clamp(kp, k, F.size());

    std::optional<CoverageSolution> exact;
    if (binomial_capped(F.size(), k, budget) <= budget)
      exact = exact_maxkcov(ix.users, coverage_table_linear(ix.users, F, p.psi), k, p.mode, budget);

    for (Method m : ms_) {
      const auto t0 = clk::now();
      CoverageSolution s;
      std::size_t used_kp = F.size();
      if (m == Method::BL) {
        s = greedy_maxkcov(ix.users, coverage_table_baseline(*ix.bl, ix.users, F, p.psi, threads), k, p.mode, threads);
      } else {
        s = two_step_greedy(m == Method::TQB ? *ix.tqb : *ix.tqz, F, k, kp, p, threads);
        used_kp = kp;
      }
      const double el = ms_since(t0);
      std::string ex = "-", ratio = "-";
      if (exact) {
        ex = num(exact->value);
        ratio = exact->value > 0 ? num(s.value / exact->value) : "1";
        // A greedy answer can never beat the optimum.
        if (s.total > exact->total) ok = false;
      }
      t.row({std::to_string(r), std::string("G-") + method_name(m), ms(c, el), std::to_string(used_kp),
             ids_str(s.chosen), num(s.value), ex, ratio});
    }
    if (exact)
      t.row({std::to_string(r), "exact", "-", "-", ids_str(exact->chosen), num(exact->value), num(exact->value), "1"});
  }
  return ok ? 0 : 1;
}

int cmd_bench(const json& c) {
  const std::vector<Method> ms_ = methods(c);
  if (c["dataset"]["kind"] != "synthetic") throw Error("bench sweeps synthetic datasets only");
  const std::string param = c["sweep"]["param"].get<std::string>();
  static const std::map<std::string, std::string> where{{"users", "/dataset/users"},
                                                        {"stops", "/dataset/stops"},
                                                        {"facilities", "/facility_count"},
                                                        {"k", "/k"},
                                                        {"beta", "/beta"},
                                                        {"psi", "/psi"}};
  const auto it = where.find(param);
  if (it == where.end()) throw Error("cannot sweep '" + param + "'");

  Table t(c, {"param", "value", "method", "reps", "mean_ms", "median_ms", "speedup_mean", "speedup_median",
              "agree"});
  bool all_agree = true;
  std::string built_for;
  Indexes ix;
  std::vector<UserTrajectory> users;
  for (const json& v : c["sweep"]["values"]) {
    json cell = c;
    cell[json::json_pointer(it->second)] = v;
    const auto reps = cell["repetitions"].get<std::size_t>();
    std::size_t n = cell["facility_count"].get<std::size_t>();
    if (n == 0) n = cell["dataset"]["facilities"].get<std::size_t>();
    // One fresh, disjoint facility set per repetition.
    cell["dataset"]["facilities"] = n * reps;
    const auto world = generate_synthetic(synthetic_spec(cell["dataset"]));
    const std::string key = cell["dataset"]["users"].dump() + "/" + cell["beta"].dump();
    if (key != built_for) {
      ix = build_indexes(cell, &world.data.users, world.bounds, ms_);
      built_for = key;
    }
    std::vector<std::vector<double>> times(ms_.size());
    bool agree = true;
    for (std::size_t r = 0; r < reps; ++r) {
      const auto first = world.data.facilities.begin() + static_cast<std::ptrdiff_t>(r * n);
      const std::vector<FacilityTrajectory> F(first, first + static_cast<std::ptrdiff_t>(n));
      std::vector<RankedFacility> ref;
      for (std::size_t i = 0; i < ms_.size(); ++i) {
        const Run run = run_topk(cell, ix, ms_[i], F);
        times[i].push_back(run.ms);
        if (i == 0) ref = run.ranked;
        agree = agree && run.ranked == ref;
      }
    }
    all_agree = all_agree && agree;
    std::optional<std::size_t> bl;
    for (std::size_t i = 0; i < ms_.size(); ++i)
      if (ms_[i] == Method::BL) bl = i;
    for (std::size_t i = 0; i < ms_.size(); ++i) {
      const double mn = mean(times[i]), md = median(times[i]);
      std::string sm = "-", sd = "-";
      if (bl && c["timing"].get<bool>()) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", mean(times[*bl]) / mn);
        sm = buf;
        std::snprintf(buf, sizeof buf, "%.2f", median(times[*bl]) / md);
        sd = buf;
      }
      t.row({param, v.dump(), method_name(ms_[i]), std::to_string(reps), ms(c, mn), ms(c, md), sm, sd,
             agree ? "yes" : "NO"});
    }
    t.out().flush();
  }
  return all_agree ? 0 : 1;
}

int cmd_inspect(const json& c) {
  const std::string snap = c["snapshot"].get<std::string>();
  if (snap.empty()) throw Error("inspect needs --snapshot");
  const TQTree tree = load_snapshot_file(snap);
  const TreeStats s = tree.stats();
  const auto bad = tree.check_invariants();
  Table t(c, {"depth", "nodes", "leaves", "entries", "znodes", "max_ul"});
  std::map<int, TreeStats> by_depth;
  for (const QNode& q : tree.nodes()) {
    TreeStats& d = by_depth[q.depth];
    ++d.nodes;
    d.leaves += q.leaf() ? 1 : 0;
    d.entries += q.ul.size();
    d.znodes += tree.znode_count(q);
    d.max_ul = std::max(d.max_ul, q.ul.size());
  }
  for (const auto& [depth, d] : by_depth)
    t.row({std::to_string(depth), std::to_string(d.nodes), std::to_string(d.leaves), std::to_string(d.entries),
           std::to_string(d.znodes), std::to_string(d.max_ul)});
  t.row({"all", std::to_string(s.nodes), std::to_string(s.leaves), std::to_string(s.entries),
         std::to_string(s.znodes), std::to_string(s.max_ul)});
  const TreeOptions& o = tree.options();
  std::cerr << "variant " << to_string(o.variant) << ", mode " << to_string(o.mode) << ", beta " << o.beta
            << ", z-order " << (o.zorder ? "on" : "off") << ", users " << tree.users().size() << ", height "
            << s.height << ", root s_ub " << to_double(tree.root().s_ub) << '\n';
  for (const auto& b : bad) std::cerr << "invariant violated: " << b << '\n';
  return bad.empty() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TQ-tree index and query tool"};
  app.require_subcommand(1);

  struct Sub {
    CLI::App* app;
    std::function<int(const json&)> run;
    Overrides ov;
    std::string config;
  };
  std::vector<std::unique_ptr<Sub>> subs;
  auto add = [&](const char* name, const char* help, std::function<int(const json&)> run) {
    auto s = std::make_unique<Sub>();
    s->app = app.add_subcommand(name, help);
    s->run = std::move(run);
    add_common(s->app, s->ov, s->config);
    subs.push_back(std::move(s));
  };
  add("gen", "write a synthetic dataset dump", cmd_gen);
  add("build", "build an index, check invariants, save a snapshot", cmd_build);
  add("topk", "run kMaxRRST over sampled facility sets", cmd_topk);
  add("maxkcov", "run greedy MaxkCovRST, with the exact optimum when affordable", cmd_maxkcov);
  add("bench", "sweep one parameter and compare methods", cmd_bench);
  add("inspect", "print per-depth statistics of a snapshot", cmd_inspect);
  add("genetic", "genetic optimizer (not available)", [](const json&) {
    std::cerr << "genetic: unimplemented\n";
    return 2;
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  try {
    for (const auto& s : subs)
      if (s->app->parsed()) return s->run(load_config(s->config, s->ov));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
