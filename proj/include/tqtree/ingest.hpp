// ingest.hpp
//
// Readers for trip and check-in files, facility route files, a lon/lat
// projection, the synthetic workload generator and a plain-text dataset dump.

#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <istream>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <tuple>
#include <vector>

#include "tqtree/core.hpp"

namespace tq {

struct Dataset {
  std::vector<UserTrajectory> users;
  std::vector<FacilityTrajectory> facilities;
};

struct ReadReport {
  std::size_t rows = 0;
  std::size_t accepted = 0;
  std::size_t skipped = 0;
  std::size_t dropped_groups = 0;  // multi-point groups with a single record
};

// ---------------------------------------------------------------------------
// projection

// Equirectangular projection about a reference point; output in meters.
struct Projection {
  static constexpr double kEarthRadius = 6371008.8;
  double lon0 = 0;
  double lat0 = 0;

  Point forward(double lon, double lat) const {
    const double k = std::numbers::pi / 180.0;
    return {kEarthRadius * (lon - lon0) * k * std::cos(lat0 * k), kEarthRadius * (lat - lat0) * k};
  }

  std::pair<double, double> inverse(Point p) const {
    const double k = std::numbers::pi / 180.0;
    return {lon0 + p.x / (kEarthRadius * k * std::cos(lat0 * k)), lat0 + p.y / (kEarthRadius * k)};
  }
};

// Reference at the mean coordinate of every point (x = lon, y = lat).
inline Projection fit_projection(const Dataset& geo) {
  double sx = 0, sy = 0;
  std::size_t n = 0;
  for (const auto& u : geo.users)
    for (const Point& p : u.points) sx += p.x, sy += p.y, ++n;
  for (const auto& f : geo.facilities)
    for (const Point& p : f.stops) sx += p.x, sy += p.y, ++n;
  if (n == 0) return {};
  return {sx / static_cast<double>(n), sy / static_cast<double>(n)};
}

inline void project(Dataset& geo, const Projection& pr) {
  for (auto& u : geo.users)
    for (Point& p : u.points) p = pr.forward(p.x, p.y);
  for (auto& f : geo.facilities)
    for (Point& p : f.stops) p = pr.forward(p.x, p.y);
}

// ---------------------------------------------------------------------------
// delimited text

struct CsvOptions {
  char delimiter = ',';
  bool header = true;
  // Column names (matched against the header) or zero-based indices.
  std::string pickup_lon = "pickup_longitude";
  std::string pickup_lat = "pickup_latitude";
  std::string dropoff_lon = "dropoff_longitude";
  std::string dropoff_lat = "dropoff_latitude";
  std::string user = "user";
  std::string time = "timestamp";
  std::string lon = "longitude";
  std::string lat = "latitude";
};

namespace ingest_detail {

inline std::vector<std::string_view> split(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t p = line.find(delim, start);
    std::string_view f = line.substr(start, p == std::string_view::npos ? std::string_view::npos : p - start);
    while (!f.empty() && (f.front() == ' ' || f.front() == '"')) f.remove_prefix(1);
    while (!f.empty() && (f.back() == ' ' || f.back() == '"' || f.back() == '\r')) f.remove_suffix(1);
    out.push_back(f);
    if (p == std::string_view::npos) break;
    start = p + 1;
  }
  return out;
}

inline std::optional<double> to_double(std::string_view s) {
  double v = 0;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::size_t resolve_column(const std::string& spec, const std::vector<std::string_view>& header) {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == spec) return i;
  std::size_t idx = 0;
  auto [p, ec] = std::from_chars(spec.data(), spec.data() + spec.size(), idx);
  if (ec == std::errc() && p == spec.data() + spec.size()) return idx;
  throw Error("column '" + spec + "' not found");
}

// Seconds since the epoch and the UTC day number, from either an integer
// epoch or "YYYY-MM-DD[ T]HH:MM[:SS]".
inline std::optional<std::pair<double, std::int64_t>> parse_time(std::string_view s) {
  if (s.size() >= 10 && s[4] == '-' && s[7] == '-') {
    int y = 0, mo = 0, d = 0, h = 0, mi = 0;
    double sec = 0;
    auto num = [&](std::size_t off, std::size_t len, int& out) {
      auto [p, ec] = std::from_chars(s.data() + off, s.data() + off + len, out);
      return ec == std::errc() && p == s.data() + off + len;
    };
    if (!num(0, 4, y) || !num(5, 2, mo) || !num(8, 2, d)) return std::nullopt;
    if (mo < 1 || mo > 12 || d < 1 || d > 31) return std::nullopt;
    if (s.size() > 10) {
      if ((s[10] != ' ' && s[10] != 'T') || s.size() < 16 || s[13] != ':') return std::nullopt;
      if (!num(11, 2, h) || !num(14, 2, mi)) return std::nullopt;
      if (s.size() > 16) {
        if (s[16] != ':') return std::nullopt;
        std::string_view rest = s.substr(17);
        while (!rest.empty() && (rest.back() == 'Z')) rest.remove_suffix(1);
        auto v = to_double(rest);
        if (!v) return std::nullopt;
        sec = *v;
      }
    }
    // Days from civil date (proleptic Gregorian).
    const int yy = y - (mo <= 2 ? 1 : 0);
    const int era = (yy >= 0 ? yy : yy - 399) / 400;
    const int yoe = yy - era * 400;
    const int doy = (153 * (mo + (mo > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const int doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    const std::int64_t days = static_cast<std::int64_t>(era) * 146097 + doe - 719468;
    return std::pair{static_cast<double>(days) * 86400.0 + h * 3600.0 + mi * 60.0 + sec, days};
  }
  auto v = to_double(s);
  if (!v) return std::nullopt;
  return std::pair{*v, static_cast<std::int64_t>(std::floor(*v / 86400.0))};
}

}  // namespace ingest_detail

// One 2-point trajectory per row, coordinates as (lon, lat). Rows with a
// missing, malformed or zero coordinate are skipped and counted.
inline std::vector<UserTrajectory> read_two_point_trips(std::istream& in, const CsvOptions& opt, ReadReport* report = nullptr) {
  using namespace ingest_detail;
  ReadReport rep;
  std::vector<UserTrajectory> out;
  std::string line;
  std::array<std::size_t, 4> col{0, 1, 2, 3};
  std::vector<std::string_view> header;
  std::string header_line;
  if (opt.header) {
    if (!std::getline(in, header_line)) throw Error("trip file is empty");
    header = split(header_line, opt.delimiter);
  }
  col = {resolve_column(opt.pickup_lon, header), resolve_column(opt.pickup_lat, header),
         resolve_column(opt.dropoff_lon, header), resolve_column(opt.dropoff_lat, header)};
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    ++rep.rows;
    const auto f = split(line, opt.delimiter);
    std::array<double, 4> v{};
    bool ok = true;
    for (int i = 0; i < 4 && ok; ++i) {
      if (col[i] >= f.size()) { ok = false; break; }
      const auto d = to_double(f[col[i]]);
      ok = d && *d != 0.0;
      if (ok) v[i] = *d;
    }
    if (!ok) {
      ++rep.skipped;
      continue;
    }
    out.push_back({static_cast<TrajId>(out.size()), {{v[0], v[1]}, {v[2], v[3]}}});
    ++rep.accepted;
  }
  if (report) *report = rep;
  return out;
}

// Check-ins grouped per (user, UTC day), ordered by time; groups with fewer
// than two records are dropped and counted. Trajectory ids follow the order
// of (user, day).
inline std::vector<UserTrajectory> read_multipoint(std::istream& in, const CsvOptions& opt, ReadReport* report = nullptr) {
  using namespace ingest_detail;
  ReadReport rep;
  std::string line, header_line;
  std::vector<std::string_view> header;
  if (opt.header) {
    if (!std::getline(in, header_line)) throw Error("check-in file is empty");
    header = split(header_line, opt.delimiter);
  }
  const std::size_t cu = resolve_column(opt.user, header), ct = resolve_column(opt.time, header),
                    cx = resolve_column(opt.lon, header), cy = resolve_column(opt.lat, header);
  struct Rec {
    double t;
    std::size_t seq;
    Point p;
  };
  std::map<std::pair<std::string, std::int64_t>, std::vector<Rec>> groups;
  std::size_t seq = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    ++rep.rows;
    const auto f = split(line, opt.delimiter);
    if (std::max({cu, ct, cx, cy}) >= f.size() || f[cu].empty()) {
      ++rep.skipped;
      continue;
    }
    const auto t = parse_time(f[ct]);
    const auto x = to_double(f[cx]);
    const auto y = to_double(f[cy]);
    if (!t || !x || !y) {
      ++rep.skipped;
      continue;
    }
    groups[{std::string(f[cu]), t->second}].push_back({t->first, seq++, {*x, *y}});
    ++rep.accepted;
  }
  std::vector<UserTrajectory> out;
  for (auto& [key, recs] : groups) {
    if (recs.size() < 2) {
      ++rep.dropped_groups;
      continue;
    }
    std::stable_sort(recs.begin(), recs.end(), [](const Rec& a, const Rec& b) { return a.t < b.t; });
    UserTrajectory u{static_cast<TrajId>(out.size()), {}};
    for (const Rec& r : recs) u.points.push_back(r.p);
    out.push_back(std::move(u));
  }
  if (report) *report = rep;
  return out;
}

// One route per line: id followed by lon/lat pairs, separated by commas or
// whitespace. Lines starting with '#' are ignored.
inline std::vector<FacilityTrajectory> read_facility_routes(std::istream& in) {
  std::vector<FacilityTrajectory> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    std::string tok;
    if (!(ss >> tok) || tok.front() == '#') continue;
    FacilityTrajectory f;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), f.id);
    if (ec != std::errc() || p != tok.data() + tok.size())
      throw Error("route line " + std::to_string(lineno) + ": bad facility id");
    std::vector<double> v;
    while (ss >> tok) {
      const auto d = ingest_detail::to_double(tok);
      if (!d) throw Error("route line " + std::to_string(lineno) + ": bad coordinate '" + tok + "'");
      v.push_back(*d);
    }
    if (v.empty() || v.size() % 2) throw Error("route line " + std::to_string(lineno) + ": odd coordinate count");
    for (std::size_t i = 0; i < v.size(); i += 2) f.stops.push_back({v[i], v[i + 1]});
    out.push_back(std::move(f));
  }
  return out;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  return in;
}

// ---------------------------------------------------------------------------
// point order option

inline std::uint64_t morton_code(Point p, const Rect& bounds) {
  auto cell = [](double v, double lo, double hi) {
    const double t = hi > lo ? (v - lo) / (hi - lo) : 0.0;
    return static_cast<std::uint32_t>(std::clamp(t, 0.0, 1.0) * 4294967295.0);
  };
  auto spread = [](std::uint64_t v) {
    v = (v | (v << 16)) & 0x0000FFFF0000FFFFull;
    v = (v | (v << 8)) & 0x00FF00FF00FF00FFull;
    v = (v | (v << 4)) & 0x0F0F0F0F0F0F0F0Full;
    v = (v | (v << 2)) & 0x3333333333333333ull;
    v = (v | (v << 1)) & 0x5555555555555555ull;
    return v;
  };
  return spread(cell(p.x, bounds.min.x, bounds.max.x)) | (spread(cell(p.y, bounds.min.y, bounds.max.y)) << 1);
}

// For trajectories whose point order carries no meaning.
inline void order_points_by_zorder(std::vector<UserTrajectory>& users, const Rect& bounds) {
  for (auto& u : users)
    std::stable_sort(u.points.begin(), u.points.end(),
                     [&](Point a, Point b) { return morton_code(a, bounds) < morton_code(b, bounds); });
}

// ---------------------------------------------------------------------------
// synthetic workloads

enum class Distribution : std::uint8_t { Uniform, Clustered };

inline const char* to_string(Distribution d) { return d == Distribution::Uniform ? "uniform" : "clustered"; }

inline Distribution parse_distribution(const std::string& s) {
  if (s == "uniform") return Distribution::Uniform;
  if (s == "clustered") return Distribution::Clustered;
  throw Error("unknown distribution '" + s + "'");
}

struct SyntheticSpec {
  std::size_t users = 1000;
  std::size_t min_points = 2;
  std::size_t max_points = 2;
  std::size_t facilities = 64;
  std::size_t stops = 32;
  Distribution distribution = Distribution::Clustered;
  std::size_t hotspots = 24;
  double hotspot_radius = 600;  // meters
  double clustered_share = 0.8; // endpoints drawn near a hotspot
  double extent = 20000;        // side of the square world, meters
  std::uint64_t seed = 1;

  void validate() const {
    if (min_points < 2 || max_points < min_points) throw Error("points per trajectory must satisfy 2 <= min <= max");
    if (stops < 1) throw Error("facilities need at least one stop");
    if (!(extent > 0) || !(hotspot_radius > 0)) throw Error("extent and hotspot radius must be positive");
    if (distribution == Distribution::Clustered && hotspots < 1) throw Error("clustered data needs hotspots");
    if (clustered_share < 0 || clustered_share > 1) throw Error("clustered share must lie in [0, 1]");
  }
};

// Uniform doubles and normals derived directly from the 64-bit engine output,
// so generated data does not depend on the standard library's distributions.
class SplitRng {
 public:
  explicit SplitRng(std::uint64_t seed) : eng_(seed) {}
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n; }
  double normal() {
    double u1 = uniform();
    while (u1 <= 0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 eng_;
};

struct SyntheticWorld {
  Dataset data;
  std::vector<Point> hotspots;
  Rect bounds;
};

inline SyntheticWorld generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  SplitRng rng(spec.seed);
  SyntheticWorld w;
  const double L = spec.extent;
  w.bounds = {{0, 0}, {L, L}};
  auto clamp_in = [&](Point p) { return Point{std::clamp(p.x, 0.0, L), std::clamp(p.y, 0.0, L)}; };
  auto anywhere = [&] { return Point{rng.uniform(0, L), rng.uniform(0, L)}; };

  if (spec.distribution == Distribution::Clustered) {
    const double margin = std::min(L / 4, 2 * spec.hotspot_radius);
    for (std::size_t i = 0; i < spec.hotspots; ++i)
      w.hotspots.push_back({rng.uniform(margin, L - margin), rng.uniform(margin, L - margin)});
  }
  auto near_hotspot = [&](std::size_t h) {
    const double s = spec.hotspot_radius / 2;
    return clamp_in({w.hotspots[h].x + s * rng.normal(), w.hotspots[h].y + s * rng.normal()});
  };
  auto endpoint = [&] {
    if (spec.distribution == Distribution::Uniform || rng.uniform() >= spec.clustered_share) return anywhere();
    return near_hotspot(rng.below(w.hotspots.size()));
  };

  w.data.users.reserve(spec.users);
  for (std::size_t i = 0; i < spec.users; ++i) {
    const std::size_t n = spec.min_points + rng.below(spec.max_points - spec.min_points + 1);
    const Point a = endpoint();
    const Point b = endpoint();
    UserTrajectory u{static_cast<TrajId>(i), {}};
    u.points.reserve(n);
    u.points.push_back(a);
    const double jitter = spec.hotspot_radius / 4;
    for (std::size_t k = 1; k + 1 < n; ++k) {
      const double t = static_cast<double>(k) / static_cast<double>(n - 1);
      u.points.push_back(clamp_in({a.x + t * (b.x - a.x) + jitter * rng.normal(),
                                   a.y + t * (b.y - a.y) + jitter * rng.normal()}));
    }
    u.points.push_back(b);
    w.data.users.push_back(std::move(u));
  }

  // Routes: a polyline through 2-4 waypoints (hotspots when clustered) with
  // stops spaced evenly along it.
  for (std::size_t i = 0; i < spec.facilities; ++i) {
    std::vector<Point> way;
    const std::size_t nw = 2 + rng.below(3);
    for (std::size_t k = 0; k < nw; ++k)
      way.push_back(spec.distribution == Distribution::Clustered ? near_hotspot(rng.below(w.hotspots.size()))
                                                                 : anywhere());
    std::vector<double> acc{0};
    for (std::size_t k = 1; k < way.size(); ++k) acc.push_back(acc.back() + dist(way[k - 1], way[k]));
    FacilityTrajectory f{static_cast<FacilityId>(i), {}};
    for (std::size_t s = 0; s < spec.stops; ++s) {
      const double target = spec.stops == 1 ? 0 : acc.back() * static_cast<double>(s) / static_cast<double>(spec.stops - 1);
      std::size_t k = 1;
      while (k + 1 < way.size() && acc[k] < target) ++k;
      const double seg = acc[k] - acc[k - 1];
      const double t = seg > 0 ? std::clamp((target - acc[k - 1]) / seg, 0.0, 1.0) : 0.0;
      f.stops.push_back(clamp_in({way[k - 1].x + t * (way[k].x - way[k - 1].x) + 20 * rng.normal(),
                                  way[k - 1].y + t * (way[k].y - way[k - 1].y) + 20 * rng.normal()}));
    }
    w.data.facilities.push_back(std::move(f));
  }
  return w;
}

// ---------------------------------------------------------------------------
// dataset dump

inline void save_dataset(const Dataset& d, std::ostream& out) {
  auto num = [](double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
  };
  out << "tqdata 1\n";
  out << "users " << d.users.size() << '\n';
  for (const auto& u : d.users) {
    out << "u " << u.id;
    for (const Point& p : u.points) out << ' ' << num(p.x) << ' ' << num(p.y);
    out << '\n';
  }
  out << "facilities " << d.facilities.size() << '\n';
  for (const auto& f : d.facilities) {
    out << "f " << f.id;
    for (const Point& p : f.stops) out << ' ' << num(p.x) << ' ' << num(p.y);
    out << '\n';
  }
}

inline Dataset load_dataset(std::istream& in) {
  Dataset d;
  std::string line, tag;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& what) { throw Error("dataset line " + std::to_string(lineno) + ": " + what); };
  auto next = [&] {
    if (!std::getline(in, line)) fail("unexpected end of file");
    ++lineno;
    return std::istringstream(line);
  };
  {
    auto ss = next();
    std::string v;
    ss >> tag >> v;
    if (tag != "tqdata" || v != "1") fail("not a tqdata v1 file");
  }
  auto read_points = [&](std::istringstream& ss, std::vector<Point>& pts) {
    std::string a, b;
    while (ss >> a) {
      if (!(ss >> b)) fail("odd coordinate count");
      const auto x = ingest_detail::to_double(a);
      const auto y = ingest_detail::to_double(b);
      if (!x || !y) fail("bad coordinate");
      pts.push_back({*x, *y});
    }
  };
  std::size_t n = 0;
  {
    auto ss = next();
    if (!(ss >> tag >> n) || tag != "users") fail("expected user count");
  }
  for (std::size_t i = 0; i < n; ++i) {
    auto ss = next();
    UserTrajectory u;
    if (!(ss >> tag >> u.id) || tag != "u") fail("expected user record");
    read_points(ss, u.points);
    d.users.push_back(std::move(u));
  }
  {
    auto ss = next();
    if (!(ss >> tag >> n) || tag != "facilities") fail("expected facility count");
  }
  for (std::size_t i = 0; i < n; ++i) {
    auto ss = next();
    FacilityTrajectory f;
    if (!(ss >> tag >> f.id) || tag != "f") fail("expected facility record");
    read_points(ss, f.stops);
    d.facilities.push_back(std::move(f));
  }
  return d;
}

inline void save_dataset_file(const Dataset& d, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  save_dataset(d, out);
  if (!out) throw Error("write failed for " + path);
}

inline Dataset load_dataset_file(const std::string& path) {
  auto in = open_input(path);
  return load_dataset(in);
}

}  // namespace tq
