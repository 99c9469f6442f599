#pragma once

#include "warpfield/common.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace warpfield {

struct Event {
  long period = 1;  // one-hour index, starting at 1
  Point location = Point::Zero();
};

/// Immutable collection of events ordered by period (insertion order kept
/// within a period).
class EventStore {
 public:
  EventStore() = default;

  explicit EventStore(std::vector<Event> events) : events_(std::move(events)) {
    for (const auto& e : events_) {
      if (e.period < 1) throw ValidationError("event period must be >= 1");
      if (!std::isfinite(e.location.x()) || !std::isfinite(e.location.y()))
        throw ValidationError("event coordinates must be finite");
    }
    std::stable_sort(events_.begin(), events_.end(),
                     [](const Event& a, const Event& b) { return a.period < b.period; });
  }

  const std::vector<Event>& events() const { return events_; }
  std::size_t size() const { return events_.size(); }
  bool empty() const { return events_.empty(); }

  /// Events with period in [first, last].
  std::vector<Event> range(long first, long last) const {
    if (last < first) return {};
    auto lo = std::lower_bound(events_.begin(), events_.end(), first,
                               [](const Event& e, long p) { return e.period < p; });
    auto hi = std::upper_bound(events_.begin(), events_.end(), last,
                               [](long p, const Event& e) { return p < e.period; });
    return {lo, hi};
  }

  std::vector<Event> at(long period) const { return range(period, period); }

  /// n_t
  std::size_t count(long period) const {
    auto lo = std::lower_bound(events_.begin(), events_.end(), period,
                               [](const Event& e, long p) { return e.period < p; });
    auto hi = std::upper_bound(lo, events_.end(), period,
                               [](long p, const Event& e) { return p < e.period; });
    return static_cast<std::size_t>(hi - lo);
  }

  long first_period() const { return events_.empty() ? 0 : events_.front().period; }
  long last_period() const { return events_.empty() ? 0 : events_.back().period; }

 private:
  std::vector<Event> events_;
};

inline void require_history(long u, int weeks) {
  if (weeks < 1) throw ValidationError("week count must be >= 1");
  if (u <= static_cast<long>(kWeekLength) * weeks)
    throw InsufficientHistory("period " + std::to_string(u) + " needs more than " +
                              std::to_string(kWeekLength * weeks) + " periods of history");
}

/// Events from the same hour-of-week slot in each of the preceding `weeks`
/// weeks, ordered by (period, insertion).
inline std::vector<Event> labeled_set(const EventStore& store, long u, int weeks) {
  require_history(u, weeks);
  std::vector<Event> out;
  for (int m = weeks; m >= 1; --m) {
    auto slice = store.at(u - static_cast<long>(kWeekLength) * m);
    out.insert(out.end(), slice.begin(), slice.end());
  }
  return out;
}

/// All events in the preceding `weeks` weeks regardless of slot.
inline std::vector<Event> past_window(const EventStore& store, long u, int weeks) {
  require_history(u, weeks);
  return store.range(u - static_cast<long>(kWeekLength) * weeks, u - 1);
}

inline std::vector<Point> locations(const std::vector<Event>& events) {
  std::vector<Point> out;
  out.reserve(events.size());
  for (const auto& e : events) out.push_back(e.location);
  return out;
}

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n'))
    s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  std::string tmp(s);
  char* end = nullptr;
  out = std::strtod(tmp.c_str(), &end);
  return end == tmp.c_str() + tmp.size() && std::isfinite(out);
}

inline bool parse_long(std::string_view s, long& out) {
  if (s.empty()) return false;
  std::string tmp(s);
  char* end = nullptr;
  out = std::strtol(tmp.c_str(), &end, 10);
  return end == tmp.c_str() + tmp.size();
}

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline EventStore parse_csv(std::istream& in) {
  std::string line;
  long lineno = 0;
  bool header = false;
  std::vector<Event> events;
  while (std::getline(in, line)) {
    ++lineno;
    const auto row = detail::trim(line);
    if (!header) {
      if (row != "period,x_km,y_km") throw ParseError("expected header 'period,x_km,y_km'", lineno);
      header = true;
      continue;
    }
    if (row.empty()) continue;
    const auto fields = detail::split(row, ',');
    Event e;
    double x = 0, y = 0;
    if (fields.size() != 3 || !detail::parse_long(fields[0], e.period) ||
        !detail::parse_double(fields[1], x) || !detail::parse_double(fields[2], y))
      throw ParseError("malformed row", lineno);
    if (e.period < 1)
      throw ValidationError("non-positive period at line " + std::to_string(lineno));
    e.location = Point(x, y);
    events.push_back(e);
  }
  if (!header) throw ParseError("missing header", 1);
  return EventStore(std::move(events));
}

inline EventStore ingest_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  return parse_csv(in);
}

inline void write_csv(std::ostream& out, const std::vector<Event>& events) {
  out << "period,x_km,y_km\n";
  for (const auto& e : events)
    out << e.period << ',' << detail::fmt_double(e.location.x()) << ','
        << detail::fmt_double(e.location.y()) << '\n';
}

inline void export_csv(const std::string& path, const EventStore& store) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path);
  write_csv(out, store.events());
}

// ---------------------------------------------------------------------------
// Polygon helpers

inline bool point_in_polygon(const Point& p, const std::vector<Point>& poly) {
  bool inside = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point& a = poly[i];
    const Point& b = poly[j];
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const double xcross = (b.x() - a.x()) * (p.y() - a.y()) / (b.y() - a.y()) + a.x();
      if (p.x() < xcross) inside = !inside;
    }
  }
  return inside;
}

inline double polygon_area(const std::vector<Point>& poly) {
  double a = 0;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++)
    a += poly[j].x() * poly[i].y() - poly[i].x() * poly[j].y();
  return 0.5 * std::abs(a);
}

namespace detail {

inline double orient(const Point& a, const Point& b, const Point& c) {
  return (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
}

inline bool segments_cross(const Point& p1, const Point& p2, const Point& q1, const Point& q2) {
  const double d1 = orient(q1, q2, p1), d2 = orient(q1, q2, p2);
  const double d3 = orient(p1, p2, q1), d4 = orient(p1, p2, q2);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
    return true;
  auto on_segment = [](const Point& a, const Point& b, const Point& c) {
    return std::min(a.x(), b.x()) <= c.x() && c.x() <= std::max(a.x(), b.x()) &&
           std::min(a.y(), b.y()) <= c.y() && c.y() <= std::max(a.y(), b.y());
  };
  return (d1 == 0 && on_segment(q1, q2, p1)) || (d2 == 0 && on_segment(q1, q2, p2)) ||
         (d3 == 0 && on_segment(p1, p2, q1)) || (d4 == 0 && on_segment(p1, p2, q2));
}

}  // namespace detail

/// True when no two non-adjacent edges intersect and the area is non-zero.
inline bool polygon_is_simple(const std::vector<Point>& poly) {
  const std::size_t n = poly.size();
  if (n < 3 || polygon_area(poly) <= 0) return false;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
      if (adjacent) continue;
      if (detail::segments_cross(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n])) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Synthetic city

struct Road {
  std::vector<Point> vertices;  // polyline
  double weight = 1.0;
};

struct SynthConfig {
  std::vector<Point> polygon;
  std::vector<Road> roads;
  double uniform_weight = 1.0;
  double road_jitter_km = 0.3;
  std::vector<double> weekly_profile;  // 168 entries
  double mean_events = 60.0;
  int weeks = 10;
  std::uint64_t seed = 1;
};

/// Diurnal profile with a mild weekend dip, scaled to unit mean.
inline std::vector<double> default_weekly_profile() {
  std::vector<double> p(kWeekLength);
  for (int h = 0; h < kWeekLength; ++h) {
    const int hour = h % 24, day = h / 24;
    p[h] = (1.0 + 0.6 * std::sin(2.0 * std::numbers::pi * (hour - 9) / 24.0)) * (day >= 5 ? 0.9 : 1.0);
  }
  double mean = 0;
  for (double v : p) mean += v;
  mean /= kWeekLength;
  for (double& v : p) v /= mean;
  return p;
}

inline void validate(const SynthConfig& c) {
  if (!polygon_is_simple(c.polygon)) throw ValidationError("boundary polygon is degenerate or self-intersecting");
  if (c.weekly_profile.size() != static_cast<std::size_t>(kWeekLength))
    throw ValidationError("weekly profile must have 168 entries");
  for (double v : c.weekly_profile)
    if (!(v > 0)) throw ValidationError("weekly profile entries must be > 0");
  if (!(c.mean_events > 0)) throw ValidationError("mean events must be > 0");
  if (c.weeks < 1) throw ValidationError("weeks must be >= 1");
  if (c.uniform_weight < 0 || c.road_jitter_km < 0) throw ValidationError("negative weight or jitter");
  double total = c.uniform_weight;
  for (const auto& r : c.roads) {
    if (r.vertices.size() < 2) throw ValidationError("road needs at least two vertices");
    if (r.weight < 0) throw ValidationError("negative road weight");
    total += r.weight;
  }
  if (!(total > 0)) throw ValidationError("mixture weights sum to zero");
}

namespace detail {

inline std::vector<Point> parse_points(std::string_view text, long lineno) {
  std::vector<Point> pts;
  for (auto pair : split(text, ';')) {
    if (pair.empty()) continue;
    auto xy = split(pair, ',');
    double x = 0, y = 0;
    if (xy.size() != 2 || !parse_double(xy[0], x) || !parse_double(xy[1], y))
      throw ParseError("bad coordinate pair '" + std::string(pair) + "'", lineno);
    pts.emplace_back(x, y);
  }
  return pts;
}

}  // namespace detail

/// Parses the `key = value` synthetic-city format:
///   polygon = x,y; x,y; ...
///   road = weight; x,y; x,y[; ...]     (repeatable)
///   weekly_profile = v0, v1, ..., v167 (optional)
/// plus scalar keys uniform_weight, road_jitter_km, mean_events, weeks, seed.
inline SynthConfig parse_synth_config(std::istream& in) {
  SynthConfig c;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto body = std::string_view(line);
    if (auto hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
    body = detail::trim(body);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected 'key = value'", lineno);
    const auto key = detail::trim(body.substr(0, eq));
    const auto value = detail::trim(body.substr(eq + 1));
    auto number = [&](double& out) {
      if (!detail::parse_double(value, out)) throw ParseError("bad number for " + std::string(key), lineno);
    };
    if (key == "polygon") {
      c.polygon = detail::parse_points(value, lineno);
    } else if (key == "road") {
      const auto semi = value.find(';');
      Road r;
      if (semi == std::string_view::npos || !detail::parse_double(detail::trim(value.substr(0, semi)), r.weight))
        throw ParseError("road must start with 'weight;'", lineno);
      r.vertices = detail::parse_points(value.substr(semi + 1), lineno);
      c.roads.push_back(std::move(r));
    } else if (key == "weekly_profile") {
      c.weekly_profile.clear();
      for (auto f : detail::split(value, ',')) {
        double v = 0;
        if (!detail::parse_double(f, v)) throw ParseError("bad weekly_profile entry", lineno);
        c.weekly_profile.push_back(v);
      }
    } else if (key == "uniform_weight") {
      number(c.uniform_weight);
    } else if (key == "road_jitter_km") {
      number(c.road_jitter_km);
    } else if (key == "mean_events") {
      number(c.mean_events);
    } else if (key == "weeks") {
      long w = 0;
      if (!detail::parse_long(value, w)) throw ParseError("bad weeks", lineno);
      c.weeks = static_cast<int>(w);
    } else if (key == "seed") {
      long s = 0;
      if (!detail::parse_long(value, s)) throw ParseError("bad seed", lineno);
      c.seed = static_cast<std::uint64_t>(s);
    } else {
      throw ParseError("unknown key '" + std::string(key) + "'", lineno);
    }
  }
  if (c.weekly_profile.empty()) c.weekly_profile = default_weekly_profile();
  return c;
}

inline SynthConfig load_synth_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  return parse_synth_config(in);
}

/// Draws a non-homogeneous Poisson city: n_t ~ Poisson(mean * profile[t mod 168])
/// per period, locations from a mixture of uniform-in-polygon and jittered
/// road points, with rejection outside the polygon.
inline EventStore synth_generate(const SynthConfig& config) {
  validate(config);
  std::mt19937_64 rng(config.seed);
  const auto& poly = config.polygon;
  Point lo = poly.front(), hi = poly.front();
  for (const auto& p : poly) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }

  std::vector<double> weights{config.uniform_weight};
  std::vector<std::vector<double>> cumlen;
  for (const auto& r : config.roads) {
    weights.push_back(r.weight);
    std::vector<double> acc{0.0};
    for (std::size_t i = 1; i < r.vertices.size(); ++i)
      acc.push_back(acc.back() + (r.vertices[i] - r.vertices[i - 1]).norm());
    cumlen.push_back(std::move(acc));
  }
  std::discrete_distribution<int> pick(weights.begin(), weights.end());
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> jitter(0.0, config.road_jitter_km);

  auto draw_uniform = [&] {
    for (;;) {
      Point p(lo.x() + (hi.x() - lo.x()) * unif(rng), lo.y() + (hi.y() - lo.y()) * unif(rng));
      if (point_in_polygon(p, poly)) return p;
    }
  };
  auto draw_road = [&](std::size_t r) {
    const auto& road = config.roads[r];
    const auto& acc = cumlen[r];
    for (int attempt = 0; attempt < 10000; ++attempt) {
      const double s = unif(rng) * acc.back();
      std::size_t seg = std::upper_bound(acc.begin(), acc.end(), s) - acc.begin();
      seg = std::clamp<std::size_t>(seg, 1, acc.size() - 1);
      const double len = acc[seg] - acc[seg - 1];
      const double f = len > 0 ? (s - acc[seg - 1]) / len : 0.0;
      Point p = road.vertices[seg - 1] + f * (road.vertices[seg] - road.vertices[seg - 1]);
      p += Point(jitter(rng), jitter(rng));
      if (point_in_polygon(p, poly)) return p;
    }
    throw ValidationError("road " + std::to_string(r) + " lies outside the boundary polygon");
  };

  std::vector<Event> events;
  const long periods = static_cast<long>(config.weeks) * kWeekLength;
  for (long t = 1; t <= periods; ++t) {
    const double rate = config.mean_events * config.weekly_profile[t % kWeekLength];
    std::poisson_distribution<long> count(rate);
    const long n = count(rng);
    for (long i = 0; i < n; ++i) {
      const int comp = pick(rng);
      const Point p = comp == 0 ? draw_uniform() : draw_road(static_cast<std::size_t>(comp - 1));
      events.push_back({t, p});
    }
  }
  return EventStore(std::move(events));
}

}  // namespace warpfield
