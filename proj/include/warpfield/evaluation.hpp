#pragma once

#include "warpfield/baselines.hpp"

#include <array>
#include <cstdio>
#include <limits>
#include <optional>

namespace warpfield {

struct BoundaryMask {
  GridSpec grid;
  std::vector<bool> inside;

  std::size_t count() const { return static_cast<std::size_t>(std::count(inside.begin(), inside.end(), true)); }
};

/// Cells holding at least one event.
inline BoundaryMask derive_boundary(const std::vector<Event>& events, const GridSpec& grid) {
  if (events.empty()) throw ValidationError("boundary needs events");
  BoundaryMask m{grid, std::vector<bool>(grid.cells(), false)};
  for (const auto& e : events)
    if (const long i = grid.index_of(e.location); i >= 0) m.inside[i] = true;
  if (m.count() == 0) throw ValidationError("no event falls inside the boundary grid");
  return m;
}

inline BoundaryMask derive_boundary(const EventStore& store, double cell) {
  if (store.empty()) throw ValidationError("boundary needs events");
  auto [lo, hi] = bounding_box(locations(store.events()));
  return derive_boundary(store.events(), grid_covering(lo, hi, cell));
}

struct LogScore {
  double sum = 0;
  std::size_t points = 0;
  std::size_t outside = 0;
};

/// Sum of log predicted density over the period's test events; nullopt when
/// the period has no events.
inline std::optional<LogScore> average_log_score(const DensityRaster& density, const std::vector<Event>& test) {
  if (test.empty()) return std::nullopt;
  const auto ld = log_density_at(density, locations(test));
  LogScore s;
  s.points = test.size();
  for (std::size_t i = 0; i < ld.values.size(); ++i) {
    s.sum += ld.values[i];
    if (ld.outside[i]) ++s.outside;
  }
  return s;
}

namespace detail {

template <typename Residual>
double masked_rms(const CountGrid& pred, const CountGrid& actual, const BoundaryMask* mask, Residual residual) {
  if (!pred.grid.same_geometry(actual.grid) || pred.values.size() != actual.values.size())
    throw ValidationError("count grids have different geometry");
  if (mask && (!mask->grid.same_geometry(pred.grid) || mask->inside.size() != pred.values.size()))
    throw ValidationError("boundary mask geometry does not match the count grid");
  double sum = 0;
  std::size_t cells = 0;
  for (std::size_t i = 0; i < pred.values.size(); ++i) {
    if (mask && !mask->inside[i]) continue;
    const double r = residual(actual.values[i], pred.values[i]);
    sum += r * r;
    ++cells;
  }
  if (cells == 0) throw ValidationError("no cells selected");
  return std::sqrt(sum / static_cast<double>(cells));
}

}  // namespace detail

inline double rmse(const CountGrid& pred, const CountGrid& actual, const BoundaryMask* mask = nullptr) {
  return detail::masked_rms(pred, actual, mask, [](double y, double yhat) { return y - yhat; });
}

/// Guard for the Anscombe residual's division by yhat^(1/6). Only the
/// denominator is floored, so a perfect prediction still scores 0.
inline constexpr double kAnscombeFloor = 1e-4;

inline double anscombe_residual(double y, double yhat) {
  return 1.5 * (std::cbrt(y * y) - std::cbrt(yhat * yhat)) / std::pow(std::max(yhat, kAnscombeFloor), 1.0 / 6.0);
}

inline double anscombe_rmse(const CountGrid& pred, const CountGrid& actual, const BoundaryMask* mask = nullptr) {
  return detail::masked_rms(pred, actual, mask, anscombe_residual);
}

/// Integrates the fine density over each count cell and scales by `total`.
inline CountGrid density_to_counts(const DensityRaster& density, double total, const GridSpec& counts) {
  if (!density.normalized) throw ValidationError("density must be normalized");
  if (total < 0) throw ValidationError("total must be >= 0");
  const auto& f = density.grid;
  const double ratio = counts.cell / f.cell;
  const int factor = static_cast<int>(std::lround(ratio));
  if (factor < 1 || std::abs(ratio - factor) > 1e-9 || f.origin != counts.origin || f.width != counts.width * factor ||
      f.height != counts.height * factor)
    throw ValidationError("density grid does not refine the count grid");
  CountGrid out{counts, std::vector<double>(counts.cells(), 0.0)};
  for (int r = 0; r < f.height; ++r)
    for (int c = 0; c < f.width; ++c)
      out.values[static_cast<std::size_t>(r / factor) * counts.width + c / factor] += density.at(c, r);
  const double scale = total * f.cell_area();
  for (double& v : out.values) v *= scale;
  return out;
}

// ---------------------------------------------------------------------------
// Comparison

enum class Method { medic, kde, warp };

inline std::string method_name(Method m) {
  switch (m) {
    case Method::medic: return "medic";
    case Method::kde: return "kde";
    case Method::warp: return "warp";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  if (s == "medic") return Method::medic;
  if (s == "kde") return Method::kde;
  if (s == "warp") return Method::warp;
  throw ValidationError("unknown method '" + s + "'");
}

struct MetricReport {
  std::string method;
  std::vector<long> periods;
  std::vector<std::size_t> events;
  std::vector<double> als;  // per-period sum; NaN for periods without events
  std::vector<double> rmse, rmse_b, ansc, ansc_b;

  static double mean(const std::vector<double>& v) {
    double s = 0;
    std::size_t n = 0;
    for (double x : v)
      if (!std::isnan(x)) {
        s += x;
        ++n;
      }
    return n ? s / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
  }
  /// Mean over periods of the per-event average log density.
  double mean_als_per_event() const {
    std::vector<double> v;
    for (std::size_t i = 0; i < als.size(); ++i) v.push_back(events[i] ? als[i] / static_cast<double>(events[i]) : NAN);
    return mean(v);
  }
};

struct ComparisonConfig {
  int weeks = 8;
  double fine_cell_km = 0.25;
  double count_cell_km = 1.0;
  unsigned threads = 0;
};

struct Comparison {
  EvalGrids grids;
  BoundaryMask boundary;
  std::vector<MetricReport> reports;  // one per method, in request order
  std::vector<std::pair<long, std::string>> failures;
};

/// Predicts every test period with each method and scores all five metrics.
/// KDE-family counts use the MEDIC total for the period. A period on which
/// any method fails is dropped from every report.
inline Comparison run_comparison(const EventStore& store, const std::vector<long>& test_periods,
                                 const std::vector<Method>& methods, const WeeklyCycle* cycle,
                                 const ComparisonConfig& config) {
  if (test_periods.empty()) throw ValidationError("no test periods");
  const long first = *std::min_element(test_periods.begin(), test_periods.end());
  for (long u : test_periods) require_history(u, config.weeks);
  for (auto m : methods)
    if (m == Method::warp && !cycle) throw ValidationError("warp method needs a fitted weekly cycle");
  const auto training = store.range(1, first - 1);
  if (training.empty()) throw ValidationError("no training events before the first test period");

  Comparison out;
  out.grids = evaluation_grids(training, config.count_cell_km, config.fine_cell_km);
  out.boundary = derive_boundary(training, out.grids.counts);

  struct Row {
    bool ok = true;
    std::string error;
    std::size_t events = 0;
    std::vector<std::array<double, 5>> metrics;
  };
  std::vector<Row> rows(test_periods.size());
  parallel_for(test_periods.size(), config.threads, [&](std::size_t idx) {
    const long u = test_periods[idx];
    Row& row = rows[idx];
    try {
      const auto test = store.at(u);
      row.events = test.size();
      const auto actual = count_events(out.grids.counts, test);
      const auto medic = medic_predict(store, u, config.weeks, out.grids.counts);
      const double total = medic_total(medic);
      for (auto m : methods) {
        DensityRaster density;
        CountGrid pred;
        if (m == Method::medic) {
          density = medic_density(medic);
          pred = medic;
        } else {
          density = m == Method::kde ? unwarped_kde_predict(store, u, config.weeks, out.grids.fine).raster
                                     : predict_period(store, u, *cycle, out.grids.fine).raster;
          pred = density_to_counts(density, total, out.grids.counts);
        }
        const auto als = average_log_score(density, test);
        row.metrics.push_back({als ? als->sum : std::numeric_limits<double>::quiet_NaN(), rmse(pred, actual),
                               rmse(pred, actual, &out.boundary), anscombe_rmse(pred, actual),
                               anscombe_rmse(pred, actual, &out.boundary)});
      }
    } catch (const Error& e) {
      row.ok = false;
      row.error = e.what();
    }
  });

  for (auto m : methods) out.reports.push_back({method_name(m), {}, {}, {}, {}, {}, {}, {}});
  for (std::size_t idx = 0; idx < rows.size(); ++idx) {
    const auto& row = rows[idx];
    if (!row.ok) {
      out.failures.emplace_back(test_periods[idx], row.error);
      continue;
    }
    for (std::size_t k = 0; k < methods.size(); ++k) {
      auto& rep = out.reports[k];
      rep.periods.push_back(test_periods[idx]);
      rep.events.push_back(row.events);
      rep.als.push_back(row.metrics[k][0]);
      rep.rmse.push_back(row.metrics[k][1]);
      rep.rmse_b.push_back(row.metrics[k][2]);
      rep.ansc.push_back(row.metrics[k][3]);
      rep.ansc_b.push_back(row.metrics[k][4]);
    }
  }
  return out;
}

/// Two-sided exact sign test on paired samples (ties dropped).
inline double sign_test_p_value(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ValidationError("sign test needs paired samples");
  int wins = 0, n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::isnan(a[i]) || std::isnan(b[i]) || a[i] == b[i]) continue;
    ++n;
    if (a[i] > b[i]) ++wins;
  }
  if (n == 0) return 1.0;
  const int k = std::min(wins, n - wins);
  // P(X <= k) for X ~ Binomial(n, 1/2), in log space.
  double tail = 0;
  for (int i = 0; i <= k; ++i)
    tail += std::exp(std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) - n * std::log(2.0));
  return std::min(1.0, 2.0 * tail);
}

inline void write_report_csv(std::ostream& out, const MetricReport& r) {
  using detail::fmt_double;
  out << "period,events,ALS,RMSE,RMSE_B,ANSC,ANSC_B\n";
  for (std::size_t i = 0; i < r.periods.size(); ++i)
    out << r.periods[i] << ',' << r.events[i] << ',' << (std::isnan(r.als[i]) ? std::string("nan") : fmt_double(r.als[i]))
        << ',' << fmt_double(r.rmse[i]) << ',' << fmt_double(r.rmse_b[i]) << ',' << fmt_double(r.ansc[i]) << ','
        << fmt_double(r.ansc_b[i]) << '\n';
}

/// Mean of each metric across periods, one row per method.
inline void write_summary(std::ostream& out, const std::vector<MetricReport>& reports) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-8s %12s %12s %10s %10s %10s %10s\n", "method", "ALS", "ALS/event", "RMSE", "RMSE_B",
                "ANSC", "ANSC_B");
  out << buf;
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof buf, "%-8s %12.4f %12.4f %10.5f %10.5f %10.5f %10.5f\n", r.method.c_str(),
                  MetricReport::mean(r.als), r.mean_als_per_event(), MetricReport::mean(r.rmse),
                  MetricReport::mean(r.rmse_b), MetricReport::mean(r.ansc), MetricReport::mean(r.ansc_b));
    out << buf;
  }
}

}  // namespace warpfield
