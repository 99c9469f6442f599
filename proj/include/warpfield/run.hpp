#pragma once

#include "warpfield/evaluation.hpp"

#include <filesystem>

namespace warpfield {

/// Every tunable of a run. Loaded from a `key = value` file; command-line
/// flags are applied on top.
struct RunConfig {
  std::string events, cycle, out;
  std::string raster;  // input raster for `evaluate`
  int weeks = 8;
  std::size_t cloud_size = 1000;
  int neighbors = 5;
  WeightMode weight_mode = WeightMode::binary;
  double fine_cell_km = 0.25;
  double count_cell_km = 1.0;
  int budget = 100;
  int search_budget = 30;
  std::uint64_t seed = 20240601;
  unsigned threads = 0;
  long from = 0, to = 0;
  long period = 0;
  std::vector<Method> methods{Method::medic, Method::kde, Method::warp};

  FitConfig fit_config() const {
    FitConfig f;
    f.weeks = weeks;
    f.cloud_size = cloud_size;
    f.knn.neighbors = neighbors;
    f.knn.mode = weight_mode;
    f.fine_cell_km = fine_cell_km;
    f.count_cell_km = count_cell_km;
    f.budget = budget;
    f.search_budget = search_budget;
    f.seed = seed;
    f.threads = threads;
    return f;
  }

  ComparisonConfig comparison_config() const { return {weeks, fine_cell_km, count_cell_km, threads}; }
};

inline std::vector<Method> parse_methods(const std::string& list) {
  std::vector<Method> out;
  for (auto part : detail::split(list, ',')) {
    const auto name = std::string(detail::trim(part));
    if (name.empty()) continue;
    const auto m = parse_method(name);
    if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
  }
  if (out.empty()) throw ValidationError("no methods given");
  return out;
}

inline WeightMode parse_weight_mode(const std::string& s) {
  if (s == "binary") return WeightMode::binary;
  if (s == "heat") return WeightMode::heat;
  throw ValidationError("weight mode must be 'binary' or 'heat', got '" + s + "'");
}

inline void validate(const RunConfig& c) {
  if (c.weeks < 1) throw ValidationError("weeks must be positive");
  if (c.cloud_size < 1) throw ValidationError("cloud_size must be positive");
  if (c.neighbors < 1) throw ValidationError("neighbors must be positive");
  if (!(c.fine_cell_km > 0) || !(c.count_cell_km > 0)) throw ValidationError("grid resolutions must be positive");
  const double ratio = c.count_cell_km / c.fine_cell_km;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 || ratio < 1)
    throw ValidationError("fine_cell_km must divide count_cell_km evenly");
  if (c.budget < 1 || c.search_budget < 1) throw ValidationError("optimizer budgets must be positive");
}

/// Applies one `key = value` setting; unknown keys are rejected.
inline void apply_setting(RunConfig& c, const std::string& key, const std::string& value, long lineno = 0) {
  auto num = [&](auto& field) {
    double v = 0;
    if (!detail::parse_double(value, v)) throw ParseError("bad number for '" + key + "'", lineno);
    using T = std::remove_reference_t<decltype(field)>;
    if constexpr (std::is_integral_v<T>) {
      if (v != std::floor(v)) throw ParseError("'" + key + "' must be an integer", lineno);
      if constexpr (std::is_unsigned_v<T>)
        if (v < 0) throw ParseError("'" + key + "' must be non-negative", lineno);
    }
    field = static_cast<T>(v);
  };
  if (key == "events") c.events = value;
  else if (key == "cycle") c.cycle = value;
  else if (key == "out") c.out = value;
  else if (key == "raster") c.raster = value;
  else if (key == "weeks") num(c.weeks);
  else if (key == "cloud_size") num(c.cloud_size);
  else if (key == "neighbors") num(c.neighbors);
  else if (key == "weight_mode") c.weight_mode = parse_weight_mode(value);
  else if (key == "fine_cell_km") num(c.fine_cell_km);
  else if (key == "count_cell_km") num(c.count_cell_km);
  else if (key == "budget") num(c.budget);
  else if (key == "search_budget") num(c.search_budget);
  else if (key == "seed") num(c.seed);
  else if (key == "threads") num(c.threads);
  else if (key == "from") num(c.from);
  else if (key == "to") num(c.to);
  else if (key == "period") num(c.period);
  else if (key == "methods") c.methods = parse_methods(value);
  else throw ParseError("unknown setting '" + key + "'", lineno);
}

inline RunConfig parse_run_config(std::istream& in) {
  RunConfig c;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto t = detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected 'key = value'", lineno);
    try {
      apply_setting(c, std::string(detail::trim(t.substr(0, eq))), std::string(detail::trim(t.substr(eq + 1))), lineno);
    } catch (const ParseError&) {
      throw;
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), lineno);
    }
  }
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config '" + path + "'");
  return parse_run_config(in);
}

// ---------------------------------------------------------------------------
// Commands. Each writes its artifact and returns; errors propagate.

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << content;
  if (!out) throw Error("write failed for '" + path + "'");
}

inline void cmd_synth(const std::string& config_path, const std::string& out_path,
                      std::optional<std::uint64_t> seed = std::nullopt) {
  auto config = load_synth_config(config_path);
  if (seed) config.seed = *seed;
  const auto store = synth_generate(config);
  export_csv(out_path, store);
}

inline WeeklyCycle cmd_fit(const RunConfig& rc) {
  validate(rc);
  if (rc.events.empty() || rc.cycle.empty()) throw ValidationError("fit needs --events and --cycle");
  const auto store = ingest_csv(rc.events);
  const long from = rc.from > 0 ? rc.from : 1;
  const long to = rc.to > 0 ? rc.to : store.last_period();
  if (to < from) throw ValidationError("--to must not precede --from");
  auto cycle = fit_weekly_cycle(store, from, to, rc.fit_config());
  save_cycle(rc.cycle, cycle);
  return cycle;
}

inline Prediction cmd_predict(const RunConfig& rc) {
  validate(rc);
  if (rc.events.empty() || rc.cycle.empty() || rc.out.empty())
    throw ValidationError("predict needs --events, --cycle and --out");
  if (rc.period < 1) throw ValidationError("predict needs --period");
  const auto store = ingest_csv(rc.events);
  const auto cycle = load_cycle(rc.cycle);
  require_history(rc.period, cycle.weeks);
  const auto history = store.range(1, rc.period - 1);
  if (history.empty()) throw ValidationError("no events before the requested period");
  const auto grids = evaluation_grids(history, rc.count_cell_km, rc.fine_cell_km);
  auto pred = predict_period(store, rc.period, cycle, grids.fine, resolve_threads(rc.threads));
  save_raster(rc.out, pred.raster);
  return pred;
}

struct PeriodScore {
  std::optional<LogScore> als;
  double total = 0;
  double rmse = 0, rmse_b = 0, ansc = 0, ansc_b = 0;
};

/// Scores a saved raster against the events of one period. Counts are the
/// raster scaled by the MEDIC total; the boundary comes from earlier events.
inline PeriodScore cmd_evaluate(const RunConfig& rc) {
  validate(rc);
  if (rc.events.empty() || rc.raster.empty()) throw ValidationError("evaluate needs --events and --raster");
  if (rc.period < 1) throw ValidationError("evaluate needs --period");
  const auto store = ingest_csv(rc.events);
  require_history(rc.period, rc.weeks);
  const auto density = load_raster(rc.raster);
  if (!density.normalized) throw ValidationError("raster does not integrate to 1");
  const auto history = store.range(1, rc.period - 1);
  if (history.empty()) throw ValidationError("no events before the requested period");
  const auto grids = evaluation_grids(history, rc.count_cell_km, rc.fine_cell_km);
  if (!density.grid.same_geometry(grids.fine))
    throw ValidationError("raster grid does not match the evaluation grid for this period");
  const auto boundary = derive_boundary(history, grids.counts);
  const auto test = store.at(rc.period);
  const auto actual = count_events(grids.counts, test);
  PeriodScore s;
  s.total = medic_total(medic_predict(store, rc.period, rc.weeks, grids.counts));
  const auto pred = density_to_counts(density, s.total, grids.counts);
  s.als = average_log_score(density, test);
  s.rmse = rmse(pred, actual);
  s.rmse_b = rmse(pred, actual, &boundary);
  s.ansc = anscombe_rmse(pred, actual);
  s.ansc_b = anscombe_rmse(pred, actual, &boundary);
  return s;
}

/// Writes `<method>.csv` per method, `summary.txt`, and `failures.csv` when
/// any period had to be dropped.
inline Comparison cmd_compare(const RunConfig& rc) {
  validate(rc);
  if (rc.events.empty() || rc.out.empty()) throw ValidationError("compare needs --events and --out");
  if (rc.from < 1 || rc.to < rc.from) throw ValidationError("compare needs a test range --from/--to");
  const bool needs_cycle = std::find(rc.methods.begin(), rc.methods.end(), Method::warp) != rc.methods.end();
  if (needs_cycle && rc.cycle.empty()) throw ValidationError("the warp method needs --cycle");
  const auto store = ingest_csv(rc.events);
  std::optional<WeeklyCycle> cycle;
  if (needs_cycle) cycle = load_cycle(rc.cycle);
  std::vector<long> periods;
  for (long u = rc.from; u <= rc.to; ++u) periods.push_back(u);
  auto cmp = run_comparison(store, periods, rc.methods, cycle ? &*cycle : nullptr, rc.comparison_config());

  namespace fs = std::filesystem;
  fs::create_directories(rc.out);
  for (const auto& r : cmp.reports) {
    std::ostringstream os;
    write_report_csv(os, r);
    write_text_file((fs::path(rc.out) / (r.method + ".csv")).string(), os.str());
  }
  std::ostringstream sum;
  write_summary(sum, cmp.reports);
  const MetricReport* warp = nullptr;
  const MetricReport* kde = nullptr;
  for (const auto& r : cmp.reports) {
    if (r.method == "warp") warp = &r;
    if (r.method == "kde") kde = &r;
  }
  if (warp && kde) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "sign test ALS warp vs kde: p = %.6g\n", sign_test_p_value(warp->als, kde->als));
    sum << buf;
  }
  sum << "periods scored: " << (cmp.reports.empty() ? 0 : cmp.reports.front().periods.size()) << " of "
      << periods.size() << '\n';
  write_text_file((fs::path(rc.out) / "summary.txt").string(), sum.str());
  if (!cmp.failures.empty()) {
    std::ostringstream os;
    os << "period,error\n";
    for (const auto& [u, msg] : cmp.failures) os << u << ",\"" << msg << "\"\n";
    write_text_file((fs::path(rc.out) / "failures.csv").string(), os.str());
  }
  return cmp;
}

}  // namespace warpfield
