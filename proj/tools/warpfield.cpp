// warpfield: synth | fit | predict | evaluate | compare

#include "warpfield/warpfield.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace {

using namespace warpfield;

// Flag values land here; only flags that were actually given override the
// config file.
struct Flags {
  std::string config, events, cycle, out, raster, methods, weight_mode;
  long period = 0, from = 0, to = 0;
  unsigned threads = 0;
  std::uint64_t seed = 0;
  int weeks = 0, budget = 0, search_budget = 0, neighbors = 0;
  std::size_t cloud_size = 0;
};

RunConfig resolve(const CLI::App& sub, const Flags& f) {
  RunConfig rc = f.config.empty() ? RunConfig{} : load_run_config(f.config);
  auto given = [&](const char* name) { return sub.get_option_no_throw(name) && sub.count(name) > 0; };
  if (given("--events")) rc.events = f.events;
  if (given("--cycle")) rc.cycle = f.cycle;
  if (given("--out")) rc.out = f.out;
  if (given("--raster")) rc.raster = f.raster;
  if (given("--period")) rc.period = f.period;
  if (given("--from")) rc.from = f.from;
  if (given("--to")) rc.to = f.to;
  if (given("--threads")) rc.threads = f.threads;
  if (given("--seed")) rc.seed = f.seed;
  if (given("--weeks")) rc.weeks = f.weeks;
  if (given("--budget")) rc.budget = f.budget;
  if (given("--search-budget")) rc.search_budget = f.search_budget;
  if (given("--neighbors")) rc.neighbors = f.neighbors;
  if (given("--cloud-size")) rc.cloud_size = f.cloud_size;
  if (given("--weight-mode")) rc.weight_mode = parse_weight_mode(f.weight_mode);
  if (given("--methods")) rc.methods = parse_methods(f.methods);
  validate(rc);
  return rc;
}

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "run configuration file (key = value)");
  sub->add_option("--threads", f.threads, "worker threads (default: WARPFIELD_THREADS or all cores)");
  sub->add_option("--seed", f.seed, "base seed");
}

void print_score(const PeriodScore& s) {
  std::printf("events     %zu\n", s.als ? s.als->points : std::size_t{0});
  if (s.als) {
    std::printf("ALS        %.6f\n", s.als->sum);
    std::printf("ALS/event  %.6f\n", s.als->sum / static_cast<double>(s.als->points));
    if (s.als->outside) std::printf("outside    %zu\n", s.als->outside);
  } else {
    std::printf("ALS        n/a (no events)\n");
  }
  std::printf("total      %.6f\nRMSE       %.6f\nRMSE_B     %.6f\nANSC       %.6f\nANSC_B     %.6f\n", s.total, s.rmse,
              s.rmse_b, s.ansc, s.ansc_b);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatio-temporal kernel-warped density estimation"};
  app.require_subcommand(1);
  Flags f;

  auto* synth = app.add_subcommand("synth", "generate a synthetic event store");
  std::string synth_config;
  synth->add_option("--config", synth_config, "synthetic city configuration")->required();
  synth->add_option("--out", f.out, "events CSV to write")->required();
  synth->add_option("--seed", f.seed, "override the config's seed");

  auto* fit = app.add_subcommand("fit", "fit the 168 hour-slot plans of a weekly cycle");
  add_common(fit, f);
  fit->add_option("--events", f.events, "events CSV");
  fit->add_option("--cycle", f.cycle, "cycle file to write");
  fit->add_option("--from", f.from, "first period of the fit window");
  fit->add_option("--to", f.to, "last period of the fit window");
  fit->add_option("--weeks", f.weeks, "history depth M in weeks");
  fit->add_option("--cloud-size", f.cloud_size, "point cloud size Z");
  fit->add_option("--neighbors", f.neighbors, "kNN neighbors");
  fit->add_option("--weight-mode", f.weight_mode, "binary or heat");
  fit->add_option("--budget", f.budget, "objective evaluations per component");
  fit->add_option("--search-budget", f.search_budget, "evaluations per component during the cluster-count search");

  auto* predict = app.add_subcommand("predict", "predict the density raster of one period");
  add_common(predict, f);
  predict->add_option("--events", f.events, "events CSV");
  predict->add_option("--cycle", f.cycle, "fitted cycle file");
  predict->add_option("--period", f.period, "target period u");
  predict->add_option("--out", f.out, "raster file to write");

  auto* evaluate = app.add_subcommand("evaluate", "score a raster against one period's events");
  add_common(evaluate, f);
  evaluate->add_option("--events", f.events, "events CSV");
  evaluate->add_option("--raster", f.raster, "raster file from predict");
  evaluate->add_option("--period", f.period, "period to score");
  evaluate->add_option("--weeks", f.weeks, "history depth M in weeks");

  auto* compare = app.add_subcommand("compare", "compare methods over a range of test periods");
  add_common(compare, f);
  compare->add_option("--events", f.events, "events CSV");
  compare->add_option("--cycle", f.cycle, "fitted cycle file (needed for warp)");
  compare->add_option("--from", f.from, "first test period");
  compare->add_option("--to", f.to, "last test period");
  compare->add_option("--methods", f.methods, "comma-separated subset of medic,kde,warp");
  compare->add_option("--weeks", f.weeks, "history depth M in weeks");
  compare->add_option("--out", f.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*synth) {
      std::optional<std::uint64_t> seed;
      if (synth->count("--seed")) seed = f.seed;
      cmd_synth(synth_config, f.out, seed);
    } else if (*fit) {
      const auto cycle = cmd_fit(resolve(*fit, f));
      int fallback = 0;
      for (const auto& s : cycle.slots) fallback += s.fallback ? 1 : 0;
      std::cerr << "fitted " << cycle.slots.size() << " slots (" << fallback << " fallback)\n";
    } else if (*predict) {
      const auto pred = cmd_predict(resolve(*predict, f));
      if (pred.flagged) std::cerr << "warning: prediction flagged (fallback or regularized bandwidth)\n";
    } else if (*evaluate) {
      print_score(cmd_evaluate(resolve(*evaluate, f)));
    } else if (*compare) {
      const auto rc = resolve(*compare, f);
      const auto cmp = cmd_compare(rc);
      std::ostringstream os;
      write_summary(os, cmp.reports);
      std::cout << os.str();
      if (!cmp.failures.empty()) std::cerr << cmp.failures.size() << " period(s) failed; see failures.csv\n";
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
