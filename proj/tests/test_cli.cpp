#include "support.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

using namespace warpfield;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("warpfield_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run(const std::string& args) {
  const std::string cmd = std::string(WARPFIELD_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

const std::string kSmallCity =
    "polygon = 0,0; 6,0; 6,6; 0,6\n"
    "road = 0.5; 0.5,0.5; 5.5,5.5\n"
    "uniform_weight = 0.5\n"
    "mean_events = 6\n"
    "weeks = 3\n"
    "seed = 4\n";

}  // namespace

TEST(RunConfigFile, ParsesKeysAndComments) {
  std::istringstream in(
      "# comment\n"
      "events = data/e.csv  # trailing\n"
      "weeks = 4\n"
      "cloud_size = 250\n"
      "weight_mode = heat\n"
      "methods = kde, warp\n"
      "seed = 99\n"
      "\n");
  const auto c = parse_run_config(in);
  EXPECT_EQ(c.events, "data/e.csv");
  EXPECT_EQ(c.weeks, 4);
  EXPECT_EQ(c.cloud_size, 250u);
  EXPECT_EQ(c.weight_mode, WeightMode::heat);
  EXPECT_EQ(c.methods, (std::vector<Method>{Method::kde, Method::warp}));
  EXPECT_EQ(c.seed, 99u);
  EXPECT_EQ(c.fit_config().cloud_size, 250u);
  EXPECT_EQ(c.comparison_config().weeks, 4);
}

TEST(RunConfigFile, RejectsBadInput) {
  std::istringstream unknown("colour = red\n");
  EXPECT_THROW(parse_run_config(unknown), ParseError);
  std::istringstream frac("weeks = 2.5\n");
  EXPECT_THROW(parse_run_config(frac), ParseError);
  std::istringstream noeq("weeks 3\n");
  try {
    parse_run_config(noeq);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1);
  }
  std::istringstream method("methods = medic, gmm\n");
  EXPECT_THROW(parse_run_config(method), ParseError);
  RunConfig rc;
  rc.fine_cell_km = 0.3;
  EXPECT_THROW(validate(rc), ValidationError);
  rc = RunConfig{};
  rc.budget = 0;
  EXPECT_THROW(validate(rc), ValidationError);
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("synth --out x.csv"), 2);  // missing --config
}

TEST(Cli, DegeneratePolygonExitsTwo) {
  const auto dir = scratch("polygon");
  write(dir / "bad.conf", "polygon = 0,0; 1,1; 1,0; 0,1\n");
  EXPECT_EQ(run("synth --config " + (dir / "bad.conf").string() + " --out " + (dir / "e.csv").string()), 2);
  EXPECT_FALSE(fs::exists(dir / "e.csv"));
}

TEST(Cli, SynthSameSeedIsByteIdentical) {
  const auto dir = scratch("synth");
  write(dir / "city.conf", kSmallCity);
  const auto conf = (dir / "city.conf").string();
  ASSERT_EQ(run("synth --config " + conf + " --out " + (dir / "a.csv").string()), 0);
  ASSERT_EQ(run("synth --config " + conf + " --out " + (dir / "b.csv").string()), 0);
  ASSERT_EQ(run("synth --config " + conf + " --seed 5 --out " + (dir / "c.csv").string()), 0);
  EXPECT_EQ(slurp(dir / "a.csv"), slurp(dir / "b.csv"));
  EXPECT_NE(slurp(dir / "a.csv"), slurp(dir / "c.csv"));
  const auto store = ingest_csv((dir / "a.csv").string());
  EXPECT_GT(store.size(), 0u);
  EXPECT_LE(store.last_period(), 3 * 168);
}

TEST(Cli, FitWindowShorterThanMPlusOneWeeksExitsTwo) {
  const auto dir = scratch("short");
  write(dir / "city.conf", kSmallCity);
  ASSERT_EQ(run("synth --config " + (dir / "city.conf").string() + " --out " + (dir / "e.csv").string()), 0);
  // three weeks of data, M = 3 needs four
  EXPECT_EQ(run("fit --events " + (dir / "e.csv").string() + " --cycle " + (dir / "c.txt").string() + " --weeks 3"), 2);
  EXPECT_EQ(run("fit --events " + (dir / "missing.csv").string() + " --cycle " + (dir / "c.txt").string()), 2);
}

TEST(Cli, BadConfigFileExitsTwo) {
  const auto dir = scratch("badconf");
  write(dir / "run.conf", "weeks = 0\n");
  EXPECT_EQ(run("compare --config " + (dir / "run.conf").string()), 2);
  write(dir / "run.conf", "nonsense = 1\n");
  EXPECT_EQ(run("fit --config " + (dir / "run.conf").string()), 2);
}

TEST(Cli, CompareWritesReportsAndFlagsOverrideConfig) {
  const auto dir = scratch("compare");
  write(dir / "city.conf", kSmallCity);
  const auto events = (dir / "e.csv").string();
  ASSERT_EQ(run("synth --config " + (dir / "city.conf").string() + " --out " + events), 0);
  // config asks for warp (needs a cycle); the flag narrows to baselines
  write(dir / "run.conf", "weeks = 2\nmethods = medic,kde,warp\nthreads = 1\n");
  const auto out = dir / "report";
  EXPECT_EQ(run("compare --config " + (dir / "run.conf").string() + " --events " + events + " --from 400 --to 405 --out " +
                out.string()),
            2);
  ASSERT_EQ(run("compare --config " + (dir / "run.conf").string() + " --events " + events +
                " --methods medic,kde --from 400 --to 405 --out " + out.string()),
            0);
  EXPECT_TRUE(fs::exists(out / "medic.csv"));
  EXPECT_TRUE(fs::exists(out / "kde.csv"));
  EXPECT_FALSE(fs::exists(out / "warp.csv"));
  const auto summary = slurp(out / "summary.txt");
  EXPECT_NE(summary.find("periods scored: 6 of 6"), std::string::npos) << summary;
}

TEST(Cli, FitPredictEvaluateRoundTrip) {
  const auto dir = scratch("pipeline");
  std::string city = kSmallCity;
  city.replace(city.find("weeks = 3"), 9, "weeks = 2");
  write(dir / "city.conf", city);
  const auto events = (dir / "e.csv").string(), cycle = (dir / "cycle.txt").string();
  ASSERT_EQ(run("synth --config " + (dir / "city.conf").string() + " --out " + events), 0);
  write(dir / "run.conf", "weeks = 1\ncloud_size = 60\nbudget = 9\nsearch_budget = 8\nthreads = 1\n");
  const auto conf = (dir / "run.conf").string();
  ASSERT_EQ(run("fit --config " + conf + " --events " + events + " --cycle " + cycle), 0);
  const auto c = load_cycle(cycle);
  EXPECT_EQ(c.weeks, 1);
  EXPECT_EQ(c.cloud_size, 60u);
  const auto raster = (dir / "r.txt").string();
  ASSERT_EQ(run("predict --config " + conf + " --events " + events + " --cycle " + cycle + " --period 300 --out " + raster),
            0);
  EXPECT_NEAR(load_raster(raster).integral(), 1.0, 1e-6);
  EXPECT_EQ(run("evaluate --config " + conf + " --events " + events + " --raster " + raster + " --period 300"), 0);
  EXPECT_EQ(run("predict --config " + conf + " --events " + events + " --cycle " + cycle + " --period 100 --out " + raster),
            2);
}
