#include "support.hpp"

#include <gtest/gtest.h>

using namespace warpfield;
using wf_test::as_events;
using wf_test::random_points;
using wf_test::small_store;

namespace {

CountGrid random_counts(const GridSpec& g, std::mt19937_64& rng, bool integer) {
  CountGrid out{g, std::vector<double>(g.cells())};
  std::uniform_real_distribution<double> u(0, 3);
  std::poisson_distribution<int> p(1.2);
  for (auto& v : out.values) v = integer ? p(rng) : (u(rng) < 0.5 ? 0.0 : u(rng));
  return out;
}

BoundaryMask random_mask(const GridSpec& g, std::mt19937_64& rng) {
  BoundaryMask m{g, std::vector<bool>(g.cells())};
  std::bernoulli_distribution b(0.6);
  for (std::size_t i = 0; i < g.cells(); ++i) m.inside[i] = b(rng);
  m.inside[0] = true;
  return m;
}

double loop_rms(const CountGrid& pred, const CountGrid& act, const BoundaryMask* m, bool anscombe) {
  double s = 0;
  int n = 0;
  for (int r = 0; r < pred.grid.height; ++r)
    for (int c = 0; c < pred.grid.width; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * pred.grid.width + c;
      if (m && !m->inside[i]) continue;
      const double y = act.values[i], yh = pred.values[i];
      double e = y - yh;
      if (anscombe) {
        e = 1.5 * (std::pow(y, 2.0 / 3.0) - std::pow(yh, 2.0 / 3.0)) / std::pow(std::max(yh, 1e-4), 1.0 / 6.0);
      }
      s += e * e;
      ++n;
    }
  return std::sqrt(s / n);
}

}  // namespace

TEST(Rmse, SingleMissExample) {
  const GridSpec g{Point(0, 0), 1, 2, 2};
  CountGrid pred{g, {0, 0, 0, 0}}, act{g, {0, 1, 0, 0}};
  EXPECT_DOUBLE_EQ(rmse(pred, act), 0.5);
  EXPECT_EQ(rmse(act, act), 0.0);
  CountGrid other{GridSpec{Point(0, 0), 1, 4, 1}, {0, 0, 0, 0}};
  EXPECT_THROW(rmse(pred, other), ValidationError);
}

TEST(Anscombe, FormulaExampleAndZeroOnExact) {
  const GridSpec g{Point(0, 0), 1, 1, 1};
  EXPECT_DOUBLE_EQ(anscombe_rmse(CountGrid{g, {1}}, CountGrid{g, {0}}), 1.5);
  std::mt19937_64 rng(1);
  const GridSpec big{Point(0, 0), 1, 6, 5};
  const auto y = random_counts(big, rng, true);
  EXPECT_EQ(anscombe_rmse(y, y), 0.0);
  // zero prediction uses the floor rather than dividing by zero
  EXPECT_TRUE(std::isfinite(anscombe_residual(2.0, 0.0)));
  EXPECT_EQ(anscombe_residual(0.0, 0.0), 0.0);
}

TEST(Metrics, LoopOracles) {
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 20; ++rep) {
    const GridSpec g{Point(0, 0), 1, 7, 9};
    const auto pred = random_counts(g, rng, false), act = random_counts(g, rng, true);
    const auto mask = random_mask(g, rng);
    EXPECT_NEAR(rmse(pred, act), loop_rms(pred, act, nullptr, false), 1e-12);
    EXPECT_NEAR(rmse(pred, act, &mask), loop_rms(pred, act, &mask, false), 1e-12);
    EXPECT_NEAR(anscombe_rmse(pred, act), loop_rms(pred, act, nullptr, true), 1e-12);
    EXPECT_NEAR(anscombe_rmse(pred, act, &mask), loop_rms(pred, act, &mask, true), 1e-12);
  }
}

TEST(Metrics, AllTrueMaskEqualsUnmasked) {
  std::mt19937_64 rng(3);
  const GridSpec g{Point(0, 0), 1, 5, 5};
  const auto pred = random_counts(g, rng, false), act = random_counts(g, rng, true);
  const BoundaryMask all{g, std::vector<bool>(g.cells(), true)};
  EXPECT_EQ(rmse(pred, act, &all), rmse(pred, act));
  EXPECT_EQ(anscombe_rmse(pred, act, &all), anscombe_rmse(pred, act));
}

TEST(Als, UniformDensityAndLoopOracle) {
  const GridSpec g{Point(0, 0), 0.5, 8, 6};  // 4 x 3 km, area 12
  const auto test = as_events({Point(1, 1), Point(3.2, 0.4), Point(0.1, 2.9)});
  const auto s = average_log_score(uniform_raster(g), test);
  ASSERT_TRUE(s.has_value());
  EXPECT_NEAR(s->sum, 3 * std::log(1.0 / 12.0), 1e-12);
  EXPECT_EQ(s->points, 3u);
  EXPECT_FALSE(average_log_score(uniform_raster(g), {}).has_value());

  std::mt19937_64 rng(4);
  std::vector<double> v(g.cells());
  std::uniform_real_distribution<double> u(0.01, 1);
  for (auto& x : v) x = u(rng);
  const auto r = clamp_normalize(g, v);
  const auto pts = random_points(40, rng, -0.5, 4.5);  // some fall outside
  double oracle = 0;
  std::size_t outside = 0;
  for (const auto& p : pts) {
    const double d = density_at(r, p);
    if (d < 0) ++outside;
    oracle += std::log(std::max(d, 1e-12));
  }
  const auto got = average_log_score(r, as_events(pts));
  EXPECT_NEAR(got->sum, oracle, 1e-12 * std::abs(oracle));
  EXPECT_EQ(got->outside, outside);
}

TEST(Als, UnitDensityPointScoresZero) {
  const GridSpec g{Point(0, 0), 1, 1, 1};
  EXPECT_NEAR(average_log_score(uniform_raster(g), as_events({Point(0.5, 0.5)}))->sum, 0.0, 1e-15);
}

TEST(Boundary, BinningOracle) {
  const auto store = small_store(2, 5, 5);
  const auto mask = derive_boundary(store, 1.0);
  auto [lo, hi] = bounding_box(locations(store.events()));
  std::vector<bool> oracle(mask.inside.size(), false);
  for (const auto& e : store.events()) {
    const int c = static_cast<int>(std::floor(e.location.x() - lo.x()));
    const int r = static_cast<int>(std::floor(e.location.y() - lo.y()));
    oracle[static_cast<std::size_t>(r) * mask.grid.width + c] = true;
  }
  EXPECT_EQ(mask.inside, oracle);
  const auto single = derive_boundary(std::vector<Event>{{1, Point(2.5, 1.5)}}, GridSpec{Point(0, 0), 1, 4, 4});
  EXPECT_EQ(single.count(), 1u);
  EXPECT_THROW(derive_boundary(EventStore{}, 1.0), ValidationError);
}

TEST(DensityToCounts, SumsToTotalAndUniformSplit) {
  const GridSpec counts{Point(0, 0), 1, 3, 2};
  const auto fine = counts.refined(4);
  const auto u = density_to_counts(uniform_raster(fine), 12.0, counts);
  for (double v : u.values) EXPECT_NEAR(v, 2.0, 1e-12);
  for (double v : density_to_counts(uniform_raster(fine), 0.0, counts).values) EXPECT_EQ(v, 0.0);

  std::mt19937_64 rng(6);
  std::vector<double> v(fine.cells());
  std::uniform_real_distribution<double> d(0, 1);
  for (auto& x : v) x = d(rng);
  const auto c = density_to_counts(clamp_normalize(fine, v), 37.5, counts);
  EXPECT_NEAR(c.total(), 37.5, 1e-9);
  EXPECT_THROW(density_to_counts(uniform_raster(GridSpec{Point(0.1, 0), 0.25, 12, 8}), 1, counts), ValidationError);
}

TEST(SignTest, KnownValues) {
  EXPECT_DOUBLE_EQ(sign_test_p_value({1, 1, 1}, {1, 1, 1}), 1.0);
  // 10 wins out of 10: p = 2 / 1024
  std::vector<double> a(10, 1.0), b(10, 0.0);
  EXPECT_NEAR(sign_test_p_value(a, b), 2.0 / 1024.0, 1e-15);
  // 5 of 10: p = 1
  for (int i = 0; i < 5; ++i) std::swap(a[i], b[i]);
  EXPECT_NEAR(sign_test_p_value(a, b), 1.0, 1e-12);
}

TEST(Comparison, MedicOnlyReproducesStandaloneMetrics) {
  const auto store = small_store(3, 8, 7);
  const std::vector<long> periods{168 * 2 + 1, 168 * 2 + 50, 168 * 2 + 100};
  ComparisonConfig cfg{2, 0.25, 1.0, 1};
  const auto cmp = run_comparison(store, periods, {Method::medic}, nullptr, cfg);
  ASSERT_EQ(cmp.reports.size(), 1u);
  ASSERT_EQ(cmp.reports[0].periods.size(), periods.size());
  for (std::size_t i = 0; i < periods.size(); ++i) {
    const long u = periods[i];
    const auto m = medic_predict(store, u, 2, cmp.grids.counts);
    const auto act = count_events(cmp.grids.counts, store.at(u));
    EXPECT_EQ(cmp.reports[0].rmse[i], rmse(m, act));
    EXPECT_EQ(cmp.reports[0].ansc_b[i], anscombe_rmse(m, act, &cmp.boundary));
    const auto als = average_log_score(medic_density(m), store.at(u));
    EXPECT_EQ(cmp.reports[0].als[i], als->sum);
  }
}

TEST(Comparison, ReducedWarpMatchesUnwarpedAls) {
  const auto store = small_store(3, 15, 8);
  WeeklyCycle cyc;
  cyc.weeks = 2;
  cyc.slots.resize(kWeekLength);
  for (int s = 0; s < kWeekLength; ++s) {
    cyc.slots[s].slot = s;
    ComponentPlan c;
    c.params = {1.0, 0.0};
    cyc.slots[s].components.push_back(c);
  }
  const std::vector<long> periods{168 * 2 + 10, 168 * 2 + 90};
  const auto cmp = run_comparison(store, periods, {Method::kde, Method::warp}, &cyc, ComparisonConfig{2, 0.25, 1.0, 1});
  ASSERT_EQ(cmp.reports[0].als.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(cmp.reports[1].als[i], cmp.reports[0].als[i], 1e-9);
}

TEST(Comparison, FailuresDroppedSymmetricallyAndDeterministic) {
  const auto store = small_store(3, 8, 9);
  const std::vector<long> periods{168 * 2 + 3, 168 * 2 + 4};
  ComparisonConfig cfg{2, 0.25, 1.0, 2};
  const auto a = run_comparison(store, periods, {Method::medic, Method::kde}, nullptr, cfg);
  const auto b = run_comparison(store, periods, {Method::medic, Method::kde}, nullptr, cfg);
  EXPECT_EQ(a.reports[1].als, b.reports[1].als);
  EXPECT_EQ(a.reports[0].periods, a.reports[1].periods);
  EXPECT_THROW(run_comparison(store, {100}, {Method::medic}, nullptr, cfg), InsufficientHistory);
  EXPECT_THROW(run_comparison(store, periods, {Method::warp}, nullptr, cfg), ValidationError);
}
