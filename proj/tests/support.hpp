#pragma once

#include "warpfield/warpfield.hpp"

#include <random>

namespace wf_test {

using warpfield::Event;
using warpfield::Point;

inline std::vector<Point> random_points(std::size_t n, std::mt19937_64& rng, double lo = 0.0, double hi = 10.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<Point> pts(n);
  for (auto& p : pts) p = Point(u(rng), u(rng));
  return pts;
}

inline std::vector<Event> as_events(const std::vector<Point>& pts, long period = 1) {
  std::vector<Event> ev;
  for (const auto& p : pts) ev.push_back({period, p});
  return ev;
}

/// Random SPD bandwidth with variances in [lo, hi] and moderate correlation.
inline warpfield::Bandwidth random_bandwidth(std::mt19937_64& rng, double lo = 0.2, double hi = 2.0) {
  std::uniform_real_distribution<double> v(lo, hi), r(-0.7, 0.7);
  const double a = v(rng), c = v(rng), rho = r(rng);
  Eigen::Matrix2d h;
  const double b = rho * std::sqrt(a * c);
  h << a, b, b, c;
  return warpfield::Bandwidth(h);
}

/// Dense O(Z^2) oracle for the warp operator: (I + lambda L K)^-1 lambda L by
/// explicit inversion, kernels evaluated one pair at a time.
inline Eigen::MatrixXd explicit_warp(const std::vector<Point>& cloud, const Eigen::MatrixXd& lap,
                                     const warpfield::Bandwidth& h, double lambda) {
  const auto z = static_cast<Eigen::Index>(cloud.size());
  Eigen::MatrixXd k(z, z);
  for (Eigen::Index i = 0; i < z; ++i)
    for (Eigen::Index j = 0; j < z; ++j) k(i, j) = warpfield::gaussian_eval(cloud[i], cloud[j], h);
  const Eigen::MatrixXd m = Eigen::MatrixXd::Identity(z, z) + lambda * lap * k;
  return m.inverse() * (lambda * lap);
}

/// Small synthetic store: uniform square city plus a dense corner, `weeks`
/// weeks of hourly periods with Poisson counts.
inline warpfield::EventStore small_store(int weeks, double mean, std::uint64_t seed) {
  warpfield::SynthConfig c;
  c.polygon = {Point(0, 0), Point(12, 0), Point(12, 12), Point(0, 12)};
  c.roads.push_back({{Point(1, 1), Point(11, 6)}, 0.5});
  c.uniform_weight = 0.5;
  c.weekly_profile = warpfield::default_weekly_profile();
  c.mean_events = mean;
  c.weeks = weeks;
  c.seed = seed;
  return warpfield::synth_generate(c);
}

}  // namespace wf_test
