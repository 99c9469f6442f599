#pragma once

#include "warpfield/estimation.hpp"

namespace warpfield {

/// MEDIC: per cell, the mean of the counts in the same hour slot over the
/// preceding `weeks` weeks.
inline CountGrid medic_predict(const EventStore& store, long u, int weeks, const GridSpec& grid) {
  require_history(u, weeks);
  CountGrid out{grid, std::vector<double>(grid.cells(), 0.0)};
  for (int m = 1; m <= weeks; ++m) {
    const auto c = count_events(grid, store.at(u - static_cast<long>(kWeekLength) * m));
    for (std::size_t i = 0; i < c.values.size(); ++i) out.values[i] += c.values[i];
  }
  for (double& v : out.values) v /= weeks;
  return out;
}

inline double medic_total(const CountGrid& grid) { return grid.total(); }

/// Counts divided by total * cell area; looked up per cell, not interpolated.
inline DensityRaster medic_density(const CountGrid& grid) {
  const double total = grid.total();
  if (!(total > 0)) throw DegenerateDensity("MEDIC grid has zero total count");
  DensityRaster r{grid.grid, grid.values, true, Lookup::piecewise_constant};
  const double scale = 1.0 / (total * grid.grid.cell_area());
  for (double& v : r.values) v *= scale;
  return r;
}

/// Picks H from the labeled points (and the slot-agnostic past window as a
/// fallback for tiny labeled sets).
using BandwidthSelector = std::function<BandwidthEstimate(const std::vector<Point>& labeled, const std::vector<Point>& past)>;

inline BandwidthEstimate normal_reference_selector(const std::vector<Point>& labeled, const std::vector<Point>& past) {
  if (labeled.size() >= 3) return normal_reference_bandwidth(labeled);
  auto est = normal_reference_bandwidth(past);
  est.regularized = true;
  return est;
}

/// Unwarped KDE of the full labeled set with one bandwidth for the period.
inline Prediction unwarped_kde_predict(const EventStore& store, long u, int weeks, const GridSpec& fine,
                                       const BandwidthSelector& selector = normal_reference_selector) {
  const auto labeled = labeled_set(store, u, weeks);
  Prediction out;
  if (labeled.empty()) {
    out.raster = uniform_raster(fine);
    out.flagged = true;
    return out;
  }
  const auto pts = locations(labeled);
  const auto est = selector(pts, locations(past_window(store, u, weeks)));
  out.raster = kde_raster(pts, est.bandwidth, fine);
  out.weights = {1.0};
  out.flagged = est.regularized;
  return out;
}

}  // namespace warpfield
