#pragma once

#include "warpfield/grid.hpp"
#include "warpfield/kernels.hpp"

#include <cmath>

namespace warpfield {

/// Density floor applied before taking logs (per km^2).
inline constexpr double kLogFloor = 1e-12;

/// Unwarped KDE at one point: equal-weight mean of Gaussian kernels.
inline double kde_predict(const std::vector<Point>& labeled, const Bandwidth& h, const Point& x) {
  if (labeled.empty()) throw ValidationError("KDE needs at least one labeled point");
  double s = 0;
  for (const auto& p : labeled) s += gaussian_eval(x, p, h);
  return s / static_cast<double>(labeled.size());
}

/// Adds sum_i weights(i, m) k(x, sources_i) to column m of `out` for every
/// cell center x. `out` is cells x weights.cols(). Each source only touches
/// the bounding box of its Mahalanobis ball of radius^2 kKernelCutoff.
///
/// Along a row the exponent is quadratic in the column offset, so the kernel
/// factors as exp(-a dx^2 / 2) * exp(-b dx dy) * exp(-c dy^2 / 2) and the
/// middle factor advances from row to row by an elementwise multiply; only
/// O(rows + cols) exponentials are taken per source.
inline void accumulate_kernels(const GridSpec& grid, const std::vector<Point>& sources,
                               const Eigen::MatrixXd& weights, const Bandwidth& h, Eigen::MatrixXd& out) {
  const auto m = weights.cols();
  const auto& inv = h.inverse();
  const double a = inv(0, 0), b = inv(0, 1), c = inv(1, 1);
  const double rx = std::sqrt(kKernelCutoff * h.matrix()(0, 0));
  const double ry = std::sqrt(kKernelCutoff * h.matrix()(1, 1));
  const double cell = grid.cell;
  Eigen::ArrayXd dx, ax, step, cross, e;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const auto row_w = weights.row(static_cast<Eigen::Index>(i));
    if ((row_w.array() == 0).all()) continue;
    const Point& s = sources[i];
    const int c0 = std::max(0, static_cast<int>(std::floor((s.x() - rx - grid.origin.x()) / cell - 0.5)));
    const int c1 = std::min(grid.width - 1, static_cast<int>(std::ceil((s.x() + rx - grid.origin.x()) / cell - 0.5)));
    const int r0 = std::max(0, static_cast<int>(std::floor((s.y() - ry - grid.origin.y()) / cell - 0.5)));
    const int r1 = std::min(grid.height - 1, static_cast<int>(std::ceil((s.y() + ry - grid.origin.y()) / cell - 0.5)));
    if (c0 > c1 || r0 > r1) continue;
    const int span = c1 - c0 + 1;
    dx = Eigen::ArrayXd::LinSpaced(span, c0, c1) * cell + (grid.origin.x() + 0.5 * cell - s.x());
    const double dy0 = grid.origin.y() + (r0 + 0.5) * cell - s.y();
    const double dy1 = grid.origin.y() + (r1 + 0.5) * cell - s.y();
    const double maxdx = dx.abs().maxCoeff(), maxdy = std::max(std::abs(dy0), std::abs(dy1));
    // The factors can over/underflow for nearly degenerate H; fall back to
    // one exponential per cell there.
    const bool factored = 0.5 * (a * maxdx * maxdx + c * maxdy * maxdy) + std::abs(b) * maxdx * maxdy < 600.0;
    if (factored) {
      ax = (-0.5 * a) * dx.square();
      ax = ax.exp();
      step = ((-b * cell) * dx).exp();
      cross = ((-b * dy0) * dx).exp();
    }
    for (int r = r0; r <= r1; ++r) {
      const double dy = grid.origin.y() + (r + 0.5) * cell - s.y();
      if (factored) {
        e = (h.peak() * std::exp(-0.5 * c * dy * dy)) * ax * cross;
        cross *= step;
      } else {
        e = h.peak() * (-0.5 * (a * dx.square() + (2.0 * b * dy) * dx + c * dy * dy)).exp();
      }
      const auto base = static_cast<Eigen::Index>(r) * grid.width + c0;
      for (Eigen::Index k = 0; k < m; ++k) {
        const double w = row_w[k];
        if (w != 0) out.col(k).segment(base, span).array() += w * e;
      }
    }
  }
}

/// Unnormalized KDE evaluated at every cell center.
inline std::vector<double> kde_raw(const std::vector<Point>& labeled, const Bandwidth& h, const GridSpec& grid) {
  if (labeled.empty()) throw ValidationError("KDE needs at least one labeled point");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(grid.cells()), 1);
  const Eigen::MatrixXd w =
      Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(labeled.size()), 1, 1.0 / static_cast<double>(labeled.size()));
  accumulate_kernels(grid, labeled, w, h, out);
  return {out.data(), out.data() + out.size()};
}

/// Mean kernel vector of the labeled points against the cloud, (1/n) sum_i k_{s_i}.
inline Eigen::VectorXd mean_kernel_vector(const std::vector<Point>& labeled, const std::vector<Point>& cloud,
                                          const Bandwidth& h) {
  return kernel_matrix(labeled, cloud, h).colwise().mean().transpose();
}

/// (1/n) sum_i warped_eval(x, s_i) at every cell center; may be negative.
/// Uses sum_i k_x' W k_{s_i} = k_x' (W kbar) so the cloud term is a single
/// weighted accumulation.
inline std::vector<double> warped_raw(const std::vector<Point>& labeled, const LaplacianContext& ctx,
                                      const GridSpec& grid) {
  auto raw = kde_raw(labeled, ctx.bandwidth, grid);
  if (ctx.lambda == 0) return raw;
  const Eigen::VectorXd v = ctx.warp * mean_kernel_vector(labeled, ctx.cloud.points, ctx.bandwidth);
  Eigen::MatrixXd cloud_term = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(grid.cells()), 1);
  accumulate_kernels(grid, ctx.cloud.points, v, ctx.bandwidth, cloud_term);
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] -= cloud_term(static_cast<Eigen::Index>(i), 0);
  return raw;
}

/// Clamps negatives to zero and rescales to unit midpoint-rule integral.
inline DensityRaster clamp_normalize(const GridSpec& grid, std::vector<double> raw) {
  double sum = 0;
  for (double& v : raw) {
    if (!(v > 0)) v = 0;
    sum += v;
  }
  const double integral = sum * grid.cell_area();
  if (!(integral > 0) || !std::isfinite(integral)) throw DegenerateDensity("density is identically zero after clamping");
  const double inv = 1.0 / integral;
  for (double& v : raw) v *= inv;
  return {grid, std::move(raw), true, Lookup::bilinear};
}

inline DensityRaster normalize(DensityRaster r) {
  auto out = clamp_normalize(r.grid, std::move(r.values));
  out.lookup = r.lookup;
  return out;
}

inline DensityRaster kde_raster(const std::vector<Point>& labeled, const Bandwidth& h, const GridSpec& grid) {
  return clamp_normalize(grid, kde_raw(labeled, h, grid));
}

inline DensityRaster warped_raster(const std::vector<Point>& labeled, const LaplacianContext& ctx,
                                   const GridSpec& grid) {
  if (labeled.empty()) throw ValidationError("warped KDE needs at least one labeled point");
  return clamp_normalize(grid, warped_raw(labeled, ctx, grid));
}

inline DensityRaster uniform_raster(const GridSpec& grid) {
  const double v = 1.0 / (static_cast<double>(grid.cells()) * grid.cell_area());
  return {grid, std::vector<double>(grid.cells(), v), true, Lookup::bilinear};
}

struct LogDensity {
  std::vector<double> values;
  std::vector<bool> outside;  // point fell outside the raster and got the floor
};

/// Density at p: bilinear between cell centers (clamped at the outer half
/// cells) or the containing cell's value. Negative when outside the extent.
inline double density_at(const DensityRaster& r, const Point& p) {
  const auto& g = r.grid;
  if (!g.contains(p)) return -1.0;
  if (r.lookup == Lookup::piecewise_constant) return r.values[static_cast<std::size_t>(g.index_of(p))];
  const double u = (p.x() - g.origin.x()) / g.cell - 0.5;
  const double v = (p.y() - g.origin.y()) / g.cell - 0.5;
  const double fu = std::floor(u), fv = std::floor(v);
  const double tx = u - fu, ty = v - fv;
  auto clampc = [](long i, int n) { return static_cast<int>(std::clamp<long>(i, 0, n - 1)); };
  const int c0 = clampc(static_cast<long>(fu), g.width), c1 = clampc(static_cast<long>(fu) + 1, g.width);
  const int r0 = clampc(static_cast<long>(fv), g.height), r1 = clampc(static_cast<long>(fv) + 1, g.height);
  return r.at(c0, r0) * (1 - tx) * (1 - ty) + r.at(c1, r0) * tx * (1 - ty) + r.at(c0, r1) * (1 - tx) * ty +
         r.at(c1, r1) * tx * ty;
}

inline LogDensity log_density_at(const DensityRaster& r, const std::vector<Point>& points) {
  if (!r.normalized) throw ValidationError("log density requires a normalized raster");
  LogDensity out;
  out.values.reserve(points.size());
  out.outside.reserve(points.size());
  for (const auto& p : points) {
    const double d = density_at(r, p);
    out.outside.push_back(d < 0);
    out.values.push_back(std::log(std::max(d, kLogFloor)));
  }
  return out;
}

}  // namespace warpfield
