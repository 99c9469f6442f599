#pragma once

#include "warpfield/data.hpp"

#include <fstream>
#include <istream>
#include <ostream>

namespace warpfield {

/// Regular grid of square cells. Cell (col, row) spans
/// [origin + (col, row) * cell, origin + (col + 1, row + 1) * cell); values are
/// stored row-major with row 0 at the origin's y.
struct GridSpec {
  Point origin = Point::Zero();
  double cell = 1.0;
  int width = 0;
  int height = 0;

  std::size_t cells() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
  double cell_area() const { return cell * cell; }
  Point center(int col, int row) const {
    return origin + Point((col + 0.5) * cell, (row + 0.5) * cell);
  }
  bool contains(const Point& p) const {
    return p.x() >= origin.x() && p.y() >= origin.y() && p.x() < origin.x() + width * cell &&
           p.y() < origin.y() + height * cell;
  }
  /// Flat index of the cell holding p; -1 outside.
  long index_of(const Point& p) const {
    if (!contains(p)) return -1;
    const int c = std::min(width - 1, static_cast<int>((p.x() - origin.x()) / cell));
    const int r = std::min(height - 1, static_cast<int>((p.y() - origin.y()) / cell));
    return static_cast<long>(r) * width + c;
  }
  /// Same extent, each cell split into factor x factor sub-cells.
  GridSpec refined(int factor) const {
    return {origin, cell / factor, width * factor, height * factor};
  }
  bool same_geometry(const GridSpec& o) const {
    return origin == o.origin && cell == o.cell && width == o.width && height == o.height;
  }
};

/// Grid anchored at `lo` covering every point up to `hi`.
inline GridSpec grid_covering(const Point& lo, const Point& hi, double cell) {
  if (!(cell > 0)) throw ValidationError("cell size must be > 0");
  GridSpec g;
  g.origin = lo;
  g.cell = cell;
  g.width = static_cast<int>(std::floor((hi.x() - lo.x()) / cell)) + 1;
  g.height = static_cast<int>(std::floor((hi.y() - lo.y()) / cell)) + 1;
  return g;
}

inline std::pair<Point, Point> bounding_box(const std::vector<Point>& pts) {
  if (pts.empty()) throw ValidationError("bounding box of no points");
  Point lo = pts.front(), hi = pts.front();
  for (const auto& p : pts) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return {lo, hi};
}

enum class Lookup { bilinear, piecewise_constant };

/// Gridded density (per km^2).
struct DensityRaster {
  GridSpec grid;
  std::vector<double> values;
  bool normalized = false;
  Lookup lookup = Lookup::bilinear;

  double integral() const {
    double s = 0;
    for (double v : values) s += v;
    return s * grid.cell_area();
  }
  double at(int col, int row) const { return values[static_cast<std::size_t>(row) * grid.width + col]; }
};

/// Expected (or observed) counts per cell for one period.
struct CountGrid {
  GridSpec grid;
  std::vector<double> values;

  double total() const {
    double s = 0;
    for (double v : values) s += v;
    return s;
  }
};

inline CountGrid count_events(const GridSpec& grid, const std::vector<Event>& events) {
  CountGrid g{grid, std::vector<double>(grid.cells(), 0.0)};
  for (const auto& e : events)
    if (const long i = grid.index_of(e.location); i >= 0) g.values[i] += 1.0;
  return g;
}

// Text grid format: `origin_x origin_y cell_km width height`, then one line
// per row (row 0 first) of space-separated values.
inline void write_grid(std::ostream& out, const GridSpec& g, const std::vector<double>& values) {
  out << detail::fmt_double(g.origin.x()) << ' ' << detail::fmt_double(g.origin.y()) << ' '
      << detail::fmt_double(g.cell) << ' ' << g.width << ' ' << g.height << '\n';
  for (int r = 0; r < g.height; ++r) {
    for (int c = 0; c < g.width; ++c) {
      if (c) out << ' ';
      out << detail::fmt_double(values[static_cast<std::size_t>(r) * g.width + c]);
    }
    out << '\n';
  }
}

inline std::pair<GridSpec, std::vector<double>> read_grid(std::istream& in) {
  GridSpec g;
  double ox = 0, oy = 0;
  if (!(in >> ox >> oy >> g.cell >> g.width >> g.height) || g.width < 1 || g.height < 1 || !(g.cell > 0))
    throw ParseError("bad grid header", 1);
  g.origin = Point(ox, oy);
  std::vector<double> values(g.cells());
  for (auto& v : values)
    if (!(in >> v)) throw ParseError("grid has fewer values than its header declares", 2);
  return {g, values};
}

inline void save_raster(const std::string& path, const DensityRaster& r) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path);
  write_grid(out, r.grid, r.values);
}

inline DensityRaster load_raster(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  auto [g, v] = read_grid(in);
  DensityRaster r{g, std::move(v), false, Lookup::bilinear};
  const double integral = r.integral();
  r.normalized = std::abs(integral - 1.0) <= 1e-6;
  return r;
}

}  // namespace warpfield
