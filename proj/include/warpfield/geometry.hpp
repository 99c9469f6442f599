#pragma once

#include "warpfield/data.hpp"

#include <Eigen/SparseCore>

#include <numeric>
#include <ostream>
#include <random>

namespace warpfield {

struct PointCloud {
  std::vector<Point> points;
  std::uint64_t seed = 0;

  std::size_t size() const { return points.size(); }
};

/// Uniform sample without replacement of min(size, |events|) locations.
inline PointCloud sample_point_cloud(const std::vector<Event>& events, std::size_t size,
                                     std::uint64_t seed) {
  if (events.empty()) throw ValidationError("cannot sample a point cloud from no events");
  PointCloud cloud;
  cloud.seed = seed;
  const std::size_t n = events.size();
  if (size >= n) {
    cloud.points = locations(events);
    return cloud;
  }
  // Partial Fisher-Yates; the chosen indices are sorted so the cloud keeps
  // the store's order.
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < size; ++i) {
    std::uniform_int_distribution<std::size_t> d(i, n - 1);
    std::swap(idx[i], idx[d(rng)]);
  }
  idx.resize(size);
  std::sort(idx.begin(), idx.end());
  cloud.points.reserve(size);
  for (auto i : idx) cloud.points.push_back(events[i].location);
  return cloud;
}

enum class WeightMode { binary, heat };

using SparseMatrix = Eigen::SparseMatrix<double>;

struct Edge {
  int i = 0;
  int j = 0;  // i < j
  double length = 0;
};

struct AdjacencyGraph {
  SparseMatrix adjacency;  // symmetric, zero diagonal
  std::vector<Edge> edges;
  WeightMode mode = WeightMode::binary;
  double heat_scale = 0;  // r; only meaningful for heat weights

  int size() const { return static_cast<int>(adjacency.rows()); }
};

/// Maximum-likelihood exponential mean of edge lengths.
inline double fit_edge_scale(const std::vector<double>& distances) {
  if (distances.empty()) throw ValidationError("edge scale needs at least one edge");
  double sum = 0;
  for (double d : distances) sum += d;
  return sum / static_cast<double>(distances.size());
}

namespace detail {

// n nearest of point i, ordered by (distance, index).
inline std::vector<int> nearest_exact(const std::vector<Point>& pts, int i, int n) {
  const int z = static_cast<int>(pts.size());
  std::vector<std::pair<double, int>> cand;
  cand.reserve(z - 1);
  for (int j = 0; j < z; ++j)
    if (j != i) cand.emplace_back((pts[i] - pts[j]).squaredNorm(), j);
  const int take = std::min<int>(n, static_cast<int>(cand.size()));
  std::partial_sort(cand.begin(), cand.begin() + take, cand.end());
  std::vector<int> out(take);
  for (int k = 0; k < take; ++k) out[k] = cand[k].second;
  return out;
}

// Bucketed search returning the same neighbors as nearest_exact: rings of
// buckets are added until the n-th best distance is provably final.
class BucketIndex {
 public:
  BucketIndex(const std::vector<Point>& pts, int per_bucket) : pts_(pts) {
    lo_ = hi_ = pts.front();
    for (const auto& p : pts) {
      lo_ = lo_.cwiseMin(p);
      hi_ = hi_.cwiseMax(p);
    }
    const double w = std::max(hi_.x() - lo_.x(), 1e-12), h = std::max(hi_.y() - lo_.y(), 1e-12);
    const double cells = std::max(1.0, static_cast<double>(pts.size()) / per_bucket);
    cell_ = std::sqrt(w * h / cells);
    if (!(cell_ > 0)) cell_ = 1.0;
    nx_ = static_cast<int>(w / cell_) + 1;
    ny_ = static_cast<int>(h / cell_) + 1;
    buckets_.assign(static_cast<std::size_t>(nx_) * ny_, {});
    for (int i = 0; i < static_cast<int>(pts.size()); ++i) buckets_[bucket_of(pts[i])].push_back(i);
  }

  std::vector<int> nearest(int i, int n) const {
    const int z = static_cast<int>(pts_.size());
    const int want = std::min(n, z - 1);
    const Point& p = pts_[i];
    const int cx = cx_of(p), cy = cy_of(p);
    std::vector<std::pair<double, int>> cand;
    for (int ring = 0;; ++ring) {
      for (int y = cy - ring; y <= cy + ring; ++y) {
        for (int x = cx - ring; x <= cx + ring; ++x) {
          if (std::max(std::abs(x - cx), std::abs(y - cy)) != ring) continue;
          if (x < 0 || y < 0 || x >= nx_ || y >= ny_) continue;
          for (int j : buckets_[static_cast<std::size_t>(y) * nx_ + x])
            if (j != i) cand.emplace_back((p - pts_[j]).squaredNorm(), j);
        }
      }
      const bool covers_all = cx - ring <= 0 && cy - ring <= 0 && cx + ring >= nx_ - 1 && cy + ring >= ny_ - 1;
      if (static_cast<int>(cand.size()) >= want) {
        std::partial_sort(cand.begin(), cand.begin() + want, cand.end());
        // Anything outside the scanned rings is at least `ring * cell_` away.
        const double safe = ring * cell_;
        if (covers_all || cand[want - 1].first < safe * safe) break;
      } else if (covers_all) {
        break;
      }
    }
    std::sort(cand.begin(), cand.end());
    std::vector<int> out;
    for (int k = 0; k < want; ++k) out.push_back(cand[k].second);
    return out;
  }

 private:
  int cx_of(const Point& p) const { return std::min(nx_ - 1, static_cast<int>((p.x() - lo_.x()) / cell_)); }
  int cy_of(const Point& p) const { return std::min(ny_ - 1, static_cast<int>((p.y() - lo_.y()) / cell_)); }
  std::size_t bucket_of(const Point& p) const { return static_cast<std::size_t>(cy_of(p)) * nx_ + cx_of(p); }

  const std::vector<Point>& pts_;
  Point lo_, hi_;
  double cell_ = 1;
  int nx_ = 1, ny_ = 1;
  std::vector<std::vector<int>> buckets_;
};

}  // namespace detail

struct KnnOptions {
  int neighbors = 5;
  WeightMode mode = WeightMode::binary;
  int exact_scan_limit = 5000;  // above this, grid buckets
  unsigned threads = 1;
};

/// Symmetric-OR kNN graph: (i,j) is an edge iff i is among the n nearest of
/// j or j among the n nearest of i. Ties go to the lower index.
inline AdjacencyGraph build_knn_graph(const PointCloud& cloud, const KnnOptions& opt = {}) {
  const int z = static_cast<int>(cloud.size());
  if (z < 2) throw ValidationError("kNN graph needs at least two points");
  if (opt.neighbors < 1) throw ValidationError("neighbor count must be >= 1");

  std::vector<std::vector<int>> near(z);
  if (z <= opt.exact_scan_limit) {
    parallel_for(z, opt.threads, [&](std::size_t i) {
      near[i] = detail::nearest_exact(cloud.points, static_cast<int>(i), opt.neighbors);
    });
  } else {
    detail::BucketIndex index(cloud.points, 8);
    parallel_for(z, opt.threads, [&](std::size_t i) { near[i] = index.nearest(static_cast<int>(i), opt.neighbors); });
  }

  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < z; ++i)
    for (int j : near[i]) pairs.emplace_back(std::min(i, j), std::max(i, j));
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());

  AdjacencyGraph g;
  g.mode = opt.mode;
  std::vector<double> lengths;
  for (auto [i, j] : pairs) {
    const double d = (cloud.points[i] - cloud.points[j]).norm();
    g.edges.push_back({i, j, d});
    lengths.push_back(d);
  }
  if (opt.mode == WeightMode::heat) g.heat_scale = fit_edge_scale(lengths);

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(2 * g.edges.size());
  for (const auto& e : g.edges) {
    const double w = opt.mode == WeightMode::binary ? 1.0 : std::exp(-e.length * e.length / g.heat_scale);
    trip.emplace_back(e.i, e.j, w);
    trip.emplace_back(e.j, e.i, w);
  }
  g.adjacency.resize(z, z);
  g.adjacency.setFromTriplets(trip.begin(), trip.end());
  return g;
}

/// A graph with no edges, used for single-point clouds.
inline AdjacencyGraph empty_graph(int z) {
  AdjacencyGraph g;
  g.adjacency.resize(z, z);
  return g;
}

struct Laplacian {
  SparseMatrix matrix;     // L = D - A
  Eigen::VectorXd degree;  // diag(D)

  int size() const { return static_cast<int>(matrix.rows()); }
  Eigen::MatrixXd dense() const { return Eigen::MatrixXd(matrix); }
};

inline Laplacian build_laplacian(const AdjacencyGraph& graph) {
  const int z = graph.size();
  Laplacian lap;
  lap.degree = Eigen::VectorXd::Zero(z);
  std::vector<Eigen::Triplet<double>> trip;
  for (int c = 0; c < graph.adjacency.outerSize(); ++c) {
    for (SparseMatrix::InnerIterator it(graph.adjacency, c); it; ++it) {
      lap.degree[it.row()] += it.value();
      trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), -it.value());
    }
  }
  for (int i = 0; i < z; ++i)
    if (lap.degree[i] != 0) trip.emplace_back(i, i, lap.degree[i]);
  lap.matrix.resize(z, z);
  lap.matrix.setFromTriplets(trip.begin(), trip.end());
  return lap;
}

/// Component label per node; labels are numbered in order of their lowest node.
inline std::vector<int> connected_components(const AdjacencyGraph& graph) {
  const int z = graph.size();
  std::vector<int> label(z, -1);
  int next = 0;
  std::vector<int> stack;
  for (int s = 0; s < z; ++s) {
    if (label[s] >= 0) continue;
    label[s] = next;
    stack.push_back(s);
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (SparseMatrix::InnerIterator it(graph.adjacency, v); it; ++it) {
        const int w = static_cast<int>(it.row());
        if (it.value() != 0 && label[w] < 0) {
          label[w] = next;
          stack.push_back(w);
        }
      }
    }
    ++next;
  }
  return label;
}

/// Debug export, one `i j weight` line per undirected edge.
inline void write_edge_list(std::ostream& out, const AdjacencyGraph& graph) {
  for (const auto& e : graph.edges)
    out << e.i << ' ' << e.j << ' ' << detail::fmt_double(graph.adjacency.coeff(e.i, e.j)) << '\n';
}

}  // namespace warpfield
