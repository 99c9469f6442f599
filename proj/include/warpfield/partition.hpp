#pragma once

#include "warpfield/data.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <random>

namespace warpfield {

inline constexpr int kMaxClusters = 8;
inline constexpr std::size_t kMinClusterSize = 15;

struct Clustering {
  int k = 1;
  std::vector<Point> centroids;
  std::vector<int> labels;

  std::vector<std::size_t> sizes() const {
    std::vector<std::size_t> s(centroids.size(), 0);
    for (int l : labels) ++s[static_cast<std::size_t>(l)];
    return s;
  }
};

/// Nearest centroid per point; ties go to the lower centroid index.
inline std::vector<int> assign_to_components(const std::vector<Point>& centroids, const std::vector<Point>& points) {
  std::vector<int> labels(points.size(), 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.size(); ++c) {
      const double d = (points[i] - centroids[c]).squaredNorm();
      if (d < best) {
        best = d;
        labels[i] = static_cast<int>(c);
      }
    }
  }
  return labels;
}

inline std::vector<int> assign_to_components(const Clustering& c, const std::vector<Point>& points) {
  return assign_to_components(c.centroids, points);
}

/// Lloyd's k-means with k-means++ seeding. Stops at an assignment fixpoint or
/// after `max_iter` rounds; empty clusters are reseeded at the point farthest
/// from its centroid.
inline Clustering kmeans(const std::vector<Point>& points, int k, std::uint64_t seed, int max_iter = 100) {
  const std::size_t n = points.size();
  if (k < 1) throw ValidationError("k must be >= 1");
  if (n < static_cast<std::size_t>(k)) throw ValidationError("k-means needs at least k points");

  std::mt19937_64 rng(seed);
  Clustering out;
  out.k = k;
  if (k == 1) {
    Point mean = Point::Zero();
    for (const auto& p : points) mean += p;
    out.centroids = {mean / static_cast<double>(n)};
    out.labels.assign(n, 0);
    return out;
  }

  std::vector<Point>& cent = out.centroids;
  cent.push_back(points[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)]);
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = (points[i] - cent[0]).squaredNorm();
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  while (static_cast<int>(cent.size()) < k) {
    double total = 0;
    for (double v : d2) total += v;
    std::size_t pick = 0;
    if (total > 0) {
      double target = unif(rng) * total;
      for (pick = 0; pick + 1 < n; ++pick) {
        target -= d2[pick];
        if (target < 0 && d2[pick] > 0) break;
      }
    } else {
      pick = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    }
    cent.push_back(points[pick]);
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], (points[i] - cent.back()).squaredNorm());
  }

  auto update_means = [&](const std::vector<int>& labels) {
    std::vector<Point> sum(k, Point::Zero());
    std::vector<std::size_t> cnt(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sum[labels[i]] += points[i];
      ++cnt[labels[i]];
    }
    std::vector<int> empty;
    for (int c = 0; c < k; ++c) {
      if (cnt[c] > 0)
        cent[c] = sum[c] / static_cast<double>(cnt[c]);
      else
        empty.push_back(c);
    }
    return empty;
  };

  out.labels = assign_to_components(cent, points);
  for (int iter = 0; iter < max_iter; ++iter) {
    auto empty = update_means(out.labels);
    for (int c : empty) {
      std::size_t far = 0;
      double worst = -1;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = (points[i] - cent[out.labels[i]]).squaredNorm();
        if (d > worst) {
          worst = d;
          far = i;
        }
      }
      cent[c] = points[far];
      out.labels[far] = c;
    }
    auto next = assign_to_components(cent, points);
    if (next == out.labels && empty.empty()) break;
    out.labels = std::move(next);
  }
  return out;
}

/// k-means at k, lowering k until every cluster holds at least `min_size`
/// points (k = 1 is always accepted).
inline Clustering cluster_with_floor(const std::vector<Point>& points, int k, std::uint64_t seed,
                                     std::size_t min_size = kMinClusterSize) {
  k = std::clamp(k, 1, kMaxClusters);
  for (; k > 1; --k) {
    if (points.size() < static_cast<std::size_t>(k) * min_size) continue;
    auto c = kmeans(points, k, derive_seed(seed, k));
    const auto sizes = c.sizes();
    if (*std::min_element(sizes.begin(), sizes.end()) >= min_size) return c;
  }
  return kmeans(points, 1, seed);
}

/// Largest cluster count the size floor can ever admit.
inline int max_cluster_count(std::size_t n) {
  return std::clamp(static_cast<int>(n / kMinClusterSize), 1, kMaxClusters);
}

/// Warm start proportional to the labeled size: clamp(round(n / 100), 1, 8).
inline int warm_start_clusters(std::size_t n) {
  return std::clamp(static_cast<int>(std::lround(static_cast<double>(n) / 100.0)), 1, kMaxClusters);
}

struct ClusterSearch {
  int k = 1;
  Clustering clustering;
  double value = -std::numeric_limits<double>::infinity();
  int evaluations = 0;
  std::vector<int> visited;  // requested k in evaluation order
};

/// Neighbor hill-climb over the cluster count starting at k0: evaluate k0 and
/// both neighbors, then keep stepping toward the better side while the
/// validation value improves. Fewer than 30 points forces k = 1 with no
/// evaluation.
inline ClusterSearch search_cluster_count(const std::vector<Point>& labeled,
                                          const std::function<double(const Clustering&)>& validate, int k0,
                                          std::uint64_t seed) {
  ClusterSearch out;
  if (labeled.empty()) throw ValidationError("cluster search needs labeled points");
  if (labeled.size() < 2 * kMinClusterSize) {
    out.clustering = kmeans(labeled, 1, seed);
    return out;
  }
  const int kmax = max_cluster_count(labeled.size());
  k0 = std::clamp(k0, 1, kmax);

  std::map<int, std::pair<double, Clustering>> cache;
  auto eval = [&](int k) -> double {
    if (auto it = cache.find(k); it != cache.end()) return it->second.first;
    auto c = cluster_with_floor(labeled, k, seed);
    // A floor-reduced clustering may coincide with an earlier candidate.
    for (const auto& [kk, entry] : cache) {
      if (entry.second.k == c.k && entry.second.labels == c.labels) {
        cache.emplace(k, entry);
        out.visited.push_back(k);
        return entry.first;
      }
    }
    const double v = validate(c);
    ++out.evaluations;
    out.visited.push_back(k);
    cache.emplace(k, std::make_pair(v, std::move(c)));
    return v;
  };
  constexpr double kNone = -std::numeric_limits<double>::infinity();

  const double v0 = eval(k0);
  const double down = k0 > 1 ? eval(k0 - 1) : kNone;
  const double up = k0 < kmax ? eval(k0 + 1) : kNone;
  int cur = k0;
  if (std::max(down, up) > v0) {
    const int dir = up > down ? 1 : -1;
    cur = k0 + dir;
    for (int next = cur + dir; next >= 1 && next <= kmax; next += dir) {
      if (eval(next) > cache.at(cur).first)
        cur = next;
      else
        break;
    }
  }
  out.value = cache.at(cur).first;
  out.clustering = cache.at(cur).second;
  out.k = out.clustering.k;
  return out;
}

}  // namespace warpfield
