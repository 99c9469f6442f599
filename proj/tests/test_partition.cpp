#include "support.hpp"

#include <gtest/gtest.h>

using namespace warpfield;
using wf_test::random_points;

namespace {

std::vector<Point> blobs(const std::vector<Point>& centers, int per, double spread, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, spread);
  std::vector<Point> out;
  for (const auto& c : centers)
    for (int i = 0; i < per; ++i) out.emplace_back(c.x() + n(rng), c.y() + n(rng));
  return out;
}

}  // namespace

TEST(Assign, NearestCentroidAndLowerIndexTie) {
  const std::vector<Point> cent{Point(0, 0), Point(2, 0), Point(10, 10)};
  const auto labels = assign_to_components(cent, {Point(0.2, 0), Point(1, 0), Point(1.9, 0.1), Point(9, 9)});
  EXPECT_EQ(labels, (std::vector<int>{0, 0, 1, 2}));  // (1, 0) is equidistant: lower index
}

TEST(Kmeans, CentroidsAreMemberMeans) {
  std::mt19937_64 rng(1);
  const auto pts = random_points(200, rng);
  for (int k = 1; k <= 6; ++k) {
    const auto c = kmeans(pts, k, 7);
    ASSERT_EQ(static_cast<int>(c.centroids.size()), k);
    for (int j = 0; j < k; ++j) {
      Point s = Point::Zero();
      int n = 0;
      for (std::size_t i = 0; i < pts.size(); ++i)
        if (c.labels[i] == j) {
          s += pts[i];
          ++n;
        }
      ASSERT_GT(n, 0);
      EXPECT_LE((c.centroids[j] - s / n).norm(), 1e-12) << "k=" << k << " j=" << j;
    }
    // labels are the nearest-centroid assignment
    EXPECT_EQ(c.labels, assign_to_components(c, pts));
  }
}

TEST(Kmeans, SeparatesTwoBlobs) {
  std::mt19937_64 rng(2);
  const auto pts = blobs({Point(0, 0), Point(20, 20)}, 50, 1.0, rng);
  const auto c = kmeans(pts, 2, 3);
  for (int i = 1; i < 50; ++i) EXPECT_EQ(c.labels[i], c.labels[0]);
  for (int i = 51; i < 100; ++i) EXPECT_EQ(c.labels[i], c.labels[50]);
  EXPECT_NE(c.labels[0], c.labels[50]);
}

TEST(Kmeans, DeterministicForSeed) {
  std::mt19937_64 rng(3);
  const auto pts = random_points(150, rng);
  EXPECT_EQ(kmeans(pts, 4, 11).labels, kmeans(pts, 4, 11).labels);
  EXPECT_THROW(kmeans(pts, 0, 1), ValidationError);
  EXPECT_THROW(kmeans({Point(0, 0)}, 2, 1), ValidationError);
}

TEST(ClusterFloor, EveryClusterHasFifteen) {
  std::mt19937_64 rng(4);
  // One big blob and a 5-point outlier group: k = 2 would leave a tiny cluster.
  auto pts = blobs({Point(0, 0)}, 100, 1.0, rng);
  const auto far = blobs({Point(30, 30)}, 5, 0.1, rng);
  pts.insert(pts.end(), far.begin(), far.end());
  for (int k = 1; k <= 8; ++k) {
    const auto c = cluster_with_floor(pts, k, 5);
    for (auto s : c.sizes()) EXPECT_GE(s, kMinClusterSize) << "k=" << k;
  }
}

TEST(ClusterCount, WarmStartAndMax) {
  EXPECT_EQ(warm_start_clusters(20), 1);
  EXPECT_EQ(warm_start_clusters(250), 3);  // round(2.5) away from zero
  EXPECT_EQ(warm_start_clusters(5000), 8);
  EXPECT_EQ(max_cluster_count(29), 1);
  EXPECT_EQ(max_cluster_count(45), 3);
  EXPECT_EQ(max_cluster_count(10000), 8);
}

TEST(ClusterSearch, SmallLabeledSetForcesOneWithoutCallback) {
  std::mt19937_64 rng(5);
  const auto pts = random_points(20, rng);
  int calls = 0;
  const auto s = search_cluster_count(pts, [&](const Clustering&) { return ++calls; }, 4, 1);
  EXPECT_EQ(s.k, 1);
  EXPECT_EQ(calls, 0);
  EXPECT_EQ(s.clustering.labels, std::vector<int>(20, 0));
}

TEST(ClusterSearch, ReachesUnimodalPeakQuickly) {
  std::mt19937_64 rng(6);
  const auto pts = blobs({Point(0, 0), Point(15, 0), Point(0, 15)}, 60, 1.0, rng);
  int calls = 0;
  const auto s = search_cluster_count(
      pts,
      [&](const Clustering& c) {
        ++calls;
        return -static_cast<double>((c.k - 3) * (c.k - 3));
      },
      2, 9);
  EXPECT_EQ(s.k, 3);
  // k0 itself plus at most three more
  EXPECT_LE(calls - 1, 3);
  EXPECT_EQ(s.evaluations, calls);
}

TEST(ClusterSearch, StaysAtWarmStartWhenNeighborsWorse) {
  std::mt19937_64 rng(7);
  const auto pts = blobs({Point(0, 0), Point(15, 0)}, 60, 1.0, rng);
  const auto s = search_cluster_count(
      pts, [](const Clustering& c) { return c.k == 2 ? 0.0 : -1.0; }, 2, 3);
  EXPECT_EQ(s.k, 2);
  EXPECT_EQ(s.visited, (std::vector<int>{2, 1, 3}));
}

TEST(ClusterSearch, ClimbsDownward) {
  std::mt19937_64 rng(8);
  const auto pts = random_points(800, rng);
  const auto s = search_cluster_count(pts, [](const Clustering& c) { return -static_cast<double>(c.k); }, 5, 3);
  EXPECT_EQ(s.k, 1);
}
