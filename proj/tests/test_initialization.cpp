#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "lanemodel/association.hpp"
#include "lanemodel/initialization.hpp"
#include "test_support.hpp"

using namespace lanemodel;

namespace {

// Independent reference: split sorted offsets at every gap >= threshold and
// keep groups of at least min_size.
std::vector<double> gap_scan_means(std::vector<double> ys, double threshold, int min_size) {
  std::sort(ys.begin(), ys.end());
  std::vector<double> means;
  std::size_t start = 0;
  for (std::size_t i = 1; i <= ys.size(); ++i) {
    if (i == ys.size() || ys[i] - ys[i - 1] >= threshold) {
      if (static_cast<int>(i - start) >= min_size) {
        double sum = 0.0;
        for (std::size_t k = start; k < i; ++k) sum += ys[k];
        means.push_back(sum / static_cast<double>(i - start));
      }
      start = i;
    }
  }
  std::sort(means.rbegin(), means.rend());
  return means;
}

}  // namespace

TEST(ClusterLateral, TwoSeparatedMarkings) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> jitter(-0.05, 0.05);
  std::vector<Feature> features;
  std::vector<double> ys;
  for (int i = 0; i < 10; ++i) {
    for (double centre : {0.0, 3.6}) {
      const double y = centre + jitter(rng);
      ys.push_back(y);
      features.push_back(test::make_feature(1.5 * i, y, 0.0));
    }
  }
  const auto clusters = cluster_lateral(features, InitConfig{});
  const auto expected = gap_scan_means(ys, InitConfig{}.gap_threshold, InitConfig{}.min_cluster_size);
  ASSERT_EQ(clusters.size(), 2u);
  ASSERT_EQ(expected.size(), 2u);
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_NEAR(clusters[k].mean_y, expected[k], 1e-12);
    EXPECT_EQ(clusters[k].count, 10);
  }
  EXPECT_NEAR(clusters[0].mean_y, 3.6, 0.05);
  EXPECT_NEAR(clusters[1].mean_y, 0.0, 0.05);
}

TEST(ClusterLateral, TooFewOrTooFar) {
  std::vector<Feature> few{test::make_feature(1, 0, 0), test::make_feature(2, 0, 0), test::make_feature(3, 0, 0)};
  EXPECT_TRUE(cluster_lateral(few, InitConfig{}).empty());

  std::vector<Feature> far;
  for (int i = 0; i < 10; ++i) far.push_back(test::make_feature(25.0 + i, 0.0, 0.0));
  EXPECT_TRUE(cluster_lateral(far, InitConfig{}).empty());
}

TEST(ClusterLateral, MembersStayWithinWidth) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> y(-6.0, 6.0);
  std::uniform_real_distribution<double> x(0.0, 20.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Feature> features;
    for (int i = 0; i < 40; ++i) features.push_back(test::make_feature(x(rng), y(rng), 0.0));
    const InitConfig cfg;
    for (const auto& c : cluster_lateral(features, cfg)) {
      double lo = 1e9, hi = -1e9;
      for (int i : c.member_indices) {
        lo = std::min(lo, features[static_cast<std::size_t>(i)].y);
        hi = std::max(hi, features[static_cast<std::size_t>(i)].y);
      }
      EXPECT_LE(hi - lo, 2.0 * cfg.cluster_half_width + 1e-12);
      EXPECT_GE(c.count, cfg.min_cluster_size);
    }
  }
}

TEST(ClusterLateral, CircularMeanHeading) {
  std::vector<Feature> features;
  for (int i = 0; i < 6; ++i) features.push_back(test::make_feature(i, 1.0, i % 2 ? 0.11 : 0.09));
  const auto clusters = cluster_lateral(features, InitConfig{});
  ASSERT_EQ(clusters.size(), 1u);
  EXPECT_NEAR(clusters[0].mean_theta, 0.1, 1e-4);
}

TEST(SeedLines, StraightSegmentsOrderedLeftFirst) {
  std::vector<LateralCluster> clusters{{0.0, 0.1, 5, {}}, {3.6, 0.0, 5, {}}};
  int next_id = 7;
  const auto lines = seed_lines(clusters, 20.0, next_id);
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(next_id, 9);
  LaneModel model;
  model.lines = lines;
  model.sort_lines();
  EXPECT_TRUE(model.lines[0].segments[0].coeffs.isApprox(Eigen::Vector4d(3.6, 0, 0, 0)));
  EXPECT_NEAR(model.lines[1].segments[0].coeffs[1], std::tan(0.1), 1e-15);
  EXPECT_DOUBLE_EQ(model.lines[1].segments[0].coeffs[0], 0.0);
  EXPECT_DOUBLE_EQ(model.lines[0].range.max, 20.0);
}

TEST(SeedLines, ReclusteringLeftoversFindsNothing) {
  std::vector<Feature> features;
  for (double y : {-1.75, 1.75, 5.25}) {
    for (int i = 0; i < 10; ++i) features.push_back(test::make_feature(2.0 * i, y, 0.0));
  }
  int next_id = 0;
  LaneModel model;
  model.lines = seed_lines(cluster_lateral(features, InitConfig{}), 20.0, next_id);
  model.sort_lines();
  const auto corr = associate(features, model, AssocConfig{});
  std::vector<Feature> leftovers;
  for (int i : corr.unassociated) leftovers.push_back(features[static_cast<std::size_t>(i)]);
  EXPECT_TRUE(cluster_lateral(leftovers, InitConfig{}).empty());
  EXPECT_EQ(model.lines.size(), 3u);
}
