#include "lanemodel/initialization.hpp"

#include <algorithm>
#include <cmath>

namespace lanemodel {

namespace {

LateralCluster summarize(std::span<const Feature> features, std::vector<int> members) {
  LateralCluster c;
  double sum_y = 0.0;
  double sum_sin = 0.0;
  double sum_cos = 0.0;
  for (int i : members) {
    const auto& f = features[static_cast<std::size_t>(i)];
    sum_y += f.y;
    sum_sin += std::sin(f.theta);
    sum_cos += std::cos(f.theta);
  }
  c.count = static_cast<int>(members.size());
  c.mean_y = sum_y / c.count;
  c.mean_theta = std::atan2(sum_sin, sum_cos);
  std::sort(members.begin(), members.end());
  c.member_indices = std::move(members);
  return c;
}

}  // namespace

std::vector<LateralCluster> cluster_lateral(std::span<const Feature> features, const InitConfig& cfg) {
  std::vector<int> near;
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].x >= 0.0 && features[i].x <= cfg.max_x) near.push_back(static_cast<int>(i));
  }
  std::stable_sort(near.begin(), near.end(), [&](int a, int b) {
    return features[static_cast<std::size_t>(a)].y < features[static_cast<std::size_t>(b)].y;
  });

  std::vector<std::vector<int>> runs;
  for (std::size_t k = 0; k < near.size(); ++k) {
    const double y = features[static_cast<std::size_t>(near[k])].y;
    if (k == 0 || y - features[static_cast<std::size_t>(near[k - 1])].y >= cfg.gap_threshold) {
      runs.emplace_back();
    }
    runs.back().push_back(near[k]);
  }

  std::vector<LateralCluster> clusters;
  for (auto& run : runs) {
    if (static_cast<int>(run.size()) < cfg.min_cluster_size) continue;
    LateralCluster c = summarize(features, run);
    // trim until every member lies within the half width of the mean
    while (c.count >= cfg.min_cluster_size) {
      std::vector<int> kept;
      for (int i : c.member_indices) {
        if (std::abs(features[static_cast<std::size_t>(i)].y - c.mean_y) <= cfg.cluster_half_width) {
          kept.push_back(i);
        }
      }
      if (kept.size() == c.member_indices.size()) break;
      if (kept.empty()) {
        c.count = 0;
        break;
      }
      c = summarize(features, std::move(kept));
    }
    if (c.count >= cfg.min_cluster_size) clusters.push_back(std::move(c));
  }
  std::sort(clusters.begin(), clusters.end(),
            [](const LateralCluster& a, const LateralCluster& b) { return a.mean_y > b.mean_y; });
  return clusters;
}

std::vector<Line> seed_lines(std::span<const LateralCluster> clusters, double max_x, int& next_id) {
  std::vector<Line> lines;
  lines.reserve(clusters.size());
  for (const auto& c : clusters) {
    Line line = make_line(next_id++, {Eigen::Vector4d(c.mean_y, std::tan(c.mean_theta), 0.0, 0.0)},
                          {0.0, max_x});
    lines.push_back(std::move(line));
  }
  return lines;
}

}  // namespace lanemodel
