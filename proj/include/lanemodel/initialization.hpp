#pragma once

#include <span>
#include <vector>

#include "lanemodel/config.hpp"
#include "lanemodel/types.hpp"

namespace lanemodel {

/// Features near the vehicle grouped by lateral offset.
struct LateralCluster {
  double mean_y = 0.0;
  double mean_theta = 0.0;
  int count = 0;
  std::vector<int> member_indices;
};

/// Projects features with 0 <= x <= max_x onto the lateral axis and splits the
/// sorted offsets wherever consecutive gaps reach gap_threshold. Members farther
/// than cluster_half_width from the cluster mean are trimmed; clusters below
/// min_cluster_size are dropped. Result is ordered by mean_y descending.
std::vector<LateralCluster> cluster_lateral(std::span<const Feature> features, const InitConfig& cfg);

/// One straight single-segment line per cluster, range [0, max_x]. Ids are
/// assigned from next_id upward.
std::vector<Line> seed_lines(std::span<const LateralCluster> clusters, double max_x, int& next_id);

}  // namespace lanemodel
