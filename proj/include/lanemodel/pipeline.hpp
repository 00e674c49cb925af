#pragma once

#include <optional>
#include <span>
#include <vector>

#include "lanemodel/association.hpp"
#include "lanemodel/config.hpp"
#include "lanemodel/fitting.hpp"
#include "lanemodel/types.hpp"

namespace lanemodel {

struct FrameReport {
  int em_iterations = 0;
  bool association_converged = false;
  bool initialized = false;  // no previous model; seeded from this frame
  std::vector<FitReport> fits;
  std::vector<int> spawned_ids;
  std::vector<int> dropped_ids;
  Correspondences correspondences;
};

/// Mutable per-track state: the previous lane model and the id counter.
struct TrackState {
  std::optional<LaneModel> model;
  int next_line_id = 0;
};

/// One frame of the estimator: predict (or initialize), then alternate
/// association and constrained fitting until the association repeats, then
/// fuse attributes. Throws std::invalid_argument on invalid features or odometry.
FrameReport step(TrackState& state, std::span<const Feature> features, const OdometryDelta& delta, const Config& cfg);

/// Convenience wrapper owning the state and configuration.
class LaneTracker {
 public:
  explicit LaneTracker(Config cfg = {}) : cfg_(std::move(cfg)) {}

  FrameReport process(std::span<const Feature> features, const OdometryDelta& delta) {
    return step(state_, features, delta, cfg_);
  }
  const LaneModel* model() const { return state_.model ? &*state_.model : nullptr; }
  const Config& config() const { return cfg_; }
  const TrackState& state() const { return state_; }

 private:
  Config cfg_;
  TrackState state_;
};

}  // namespace lanemodel
