#pragma once

#include <span>
#include <vector>

#include "lanemodel/config.hpp"
#include "lanemodel/types.hpp"

namespace lanemodel {

struct Correspondence {
  int feature = -1;
  int line = -1;     // index into LaneModel::lines
  int segment = -1;  // segment index within that line

  friend bool operator==(const Correspondence&, const Correspondence&) = default;
};

/// Feature-to-segment association of one EM iteration. Every input feature
/// appears exactly once, either in pairs or in unassociated; both are sorted
/// by feature index.
struct Correspondences {
  std::vector<Correspondence> pairs;
  std::vector<int> unassociated;

  std::vector<int> features_of(int line) const;
  friend bool operator==(const Correspondences&, const Correspondences&) = default;
};

struct LineMatch {
  int line = -1;
  double d2 = 0.0;
};

/// Squared Mahalanobis distance between a feature and a line over the
/// (lateral offset, heading) residual, using the feature's (y, theta) marginal.
double mahalanobis2(const Feature& f, const Line& line);

/// Best gated line for one feature, line == -1 when no line passes both gates.
LineMatch best_line(const Feature& f, const LaneModel& model, const AssocConfig& cfg);

/// Nearest-line association; the per-feature loop runs in parallel.
Correspondences associate(std::span<const Feature> features, const LaneModel& model, const AssocConfig& cfg);
/// Serial reference for associate(); results are identical.
Correspondences associate_serial(std::span<const Feature> features, const LaneModel& model, const AssocConfig& cfg);

/// Seeds new lines from clusters of unassociated features that are at least
/// assoc.spawn_min_separation away (at x=0) from every existing line. Returns
/// the number of lines added; the model is re-sorted when lines are added.
int try_spawn_lines(std::span<const Feature> features, std::span<const int> unassociated, LaneModel& model,
                    const Config& cfg, int& next_id);

/// Line ranges from this iteration's associations, blended with the predicted
/// range: extensions apply immediately, shrinking is limited to range_decay.
void update_ranges(LaneModel& model, const Correspondences& corr, std::span<const Feature> features,
                   const AssocConfig& cfg);

/// Once-per-frame staleness bookkeeping: resets missed_frames on lines with
/// associations, increments it otherwise, and removes lines that reached
/// spawn_grace. Returns the removed line ids.
std::vector<int> retire_stale_lines(LaneModel& model, const Correspondences& corr, const AssocConfig& cfg);

struct FusionOutcome {
  Line line;
  bool conflict = false;
};

/// Dempster-Shafer fusion of the line's discounted running evidence with the
/// attribute masses of its associated features, in the given order.
FusionOutcome fuse_attributes(const Line& line, std::span<const Feature> associated, const AttributeConfig& cfg);

/// Partitions the laterally ordered lines into parallel groups from their
/// marking types. A dashed line joins both neighbours; a solid or block line
/// joins the group on its inner side but nothing grows past it.
void infer_parallel_groups(LaneModel& model);

/// Shared knot vector per parallel group from the member ranges, then each
/// member's knots (a prefix ending at the knot its own range end maps to).
/// Segment coefficients are carried over from the old segment covering each
/// new interval's midpoint, as the initial guess for the fit.
std::vector<double> group_knots(std::span<const LineRange> ranges, const ModelConfig& cfg);
void place_control_points(LaneModel& model, const ModelConfig& cfg);

}  // namespace lanemodel
