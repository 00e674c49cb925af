#include "lanemodel/pipeline.hpp"

#include <algorithm>
#include <map>

#include "lanemodel/initialization.hpp"
#include "lanemodel/prediction.hpp"

namespace lanemodel {

namespace {

// What the frame started with for each line: the time-filter anchors and the
// shape to fall back to when a line cannot be fitted.
struct LineSnapshot {
  std::vector<Segment> segments;
  std::vector<double> control_points;
  std::vector<ControlPointState> anchors;
};

void remember(std::map<int, LineSnapshot>& snapshots, const LaneModel& model) {
  for (const auto& line : model.lines) {
    snapshots.try_emplace(line.id, LineSnapshot{line.segments, line.control_points, line.anchors});
  }
}

void restore_shape(Line& line, const LineSnapshot& snap) {
  line.segments = snap.segments;
  line.control_points = snap.control_points;
  line.anchors = snap.anchors;
}

}  // namespace

FrameReport step(TrackState& state, std::span<const Feature> features, const OdometryDelta& delta, const Config& cfg) {
  for (const auto& f : features) validate_feature(f);
  validate_odometry(delta);

  FrameReport report;
  LaneModel model;
  if (state.model) {
    model = predict_model(*state.model, delta, cfg);
  } else {
    report.initialized = true;
    const auto clusters = cluster_lateral(features, cfg.init);
    model.lines = seed_lines(clusters, cfg.init.max_x, state.next_line_id);
    model.sort_lines();
    for (const auto& line : model.lines) report.spawned_ids.push_back(line.id);
  }

  std::map<int, LineSnapshot> snapshots;
  remember(snapshots, model);

  Correspondences previous;
  bool have_previous = false;
  Correspondences corr;
  for (int iter = 0; iter < cfg.em_max_iters; ++iter) {
    ++report.em_iterations;
    corr = associate(features, model, cfg.assoc);
    if (!corr.unassociated.empty()) {
      const int before = state.next_line_id;
      if (try_spawn_lines(features, corr.unassociated, model, cfg, state.next_line_id) > 0) {
        for (int id = before; id < state.next_line_id; ++id) report.spawned_ids.push_back(id);
        remember(snapshots, model);
        corr = associate(features, model, cfg.assoc);
      }
    }
    if (have_previous && corr == previous) {
      report.association_converged = true;
      break;
    }
    previous = corr;
    have_previous = true;

    update_ranges(model, corr, features, cfg.assoc);
    infer_parallel_groups(model);
    for (auto& line : model.lines) line.anchors = snapshots.at(line.id).anchors;
    place_control_points(model, cfg.model);
    for (auto& p : corr.pairs) {
      p.segment = model.lines[static_cast<std::size_t>(p.line)].segment_index(features[static_cast<std::size_t>(p.feature)].x);
    }

    FitResult fitted = fit(model, corr, features, cfg.fit);
    if (fitted.report.failed) {
      for (auto& line : model.lines) restore_shape(line, snapshots.at(line.id));
    } else {
      model = std::move(fitted.model);
      for (int id : fitted.report.excluded_ids) {
        auto it = std::find_if(model.lines.begin(), model.lines.end(), [id](const Line& l) { return l.id == id; });
        restore_shape(*it, snapshots.at(id));
      }
    }
    report.fits.push_back(std::move(fitted.report));
    // pair indices stay valid: fitting never reorders lines
    previous = corr;
  }

  for (std::size_t n = 0; n < model.lines.size(); ++n) {
    const auto members = corr.features_of(static_cast<int>(n));
    if (members.empty()) continue;
    std::vector<Feature> assoc;
    assoc.reserve(members.size());
    for (int i : members) assoc.push_back(features[static_cast<std::size_t>(i)]);
    model.lines[n] = fuse_attributes(model.lines[n], assoc, cfg.attr).line;
  }

  report.dropped_ids = retire_stale_lines(model, corr, cfg.assoc);
  if (!report.dropped_ids.empty()) {
    corr = associate(features, model, cfg.assoc);
  }
  // keep line order and groups consistent for the next frame
  std::vector<int> order_ids;
  for (const auto& line : model.lines) order_ids.push_back(line.id);
  model.sort_lines();
  infer_parallel_groups(model);
  std::vector<int> sorted_ids;
  for (const auto& line : model.lines) sorted_ids.push_back(line.id);
  if (sorted_ids != order_ids) corr = associate(features, model, cfg.assoc);

  report.correspondences = std::move(corr);
  state.model = std::move(model);
  return report;
}

}  // namespace lanemodel
