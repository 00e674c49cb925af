#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "lanemodel/config.hpp"
#include "lanemodel/prediction.hpp"
#include "lanemodel/simulator.hpp"
#include "lanemodel/types.hpp"

namespace lanemodel {

enum class ModelKind { kSpline, kClothoid };
std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view text);

enum class LaneLabel { kEgo, kAdjacent, kOuter };
std::string_view to_string(LaneLabel label);

/// One recorded frame as the estimator sees it.
struct RecordedFrame {
  int frame_id = 0;
  std::vector<Feature> features;
  OdometryDelta odometry;
};

/// Reference geometry for evaluation: global boundary polylines and the
/// vehicle's global pose per frame.
struct TruthData {
  std::vector<Pose2> poses;  // indexed like the recording's frames
  std::vector<std::vector<PathSample>> lines;
};

std::vector<RecordedFrame> to_recording(const Simulation& sim);
TruthData to_truth(const Simulation& sim);

/// A truth boundary expressed in one frame's vehicle coordinates.
struct TruthInFrame {
  std::vector<Eigen::Vector2d> points;  // sorted by x
  double offset_at_origin = 0.0;
  LaneLabel label = LaneLabel::kOuter;
};

/// Truth lines seen from `vehicle`, labelled ego (nearest boundary on each
/// side at x=0), adjacent (next one out) or outer.
std::vector<TruthInFrame> truth_in_frame(const TruthData& truth, const Pose2& vehicle);

struct Deviation {
  int frame = 0;
  LaneLabel label = LaneLabel::kOuter;
  int truth_line = 0;
  double x = 0.0;
  double deviation = 0.0;  // f(x) - y_truth
};

struct FrameMetrics {
  int frame = 0;
  double rmse = 0.0;
  double max_error = 0.0;
  long samples = 0;
  int model_lines = 0;
  int matched_lines = 0;
  int unmatched_truth = 0;  // truth lines visible at x=0 without a model line
  bool empty_model = false;
};

struct BinRow {
  double start = 0.0;
  double end = 0.0;
  LaneLabel label = LaneLabel::kEgo;
  double rmse = 0.0;
  long count = 0;
};

struct MetricsTable {
  std::vector<BinRow> bins;
  std::vector<FrameMetrics> frames;
  std::vector<Deviation> deviations;
  int empty_frames = 0;
};

/// Vertical deviations between the model and each matched truth line, sampled
/// at the truth points inside the matched line's range (x >= 0). Model lines
/// are matched greedily to truth lines by lateral distance at x=0 within
/// eval.match_dist. The per-sample loop runs in parallel.
std::vector<Deviation> frame_deviations(const LaneModel& model, std::span<const TruthInFrame> truth, int frame,
                                        const EvalConfig& cfg, FrameMetrics* metrics = nullptr);
/// Serial reference for frame_deviations().
std::vector<Deviation> frame_deviations_serial(const LaneModel& model, std::span<const TruthInFrame> truth, int frame,
                                               const EvalConfig& cfg, FrameMetrics* metrics = nullptr);

/// Per (bin, label) RMSE over all deviations, rows ordered by bin then label.
std::vector<BinRow> bin_deviations(std::span<const Deviation> deviations, double bin_width);

/// Config for a model kind: clothoid mode forces one segment per line.
Config config_for(ModelKind kind, Config base);

/// Runs the tracker over every frame and evaluates it against the truth.
MetricsTable run_eval(std::span<const RecordedFrame> frames, const TruthData& truth, ModelKind kind, const Config& cfg);

struct ComparisonRow {
  int frame = 0;
  double arclength = 0.0;
  bool straight = false;  // the whole horizon lies on the initial straight
  double rmse_spline = 0.0;
  double rmse_clothoid = 0.0;
};

struct ComparisonTable {
  std::vector<ComparisonRow> rows;
  double max_rmse_spline = 0.0;
  double max_rmse_clothoid = 0.0;
  double max_ratio = 0.0;             // clothoid max / spline max
  double straight_mean_spline = 0.0;  // mean per-frame RMSE over straight frames
  double straight_mean_clothoid = 0.0;
  MetricsTable spline;
  MetricsTable clothoid;
};

ComparisonTable compare_models(const ScenarioSpec& spec, const Config& cfg);

}  // namespace lanemodel
