#include "lanemodel/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>

#include "lanemodel/pipeline.hpp"

namespace lanemodel {

std::string_view to_string(ModelKind kind) { return kind == ModelKind::kSpline ? "spline" : "clothoid"; }

ModelKind parse_model_kind(std::string_view text) {
  if (text == "spline") return ModelKind::kSpline;
  if (text == "clothoid") return ModelKind::kClothoid;
  throw InputError("model kind must be spline or clothoid, got '" + std::string(text) + "'");
}

std::string_view to_string(LaneLabel label) {
  switch (label) {
    case LaneLabel::kEgo: return "ego";
    case LaneLabel::kAdjacent: return "adjacent";
    case LaneLabel::kOuter: break;
  }
  return "outer";
}

std::vector<RecordedFrame> to_recording(const Simulation& sim) {
  std::vector<RecordedFrame> out;
  out.reserve(sim.frames.size());
  for (const auto& f : sim.frames) out.push_back({f.frame_id, f.features, f.odometry});
  return out;
}

TruthData to_truth(const Simulation& sim) {
  TruthData t;
  for (const auto& f : sim.frames) t.poses.push_back(f.vehicle);
  for (const auto& line : sim.truth.lines()) t.lines.push_back(line.samples);
  return t;
}

std::vector<TruthInFrame> truth_in_frame(const TruthData& truth, const Pose2& vehicle) {
  constexpr double kLateralWindow = 50.0;
  const double c = std::cos(vehicle.theta);
  const double s = std::sin(vehicle.theta);
  std::vector<TruthInFrame> out;
  for (const auto& line : truth.lines) {
    TruthInFrame t;
    double best_behind = -std::numeric_limits<double>::infinity();
    double best_ahead = std::numeric_limits<double>::infinity();
    Eigen::Vector2d behind = Eigen::Vector2d::Zero();
    Eigen::Vector2d ahead = Eigen::Vector2d::Zero();
    for (const auto& p : line) {
      const double dx = p.x - vehicle.x;
      const double dy = p.y - vehicle.y;
      const Eigen::Vector2d v(c * dx + s * dy, -s * dx + c * dy);
      // the stretch of road beside the vehicle, not a far branch of the same curve
      if (std::abs(v.y()) > kLateralWindow) continue;
      if (v.x() < 0.0 && v.x() > best_behind) {
        best_behind = v.x();
        behind = v;
      }
      if (v.x() >= 0.0 && v.x() < best_ahead) {
        best_ahead = v.x();
        ahead = v;
      }
      if (v.x() >= 0.0) t.points.push_back(v);
    }
    if (!std::isfinite(best_ahead)) continue;
    if (std::isfinite(best_behind) && ahead.x() > behind.x()) {
      const double w = (0.0 - behind.x()) / (ahead.x() - behind.x());
      t.offset_at_origin = behind.y() + w * (ahead.y() - behind.y());
    } else {
      t.offset_at_origin = ahead.y();
    }
    std::sort(t.points.begin(), t.points.end(), [](const auto& a, const auto& b) { return a.x() < b.x(); });
    out.push_back(std::move(t));
  }

  std::vector<int> left;
  std::vector<int> right;
  for (std::size_t i = 0; i < out.size(); ++i) {
    (out[i].offset_at_origin >= 0.0 ? left : right).push_back(static_cast<int>(i));
  }
  std::sort(left.begin(), left.end(),
            [&](int a, int b) { return out[static_cast<std::size_t>(a)].offset_at_origin < out[static_cast<std::size_t>(b)].offset_at_origin; });
  std::sort(right.begin(), right.end(),
            [&](int a, int b) { return out[static_cast<std::size_t>(a)].offset_at_origin > out[static_cast<std::size_t>(b)].offset_at_origin; });
  for (const auto* side : {&left, &right}) {
    for (std::size_t rank = 0; rank < side->size(); ++rank) {
      out[static_cast<std::size_t>((*side)[rank])].label =
          rank == 0 ? LaneLabel::kEgo : (rank == 1 ? LaneLabel::kAdjacent : LaneLabel::kOuter);
    }
  }
  return out;
}

namespace {

struct Match {
  int truth = -1;
  int line = -1;
};

std::vector<Match> match_lines(const LaneModel& model, std::span<const TruthInFrame> truth, const EvalConfig& cfg) {
  struct Candidate {
    double distance;
    int truth;
    int line;
  };
  std::vector<Candidate> candidates;
  for (std::size_t t = 0; t < truth.size(); ++t) {
    for (std::size_t n = 0; n < model.lines.size(); ++n) {
      const double d = std::abs(eval_line(model.lines[n], 0.0, 0) - truth[t].offset_at_origin);
      if (d <= cfg.match_dist) candidates.push_back({d, static_cast<int>(t), static_cast<int>(n)});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    if (a.truth != b.truth) return a.truth < b.truth;
    return a.line < b.line;
  });
  std::vector<bool> truth_used(truth.size(), false);
  std::vector<bool> line_used(model.lines.size(), false);
  std::vector<Match> matches;
  for (const auto& c : candidates) {
    if (truth_used[static_cast<std::size_t>(c.truth)] || line_used[static_cast<std::size_t>(c.line)]) continue;
    truth_used[static_cast<std::size_t>(c.truth)] = true;
    line_used[static_cast<std::size_t>(c.line)] = true;
    matches.push_back({c.truth, c.line});
  }
  std::sort(matches.begin(), matches.end(), [](const Match& a, const Match& b) { return a.truth < b.truth; });
  return matches;
}

struct SampleRef {
  int truth;
  int line;
  std::size_t point;
};

std::vector<SampleRef> sample_refs(const LaneModel& model, std::span<const TruthInFrame> truth,
                                   std::span<const Match> matches) {
  std::vector<SampleRef> refs;
  for (const auto& m : matches) {
    const Line& line = model.lines[static_cast<std::size_t>(m.line)];
    const auto& pts = truth[static_cast<std::size_t>(m.truth)].points;
    const double lo = std::max(0.0, line.range.min);
    for (std::size_t k = 0; k < pts.size(); ++k) {
      if (pts[k].x() >= lo && pts[k].x() <= line.range.max) refs.push_back({m.truth, m.line, k});
    }
  }
  return refs;
}

Deviation deviation_at(const LaneModel& model, std::span<const TruthInFrame> truth, const SampleRef& r, int frame) {
  const auto& t = truth[static_cast<std::size_t>(r.truth)];
  const Eigen::Vector2d& p = t.points[r.point];
  return {frame, t.label, r.truth, p.x(), eval_line(model.lines[static_cast<std::size_t>(r.line)], p.x(), 0) - p.y()};
}

void summarize(std::span<const Deviation> devs, const LaneModel& model, std::span<const TruthInFrame> truth,
               std::size_t matched, int frame, FrameMetrics* metrics) {
  if (metrics == nullptr) return;
  FrameMetrics m;
  m.frame = frame;
  m.model_lines = static_cast<int>(model.lines.size());
  m.matched_lines = static_cast<int>(matched);
  m.unmatched_truth = static_cast<int>(truth.size() - matched);
  m.empty_model = model.lines.empty();
  double sum = 0.0;
  for (const auto& d : devs) {
    sum += d.deviation * d.deviation;
    m.max_error = std::max(m.max_error, std::abs(d.deviation));
  }
  m.samples = static_cast<long>(devs.size());
  m.rmse = devs.empty() ? std::numeric_limits<double>::quiet_NaN() : std::sqrt(sum / static_cast<double>(devs.size()));
  *metrics = m;
}

}  // namespace

std::vector<Deviation> frame_deviations(const LaneModel& model, std::span<const TruthInFrame> truth, int frame,
                                        const EvalConfig& cfg, FrameMetrics* metrics) {
  const auto matches = match_lines(model, truth, cfg);
  const auto refs = sample_refs(model, truth, matches);
  std::vector<Deviation> out(refs.size());
  const auto count = static_cast<std::ptrdiff_t>(refs.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    out[static_cast<std::size_t>(i)] = deviation_at(model, truth, refs[static_cast<std::size_t>(i)], frame);
  }
  summarize(out, model, truth, matches.size(), frame, metrics);
  return out;
}

std::vector<Deviation> frame_deviations_serial(const LaneModel& model, std::span<const TruthInFrame> truth, int frame,
                                               const EvalConfig& cfg, FrameMetrics* metrics) {
  const auto matches = match_lines(model, truth, cfg);
  std::vector<Deviation> out;
  for (const auto& r : sample_refs(model, truth, matches)) out.push_back(deviation_at(model, truth, r, frame));
  summarize(out, model, truth, matches.size(), frame, metrics);
  return out;
}

std::vector<BinRow> bin_deviations(std::span<const Deviation> deviations, double bin_width) {
  std::map<std::pair<long, int>, std::pair<double, long>> acc;
  for (const auto& d : deviations) {
    const auto bin = static_cast<long>(std::floor(d.x / bin_width));
    auto& slot = acc[{bin, static_cast<int>(d.label)}];
    slot.first += d.deviation * d.deviation;
    slot.second += 1;
  }
  std::vector<BinRow> rows;
  for (const auto& [key, value] : acc) {
    rows.push_back({static_cast<double>(key.first) * bin_width, static_cast<double>(key.first + 1) * bin_width,
                    static_cast<LaneLabel>(key.second), std::sqrt(value.first / static_cast<double>(value.second)),
                    value.second});
  }
  return rows;
}

Config config_for(ModelKind kind, Config base) {
  if (kind == ModelKind::kClothoid) base.model.max_segments = 1;
  return base;
}

MetricsTable run_eval(std::span<const RecordedFrame> frames, const TruthData& truth, ModelKind kind, const Config& cfg) {
  if (truth.poses.size() != frames.size()) {
    throw InputError("ground truth has " + std::to_string(truth.poses.size()) + " poses for " +
                     std::to_string(frames.size()) + " frames");
  }
  if (truth.lines.empty()) throw InputError("ground truth has no lines");
  MetricsTable table;
  LaneTracker tracker(config_for(kind, cfg));
  for (std::size_t k = 0; k < frames.size(); ++k) {
    tracker.process(frames[k].features, frames[k].odometry);
    const auto seen = truth_in_frame(truth, truth.poses[k]);
    FrameMetrics m;
    auto devs = frame_deviations(*tracker.model(), seen, frames[k].frame_id, cfg.eval, &m);
    if (m.empty_model) ++table.empty_frames;
    table.frames.push_back(m);
    table.deviations.insert(table.deviations.end(), devs.begin(), devs.end());
  }
  table.bins = bin_deviations(table.deviations, cfg.eval.bin_width);
  return table;
}

ComparisonTable compare_models(const ScenarioSpec& spec, const Config& cfg) {
  const Simulation sim = simulate(spec);
  const auto recording = to_recording(sim);
  const auto truth = to_truth(sim);
  ComparisonTable out;
  out.spline = run_eval(recording, truth, ModelKind::kSpline, cfg);
  out.clothoid = run_eval(recording, truth, ModelKind::kClothoid, cfg);

  const double straight_limit = spec.straight_prefix();
  double sum_s = 0.0;
  double sum_c = 0.0;
  int straight_frames = 0;
  for (std::size_t k = 0; k < sim.frames.size(); ++k) {
    ComparisonRow row;
    row.frame = sim.frames[k].frame_id;
    row.arclength = sim.frames[k].arclength;
    row.straight = row.arclength + spec.feature_horizon <= straight_limit;
    row.rmse_spline = out.spline.frames[k].rmse;
    row.rmse_clothoid = out.clothoid.frames[k].rmse;
    if (std::isfinite(row.rmse_spline)) out.max_rmse_spline = std::max(out.max_rmse_spline, row.rmse_spline);
    if (std::isfinite(row.rmse_clothoid)) out.max_rmse_clothoid = std::max(out.max_rmse_clothoid, row.rmse_clothoid);
    if (row.straight && std::isfinite(row.rmse_spline) && std::isfinite(row.rmse_clothoid)) {
      sum_s += row.rmse_spline;
      sum_c += row.rmse_clothoid;
      ++straight_frames;
    }
    out.rows.push_back(row);
  }
  out.max_ratio = out.max_rmse_spline > 0.0 ? out.max_rmse_clothoid / out.max_rmse_spline : 0.0;
  if (straight_frames > 0) {
    out.straight_mean_spline = sum_s / straight_frames;
    out.straight_mean_clothoid = sum_c / straight_frames;
  }
  return out;
}

}  // namespace lanemodel
