#include "lanemodel/association.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

#include "lanemodel/initialization.hpp"

namespace lanemodel {

std::vector<int> Correspondences::features_of(int line) const {
  std::vector<int> out;
  for (const auto& p : pairs) {
    if (p.line == line) out.push_back(p.feature);
  }
  return out;
}

double mahalanobis2(const Feature& f, const Line& line) {
  const Eigen::Vector2d r(eval_line(line, f.x, 0) - f.y, std::atan(eval_line(line, f.x, 1)) - f.theta);
  const Eigen::Matrix2d s = f.cov.bottomRightCorner<2, 2>();
  return r.dot(s.ldlt().solve(r));
}

LineMatch best_line(const Feature& f, const LaneModel& model, const AssocConfig& cfg) {
  LineMatch best{-1, std::numeric_limits<double>::infinity()};
  for (std::size_t n = 0; n < model.lines.size(); ++n) {
    const Line& line = model.lines[n];
    if (std::abs(eval_line(line, f.x, 0) - f.y) > cfg.euclid_gate) continue;
    const double d2 = mahalanobis2(f, line);
    if (d2 > cfg.gate_chi2) continue;
    if (best.line < 0 || d2 < best.d2 - 1e-9 ||
        (std::abs(d2 - best.d2) < 1e-9 && line.id < model.lines[static_cast<std::size_t>(best.line)].id)) {
      best = {static_cast<int>(n), d2};
    }
  }
  return best;
}

namespace {

Correspondences gather(std::span<const Feature> features, const LaneModel& model, std::span<const LineMatch> matches) {
  Correspondences corr;
  for (std::size_t i = 0; i < matches.size(); ++i) {
    const int n = matches[i].line;
    if (n < 0) {
      corr.unassociated.push_back(static_cast<int>(i));
    } else {
      corr.pairs.push_back({static_cast<int>(i), n, model.lines[static_cast<std::size_t>(n)].segment_index(features[i].x)});
    }
  }
  return corr;
}

}  // namespace

Correspondences associate(std::span<const Feature> features, const LaneModel& model, const AssocConfig& cfg) {
  std::vector<LineMatch> matches(features.size());
  const auto count = static_cast<std::ptrdiff_t>(features.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    matches[static_cast<std::size_t>(i)] = best_line(features[static_cast<std::size_t>(i)], model, cfg);
  }
  return gather(features, model, matches);
}

Correspondences associate_serial(std::span<const Feature> features, const LaneModel& model, const AssocConfig& cfg) {
  std::vector<LineMatch> matches(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) matches[i] = best_line(features[i], model, cfg);
  return gather(features, model, matches);
}

int try_spawn_lines(std::span<const Feature> features, std::span<const int> unassociated, LaneModel& model,
                    const Config& cfg, int& next_id) {
  if (unassociated.empty()) return 0;
  std::vector<Feature> leftovers;
  leftovers.reserve(unassociated.size());
  for (int i : unassociated) leftovers.push_back(features[static_cast<std::size_t>(i)]);

  const auto clusters = cluster_lateral(leftovers, cfg.init);
  std::vector<LateralCluster> accepted;
  for (const auto& c : clusters) {
    const bool clear = std::all_of(model.lines.begin(), model.lines.end(), [&](const Line& line) {
      return std::abs(eval_line(line, 0.0, 0) - c.mean_y) >= cfg.assoc.spawn_min_separation;
    });
    const bool clear_of_new = std::all_of(accepted.begin(), accepted.end(), [&](const LateralCluster& other) {
      return std::abs(other.mean_y - c.mean_y) >= cfg.assoc.spawn_min_separation;
    });
    if (clear && clear_of_new) accepted.push_back(c);
  }
  if (accepted.empty()) return 0;
  for (auto& line : seed_lines(accepted, cfg.init.max_x, next_id)) model.lines.push_back(std::move(line));
  model.sort_lines();
  return static_cast<int>(accepted.size());
}

void update_ranges(LaneModel& model, const Correspondences& corr, std::span<const Feature> features,
                   const AssocConfig& cfg) {
  const std::size_t n_lines = model.lines.size();
  std::vector<double> lo(n_lines, std::numeric_limits<double>::infinity());
  std::vector<double> hi(n_lines, -std::numeric_limits<double>::infinity());
  for (const auto& p : corr.pairs) {
    const double x = features[static_cast<std::size_t>(p.feature)].x;
    lo[static_cast<std::size_t>(p.line)] = std::min(lo[static_cast<std::size_t>(p.line)], x);
    hi[static_cast<std::size_t>(p.line)] = std::max(hi[static_cast<std::size_t>(p.line)], x);
  }
  for (std::size_t n = 0; n < n_lines; ++n) {
    Line& line = model.lines[n];
    if (!std::isfinite(lo[n])) {
      line.range = line.predicted_range;
      continue;
    }
    line.range.min = std::min(lo[n], line.predicted_range.min + cfg.range_decay);
    line.range.max = std::max(hi[n], line.predicted_range.max - cfg.range_decay);
  }
}

std::vector<int> retire_stale_lines(LaneModel& model, const Correspondences& corr, const AssocConfig& cfg) {
  std::vector<bool> seen(model.lines.size(), false);
  for (const auto& p : corr.pairs) seen[static_cast<std::size_t>(p.line)] = true;
  std::vector<int> removed;
  std::vector<Line> kept;
  for (std::size_t n = 0; n < model.lines.size(); ++n) {
    Line& line = model.lines[n];
    line.missed_frames = seen[n] ? 0 : line.missed_frames + 1;
    if (line.missed_frames >= cfg.spawn_grace) {
      removed.push_back(line.id);
    } else {
      kept.push_back(std::move(line));
    }
  }
  model.lines = std::move(kept);
  if (!removed.empty()) model.sort_lines();
  return removed;
}

FusionOutcome fuse_attributes(const Line& line, std::span<const Feature> associated, const AttributeConfig& cfg) {
  FusionOutcome out{line, false};
  auto marking = discount(line.evidence.marking, cfg.forget);
  auto color = discount(line.evidence.color, cfg.forget);
  for (const auto& f : associated) {
    if (auto m = combine(marking, f.attrs.marking)) {
      marking = *m;
    } else {
      out.conflict = true;
    }
    if (auto c = combine(color, f.attrs.color)) {
      color = *c;
    } else {
      out.conflict = true;
    }
  }
  out.line.evidence = {marking, color};
  out.line.attribute_conflict = out.conflict;
  const std::size_t type = marking.argmax();
  out.line.marking_type = static_cast<MarkingType>(type);
  out.line.marking_confidence = marking.mass[type];
  const std::size_t col = color.argmax();
  out.line.color = static_cast<MarkingColor>(col);
  out.line.color_confidence = color.mass[col];
  return out;
}

void infer_parallel_groups(LaneModel& model) {
  model.parallel_groups.clear();
  for (std::size_t n = 0; n < model.lines.size(); ++n) {
    if (n == 0) {
      model.parallel_groups.push_back({0});
      continue;
    }
    auto& group = model.parallel_groups.back();
    const Line& prev = model.lines[n - 1];
    const Line& cur = model.lines[n];
    const bool prev_dashed = prev.marking_type == MarkingType::kDashed;
    const bool prev_opens_group = group.size() == 1 && cur.marking_type == MarkingType::kDashed;
    if (prev_dashed || prev_opens_group) {
      group.push_back(static_cast<int>(n));
    } else {
      model.parallel_groups.push_back({static_cast<int>(n)});
    }
  }
}

std::vector<double> group_knots(std::span<const LineRange> ranges, const ModelConfig& cfg) {
  double start = std::numeric_limits<double>::infinity();
  std::vector<double> ends;
  for (const auto& r : ranges) {
    start = std::min(start, r.min);
    ends.push_back(r.max);
  }
  std::sort(ends.begin(), ends.end());
  ends.erase(std::remove_if(ends.begin(), ends.end(), [&](double e) { return e <= start; }), ends.end());
  if (ends.empty()) ends.push_back(start + cfg.min_segment_len);

  std::vector<double> merged{start};
  for (std::size_t k = 0; k < ends.size(); ++k) {
    const bool last = k + 1 == ends.size();
    if (ends[k] - merged.back() >= cfg.min_segment_len) {
      merged.push_back(ends[k]);
    } else if (last) {
      // the outermost end always survives; it absorbs the earlier knot instead
      if (merged.size() > 1) {
        merged.back() = ends[k];
      } else {
        merged.push_back(ends[k]);
      }
    }
  }

  std::vector<double> knots{merged.front()};
  for (std::size_t k = 1; k < merged.size(); ++k) {
    const double a = merged[k - 1];
    const double len = merged[k] - a;
    const int pieces = std::max(1, static_cast<int>(std::ceil(len / cfg.max_segment_len - 1e-9)));
    for (int p = 1; p < pieces; ++p) knots.push_back(a + len * p / pieces);
    knots.push_back(merged[k]);
  }

  if (cfg.max_segments > 0 && static_cast<int>(knots.size()) - 1 > cfg.max_segments) {
    const double a = knots.front();
    const double b = knots.back();
    knots.clear();
    for (int p = 0; p <= cfg.max_segments; ++p) knots.push_back(a + (b - a) * p / cfg.max_segments);
  }
  return knots;
}

void place_control_points(LaneModel& model, const ModelConfig& cfg) {
  if (model.parallel_groups.empty()) {
    for (std::size_t n = 0; n < model.lines.size(); ++n) model.parallel_groups.push_back({static_cast<int>(n)});
  }
  for (const auto& group : model.parallel_groups) {
    std::vector<LineRange> ranges;
    for (int n : group) ranges.push_back(model.lines[static_cast<std::size_t>(n)].range);
    const auto knots = group_knots(ranges, cfg);

    for (int n : group) {
      Line& line = model.lines[static_cast<std::size_t>(n)];
      std::size_t end = 1;
      for (std::size_t k = 2; k < knots.size(); ++k) {
        if (std::abs(knots[k] - line.range.max) < std::abs(knots[end] - line.range.max)) end = k;
      }
      std::vector<double> own(knots.begin(), knots.begin() + static_cast<std::ptrdiff_t>(end) + 1);
      std::vector<Segment> segments;
      for (std::size_t m = 0; m + 1 < own.size(); ++m) {
        const double mid = 0.5 * (own[m] + own[m + 1]);
        segments.push_back(Segment{line.segments[static_cast<std::size_t>(line.segment_index(mid))].coeffs, own[m],
                                   own[m + 1]});
      }
      line.segments = std::move(segments);
      line.control_points = std::move(own);
    }
  }
}

}  // namespace lanemodel
