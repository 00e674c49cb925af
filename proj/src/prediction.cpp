#include "lanemodel/prediction.hpp"

#include <cmath>
#include <stdexcept>

namespace lanemodel {

Pose2 transform_point(const Pose2& p, const OdometryDelta& d) {
  const double c = std::cos(d.dpsi);
  const double s = std::sin(d.dpsi);
  const double tx = p.x - d.dx;
  const double ty = p.y - d.dy;
  return {c * tx + s * ty, -s * tx + c * ty, p.theta - d.dpsi};
}

Eigen::Vector4d hermite_cubic(double x0, double y0, double s0, double x1, double y1, double s1) {
  const double h = x1 - x0;
  if (h == 0.0) throw std::invalid_argument("hermite_cubic needs distinct abscissae");
  const double secant = (y1 - y0) / h;
  // local form in t = x - x0
  const double q0 = y0;
  const double q1 = s0;
  const double q2 = (3.0 * secant - 2.0 * s0 - s1) / h;
  const double q3 = (s0 + s1 - 2.0 * secant) / (h * h);
  const double a = x0;
  return {q0 - q1 * a + q2 * a * a - q3 * a * a * a,
          q1 - 2.0 * q2 * a + 3.0 * q3 * a * a,
          q2 - 3.0 * q3 * a,
          q3};
}

namespace {

Pose2 line_point(const Line& line, double x) {
  return {x, eval_line(line, x, 0), std::atan(eval_line(line, x, 1))};
}

ControlPointState predict_anchor(const ControlPointState& a, const OdometryDelta& d, const FitConfig& fit) {
  const Pose2 moved = transform_point({a.x, a.y, a.theta}, d);
  const double slope_old = std::tan(a.theta);
  const double slope_new = std::tan(moved.theta);

  // (value, slope) -> (value, angle), rigid motion, odometry noise, back to slope
  Eigen::Matrix2d to_angle = Eigen::Matrix2d::Identity();
  to_angle(1, 1) = 1.0 / (1.0 + slope_old * slope_old);
  Eigen::Matrix2d motion = Eigen::Matrix2d::Identity();
  motion(0, 0) = std::cos(d.dpsi) - slope_new * std::sin(d.dpsi);
  Eigen::Matrix2d to_slope = Eigen::Matrix2d::Identity();
  to_slope(1, 1) = 1.0 + slope_new * slope_new;

  Eigen::Matrix2d angle_cov = motion * to_angle * a.cov * to_angle.transpose() * motion.transpose();
  angle_cov(0, 0) += fit.odo_sigma_y * fit.odo_sigma_y;
  angle_cov(1, 1) += fit.odo_sigma_theta * fit.odo_sigma_theta;

  ControlPointState out;
  out.x = moved.x;
  out.y = moved.y;
  out.theta = moved.theta;
  out.cov = to_slope * angle_cov * to_slope.transpose();
  return out;
}

double transformed_x(const Line& line, double x, const OdometryDelta& d) {
  return transform_point(line_point(line, x), d).x;
}

}  // namespace

LaneModel predict_model(const LaneModel& prev, const OdometryDelta& delta, const Config& cfg) {
  LaneModel out;
  out.timestamp = prev.timestamp;
  for (const Line& line : prev.lines) {
    Line moved = line;
    moved.segments.clear();
    moved.control_points.clear();
    moved.anchors.clear();

    for (int m = 0; m < line.segment_count(); ++m) {
      const auto& seg = line.segments[static_cast<std::size_t>(m)];
      const double xs = line.control_points[static_cast<std::size_t>(m)];
      const double xe = line.control_points[static_cast<std::size_t>(m) + 1];
      const Pose2 start = transform_point({xs, eval_segment(seg, xs, 0), std::atan(eval_segment(seg, xs, 1))}, delta);
      const Pose2 end = transform_point({xe, eval_segment(seg, xe, 0), std::atan(eval_segment(seg, xe, 1))}, delta);
      if (end.x < cfg.predict.cull_behind) continue;
      if (start.x >= end.x - cfg.predict.min_segment_span) continue;
      if (moved.control_points.empty() || moved.control_points.back() < start.x) {
        if (!moved.control_points.empty()) {
          // a dropped segment left a gap; bridge it by starting here
          moved.control_points.back() = start.x;
          moved.segments.back().x_end = start.x;
        } else {
          moved.control_points.push_back(start.x);
        }
      }
      const double x0 = moved.control_points.back();
      moved.control_points.push_back(end.x);
      moved.segments.push_back(
          Segment{hermite_cubic(start.x, start.y, std::tan(start.theta), end.x, end.y, std::tan(end.theta)), x0, end.x});
    }
    if (moved.segments.empty()) continue;

    for (const auto& anchor : line.anchors) {
      ControlPointState a = predict_anchor(anchor, delta, cfg.fit);
      if (a.x >= cfg.predict.cull_behind) moved.anchors.push_back(a);
    }
    moved.range = {transformed_x(line, line.range.min, delta), transformed_x(line, line.range.max, delta)};
    if (moved.range.min > moved.range.max) std::swap(moved.range.min, moved.range.max);
    moved.predicted_range = moved.range;
    out.lines.push_back(std::move(moved));
  }
  out.sort_lines();
  return out;
}

}  // namespace lanemodel
