#pragma once

#include <Eigen/Core>

#include "lanemodel/config.hpp"
#include "lanemodel/types.hpp"

namespace lanemodel {

struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
};

/// Expresses a point of the previous vehicle frame in the current one:
/// translate by (-dx, -dy), then rotate by -dpsi.
Pose2 transform_point(const Pose2& p, const OdometryDelta& delta);

/// Cubic through (x0, y0) and (x1, y1) with slopes s0, s1, in global monomial
/// coefficients. Requires x0 != x1.
Eigen::Vector4d hermite_cubic(double x0, double y0, double s0, double x1, double y1, double s1);

/// Moves a lane model into the current vehicle frame. Each segment is refit
/// by Hermite interpolation through its transformed limiting control points,
/// so the result is C1 but not necessarily C2 at the knots. Segments that end
/// behind predict.cull_behind or collapse below predict.min_segment_span are
/// dropped, as are lines left without segments. Time-filter anchors are
/// transformed with their covariance and inflated by the odometry noise.
LaneModel predict_model(const LaneModel& prev, const OdometryDelta& delta, const Config& cfg);

}  // namespace lanemodel
