#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "lanemodel/dempster_shafer.hpp"

namespace lanemodel {

enum class MarkingType : std::uint8_t { kSolid = 0, kDashed = 1, kBlock = 2, kUnknown = 3 };
enum class MarkingColor : std::uint8_t { kWhite = 0, kYellow = 1, kUnknown = 2 };

std::string_view to_string(MarkingType type);
std::string_view to_string(MarkingColor color);
MarkingType parse_marking_type(std::string_view text);
MarkingColor parse_marking_color(std::string_view text);

/// Evidence over {solid, dashed, block} and {white, yellow}; the last entry
/// of each mass vector is the whole frame ("unknown").
struct AttributeMass {
  MassFunction<3> marking = MassFunction<3>::vacuous();
  MassFunction<2> color = MassFunction<2>::vacuous();

  static AttributeMass observed(MarkingType type, MarkingColor color, double confidence);
};

/// One lane-marking observation in the vehicle frame.
struct Feature {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;  // heading angle, radians
  Eigen::Matrix3d cov = Eigen::Matrix3d::Identity();  // over (x, y, theta)
  AttributeMass attrs;
};

/// Throws std::invalid_argument when the feature violates the ingestion rules
/// (non-finite values, |theta| >= pi/2, covariance not symmetric positive-definite).
void validate_feature(const Feature& feature);

/// f(x) = c0 + c1 x + c2 x^2 + c3 x^3 on [x_start, x_end).
struct Segment {
  Eigen::Vector4d coeffs = Eigen::Vector4d::Zero();
  double x_start = 0.0;
  double x_end = 1.0;
};

/// Point on a fitted line with the marginal covariance of (value, slope);
/// used as a time-filter pseudo-measurement once predicted into a new frame.
struct ControlPointState {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
  Eigen::Matrix2d cov = Eigen::Matrix2d::Identity();  // over (value, slope)
};

struct LineRange {
  double min = 0.0;
  double max = 0.0;
};

struct Line {
  int id = -1;
  std::vector<Segment> segments;
  std::vector<double> control_points;  // M+1 knots, strictly increasing
  MarkingType marking_type = MarkingType::kUnknown;
  MarkingColor color = MarkingColor::kUnknown;
  double marking_confidence = 0.0;
  double color_confidence = 0.0;
  AttributeMass evidence;
  bool attribute_conflict = false;
  LineRange range;
  LineRange predicted_range;
  int missed_frames = 0;
  std::vector<ControlPointState> anchors;

  int segment_count() const { return static_cast<int>(segments.size()); }
  /// Segment index covering x; x below the first knot maps to 0, at/above the last knot to M-1.
  int segment_index(double x) const;
};

struct LaneModel {
  std::vector<Line> lines;
  std::vector<std::vector<int>> parallel_groups;  // indices into lines
  double timestamp = 0.0;

  bool empty() const { return lines.empty(); }
  /// Sorts lines leftmost first (value at x=0 descending, ties by id) and
  /// resets parallel_groups to singletons.
  void sort_lines();
  const Line* find(int id) const;
};

struct OdometryDelta {
  double dx = 0.0;
  double dy = 0.0;
  double dpsi = 0.0;
};

void validate_odometry(const OdometryDelta& delta);

/// f, f' or f'' of a segment at any real x (extrapolation permitted).
double eval_segment(const Segment& seg, double x, int derivative_order);
double eval_segment(const Eigen::Vector4d& coeffs, double x, int derivative_order);
double eval_line(const Line& line, double x, int derivative_order);

/// Row vector d^k/dx^k [1, x, x^2, x^3].
Eigen::RowVector4d monomial_row(double x, int derivative_order);

/// Line made of one segment per knot interval, for tests and seeding.
Line make_line(int id, std::vector<Eigen::Vector4d> coeffs, std::vector<double> knots);

}  // namespace lanemodel
