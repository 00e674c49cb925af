#include "lanemodel/types.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>

namespace lanemodel {

std::string_view to_string(MarkingType type) {
  switch (type) {
    case MarkingType::kSolid: return "solid";
    case MarkingType::kDashed: return "dashed";
    case MarkingType::kBlock: return "block";
    case MarkingType::kUnknown: break;
  }
  return "unknown";
}

std::string_view to_string(MarkingColor color) {
  switch (color) {
    case MarkingColor::kWhite: return "white";
    case MarkingColor::kYellow: return "yellow";
    case MarkingColor::kUnknown: break;
  }
  return "unknown";
}

MarkingType parse_marking_type(std::string_view text) {
  if (text == "solid") return MarkingType::kSolid;
  if (text == "dashed") return MarkingType::kDashed;
  if (text == "block") return MarkingType::kBlock;
  if (text == "unknown") return MarkingType::kUnknown;
  throw std::invalid_argument("unknown marking type '" + std::string(text) + "'");
}

MarkingColor parse_marking_color(std::string_view text) {
  if (text == "white") return MarkingColor::kWhite;
  if (text == "yellow") return MarkingColor::kYellow;
  if (text == "unknown") return MarkingColor::kUnknown;
  throw std::invalid_argument("unknown marking color '" + std::string(text) + "'");
}

AttributeMass AttributeMass::observed(MarkingType type, MarkingColor color, double confidence) {
  AttributeMass a;
  if (type != MarkingType::kUnknown) {
    a.marking = MassFunction<3>::certain(static_cast<std::size_t>(type), confidence);
  }
  if (color != MarkingColor::kUnknown) {
    a.color = MassFunction<2>::certain(static_cast<std::size_t>(color), confidence);
  }
  return a;
}

void validate_feature(const Feature& f) {
  if (!std::isfinite(f.x) || !std::isfinite(f.y) || !std::isfinite(f.theta) || !f.cov.allFinite()) {
    throw std::invalid_argument("feature has non-finite values");
  }
  if (std::abs(f.theta) >= std::numbers::pi / 2) {
    throw std::invalid_argument("feature heading must satisfy |theta| < pi/2");
  }
  if (!f.cov.isApprox(f.cov.transpose(), 1e-12)) {
    throw std::invalid_argument("feature covariance is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(f.cov, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() <= 0.0) {
    throw std::invalid_argument("feature covariance is not positive-definite");
  }
}

void validate_odometry(const OdometryDelta& d) {
  if (!std::isfinite(d.dx) || !std::isfinite(d.dy) || !std::isfinite(d.dpsi)) {
    throw std::invalid_argument("odometry has non-finite values");
  }
  if (std::abs(d.dpsi) >= std::numbers::pi / 4) {
    throw std::invalid_argument("odometry rotation exceeds pi/4 per frame");
  }
}

Eigen::RowVector4d monomial_row(double x, int derivative_order) {
  switch (derivative_order) {
    case 0: return {1.0, x, x * x, x * x * x};
    case 1: return {0.0, 1.0, 2.0 * x, 3.0 * x * x};
    case 2: return {0.0, 0.0, 2.0, 6.0 * x};
    default: break;
  }
  throw std::invalid_argument("derivative order must be 0, 1 or 2");
}

double eval_segment(const Eigen::Vector4d& c, double x, int derivative_order) {
  switch (derivative_order) {
    case 0: return c[0] + x * (c[1] + x * (c[2] + x * c[3]));
    case 1: return c[1] + x * (2.0 * c[2] + x * 3.0 * c[3]);
    case 2: return 2.0 * c[2] + 6.0 * c[3] * x;
    default: break;
  }
  throw std::invalid_argument("derivative order must be 0, 1 or 2");
}

double eval_segment(const Segment& seg, double x, int derivative_order) {
  return eval_segment(seg.coeffs, x, derivative_order);
}

int Line::segment_index(double x) const {
  const int m = segment_count();
  if (m <= 1 || control_points.size() < 2) return 0;
  // first knot k with x < control_points[k], among interior knots
  const auto first = control_points.begin() + 1;
  const auto last = control_points.end() - 1;
  const auto it = std::upper_bound(first, last, x);
  return static_cast<int>(it - first);
}

double eval_line(const Line& line, double x, int derivative_order) {
  if (line.segments.empty()) throw std::invalid_argument("line has no segments");
  return eval_segment(line.segments[static_cast<std::size_t>(line.segment_index(x))], x,
                      derivative_order);
}

void LaneModel::sort_lines() {
  std::stable_sort(lines.begin(), lines.end(), [](const Line& a, const Line& b) {
    const double ya = eval_line(a, 0.0, 0);
    const double yb = eval_line(b, 0.0, 0);
    if (ya != yb) return ya > yb;
    return a.id < b.id;
  });
  parallel_groups.clear();
  for (std::size_t i = 0; i < lines.size(); ++i) parallel_groups.push_back({static_cast<int>(i)});
}

const Line* LaneModel::find(int id) const {
  for (const auto& line : lines) {
    if (line.id == id) return &line;
  }
  return nullptr;
}

Line make_line(int id, std::vector<Eigen::Vector4d> coeffs, std::vector<double> knots) {
  if (knots.size() != coeffs.size() + 1) {
    throw std::invalid_argument("make_line needs one more knot than segments");
  }
  Line line;
  line.id = id;
  for (std::size_t m = 0; m < coeffs.size(); ++m) {
    line.segments.push_back(Segment{coeffs[m], knots[m], knots[m + 1]});
  }
  line.range = {knots.front(), knots.back()};
  line.predicted_range = line.range;
  line.control_points = std::move(knots);
  return line;
}

}  // namespace lanemodel
