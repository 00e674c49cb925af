#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "lanemodel/association.hpp"
#include "lanemodel/config.hpp"
#include "lanemodel/types.hpp"

namespace lanemodel {

/// Continuity-reduced parameterization of one cubic spline line.
///
/// The reduced vector is (c0, c1, c2, c3) of the first segment followed by the
/// cubic coefficient of every further segment, M+3 values in total. The
/// remaining coefficients of segment m+1 follow from segment m by requiring
/// equal value, slope and curvature at the shared knot s:
///
///   c2' = c2 + 3 (c3 - c3') s
///   c1' = c1 + 2 (c2 - c2') s + 3 (c3 - c3') s^2
///   c0' = c0 + (c1 - c1') s + (c2 - c2') s^2 + (c3 - c3') s^3
class SplineBasis {
 public:
  explicit SplineBasis(std::vector<double> knots);

  int segments() const { return static_cast<int>(knots_.size()) - 1; }
  int dim() const { return segments() + 3; }
  const std::vector<double>& knots() const { return knots_; }
  int segment_index(double x) const;

  /// 4 x dim linear map from reduced parameters to the coefficients of segment m.
  const Eigen::MatrixXd& segment_map(int m) const { return maps_[static_cast<std::size_t>(m)]; }
  /// d^k f / dx^k at x as a row over the reduced parameters.
  Eigen::RowVectorXd row(double x, int derivative_order) const;

  /// Per-segment coefficients by applying the substitutions numerically.
  std::vector<Eigen::Vector4d> expand(const Eigen::VectorXd& reduced) const;
  /// Keeps the first segment and the cubic coefficient of the others.
  Eigen::VectorXd reduce(std::span<const Eigen::Vector4d> raw) const;

 private:
  std::vector<double> knots_;
  std::vector<Eigen::MatrixXd> maps_;
};

struct Residual {
  Eigen::Vector2d e = Eigen::Vector2d::Zero();
  Eigen::MatrixXd J;  // 2 x dim
};

/// e = (f(x) - y, f'(x) - tan(theta)) for a feature on `segment`, with the
/// analytic Jacobian through the substitution chain.
Residual residual_and_jacobian(const Feature& f, const SplineBasis& basis, const Eigen::VectorXd& reduced, int segment);

/// diag(var_y, var_theta)^-1 from the feature covariance; nullopt when a variance is not positive.
std::optional<Eigen::Matrix2d> feature_information(const Feature& f);

struct LineBlock {
  int line = -1;    // index into LaneModel::lines
  int offset = 0;   // first column in the stacked parameter vector
  SplineBasis basis;
  std::vector<int> features;  // associated, usable feature indices
};

struct ConstraintPair {
  int first = -1;   // block indices
  int second = -1;
  std::vector<double> points;  // slope-equality evaluation points
};

struct FitProblem {
  std::vector<LineBlock> blocks;
  std::vector<int> excluded;  // line indices failing the identifiability guard
  std::vector<ConstraintPair> constraints;
  Eigen::VectorXd params;
  Eigen::MatrixXd H;
  Eigen::VectorXd b;
  Eigen::MatrixXd K;
  Eigen::VectorXd g;
  double cost = 0.0;

  int dim() const { return static_cast<int>(params.size()); }
  double constraint_violation() const { return g.size() == 0 ? 0.0 : g.cwiseAbs().maxCoeff(); }
  /// Column of a stored coefficient; nullopt for coefficients eliminated by continuity.
  std::optional<int> column(int line, int segment, int coeff) const;
};

/// Stacks every identifiable line of `model` (knots as placed), gathers its
/// features and time-filter anchors, builds the parallelism pairs and
/// evaluates H, b, K, g at the model's current coefficients.
FitProblem build_problem(const LaneModel& model, const Correspondences& corr, std::span<const Feature> features);

/// Re-evaluates H, b, K, g and cost of an existing layout at new parameters.
void evaluate_problem(FitProblem& problem, const LaneModel& model, std::span<const Feature> features);

struct ConstrainedStep {
  Eigen::VectorXd delta;
  Eigen::VectorXd lambda;
  double damping = 0.0;
  bool ok = false;
};

/// Solves [[H, -K^T], [-K, 0]] [dL; lambda] = [-b; g]. On a singular or
/// ill-conditioned system, damping (applied to the equilibrated H) starts at
/// fit.damping_init and grows tenfold up to fit.damping_max. `min_damping`
/// lets the caller start above zero.
ConstrainedStep solve_constrained(const FitProblem& problem, const FitConfig& cfg, double min_damping = 0.0);

struct FitReport {
  int iterations = 0;
  double final_cost = 0.0;
  bool converged = false;
  bool failed = false;
  double constraint_violation = 0.0;
  Eigen::MatrixXd posterior_H;
  std::vector<double> cost_history;        // accepted iterates, starting with the initial guess
  std::vector<double> violation_history;
  std::vector<int> excluded_ids;
  int constraint_rows = 0;
};

struct FitResult {
  LaneModel model;
  FitReport report;
};

/// Gauss-Newton with continuity eliminated and parallelism as Lagrange rows.
/// Fitted lines get new coefficients and fresh time-filter anchors at their
/// knots; excluded lines are returned unchanged. On solver failure the input
/// model is returned with report.failed set.
FitResult fit(const LaneModel& model, const Correspondences& corr, std::span<const Feature> features,
              const FitConfig& cfg);

}  // namespace lanemodel
