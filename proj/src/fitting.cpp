#include "lanemodel/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/LU>

namespace lanemodel {

SplineBasis::SplineBasis(std::vector<double> knots) : knots_(std::move(knots)) {
  if (knots_.size() < 2) throw std::invalid_argument("spline basis needs at least two knots");
  for (std::size_t k = 1; k < knots_.size(); ++k) {
    if (!(knots_[k] > knots_[k - 1])) throw std::invalid_argument("knots must be strictly increasing");
  }
  const int d = dim();
  Eigen::MatrixXd first = Eigen::MatrixXd::Zero(4, d);
  first.leftCols<4>().setIdentity();
  maps_.push_back(std::move(first));
  for (int m = 1; m < segments(); ++m) {
    const double s = knots_[static_cast<std::size_t>(m)];
    const Eigen::MatrixXd& p = maps_.back();
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(4, d);
    t(3, 3 + m) = 1.0;
    t.row(2) = p.row(2) + 3.0 * s * (p.row(3) - t.row(3));
    t.row(1) = p.row(1) + 2.0 * s * (p.row(2) - t.row(2)) + 3.0 * s * s * (p.row(3) - t.row(3));
    t.row(0) = p.row(0) + s * (p.row(1) - t.row(1)) + s * s * (p.row(2) - t.row(2)) +
               s * s * s * (p.row(3) - t.row(3));
    maps_.push_back(std::move(t));
  }
}

int SplineBasis::segment_index(double x) const {
  if (segments() <= 1) return 0;
  const auto first = knots_.begin() + 1;
  const auto last = knots_.end() - 1;
  return static_cast<int>(std::upper_bound(first, last, x) - first);
}

Eigen::RowVectorXd SplineBasis::row(double x, int derivative_order) const {
  return monomial_row(x, derivative_order) * segment_map(segment_index(x));
}

std::vector<Eigen::Vector4d> SplineBasis::expand(const Eigen::VectorXd& reduced) const {
  if (reduced.size() != dim()) throw std::invalid_argument("reduced vector has wrong size");
  std::vector<Eigen::Vector4d> out;
  out.emplace_back(reduced.head<4>());
  for (int m = 1; m < segments(); ++m) {
    const double s = knots_[static_cast<std::size_t>(m)];
    const Eigen::Vector4d& p = out.back();
    Eigen::Vector4d c;
    c[3] = reduced[3 + m];
    c[2] = p[2] + 3.0 * (p[3] - c[3]) * s;
    c[1] = p[1] + 2.0 * (p[2] - c[2]) * s + 3.0 * (p[3] - c[3]) * s * s;
    c[0] = p[0] + (p[1] - c[1]) * s + (p[2] - c[2]) * s * s + (p[3] - c[3]) * s * s * s;
    out.push_back(c);
  }
  return out;
}

Eigen::VectorXd SplineBasis::reduce(std::span<const Eigen::Vector4d> raw) const {
  if (static_cast<int>(raw.size()) != segments()) throw std::invalid_argument("raw coefficients do not match knots");
  Eigen::VectorXd out(dim());
  out.head<4>() = raw[0];
  for (int m = 1; m < segments(); ++m) out[3 + m] = raw[static_cast<std::size_t>(m)][3];
  return out;
}

std::optional<Eigen::Matrix2d> feature_information(const Feature& f) {
  const double var_y = f.cov(1, 1);
  const double var_theta = f.cov(2, 2);
  if (!(var_y > 0.0) || !(var_theta > 0.0)) return std::nullopt;
  return Eigen::Vector2d(1.0 / var_y, 1.0 / var_theta).asDiagonal().toDenseMatrix();
}

Residual residual_and_jacobian(const Feature& f, const SplineBasis& basis, const Eigen::VectorXd& reduced,
                               int segment) {
  const Eigen::MatrixXd& map = basis.segment_map(segment);
  Residual r;
  r.J.resize(2, basis.dim());
  r.J.row(0) = monomial_row(f.x, 0) * map;
  r.J.row(1) = monomial_row(f.x, 1) * map;
  r.e = r.J * reduced - Eigen::Vector2d(f.y, std::tan(f.theta));
  return r;
}

std::optional<int> FitProblem::column(int line, int segment, int coeff) const {
  for (const auto& block : blocks) {
    if (block.line != line) continue;
    if (segment < 0 || segment >= block.basis.segments() || coeff < 0 || coeff > 3) return std::nullopt;
    if (segment == 0) return block.offset + coeff;
    if (coeff == 3) return block.offset + 3 + segment;
    return std::nullopt;
  }
  return std::nullopt;
}

namespace {

struct Term {
  Eigen::Vector2d e;
  Eigen::MatrixXd J;
};

void accumulate(FitProblem& p, const LineBlock& block, const Residual& r, const Eigen::Matrix2d& info) {
  const int d = block.basis.dim();
  const Eigen::MatrixXd jt_info = r.J.transpose() * info;
  p.H.block(block.offset, block.offset, d, d).noalias() += jt_info * r.J;
  p.b.segment(block.offset, d).noalias() += jt_info * r.e;
  p.cost += r.e.dot(info * r.e);
}

}  // namespace

void evaluate_problem(FitProblem& p, const LaneModel& model, std::span<const Feature> features) {
  const int n = p.dim();
  p.H = Eigen::MatrixXd::Zero(n, n);
  p.b = Eigen::VectorXd::Zero(n);
  p.cost = 0.0;
  // fixed summation order: blocks, then features, then anchors
  for (const auto& block : p.blocks) {
    const Eigen::VectorXd params = p.params.segment(block.offset, block.basis.dim());
    for (int i : block.features) {
      const Feature& f = features[static_cast<std::size_t>(i)];
      const auto info = feature_information(f);
      accumulate(p, block, residual_and_jacobian(f, block.basis, params, block.basis.segment_index(f.x)), *info);
    }
    for (const auto& a : model.lines[static_cast<std::size_t>(block.line)].anchors) {
      Feature pseudo;
      pseudo.x = a.x;
      pseudo.y = a.y;
      pseudo.theta = a.theta;
      const Eigen::Matrix2d info = a.cov.inverse();
      accumulate(p, block, residual_and_jacobian(pseudo, block.basis, params, block.basis.segment_index(a.x)), info);
    }
  }

  int rows = 0;
  for (const auto& c : p.constraints) rows += static_cast<int>(c.points.size());
  p.K = Eigen::MatrixXd::Zero(rows, n);
  p.g = Eigen::VectorXd::Zero(rows);
  int r = 0;
  for (const auto& c : p.constraints) {
    const auto& bi = p.blocks[static_cast<std::size_t>(c.first)];
    const auto& bj = p.blocks[static_cast<std::size_t>(c.second)];
    for (double x : c.points) {
      const Eigen::RowVectorXd ri = bi.basis.row(x, 1);
      const Eigen::RowVectorXd rj = bj.basis.row(x, 1);
      p.K.block(r, bi.offset, 1, bi.basis.dim()) = ri;
      p.K.block(r, bj.offset, 1, bj.basis.dim()) = -rj;
      p.g[r] = ri.dot(p.params.segment(bi.offset, bi.basis.dim())) - rj.dot(p.params.segment(bj.offset, bj.basis.dim()));
      ++r;
    }
  }
}

FitProblem build_problem(const LaneModel& model, const Correspondences& corr, std::span<const Feature> features) {
  FitProblem p;
  std::vector<std::vector<int>> per_line(model.lines.size());
  for (const auto& pair : corr.pairs) {
    if (feature_information(features[static_cast<std::size_t>(pair.feature)])) {
      per_line[static_cast<std::size_t>(pair.line)].push_back(pair.feature);
    }
  }

  std::vector<int> block_of(model.lines.size(), -1);
  int offset = 0;
  std::vector<Eigen::VectorXd> initial;
  for (std::size_t n = 0; n < model.lines.size(); ++n) {
    const Line& line = model.lines[n];
    const int m = line.segment_count();
    const bool identifiable = static_cast<int>(per_line[n].size()) >= m + 3 || !line.anchors.empty();
    if (!identifiable) {
      p.excluded.push_back(static_cast<int>(n));
      continue;
    }
    LineBlock block{static_cast<int>(n), offset, SplineBasis(line.control_points), per_line[n]};
    std::vector<Eigen::Vector4d> raw;
    for (const auto& seg : line.segments) raw.push_back(seg.coeffs);
    initial.push_back(block.basis.reduce(raw));
    offset += block.basis.dim();
    block_of[n] = static_cast<int>(p.blocks.size());
    p.blocks.push_back(std::move(block));
  }
  p.params.resize(offset);
  for (std::size_t k = 0; k < p.blocks.size(); ++k) p.params.segment(p.blocks[k].offset, p.blocks[k].basis.dim()) = initial[k];

  for (const auto& group : model.parallel_groups) {
    int prev = -1;
    for (int n : group) {
      const int b = block_of[static_cast<std::size_t>(n)];
      if (b < 0) continue;
      if (prev >= 0) {
        const auto& ka = p.blocks[static_cast<std::size_t>(prev)].basis.knots();
        const auto& kb = p.blocks[static_cast<std::size_t>(b)].basis.knots();
        std::vector<double> points = ka.size() <= kb.size() ? ka : kb;
        points.insert(points.begin() + 1, 0.5 * (points[0] + points[1]));
        p.constraints.push_back({prev, b, std::move(points)});
      }
      prev = b;
    }
  }
  evaluate_problem(p, model, features);
  return p;
}

ConstrainedStep solve_constrained(const FitProblem& p, const FitConfig& cfg, double min_damping) {
  const int n = p.dim();
  const int c = static_cast<int>(p.g.size());
  ConstrainedStep step;
  if (n == 0) {
    step.ok = true;
    return step;
  }

  Eigen::VectorXd col_scale(n);
  for (int i = 0; i < n; ++i) col_scale[i] = p.H(i, i) > 0.0 ? 1.0 / std::sqrt(p.H(i, i)) : 1.0;
  const Eigen::MatrixXd h_scaled = col_scale.asDiagonal() * p.H * col_scale.asDiagonal();
  Eigen::MatrixXd k_scaled = p.K * col_scale.asDiagonal();
  Eigen::VectorXd row_scale = Eigen::VectorXd::Ones(c);
  for (int r = 0; r < c; ++r) {
    const double mx = k_scaled.row(r).cwiseAbs().maxCoeff();
    if (mx > 0.0) row_scale[r] = 1.0 / mx;
  }
  k_scaled = row_scale.asDiagonal() * k_scaled;

  Eigen::VectorXd rhs(n + c);
  rhs.head(n) = -col_scale.cwiseProduct(p.b);
  rhs.tail(c) = row_scale.cwiseProduct(p.g);

  double mu = min_damping;
  while (true) {
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + c, n + c);
    kkt.topLeftCorner(n, n) = h_scaled;
    kkt.topLeftCorner(n, n).diagonal().array() += mu;
    kkt.topRightCorner(n, c) = -k_scaled.transpose();
    kkt.bottomLeftCorner(c, n) = -k_scaled;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(kkt);
    const double rcond = lu.rcond();
    if (std::isfinite(rcond) && rcond * cfg.cond_limit >= 1.0) {
      const Eigen::VectorXd sol = lu.solve(rhs);
      if (sol.allFinite()) {
        step.delta = col_scale.cwiseProduct(sol.head(n));
        step.lambda = row_scale.cwiseProduct(sol.tail(c));
        step.damping = mu;
        step.ok = true;
        return step;
      }
    }
    if (mu >= cfg.damping_max) break;
    mu = mu == 0.0 ? cfg.damping_init : std::min(mu * 10.0, cfg.damping_max);
  }
  step.damping = mu;
  return step;
}

namespace {

Eigen::MatrixXd block_covariance(const Eigen::MatrixXd& h) {
  const int d = static_cast<int>(h.rows());
  Eigen::VectorXd s(d);
  for (int i = 0; i < d; ++i) s[i] = h(i, i) > 0.0 ? 1.0 / std::sqrt(h(i, i)) : 1.0;
  Eigen::MatrixXd scaled = s.asDiagonal() * h * s.asDiagonal();
  Eigen::LDLT<Eigen::MatrixXd> ldlt(scaled);
  if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-14) {
    scaled.diagonal().array() += 1e-9;
    ldlt.compute(scaled);
  }
  const Eigen::MatrixXd inv = ldlt.solve(Eigen::MatrixXd::Identity(d, d));
  return s.asDiagonal() * inv * s.asDiagonal();
}

}  // namespace

FitResult fit(const LaneModel& model, const Correspondences& corr, std::span<const Feature> features,
              const FitConfig& cfg) {
  FitResult result{model, {}};
  FitReport& report = result.report;
  FitProblem problem = build_problem(model, corr, features);
  for (int n : problem.excluded) report.excluded_ids.push_back(model.lines[static_cast<std::size_t>(n)].id);
  report.constraint_rows = static_cast<int>(problem.g.size());
  if (problem.dim() == 0) {
    report.converged = true;
    return result;
  }

  constexpr double kFeasibleTol = 1e-10;
  report.cost_history.push_back(problem.cost);
  report.violation_history.push_back(problem.constraint_violation());
  double damping = 0.0;
  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    ++report.iterations;
    const ConstrainedStep step = solve_constrained(problem, cfg, damping);
    if (!step.ok) {
      report.failed = true;
      break;
    }
    const double step_norm = step.delta.size() ? step.delta.cwiseAbs().maxCoeff() : 0.0;

    FitProblem trial = problem;
    trial.params += step.delta;
    evaluate_problem(trial, model, features);
    const double viol = problem.constraint_violation();
    const double trial_viol = trial.constraint_violation();
    const bool restoring = viol > kFeasibleTol && trial_viol < viol;
    const bool descending = trial.cost <= problem.cost + 1e-12 * std::max(1.0, problem.cost) &&
                            trial_viol <= std::max(viol, kFeasibleTol);
    if (restoring || descending) {
      problem = std::move(trial);
      report.cost_history.push_back(problem.cost);
      report.violation_history.push_back(problem.constraint_violation());
      damping = step.damping > cfg.damping_init ? step.damping / 10.0 : 0.0;
      if (step_norm < cfg.step_tol) {
        report.converged = true;
        break;
      }
    } else {
      if (step_norm < cfg.step_tol) {
        report.converged = true;
        break;
      }
      if (damping >= cfg.damping_max) break;
      damping = damping == 0.0 ? cfg.damping_init : std::min(10.0 * damping, cfg.damping_max);
    }
  }

  if (report.failed) {
    report.final_cost = problem.cost;
    report.constraint_violation = problem.constraint_violation();
    return result;
  }

  report.final_cost = problem.cost;
  report.constraint_violation = problem.constraint_violation();
  report.posterior_H = problem.H;

  for (const auto& block : problem.blocks) {
    Line& line = result.model.lines[static_cast<std::size_t>(block.line)];
    const int d = block.basis.dim();
    const Eigen::VectorXd params = problem.params.segment(block.offset, d);
    const auto coeffs = block.basis.expand(params);
    const auto& knots = block.basis.knots();
    line.segments.clear();
    for (std::size_t m = 0; m < coeffs.size(); ++m) line.segments.push_back(Segment{coeffs[m], knots[m], knots[m + 1]});
    line.control_points = knots;

    const Eigen::MatrixXd cov = block_covariance(problem.H.block(block.offset, block.offset, d, d));
    line.anchors.clear();
    for (double x : knots) {
      Eigen::MatrixXd js(2, d);
      js.row(0) = block.basis.row(x, 0);
      js.row(1) = block.basis.row(x, 1);
      ControlPointState a;
      a.x = x;
      a.y = js.row(0).dot(params);
      a.theta = std::atan(js.row(1).dot(params));
      a.cov = js * cov * js.transpose();
      line.anchors.push_back(a);
    }
  }
  return result;
}

}  // namespace lanemodel
