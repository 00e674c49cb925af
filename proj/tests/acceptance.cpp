// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "lanemodel/dempster_shafer.hpp"
#include "lanemodel/evaluation.hpp"
#include "lanemodel/fitting.hpp"
#include "lanemodel/pipeline.hpp"
#include "lanemodel/simulator.hpp"
#include "test_support.hpp"

using namespace lanemodel;
namespace fs = std::filesystem;

namespace {

const fs::path kScenarios = LANEMODEL_SCENARIOS;
const std::string kCli = LANEMODEL_CLI;

int failures = 0;

void report(const std::string& name, bool ok, const std::string& detail) {
  std::cout << fmt::format("{} {}: {}\n", ok ? "PASS" : "FAIL", name, detail);
  if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Config lateral_gate_config() { return load_config(KeyValueFile::load(kScenarios / "lateral_gate.ini")); }

double max_continuity_jump(const Line& line) {
  double worst = 0.0;
  for (std::size_t m = 0; m + 1 < line.segments.size(); ++m) {
    const double s = line.control_points[m + 1];
    for (int order = 0; order <= 2; ++order) {
      worst = std::max(worst, std::abs(eval_segment(line.segments[m], s, order) - eval_segment(line.segments[m + 1], s, order)));
    }
  }
  return worst;
}

struct FrameSweep {
  double worst_rmse = 0.0;
  int bad_frames = 0;  // frames at or above the bound, or without any evaluated sample
  std::size_t frames = 0;
};

FrameSweep sweep(const MetricsTable& table, double bound) {
  FrameSweep s;
  s.frames = table.frames.size();
  for (const auto& f : table.frames) {
    if (f.samples == 0 || !(f.rmse < bound)) ++s.bad_frames;
    if (f.samples > 0) s.worst_rmse = std::max(s.worst_rmse, f.rmse);
  }
  return s;
}

void criterion_double_bend() {
  const ScenarioSpec spec = load_scenario(kScenarios / "double_bend.ini");
  const auto t0 = std::chrono::steady_clock::now();
  const Simulation sim = simulate(spec);
  const MetricsTable def = run_eval(to_recording(sim), to_truth(sim), ModelKind::kSpline, Config{});
  const double runtime = seconds_since(t0);
  const MetricsTable lateral = run_eval(to_recording(sim), to_truth(sim), ModelKind::kSpline, lateral_gate_config());
  const FrameSweep a = sweep(def, 0.1);
  const FrameSweep b = sweep(lateral, 0.1);

  // the spline model must actually use several segments on this road
  LaneTracker tracker;
  int max_segments = 0;
  for (const auto& frame : sim.frames) {
    tracker.process(frame.features, frame.odometry);
    for (const auto& line : tracker.model()->lines) max_segments = std::max(max_segments, line.segment_count());
  }

  const bool ok = a.bad_frames == 0 && b.bad_frames == 0 && runtime < 60.0 && max_segments >= 2;
  report("1 double-bend spline RMSE < 0.1 m every frame", ok,
         fmt::format("{} frames; max RMSE {:.4f} m (default gate), {:.4f} m (lateral-cap gate); frames over bound "
                     "{}/{}; up to {} segments; runtime {:.2f} s",
                     a.frames, a.worst_rmse, b.worst_rmse, a.bad_frames, b.bad_frames, max_segments, runtime));
}

void criterion_comparison() {
  const ScenarioSpec spec = load_scenario(kScenarios / "double_bend.ini");
  const ComparisonTable t = compare_models(spec, lateral_gate_config());
  const double hi = std::max(t.straight_mean_spline, t.straight_mean_clothoid);
  const double rel = hi > 0.0 ? std::abs(t.straight_mean_spline - t.straight_mean_clothoid) / hi : 0.0;
  report("2 clothoid/spline max RMSE ratio >= 2, straight within 25%", t.max_ratio >= 2.0 && rel <= 0.25,
         fmt::format("lateral-cap gate: spline {:.4f} m, clothoid {:.4f} m, ratio {:.2f}; straight means {:.4f} / "
                     "{:.4f} m ({:.1f}% apart)",
                     t.max_rmse_spline, t.max_rmse_clothoid, t.max_ratio, t.straight_mean_spline,
                     t.straight_mean_clothoid, 100.0 * rel));
  const ComparisonTable d = compare_models(spec, Config{});
  std::cout << fmt::format("INFO 2 with the default chi2 gate: spline {:.4f} m, clothoid {:.4f} m, ratio {:.2f}\n",
                           d.max_rmse_spline, d.max_rmse_clothoid, d.max_ratio);
}

void criterion_highway() {
  const ScenarioSpec spec = load_scenario(kScenarios / "highway.ini");
  const Simulation sim = simulate(spec);
  const MetricsTable t = run_eval(to_recording(sim), to_truth(sim), ModelKind::kSpline, Config{});
  double ego = NAN, adjacent = NAN;
  long ego_n = 0, adj_n = 0;
  for (const auto& row : t.bins) {
    if (std::abs(row.start - 110.0) > 1e-9) continue;
    if (row.label == LaneLabel::kEgo) ego = row.rmse, ego_n = row.count;
    if (row.label == LaneLabel::kAdjacent) adjacent = row.rmse, adj_n = row.count;
  }
  const bool ok = t.frames.size() >= 500 && ego < 0.75 && adjacent < 0.75;
  report("3 highway 110-120 m bin RMSE < 0.75 m", ok,
         fmt::format("{} frames; ego {:.4f} m ({} samples), adjacent {:.4f} m ({} samples)", t.frames.size(), ego,
                     ego_n, adjacent, adj_n));
}

// (a) and (b) on full scenario runs, (b) also on a synthetic parallel pair.
std::string continuity_and_parallelism(bool& ok) {
  double worst_jump = 0.0;
  double worst_parallel = 0.0;
  long frames = 0, fits = 0, constrained = 0;
  for (const char* name : {"double_bend.ini", "highway.ini"}) {
    const Simulation sim = simulate(load_scenario(kScenarios / name));
    LaneTracker tracker;
    for (const auto& frame : sim.frames) {
      const FrameReport r = tracker.process(frame.features, frame.odometry);
      ++frames;
      for (const auto& line : tracker.model()->lines) worst_jump = std::max(worst_jump, max_continuity_jump(line));
      fits += static_cast<long>(r.fits.size());
      if (!r.fits.empty() && r.fits.back().converged && r.fits.back().constraint_rows > 0) {
        ++constrained;
        worst_parallel = std::max(worst_parallel, r.fits.back().constraint_violation);
      }
    }
  }
  std::mt19937_64 rng(4);
  double synthetic = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    LaneModel model;
    model.lines.push_back(test::flat_line(0, 1.5, {0.0, 40.0, 80.0}));
    model.lines.push_back(test::flat_line(1, -1.5, {0.0, 40.0, 80.0}));
    model.parallel_groups = {{0, 1}};
    auto f = test::sample_line(test::curved_line(0, 1.75), 0, 80, 2.0, 0.1, 0.01, &rng);
    const auto fr = test::sample_line(test::curved_line(1, -1.75), 0, 80, 2.0, 0.1, 0.01, &rng);
    Correspondences corr = test::assign(model, f, 0);
    corr = test::assign(model, fr, 1, static_cast<int>(f.size()), corr);
    f.insert(f.end(), fr.begin(), fr.end());
    const FitResult r = fit(model, corr, f, FitConfig{});
    for (double x : {0.0, 20.0, 40.0, 80.0}) {
      synthetic = std::max(synthetic, std::abs(eval_line(r.model.lines[0], x, 1) - eval_line(r.model.lines[1], x, 1)));
    }
  }
  const bool a = worst_jump < 1e-9;
  const bool b = worst_parallel < 1e-8 && synthetic < 1e-8 && constrained > 0;
  ok = ok && a && b;
  return fmt::format("(a) {} continuity {:.1e} over {} frames ({} fits); (b) {} slope residual {:.1e} over {} constrained frames, "
                     "{:.1e} synthetic",
                     a ? "ok" : "BAD", worst_jump, frames, fits, b ? "ok" : "BAD", worst_parallel, constrained, synthetic);
}

std::string jacobian_check(bool& ok) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int m = 1 + trial % 4;
    std::vector<double> knots{0.0};
    for (int k = 0; k < m; ++k) knots.push_back(knots.back() + 10.0 + 15.0 * (u(rng) + 1.0));
    const SplineBasis basis(knots);
    Eigen::VectorXd p(basis.dim());
    p[0] = u(rng);
    p[1] = 0.05 * u(rng);
    p[2] = 1e-3 * u(rng);
    for (int k = 3; k < basis.dim(); ++k) p[k] = 1e-5 * u(rng);
    const double x = knots.back() * 0.5 * (u(rng) + 1.0);
    const Feature f = test::make_feature(x, u(rng), 0.1 * u(rng));
    const int seg = basis.segment_index(x);
    const Residual r = residual_and_jacobian(f, basis, p, seg);
    const double h = 1e-6;
    for (int k = 0; k < basis.dim(); ++k) {
      Eigen::VectorXd hi = p, lo = p;
      hi[k] += h;
      lo[k] -= h;
      const Eigen::Vector2d fd =
          (residual_and_jacobian(f, basis, hi, seg).e - residual_and_jacobian(f, basis, lo, seg).e) / (2 * h);
      for (int row = 0; row < 2; ++row) {
        worst = std::max(worst, std::abs(r.J(row, k) - fd[row]) / std::max(1.0, std::abs(fd[row])));
      }
    }
  }
  const bool good = worst < 1e-5;
  ok = ok && good;
  return fmt::format("(c) {} Jacobian rel err {:.1e} on 100 problems", good ? "ok" : "BAD", worst);
}

std::string wls_oracle(bool& ok) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Feature> f;
    for (int i = 0; i < 30; ++i) {
      const double x = 60.0 * u(rng);
      f.push_back(test::make_feature(x, 1.0 + 0.01 * x + 0.3 * (u(rng) - 0.5), 0.05 * (u(rng) - 0.5),
                                     0.01 + 0.1 * u(rng), 1e-4 + 1e-3 * u(rng)));
    }
    LaneModel model;
    model.lines.push_back(test::flat_line(0, 0.0, {0.0, 60.0}));
    const FitResult r = fit(model, test::assign(model, f, 0), f, FitConfig{});
    Eigen::Matrix4d n = Eigen::Matrix4d::Zero();
    Eigen::Vector4d rhs = Eigen::Vector4d::Zero();
    for (const auto& feat : f) {
      const double x = feat.x;
      const Eigen::Vector4d a(1, x, x * x, x * x * x);
      const Eigen::Vector4d s(0, 1, 2 * x, 3 * x * x);
      n += a * a.transpose() / feat.cov(1, 1) + s * s.transpose() / feat.cov(2, 2);
      rhs += a * feat.y / feat.cov(1, 1) + s * std::tan(feat.theta) / feat.cov(2, 2);
    }
    const Eigen::Vector4d oracle = n.fullPivLu().solve(rhs);
    for (double x = 0; x <= 60; x += 5) {
      worst = std::max(worst, std::abs(eval_segment(r.model.lines[0].segments[0].coeffs, x, 0) - eval_segment(oracle, x, 0)));
    }
  }
  const bool good = worst < 1e-8;
  ok = ok && good;
  return fmt::format("(d) {} WLS oracle {:.1e}", good ? "ok" : "BAD", worst);
}

std::string dimension_identities(bool& ok) {
  bool good = true;
  for (int m = 1; m <= 4; ++m) {
    std::vector<double> knots;
    for (int k = 0; k <= m; ++k) knots.push_back(25.0 * k);
    LaneModel model;
    std::vector<Feature> features;
    Correspondences corr;
    const int lines = 3;
    for (int n = 0; n < lines; ++n) {
      model.lines.push_back(test::flat_line(n, 3.5 - 3.5 * n, knots));
      const auto fs = test::sample_line(model.lines.back(), 0.0, knots.back(), 2.0);
      corr = test::assign(model, fs, n, static_cast<int>(features.size()), corr);
      features.insert(features.end(), fs.begin(), fs.end());
    }
    model.parallel_groups = {{0, 1, 2}};
    const FitProblem p = build_problem(model, corr, features);
    good = good && p.dim() == (m + 3) * lines && p.g.size() == (m + 2) * (lines - 1);
    for (const auto& c : p.constraints) good = good && static_cast<int>(c.points.size()) == m + 2;
  }
  ok = ok && good;
  return fmt::format("(e) {} dimension identities M=1..4", good ? "ok" : "BAD");
}

MassFunction<3> random_mass(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  MassFunction<3> m;
  double sum = 0.0;
  for (double& v : m.mass) sum += (v = u(rng));
  for (double& v : m.mass) v /= sum;
  return m;
}

std::string dempster(bool& ok) {
  std::mt19937_64 rng(3);
  double worst = 0.0;
  bool defined = true;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto a = random_mass(rng);
    const auto b = random_mass(rng);
    const auto c = random_mass(rng);
    const auto ab = combine(a, b);
    const auto ba = combine(b, a);
    const auto bc = combine(b, c);
    if (!ab || !ba || !bc) {
      defined = false;
      continue;
    }
    const auto ab_c = combine(*ab, c);
    const auto a_bc = combine(a, *bc);
    if (!ab_c || !a_bc) {
      defined = false;
      continue;
    }
    for (std::size_t i = 0; i < 4; ++i) {
      worst = std::max({worst, std::abs(ab->mass[i] - ba->mass[i]), std::abs(ab_c->mass[i] - a_bc->mass[i])});
    }
  }
  const bool good = defined && worst < 1e-12;
  ok = ok && good;
  return fmt::format("(f) {} Dempster {:.1e}", good ? "ok" : "BAD", worst);
}

std::string fixed_point(bool& ok) {
  TrackState state;
  auto f = test::sample_line(test::curved_line(0, 1.75), 0, 80, 2.0);
  const auto f2 = test::sample_line(test::curved_line(1, -1.75), 0, 80, 2.0);
  f.insert(f.end(), f2.begin(), f2.end());
  step(state, f, {}, Config{});
  step(state, f, {}, Config{});
  const LaneModel before = *state.model;
  step(state, f, {}, Config{});
  double worst = 0.0;
  bool same_lines = before.lines.size() == state.model->lines.size();
  for (std::size_t n = 0; same_lines && n < before.lines.size(); ++n) {
    for (double x = 0.0; x <= 100.0; x += 1.0) {
      worst = std::max(worst, std::abs(eval_line(before.lines[n], x, 0) - eval_line(state.model->lines[n], x, 0)));
    }
  }
  const bool good = same_lines && worst < 1e-6;
  ok = ok && good;
  return fmt::format("(g) {} static-frame change {:.1e}", good ? "ok" : "BAD", worst);
}

std::string substitution_example(bool& ok) {
  const SplineBasis basis({0.0, 2.0, 4.0});
  Eigen::VectorXd reduced(5);
  reduced << 0, 0, 0, 1, 0;
  const auto segs = basis.expand(reduced);
  const bool good = segs.size() == 2 && segs[1] == Eigen::Vector4d(8, -12, 6, 0);
  ok = ok && good;
  return fmt::format("(h) {} substitution gives ({}, {}, {}, {})", good ? "ok" : "BAD", segs[1][0], segs[1][1],
                     segs[1][2], segs[1][3]);
}

void criterion_properties() {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  std::vector<std::string> parts;
  parts.push_back(continuity_and_parallelism(ok));
  parts.push_back(jacobian_check(ok));
  parts.push_back(wls_oracle(ok));
  parts.push_back(dimension_identities(ok));
  parts.push_back(dempster(ok));
  parts.push_back(fixed_point(ok));
  parts.push_back(substitution_example(ok));
  const double runtime = seconds_since(t0);
  ok = ok && runtime < 300.0;
  std::string detail;
  for (const auto& p : parts) detail += p + "; ";
  report("4 property suite", ok, detail + fmt::format("runtime {:.1f} s", runtime));
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Byte comparison of every file under two directory trees.
bool same_tree(const fs::path& a, const fs::path& b, int& files) {
  std::vector<fs::path> rel_a, rel_b;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (e.is_regular_file()) rel_a.push_back(fs::relative(e.path(), a));
  }
  for (const auto& e : fs::recursive_directory_iterator(b)) {
    if (e.is_regular_file()) rel_b.push_back(fs::relative(e.path(), b));
  }
  std::sort(rel_a.begin(), rel_a.end());
  std::sort(rel_b.begin(), rel_b.end());
  if (rel_a != rel_b || rel_a.empty()) return false;
  for (const auto& r : rel_a) {
    if (read_file(a / r) != read_file(b / r)) return false;
  }
  files += static_cast<int>(rel_a.size());
  return true;
}

int run(const std::string& args, const fs::path& log) {
  const std::string cmd = fmt::format("\"{}\" {} > \"{}\" 2>&1", kCli, args, log.string());
  return std::system(cmd.c_str());
}

void criterion_determinism() {
  const fs::path root = fs::temp_directory_path() / fmt::format("lanemodel_acceptance_{}", std::random_device{}());
  fs::remove_all(root);
  bool ok = true;
  int files = 0;
  const std::string scenario = (kScenarios / "double_bend.ini").string();
  for (int run_no = 0; run_no < 2; ++run_no) {
    const fs::path dir = root / std::to_string(run_no);
    const fs::path logs = root / fmt::format("logs{}", run_no);
    fs::create_directories(dir);
    fs::create_directories(logs);
    ok = ok && run(fmt::format("simulate \"{}\" --out \"{}\"", scenario, (dir / "sim").string()), logs / "simulate.log") == 0;
    const fs::path sim = dir / "sim";
    ok = ok && run(fmt::format("eval \"{}\" \"{}\" \"{}\" --model spline --out \"{}\"", (sim / "features.csv").string(),
                               (sim / "odometry.csv").string(), (sim / "truth.csv").string(), (dir / "eval").string()),
                   logs / "eval.log") == 0;
    ok = ok && run(fmt::format("compare \"{}\" --out \"{}\"", scenario, (dir / "compare").string()), logs / "compare.log") == 0;
  }
  if (ok) ok = same_tree(root / "0", root / "1", files);
  report("5 CLI determinism", ok,
         fmt::format("simulate, eval and compare run twice; {} output files {}", files,
                     ok ? "byte-identical" : "differ or a command failed"));
  if (ok) fs::remove_all(root);
}

}  // namespace

int main() {
  criterion_double_bend();
  criterion_comparison();
  criterion_highway();
  criterion_properties();
  criterion_determinism();
  return failures == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
