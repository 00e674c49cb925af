#include "lanemodel/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

namespace lanemodel {

double ScenarioSpec::road_length() const {
  double total = 0.0;
  for (const auto& p : segments) total += p.length;
  return total;
}

double ScenarioSpec::last_frame_arclength() const {
  return end >= 0.0 ? end : road_length() - feature_horizon;
}

double ScenarioSpec::straight_prefix() const {
  double s = 0.0;
  for (const auto& p : segments) {
    if (p.curvature_start != 0.0 || p.curvature_end != 0.0) return s;
    s += p.length;
  }
  return s;
}

std::vector<MarkingType> ScenarioSpec::boundary_markings() const {
  if (!markings.empty()) return markings;
  std::vector<MarkingType> out(static_cast<std::size_t>(lane_count) + 1, MarkingType::kDashed);
  out.front() = MarkingType::kSolid;
  out.back() = MarkingType::kSolid;
  return out;
}

std::vector<double> ScenarioSpec::boundary_offsets() const {
  std::vector<double> out;
  for (int i = 0; i <= lane_count; ++i) out.push_back((ego_lane + 0.5 - i) * lane_width);
  return out;
}

void validate_scenario(const ScenarioSpec& s) {
  if (s.segments.empty()) throw InputError("scenario has no road segments");
  for (const auto& p : s.segments) {
    if (!(p.length > 0.0)) throw InputError("road segment lengths must be positive");
  }
  if (s.lane_count < 1) throw InputError("lane_count must be >= 1");
  if (!(s.lane_width > 0.0)) throw InputError("lane_width must be positive");
  if (s.ego_lane < 0 || s.ego_lane >= s.lane_count) throw InputError("ego_lane out of range");
  if (!(s.feature_spacing > 0.0)) throw InputError("feature_spacing must be positive");
  if (!(s.feature_horizon > 0.0)) throw InputError("feature_horizon must be positive");
  if (!(s.frame_step > 0.0)) throw InputError("frame_step must be positive");
  if (s.noise.sigma_x < 0.0 || s.noise.sigma_y < 0.0 || s.noise.sigma_theta < 0.0) {
    throw InputError("noise sigmas must be non-negative");
  }
  if (!s.markings.empty() && static_cast<int>(s.markings.size()) != s.lane_count + 1) {
    throw InputError("markings must list lane_count + 1 boundaries");
  }
  if (s.start < 0.0 || s.last_frame_arclength() < s.start || s.last_frame_arclength() > s.road_length()) {
    throw InputError("vehicle arc-length interval is outside the road");
  }
}

ScenarioSpec parse_scenario(const KeyValueFile& file) {
  ScenarioSpec s;
  for (const auto& [key, value] : file.entries()) {
    static const std::set<std::string> kKnown{
        "scenario.lane_count",    "scenario.lane_width",      "scenario.ego_lane",     "scenario.feature_spacing",
        "scenario.noise_x",       "scenario.noise_y",         "scenario.noise_theta",  "scenario.feature_horizon",
        "scenario.frame_step",    "scenario.start",           "scenario.end",          "scenario.rng_seed",
        "scenario.attr_confidence", "scenario.odo_sigma_xy",  "scenario.odo_sigma_psi", "road.segment",
        "markings.boundary"};
    if (!kKnown.contains(key)) throw InputError("unknown scenario key '" + key + "'");
  }
  s.lane_count = file.get("scenario.lane_count", s.lane_count);
  s.lane_width = file.get("scenario.lane_width", s.lane_width);
  s.ego_lane = file.get("scenario.ego_lane", s.ego_lane);
  s.feature_spacing = file.get("scenario.feature_spacing", s.feature_spacing);
  s.noise.sigma_x = file.get("scenario.noise_x", s.noise.sigma_x);
  s.noise.sigma_y = file.get("scenario.noise_y", s.noise.sigma_y);
  s.noise.sigma_theta = file.get("scenario.noise_theta", s.noise.sigma_theta);
  s.feature_horizon = file.get("scenario.feature_horizon", s.feature_horizon);
  s.frame_step = file.get("scenario.frame_step", s.frame_step);
  s.start = file.get("scenario.start", s.start);
  s.end = file.get("scenario.end", s.end);
  s.rng_seed = static_cast<std::uint64_t>(file.get("scenario.rng_seed", 1.0));
  s.attr_confidence = file.get("scenario.attr_confidence", s.attr_confidence);
  s.odo_sigma_xy = file.get("scenario.odo_sigma_xy", s.odo_sigma_xy);
  s.odo_sigma_psi = file.get("scenario.odo_sigma_psi", s.odo_sigma_psi);

  for (const auto& text : file.all("road.segment")) {
    std::istringstream in(text);
    std::string kind;
    RoadPiece p;
    in >> kind >> p.length;
    if (kind == "straight") {
      p.kind = RoadPieceKind::kStraight;
    } else if (kind == "clothoid") {
      p.kind = RoadPieceKind::kClothoid;
      in >> p.curvature_start >> p.curvature_end;
    } else {
      throw InputError("road.segment kind must be straight or clothoid, got '" + kind + "'");
    }
    if (in.fail()) throw InputError("malformed road.segment '" + text + "'");
    s.segments.push_back(p);
  }
  for (const auto& text : file.all("markings.boundary")) {
    try {
      s.markings.push_back(parse_marking_type(text));
    } catch (const std::invalid_argument& e) {
      throw InputError(e.what());
    }
  }
  validate_scenario(s);
  return s;
}

ScenarioSpec load_scenario(const std::filesystem::path& path) { return parse_scenario(KeyValueFile::load(path)); }

double GroundTruth::length() const { return centerline_.empty() ? 0.0 : centerline_.back().s; }

namespace {

struct State {
  double x, y, heading;
};

// Curvature at s of the piece containing `hint`, so a piece boundary can be
// evaluated from either side.
double piece_curvature(const std::vector<RoadPiece>& pieces, double s, double hint) {
  double start = 0.0;
  for (const auto& p : pieces) {
    if (hint < start + p.length || &p == &pieces.back()) {
      const double t = std::clamp((s - start) / p.length, 0.0, 1.0);
      return p.curvature_start + (p.curvature_end - p.curvature_start) * t;
    }
    start += p.length;
  }
  return 0.0;
}

// RK4 over [s0, s1] for a curvature that is linear on that interval.
State rk4(const State& st, double s0, double s1, double k0, double k1) {
  const double h = s1 - s0;
  const auto kappa = [&](double s) { return h == 0.0 ? k0 : k0 + (k1 - k0) * (s - s0) / h; };
  const auto deriv = [&](const State& q, double s) { return State{std::cos(q.heading), std::sin(q.heading), kappa(s)}; };
  const auto add = [](const State& q, const State& d, double f) {
    return State{q.x + f * d.x, q.y + f * d.y, q.heading + f * d.heading};
  };
  const State a = deriv(st, s0);
  const State b = deriv(add(st, a, h / 2), s0 + h / 2);
  const State c = deriv(add(st, b, h / 2), s0 + h / 2);
  const State d = deriv(add(st, c, h), s1);
  return {st.x + h / 6 * (a.x + 2 * b.x + 2 * c.x + d.x), st.y + h / 6 * (a.y + 2 * b.y + 2 * c.y + d.y),
          st.heading + h / 6 * (a.heading + 2 * b.heading + 2 * c.heading + d.heading)};
}

// Integrates from s0 to s1, splitting at piece boundaries and into steps of at most kMaxStep.
State integrate(const std::vector<RoadPiece>& pieces, State st, double s0, double s1) {
  std::vector<double> breaks{s0};
  double acc = 0.0;
  for (const auto& p : pieces) {
    acc += p.length;
    if (acc > s0 && acc < s1) breaks.push_back(acc);
  }
  breaks.push_back(s1);
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
    const double a = breaks[k];
    const double b = breaks[k + 1];
    if (b <= a) continue;
    const double mid = 0.5 * (a + b);
    const int steps = std::max(1, static_cast<int>(std::ceil((b - a) / GroundTruth::kMaxStep - 1e-12)));
    for (int i = 0; i < steps; ++i) {
      const double u0 = a + (b - a) * i / steps;
      const double u1 = a + (b - a) * (i + 1) / steps;
      st = rk4(st, u0, u1, piece_curvature(pieces, u0, mid), piece_curvature(pieces, u1, mid));
    }
  }
  return st;
}

}  // namespace

double GroundTruth::curvature(double s) const { return piece_curvature(pieces_, s, s); }

PathSample GroundTruth::pose_at(double s) const {
  s = std::clamp(s, 0.0, length());
  auto idx = static_cast<std::size_t>(std::floor(s / kSampleSpacing));
  idx = std::min(idx, centerline_.size() - 1);
  const PathSample& base = centerline_[idx];
  const State st = integrate(pieces_, {base.x, base.y, base.heading}, base.s, s);
  return {s, st.x, st.y, st.heading};
}

PathSample GroundTruth::boundary_at(double s, double offset) const {
  PathSample p = pose_at(s);
  p.x -= offset * std::sin(p.heading);
  p.y += offset * std::cos(p.heading);
  return p;
}

GroundTruth build_centerline(const ScenarioSpec& spec) {
  validate_scenario(spec);
  const double length = spec.road_length();
  std::vector<PathSample> center;
  State st{0.0, 0.0, 0.0};
  center.push_back({0.0, 0.0, 0.0, 0.0});
  const auto count = static_cast<int>(std::floor(length / GroundTruth::kSampleSpacing + 1e-9));
  for (int k = 1; k <= count; ++k) {
    const double s0 = (k - 1) * GroundTruth::kSampleSpacing;
    const double s1 = k * GroundTruth::kSampleSpacing;
    st = integrate(spec.segments, st, s0, s1);
    center.push_back({s1, st.x, st.y, st.heading});
  }
  if (center.back().s < length - 1e-9) {
    // the road end is always sampled, even off the grid
    st = integrate(spec.segments, st, center.back().s, length);
    center.push_back({length, st.x, st.y, st.heading});
  }

  std::vector<TruthLine> lines;
  const auto offsets = spec.boundary_offsets();
  const auto types = spec.boundary_markings();
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    TruthLine line{offsets[i], types[i], {}};
    for (const auto& c : center) {
      line.samples.push_back({c.s, c.x - offsets[i] * std::sin(c.heading), c.y + offsets[i] * std::cos(c.heading),
                              c.heading});
    }
    lines.push_back(std::move(line));
  }
  return GroundTruth(spec.segments, std::move(center), std::move(lines));
}

namespace {

Pose2 to_vehicle(const Pose2& vehicle, double x, double y, double heading) {
  const double c = std::cos(vehicle.theta);
  const double s = std::sin(vehicle.theta);
  const double dx = x - vehicle.x;
  const double dy = y - vehicle.y;
  return {c * dx + s * dy, -s * dx + c * dy, heading - vehicle.theta};
}

std::mt19937_64 frame_rng(std::uint64_t seed, int frame_id, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(frame_id), stream};
  return std::mt19937_64(seq);
}

}  // namespace

SimFrame emit_frame(const ScenarioSpec& spec, const GroundTruth& truth, int frame_id, double vehicle_arclength) {
  SimFrame frame;
  frame.frame_id = frame_id;
  frame.arclength = vehicle_arclength;
  const PathSample pose = truth.pose_at(vehicle_arclength);
  frame.vehicle = {pose.x, pose.y, pose.heading};

  auto rng = frame_rng(spec.rng_seed, frame_id, 0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  // reported covariance never drops below a realistic sensor floor, even when no noise is injected
  constexpr double kMinSigmaPos = 0.01;
  constexpr double kMinSigmaTheta = 0.001;
  const double sx = std::max(spec.noise.sigma_x, kMinSigmaPos);
  const double sy = std::max(spec.noise.sigma_y, kMinSigmaPos);
  const double st = std::max(spec.noise.sigma_theta, kMinSigmaTheta);
  const Eigen::Matrix3d cov = Eigen::Vector3d(sx * sx, sy * sy, st * st).asDiagonal();

  const auto offsets = spec.boundary_offsets();
  const auto types = spec.boundary_markings();
  // boundary arc length can exceed the vehicle's by the horizon plus the curvature stretch
  const double reach = spec.feature_horizon * 1.5 + spec.lane_count * spec.lane_width;
  const auto first = static_cast<long>(std::floor(std::max(0.0, vehicle_arclength - reach) / spec.feature_spacing));
  const auto last = static_cast<long>(std::floor(std::min(truth.length(), vehicle_arclength + reach) / spec.feature_spacing));
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    for (long k = first; k <= last; ++k) {
      const double u = static_cast<double>(k) * spec.feature_spacing;
      if (u > truth.length()) break;
      const PathSample b = truth.boundary_at(u, offsets[i]);
      const Pose2 v = to_vehicle(frame.vehicle, b.x, b.y, b.heading);
      if (v.x < 0.0 || v.x > spec.feature_horizon) continue;
      Feature f;
      f.x = v.x + spec.noise.sigma_x * gauss(rng);
      f.y = v.y + spec.noise.sigma_y * gauss(rng);
      f.theta = v.theta + spec.noise.sigma_theta * gauss(rng);
      if (f.x < 0.0 || f.x > spec.feature_horizon) continue;
      f.cov = cov;
      f.attrs = AttributeMass::observed(types[i], MarkingColor::kWhite, spec.attr_confidence);
      frame.features.push_back(f);
    }
  }
  return frame;
}

OdometryDelta odometry_between(const Pose2& from, const Pose2& to) {
  const double c = std::cos(from.theta);
  const double s = std::sin(from.theta);
  const double dx = to.x - from.x;
  const double dy = to.y - from.y;
  double dpsi = to.theta - from.theta;
  dpsi = std::remainder(dpsi, 2.0 * std::numbers::pi);
  return {c * dx + s * dy, -s * dx + c * dy, dpsi};
}

Simulation simulate(const ScenarioSpec& spec) {
  Simulation sim;
  sim.truth = build_centerline(spec);
  const double last = spec.last_frame_arclength();
  const auto count = static_cast<int>(std::floor((last - spec.start) / spec.frame_step + 1e-9)) + 1;
  sim.frames.resize(static_cast<std::size_t>(count));
#pragma omp parallel for schedule(dynamic, 8)
  for (int k = 0; k < count; ++k) {
    sim.frames[static_cast<std::size_t>(k)] = emit_frame(spec, sim.truth, k, spec.start + k * spec.frame_step);
  }
  for (int k = 1; k < count; ++k) {
    auto& frame = sim.frames[static_cast<std::size_t>(k)];
    frame.odometry = odometry_between(sim.frames[static_cast<std::size_t>(k) - 1].vehicle, frame.vehicle);
    if (spec.odo_sigma_xy > 0.0 || spec.odo_sigma_psi > 0.0) {
      auto rng = frame_rng(spec.rng_seed, k, 1);
      std::normal_distribution<double> gauss(0.0, 1.0);
      frame.odometry.dx += spec.odo_sigma_xy * gauss(rng);
      frame.odometry.dy += spec.odo_sigma_xy * gauss(rng);
      frame.odometry.dpsi += spec.odo_sigma_psi * gauss(rng);
    }
  }
  return sim;
}

}  // namespace lanemodel
