#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "lanemodel/config.hpp"
#include "lanemodel/prediction.hpp"
#include "lanemodel/types.hpp"

namespace lanemodel {

enum class RoadPieceKind { kStraight, kClothoid };

/// Curvature varies linearly in arc length from curvature_start to curvature_end.
struct RoadPiece {
  RoadPieceKind kind = RoadPieceKind::kStraight;
  double length = 0.0;
  double curvature_start = 0.0;
  double curvature_end = 0.0;
};

struct NoiseSpec {
  double sigma_x = 0.05;
  double sigma_y = 0.05;
  double sigma_theta = 0.005;
};

struct ScenarioSpec {
  std::vector<RoadPiece> segments;
  int lane_count = 1;
  double lane_width = 3.5;
  int ego_lane = 0;                    // 0 = leftmost lane
  std::vector<MarkingType> markings;   // per boundary, left to right; empty: outer solid, inner dashed
  double feature_spacing = 2.0;
  NoiseSpec noise;
  double feature_horizon = 100.0;
  double frame_step = 1.0;
  double start = 0.0;                  // vehicle arc length of the first frame
  double end = -1.0;                   // last frame; negative: road length minus horizon
  std::uint64_t rng_seed = 1;
  double attr_confidence = 0.7;
  double odo_sigma_xy = 0.0;
  double odo_sigma_psi = 0.0;

  double road_length() const;
  double last_frame_arclength() const;
  /// Arc length where the first curved piece begins (road length if none).
  double straight_prefix() const;
  std::vector<MarkingType> boundary_markings() const;
  std::vector<double> boundary_offsets() const;  // left positive, left to right
};

/// Throws InputError on invalid fields.
void validate_scenario(const ScenarioSpec& spec);
ScenarioSpec parse_scenario(const KeyValueFile& file);
ScenarioSpec load_scenario(const std::filesystem::path& path);

struct PathSample {
  double s = 0.0;
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
};

struct TruthLine {
  double offset = 0.0;
  MarkingType type = MarkingType::kSolid;
  std::vector<PathSample> samples;  // global frame, s is the centerline arc length
};

class GroundTruth {
 public:
  static constexpr double kSampleSpacing = 0.5;
  static constexpr double kMaxStep = 0.1;

  GroundTruth() = default;
  GroundTruth(std::vector<RoadPiece> pieces, std::vector<PathSample> centerline, std::vector<TruthLine> lines)
      : pieces_(std::move(pieces)), centerline_(std::move(centerline)), lines_(std::move(lines)) {}

  const std::vector<PathSample>& centerline() const { return centerline_; }
  const std::vector<TruthLine>& lines() const { return lines_; }
  double length() const;
  double curvature(double s) const;
  /// Centerline pose at arbitrary arc length, integrated from the nearest stored sample.
  PathSample pose_at(double s) const;
  /// Point of the boundary with the given lateral offset at centerline arc length s.
  PathSample boundary_at(double s, double offset) const;

 private:
  std::vector<RoadPiece> pieces_;
  std::vector<PathSample> centerline_;
  std::vector<TruthLine> lines_;
};

/// Integrates the centerline with 4th-order Runge-Kutta (steps <= 0.1 m,
/// split at piece boundaries) and offsets the boundaries along the normal.
GroundTruth build_centerline(const ScenarioSpec& spec);

struct SimFrame {
  int frame_id = 0;
  double arclength = 0.0;
  Pose2 vehicle;  // global pose
  std::vector<Feature> features;
  OdometryDelta odometry;  // motion since the previous frame, zero for the first
};

/// Features of one frame: boundary points on a global arc-length grid
/// (feature_spacing) that fall in 0 <= x <= horizon in the vehicle frame,
/// with seeded Gaussian noise. The odometry field is left zero.
SimFrame emit_frame(const ScenarioSpec& spec, const GroundTruth& truth, int frame_id, double vehicle_arclength);

/// Exact pose change from `from` to `to`, expressed in `from`'s frame.
OdometryDelta odometry_between(const Pose2& from, const Pose2& to);

struct Simulation {
  GroundTruth truth;
  std::vector<SimFrame> frames;
};

/// All frames from spec.start to the last frame arc length; frames are
/// generated in parallel, each from its own seeded generator.
Simulation simulate(const ScenarioSpec& spec);

}  // namespace lanemodel
