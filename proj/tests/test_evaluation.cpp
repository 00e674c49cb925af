#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lanemodel/evaluation.hpp"
#include "lanemodel/io.hpp"
#include "lanemodel/simulator.hpp"

using namespace lanemodel;
namespace fs = std::filesystem;

namespace {

ScenarioSpec small_highway(double noise) {
  ScenarioSpec spec;
  spec.segments = {{RoadPieceKind::kStraight, 100, 0, 0}, {RoadPieceKind::kClothoid, 100, 0, 0.002}};
  spec.lane_count = 3;
  spec.ego_lane = 1;
  spec.lane_width = 3.75;
  spec.feature_horizon = 60;
  spec.noise = {noise, noise, noise / 10};
  return spec;
}

// Straight model lines at the truth offsets, shifted by `bias`.
LaneModel straight_model(std::span<const TruthInFrame> truth, double bias) {
  LaneModel model;
  int id = 0;
  for (const auto& t : truth) {
    Line line = make_line(id++, {Eigen::Vector4d(t.offset_at_origin + bias, 0, 0, 0)}, {0, 100});
    model.lines.push_back(line);
  }
  model.sort_lines();
  return model;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(LANEMODEL_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(TruthInFrame, LabelsEgoAndAdjacent) {
  const Simulation sim = simulate(small_highway(0.0));
  const auto truth = truth_in_frame(to_truth(sim), sim.frames[0].vehicle);
  ASSERT_EQ(truth.size(), 4u);
  EXPECT_NEAR(truth[0].offset_at_origin, 5.625, 1e-9);
  EXPECT_EQ(truth[0].label, LaneLabel::kAdjacent);
  EXPECT_EQ(truth[1].label, LaneLabel::kEgo);
  EXPECT_EQ(truth[2].label, LaneLabel::kEgo);
  EXPECT_EQ(truth[3].label, LaneLabel::kAdjacent);
}

TEST(FrameDeviations, ExactAndConstantOffset) {
  const Simulation sim = simulate(small_highway(0.0));
  const auto truth = truth_in_frame(to_truth(sim), sim.frames[0].vehicle);
  const EvalConfig cfg;
  FrameMetrics m;
  const auto exact = frame_deviations(straight_model(truth, 0.0), truth, 0, cfg, &m);
  ASSERT_FALSE(exact.empty());
  for (const auto& d : exact) EXPECT_NEAR(d.deviation, 0.0, 1e-12);
  EXPECT_EQ(m.matched_lines, 4);
  EXPECT_NEAR(m.rmse, 0.0, 1e-12);

  const auto shifted = frame_deviations(straight_model(truth, 0.2), truth, 0, cfg, &m);
  for (const auto& row : bin_deviations(shifted, cfg.bin_width)) EXPECT_NEAR(row.rmse, 0.2, 1e-12);
  EXPECT_NEAR(m.rmse, 0.2, 1e-12);
  EXPECT_NEAR(m.max_error, 0.2, 1e-12);
}

TEST(FrameDeviations, ParallelMatchesSerial) {
  const Simulation sim = simulate(small_highway(0.1));
  const TruthData truth = to_truth(sim);
  for (std::size_t k = 0; k < sim.frames.size(); k += 17) {
    const auto t = truth_in_frame(truth, sim.frames[k].vehicle);
    const LaneModel model = straight_model(t, 0.05 * static_cast<double>(k % 3));
    FrameMetrics a, b;
    const auto par = frame_deviations(model, t, static_cast<int>(k), EvalConfig{}, &a);
    const auto ser = frame_deviations_serial(model, t, static_cast<int>(k), EvalConfig{}, &b);
    ASSERT_EQ(par.size(), ser.size());
    for (std::size_t i = 0; i < par.size(); ++i) {
      EXPECT_EQ(par[i].x, ser[i].x);
      EXPECT_EQ(par[i].deviation, ser[i].deviation);
    }
    EXPECT_EQ(a.rmse, b.rmse);
  }
}

TEST(RunEval, BinsReproduceFromDeviationFile) {
  const Simulation sim = simulate(small_highway(0.1));
  const MetricsTable table = run_eval(to_recording(sim), to_truth(sim), ModelKind::kSpline, Config{});
  std::stringstream file;
  write_deviations(file, table.deviations);
  const auto reread = read_deviations(file);
  const auto bins = bin_deviations(reread, Config{}.eval.bin_width);
  ASSERT_EQ(bins.size(), table.bins.size());
  for (std::size_t i = 0; i < bins.size(); ++i) {
    EXPECT_EQ(bins[i].count, table.bins[i].count);
    EXPECT_NEAR(bins[i].rmse, table.bins[i].rmse, 1e-12);
  }
  EXPECT_EQ(table.frames.size(), sim.frames.size());
  EXPECT_EQ(table.empty_frames, 0);
}

TEST(RunEval, InputErrors) {
  const Simulation sim = simulate(small_highway(0.0));
  TruthData no_lines = to_truth(sim);
  no_lines.lines.clear();
  EXPECT_THROW(run_eval(to_recording(sim), no_lines, ModelKind::kSpline, Config{}), InputError);
  TruthData short_poses = to_truth(sim);
  short_poses.poses.pop_back();
  EXPECT_THROW(run_eval(to_recording(sim), short_poses, ModelKind::kSpline, Config{}), InputError);
  EXPECT_THROW(parse_model_kind("bezier"), InputError);
}

TEST(RunEval, EmptyModelFramesAreCounted) {
  const Simulation sim = simulate(small_highway(0.0));
  auto frames = to_recording(sim);
  for (std::size_t k = 0; k < 3; ++k) frames[k].features.clear();
  const MetricsTable table = run_eval(frames, to_truth(sim), ModelKind::kSpline, Config{});
  EXPECT_EQ(table.empty_frames, 3);
  EXPECT_TRUE(table.frames[0].empty_model);
  EXPECT_TRUE(std::isnan(table.frames[0].rmse));
  EXPECT_FALSE(table.frames[3].empty_model);
}

TEST(CompareModels, NoiseFreeStraightRoad) {
  ScenarioSpec spec;
  spec.segments = {{RoadPieceKind::kStraight, 200, 0, 0}};
  spec.noise = {0, 0, 0};
  spec.end = 60;
  const ComparisonTable table = compare_models(spec, Config{});
  EXPECT_LT(table.max_rmse_spline, 1e-6);
  EXPECT_LT(table.max_rmse_clothoid, 1e-6);
  for (const auto& row : table.rows) EXPECT_TRUE(row.straight);
}

TEST(Io, RecordingRoundTripIsExact) {
  const Simulation sim = simulate(small_highway(0.1));
  const auto frames = to_recording(sim);
  std::stringstream features, odometry, truth;
  write_features(features, frames);
  write_odometry(odometry, frames);
  write_truth(truth, to_truth(sim));
  const auto back = read_recording(features, odometry, 0.7);
  ASSERT_EQ(back.size(), frames.size());
  for (std::size_t k = 0; k < frames.size(); ++k) {
    EXPECT_EQ(back[k].odometry.dpsi, frames[k].odometry.dpsi);
    ASSERT_EQ(back[k].features.size(), frames[k].features.size());
    for (std::size_t i = 0; i < frames[k].features.size(); ++i) {
      EXPECT_EQ(back[k].features[i].y, frames[k].features[i].y);
      EXPECT_EQ(back[k].features[i].cov, frames[k].features[i].cov);
      EXPECT_EQ(back[k].features[i].attrs.marking.argmax(), frames[k].features[i].attrs.marking.argmax());
    }
  }
  const TruthData t = read_truth(truth);
  EXPECT_EQ(t.poses.size(), sim.frames.size());
  EXPECT_EQ(t.lines.size(), 4u);
  EXPECT_EQ(t.lines[2][10].x, sim.truth.lines()[2].samples[10].x);
}

TEST(Io, MalformedInputRaises) {
  std::stringstream odo("frame_id,dx,dy,dpsi\n0,0,0,0\n");
  std::stringstream bad_cols("frame_id,x\n0,1\n");
  EXPECT_THROW(read_recording(bad_cols, odo, 0.7), InputError);
  std::stringstream odo2("frame_id,dx,dy,dpsi\n0,0,0,0\n");
  std::stringstream orphan("h\n5,1,0,0,0.01,0.01,0.001,solid,white\n");
  EXPECT_THROW(read_recording(orphan, odo2, 0.7), InputError);
  std::stringstream odo3("frame_id,dx,dy,dpsi\n0,0,0,0\n");
  std::stringstream bad_type("h\n0,1,0,0,0.01,0.01,0.001,wavy,white\n");
  EXPECT_THROW(read_recording(bad_type, odo3, 0.7), InputError);
  std::stringstream truth("kind,id,x,y,heading\nghost,0,0,0,0\n");
  EXPECT_THROW(read_truth(truth), InputError);
}

TEST(Cli, DeterministicOutputsAndUsageErrors) {
  const fs::path dir = fs::temp_directory_path() / "lanemodel_cli_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string scenario = dir / "s.ini";
  std::ofstream(scenario) << "[scenario]\nlane_count = 2\nfeature_horizon = 50\nend = 30\n"
                             "[road]\nsegment = straight 60\nsegment = clothoid 60 0 0.004\n";
  for (const char* run : {"a", "b"}) {
    const fs::path out = dir / run;
    ASSERT_EQ(run_cli("simulate " + scenario + " --out " + (out / "sim").string()), 0);
    const std::string sim = (out / "sim").string();
    ASSERT_EQ(run_cli("eval " + sim + "/features.csv " + sim + "/odometry.csv " + sim + "/truth.csv --model clothoid --out " +
                      (out / "eval").string()),
              0);
    ASSERT_EQ(run_cli("compare " + scenario + " --out " + (out / "cmp").string()), 0);
  }
  for (const char* rel : {"sim/features.csv", "sim/odometry.csv", "sim/truth.csv", "eval/bins.csv", "eval/frames.csv",
                          "eval/deviations.csv", "cmp/comparison.csv", "cmp/summary.csv", "cmp/spline/bins.csv"}) {
    const std::string a = slurp(dir / "a" / rel);
    EXPECT_FALSE(a.empty()) << rel;
    EXPECT_EQ(a, slurp(dir / "b" / rel)) << rel;
  }
  EXPECT_NE(slurp(dir / "a/sim/features.csv"),
            (run_cli("simulate " + scenario + " --seed 99 --out " + (dir / "c").string()), slurp(dir / "c/features.csv")));

  const std::string sim = (dir / "a/sim").string();
  EXPECT_EQ(run_cli("eval " + sim + "/features.csv " + sim + "/odometry.csv " + sim + "/missing.csv --out " +
                    (dir / "x").string()),
            2);
  EXPECT_EQ(run_cli("eval " + sim + "/features.csv " + sim + "/odometry.csv " + sim + "/truth.csv --model bezier --out " +
                    (dir / "x").string()),
            2);
  EXPECT_EQ(run_cli("simulate " + (dir / "nope.ini").string() + " --out " + (dir / "x").string()), 2);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  EXPECT_EQ(run_cli("compare " + scenario + " --config " + sim + "/truth.csv --out " + (dir / "x").string()), 2);
  fs::remove_all(dir);
}
