#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "lanemodel/evaluation.hpp"
#include "lanemodel/io.hpp"
#include "lanemodel/simulator.hpp"

namespace fs = std::filesystem;
using namespace lanemodel;

namespace {

constexpr int kInputErrorExit = 2;

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError(fmt::format("cannot open '{}'", path.string()));
  return in;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
  return out;
}

Config read_config(const std::string& path) {
  if (path.empty()) return {};
  return load_config(KeyValueFile::load(path));
}

void run_simulate(const fs::path& scenario, const fs::path& out_dir, std::optional<std::uint64_t> seed) {
  ScenarioSpec spec = load_scenario(scenario);
  if (seed) spec.rng_seed = *seed;
  const Simulation sim = simulate(spec);
  fs::create_directories(out_dir);
  const auto frames = to_recording(sim);
  auto features = open_output(out_dir / "features.csv");
  write_features(features, frames);
  auto odometry = open_output(out_dir / "odometry.csv");
  write_odometry(odometry, frames);
  auto truth = open_output(out_dir / "truth.csv");
  write_truth(truth, to_truth(sim));
  std::cout << fmt::format("{} frames written to {}\n", frames.size(), out_dir.string());
}

void run_eval_cmd(const fs::path& features_path, const fs::path& odometry_path, const fs::path& truth_path,
                  const std::string& model, const std::string& config_path, const fs::path& out_dir) {
  const ModelKind kind = parse_model_kind(model);
  const Config cfg = read_config(config_path);
  auto features = open_input(features_path);
  auto odometry = open_input(odometry_path);
  auto truth_in = open_input(truth_path);
  const auto frames = read_recording(features, odometry, cfg.attr.confidence);
  const TruthData truth = read_truth(truth_in);
  const MetricsTable table = run_eval(frames, truth, kind, cfg);
  write_metrics(out_dir, table);
  double worst = 0.0;
  for (const auto& f : table.frames) {
    if (f.samples > 0) worst = std::max(worst, f.rmse);
  }
  std::cout << fmt::format("{} frames, max per-frame RMSE {:.4f} m, {} frames with an empty model\n",
                           table.frames.size(), worst, table.empty_frames);
}

void run_compare(const fs::path& scenario, const std::string& config_path, const fs::path& out_dir) {
  const ScenarioSpec spec = load_scenario(scenario);
  const Config cfg = read_config(config_path);
  const ComparisonTable table = compare_models(spec, cfg);
  fs::create_directories(out_dir);
  auto rows = open_output(out_dir / "comparison.csv");
  write_comparison(rows, table);
  auto summary = open_output(out_dir / "summary.csv");
  write_comparison_summary(summary, table);
  write_metrics(out_dir / "spline", table.spline);
  write_metrics(out_dir / "clothoid", table.clothoid);
  std::cout << fmt::format("max RMSE spline {:.4f} m, clothoid {:.4f} m, ratio {:.2f}\n", table.max_rmse_spline,
                           table.max_rmse_clothoid, table.max_ratio);
  std::cout << fmt::format("straight section mean RMSE spline {:.4f} m, clothoid {:.4f} m\n",
                           table.straight_mean_spline, table.straight_mean_clothoid);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-lane spline road model: simulation and evaluation"};
  app.require_subcommand(1);

  std::string scenario, out_dir, config_path;
  std::optional<std::uint64_t> seed;
  auto* sim = app.add_subcommand("simulate", "Generate features, odometry and truth from a scenario file");
  sim->add_option("scenario", scenario, "Scenario file")->required();
  sim->add_option("--out", out_dir, "Output directory")->required();
  sim->add_option("--seed", seed, "Override the scenario's RNG seed");

  std::string features, odometry, truth, model = "spline";
  auto* eval = app.add_subcommand("eval", "Track a recording and score it against truth");
  eval->add_option("features", features, "Feature CSV")->required();
  eval->add_option("odometry", odometry, "Odometry CSV")->required();
  eval->add_option("truth", truth, "Truth CSV")->required();
  eval->add_option("--model", model, "Line function: spline or clothoid");
  eval->add_option("--config", config_path, "Config file (key = value)");
  eval->add_option("--out", out_dir, "Output directory")->required();

  auto* compare = app.add_subcommand("compare", "Run spline and clothoid modes on the same scenario");
  compare->add_option("scenario", scenario, "Scenario file")->required();
  compare->add_option("--config", config_path, "Config file (key = value)");
  compare->add_option("--out", out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInputErrorExit;
  }

  try {
    if (*sim) run_simulate(scenario, out_dir, seed);
    if (*eval) run_eval_cmd(features, odometry, truth, model, config_path, out_dir);
    if (*compare) run_compare(scenario, config_path, out_dir);
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kInputErrorExit;
  } catch (const std::invalid_argument& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kInputErrorExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
