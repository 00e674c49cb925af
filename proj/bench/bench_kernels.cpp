// OpenMP kernels against their serial references on one highway frame.
#include <benchmark/benchmark.h>

#include <filesystem>

#include "lanemodel/association.hpp"
#include "lanemodel/evaluation.hpp"
#include "lanemodel/pipeline.hpp"
#include "lanemodel/simulator.hpp"

using namespace lanemodel;

namespace {

struct Fixture {
  Simulation sim;
  TruthData truth;
  LaneModel model;
  std::size_t frame = 0;
  std::vector<TruthInFrame> visible;

  Fixture() {
    ScenarioSpec spec = load_scenario(std::filesystem::path(LANEMODEL_SCENARIOS) / "highway.ini");
    spec.end = spec.start + 60.0;
    spec.feature_spacing = 0.25;  // denser features than the scenario so the kernels have work
    sim = simulate(spec);
    truth = to_truth(sim);
    LaneTracker tracker;
    for (const auto& f : sim.frames) tracker.process(f.features, f.odometry);
    model = *tracker.model();
    frame = sim.frames.size() - 1;
    visible = truth_in_frame(truth, truth.poses[frame]);
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

template <auto Kernel>
void BM_Associate(benchmark::State& state) {
  const auto& fx = fixture();
  const auto& features = fx.sim.frames[fx.frame].features;
  const AssocConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(features, fx.model, cfg));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(features.size()));
}

template <auto Kernel>
void BM_Deviations(benchmark::State& state) {
  const auto& fx = fixture();
  const EvalConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(Kernel(fx.model, fx.visible, static_cast<int>(fx.frame), cfg, nullptr));
  }
}

}  // namespace

BENCHMARK(BM_Associate<associate>)->Name("associate/parallel");
BENCHMARK(BM_Associate<associate_serial>)->Name("associate/serial");
BENCHMARK(BM_Deviations<frame_deviations>)->Name("frame_deviations/parallel");
BENCHMARK(BM_Deviations<frame_deviations_serial>)->Name("frame_deviations/serial");

BENCHMARK_MAIN();
