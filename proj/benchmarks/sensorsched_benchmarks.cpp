#include <memory>

#include <benchmark/benchmark.h>

#include "sensorsched/mesh.hpp"
#include "sensorsched/system_model.hpp"
#include "sensorsched/value_iteration.hpp"

namespace sensorsched {
namespace {

SystemModel ThreeStateModel() {
  Eigen::MatrixXd a(3, 3), c(4, 3);
  a << -0.6, 0.8, 0.5, -0.1, 1.5, -1.1, 1.1, 0.4, -0.2;
  c << 0.75, -0.2, -0.65, 0.35, 0.85, 0.35, 0.2, -0.65, 1.25, 0.7, 0.5, 0.5;
  const Eigen::MatrixXd v = Eigen::Vector4d(0.53, 0.8, 0.2, 0.5).asDiagonal();
  return SystemModel(a, Eigen::MatrixXd::Identity(3, 3), c, v);
}

SynthesisConfig Config(double epsilon) {
  SynthesisConfig config;
  config.mesh = {3, epsilon, 15.0};
  return config;
}

void BM_MeshCount(benchmark::State& state) {
  const MeshConfig config{static_cast<int>(state.range(0)), 1.0,
                          static_cast<double>(state.range(1))};
  for (auto _ : state) benchmark::DoNotOptimize(Mesh::Count(config));
}
BENCHMARK(BM_MeshCount)->Args({2, 40})->Args({3, 10})->Args({3, 15})->Args({4, 10})
    ->Unit(benchmark::kMillisecond);

void BM_MeshEnumerate(benchmark::State& state) {
  const MeshConfig config{3, 1.0 / static_cast<double>(state.range(0)), 15.0};
  std::size_t size = 0;
  for (auto _ : state) size = Mesh::Enumerate(config).size();
  state.counters["points"] = static_cast<double>(size);
}
BENCHMARK(BM_MeshEnumerate)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

void BM_TransitionBuild(benchmark::State& state) {
  const auto config = Config(1.0 / static_cast<double>(state.range(0)));
  const Mesh mesh = Mesh::Enumerate(config.mesh);
  const SystemModel model = ThreeStateModel();
  for (auto _ : state) {
    benchmark::DoNotOptimize(TransitionTable::Build(model, mesh, config));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(mesh.size()));
}
BENCHMARK(BM_TransitionBuild)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

void BM_BellmanSweep(benchmark::State& state) {
  const auto config = Config(1.0 / static_cast<double>(state.range(0)));
  const Mesh mesh = Mesh::Enumerate(config.mesh);
  const auto transitions = TransitionTable::Build(ThreeStateModel(), mesh, config);
  std::vector<double> prev(mesh.size(), 0.0), next(mesh.size());
  std::vector<std::int32_t> arg(mesh.size());
  for (auto _ : state) {
    ApplyBellmanOperator(transitions, config.beta, prev, next, arg);
    prev.swap(next);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(mesh.size()));
}
BENCHMARK(BM_BellmanSweep)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

void BM_CovarianceUpdate(benchmark::State& state) {
  const SystemModel model = ThreeStateModel();
  const Eigen::MatrixXd info = InformationMatrix(model, SensorSubset({2}));
  Eigen::MatrixXd p = Eigen::MatrixXd::Identity(3, 3);
  for (auto _ : state) benchmark::DoNotOptimize(CovarianceUpdate(model, p, info));
}
BENCHMARK(BM_CovarianceUpdate);

void BM_ThetaPP(benchmark::State& state) {
  Eigen::MatrixXd p(3, 3);
  p << 4.3, 0.7, -1.2, 0.7, 2.9, 0.4, -1.2, 0.4, 3.1;
  for (auto _ : state) benchmark::DoNotOptimize(ThetaPPGrid(p, 3.0 / 7.0));
}
BENCHMARK(BM_ThetaPP);

}  // namespace
}  // namespace sensorsched

BENCHMARK_MAIN();
