// Serial reference vs OpenMP paths of the batch kernels.

#include <benchmark/benchmark.h>

#include "gsmvi/harness.hpp"
#include "gsmvi/kernels.hpp"
#include "gsmvi/targets.hpp"

namespace {

gsmvi::Execution mode(const benchmark::State& state) {
  return state.range(1) == 0 ? gsmvi::Execution::serial : gsmvi::Execution::parallel;
}

void BM_BatchLogDensity(benchmark::State& state) {
  const auto d = static_cast<Eigen::Index>(state.range(0));
  const auto target = gsmvi::make_gaussian_target({d, 100.0, 3, gsmvi::MeanMode::standard_normal_draw});
  gsmvi::Rng rng(7);
  const Eigen::MatrixXd points = rng.normal_matrix(d, 4096);
  for (auto _ : state) benchmark::DoNotOptimize(gsmvi::batch_log_density(target->params(), points, mode(state)));
  state.SetItemsProcessed(state.iterations() * points.cols());
}
BENCHMARK(BM_BatchLogDensity)->ArgsProduct({{4, 16, 64}, {0, 1}})->Unit(benchmark::kMicrosecond);

void BM_SinhArcsinhLogDensity(benchmark::State& state) {
  const auto d = static_cast<Eigen::Index>(state.range(0));
  const auto target = gsmvi::make_sinh_arcsinh_target({{d, 10.0, 3, gsmvi::MeanMode::standard_normal_draw}, 0.5, 1.0});
  gsmvi::Rng rng(7);
  const Eigen::MatrixXd points = rng.normal_matrix(d, 4096);
  for (auto _ : state) benchmark::DoNotOptimize(gsmvi::batch_target_log_density(*target, points, mode(state)));
  state.SetItemsProcessed(state.iterations() * points.cols());
}
BENCHMARK(BM_SinhArcsinhLogDensity)->ArgsProduct({{4, 16}, {0, 1}})->Unit(benchmark::kMicrosecond);

void BM_VectorField(benchmark::State& state) {
  const gsmvi::GaussianTarget target(gsmvi::GaussianParams::standard(1), "normal:d=1");
  const int resolution = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(gsmvi::gsm_vector_field(target, resolution, 5, 0, mode(state)));
}
BENCHMARK(BM_VectorField)->ArgsProduct({{21, 81}, {0, 1}})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
