#include <benchmark/benchmark.h>

#include "relkin/crb.hpp"
#include "relkin/experiment.hpp"
#include "relkin/ranging.hpp"
#include "relkin/relative.hpp"
#include "relkin/twr.hpp"

using namespace relkin;

namespace {

DesignSystem fixture_design(int messages) {
  const auto traj = TrajectorySet::reference_fixture();
  ExchangeConfig cfg;
  cfg.messages = messages;
  const auto noise = NoiseModel::from_pair_sigma_meters(traj.count(), 0.1);
  const auto set = simulate_exchanges(traj, cfg, noise, 7);
  return build_design(set, 4, effective_noise_covariance(noise, traj.count(), messages));
}

void BM_WlsGlobal(benchmark::State& state) {
  const auto sys = fixture_design(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(wls_solve(sys));
}
BENCHMARK(BM_WlsGlobal)->Arg(10)->Arg(100)->Arg(1000);

void BM_WlsPairwise(benchmark::State& state) {
  const auto sys = fixture_design(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(solve_pairwise(sys));
}
BENCHMARK(BM_WlsPairwise)->Arg(10)->Arg(100)->Arg(1000);

void BM_SingleTrial(benchmark::State& state) {
  const auto traj = TrajectorySet::reference_fixture();
  ExchangeConfig cfg;
  const auto noise = NoiseModel::from_pair_sigma_meters(traj.count(), 0.1);
  const auto cov = effective_noise_covariance(noise, traj.count(), cfg.messages);
  std::uint64_t seed = 0;
  for (auto _ : state) {
    const auto set = simulate_exchanges(traj, cfg, noise, ++seed);
    const auto coeffs = solve_pairwise(build_design(set, 4, cov));
    benchmark::DoNotOptimize(solve_relative(coeffs.range_matrices()));
  }
}
BENCHMARK(BM_SingleTrial);

void BM_FisherBounds(benchmark::State& state) {
  const auto traj = TrajectorySet::reference_fixture();
  const auto covs = range_noise_covariances(crb_theta(fixture_design(100)));
  const auto rm = range_matrices(traj);
  for (auto _ : state) {
    benchmark::DoNotOptimize(crb_trace(fim_position(traj.positions(), covs.range)));
    benchmark::DoNotOptimize(crb_trace(fim_velocity(traj.velocities(), rm, covs)));
  }
}
BENCHMARK(BM_FisherBounds);

void BM_MonteCarloPoint(benchmark::State& state) {
  ExperimentConfig cfg;
  cfg.values = {100};
  cfg.trials = 50;
  for (auto _ : state) benchmark::DoNotOptimize(run_experiment(cfg));
}
BENCHMARK(BM_MonteCarloPoint)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
