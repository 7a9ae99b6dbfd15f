#include <benchmark/benchmark.h>

#include "adp/baselines.hpp"
#include "adp/bench.hpp"
#include "adp/datamat.hpp"
#include "adp/rlsvi.hpp"

namespace {

adp::TrajectoryBatch datacenter_batch(std::size_t T) {
  const adp::Problem pb = adp::datacenter_problem();
  const adp::BehaviorPolicy behavior{-0.05 * adp::Matrix::Identity(3, 3),
                                     adp::SymMatrix::identity(3)};
  return adp::simulate(pb.sys, behavior, adp::CostSpec::quadratic(pb.cost),
                       {1000.0, 42}, T);
}

void BM_Simulate(benchmark::State& state) {
  const adp::Problem pb = adp::datacenter_problem();
  const adp::BehaviorPolicy behavior{-0.05 * adp::Matrix::Identity(3, 3),
                                     adp::SymMatrix::identity(3)};
  const auto cost = adp::CostSpec::quadratic(pb.cost);
  const auto T = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(adp::simulate(pb.sys, behavior, cost, {1000.0, 42}, T));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Simulate)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

void BM_BuildDataMatrices(benchmark::State& state) {
  const auto batch = datacenter_batch(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(adp::build_data_matrices(batch, true));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BuildDataMatrices)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

void BM_RlsviIterate(benchmark::State& state) {
  const auto dm = adp::build_data_matrices(datacenter_batch(100000), true);
  const auto P0 = adp::SymMatrix::scaled_identity(3, 0.5);
  const auto iters = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(adp::rlsvi_iterate(dm, P0, iters));
  }
}
BENCHMARK(BM_RlsviIterate)->Arg(100)->Unit(benchmark::kMicrosecond);

void BM_SolveDare(benchmark::State& state) {
  const adp::Problem pb = adp::datacenter_problem();
  for (auto _ : state) {
    benchmark::DoNotOptimize(adp::solve_dare(pb.sys, pb.cost));
  }
}
BENCHMARK(BM_SolveDare)->Unit(benchmark::kMicrosecond);

void BM_SolveDarePortfolio(benchmark::State& state) {
  const auto params = adp::portfolio_params_from_returns(
      adp::synthetic_returns(0, 5000, adp::default_generator(3)));
  const adp::Problem pb = adp::portfolio_problem(params);
  for (auto _ : state) {
    benchmark::DoNotOptimize(adp::solve_dare(pb.sys, pb.cost));
  }
}
BENCHMARK(BM_SolveDarePortfolio)->Unit(benchmark::kMillisecond);

void BM_Lspi(benchmark::State& state) {
  const auto dm = adp::build_data_matrices(datacenter_batch(100000), true);
  const adp::GainMatrix K0 = 0.05 * adp::Matrix::Identity(3, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(adp::lspi(dm, K0, 100));
  }
}
BENCHMARK(BM_Lspi)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
