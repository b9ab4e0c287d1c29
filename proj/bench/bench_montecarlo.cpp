#include <benchmark/benchmark.h>

#include "cfmimo/montecarlo.hpp"
#include "cfmimo/optimizer.hpp"

namespace {

struct Fixture {
  cfmimo::Scenario sc;
  cfmimo::PowerAllocation powers;
  std::vector<cfmimo::FblParams> fbl;

  Fixture() {
    auto cfg = cfmimo::SystemConfig::defaults(9, 16, 10);
    cfg.selection_threshold = 0.9;
    sc = cfmimo::make_scenario(cfg, 7);
    powers.pilot = cfmimo::fix_pilot_power(cfg);
    powers.downlink = Eigen::MatrixXd::Zero(cfg.num_aps, cfg.num_devices);
    for (int m = 0; m < cfg.num_aps; ++m)
      for (int k : sc.sets.served_devices[m]) powers.downlink(m, k) = 0.1;
    fbl = cfmimo::fbl_params(cfg);
  }
};

void BM_McParallel(benchmark::State& state) {
  const auto scheme = static_cast<cfmimo::Scheme>(state.range(0));
  Fixture f;
  for (auto _ : state)
    benchmark::DoNotOptimize(cfmimo::mc_ergodic_rate(f.sc, scheme, f.powers, f.fbl, 2048, 11));
  state.SetItemsProcessed(state.iterations() * 2048);
}

void BM_McReference(benchmark::State& state) {
  const auto scheme = static_cast<cfmimo::Scheme>(state.range(0));
  Fixture f;
  for (auto _ : state)
    benchmark::DoNotOptimize(
        cfmimo::mc_ergodic_rate_reference(f.sc, scheme, f.powers, f.fbl, 2048, 11));
  state.SetItemsProcessed(state.iterations() * 2048);
}

void BM_Algorithm1(benchmark::State& state) {
  const auto scheme = static_cast<cfmimo::Scheme>(state.range(0));
  Fixture f;
  for (auto _ : state) benchmark::DoNotOptimize(cfmimo::algorithm1(f.sc, scheme));
}

}  // namespace

// Scheme enum order: 0 = MRT, 1 = FZF, 2 = LZF.
BENCHMARK(BM_McParallel)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_McReference)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Algorithm1)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
