#include "zonerl/controller.hpp"
#include "zonerl/glucose_env.hpp"
#include "zonerl/tabular.hpp"

#include <benchmark/benchmark.h>

using namespace zonerl;

static void BM_BellmanBackup(benchmark::State& state) {
    const auto m = build_fixture_mdp(state.range(0) == 0 ? FixtureProfile::Tiny : FixtureProfile::Small);
    std::vector<double> v(m.num_states(), -1.0);
    for (auto _ : state) {
        auto next = bellman_backup(m, v);
        benchmark::DoNotOptimize(next.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(m.num_states()));
}
BENCHMARK(BM_BellmanBackup)->Arg(0)->Arg(1);

static void BM_ValueIterationSmall(benchmark::State& state) {
    const auto m = build_fixture_mdp(FixtureProfile::Small);
    for (auto _ : state) benchmark::DoNotOptimize(value_iteration(m, 1e-9).iterations);
}
BENCHMARK(BM_ValueIterationSmall)->Unit(benchmark::kMillisecond);

static void BM_GlucoseStep(benchmark::State& state) {
    GlucoseEnvConfig cfg;
    GlucoseEnv env(cfg);
    env.reset(1);
    std::int64_t t = 0;
    for (auto _ : state) {
        if (++t == cfg.horizon()) {
            env.reset(1);
            t = 0;
        }
        benchmark::DoNotOptimize(env.step(InterventionAction::noop()).info.x_before_reset);
    }
}
BENCHMARK(BM_GlucoseStep);

// look-ahead cost grows with K * N
static void BM_ShieldGlucose(benchmark::State& state) {
    GlucoseEnvConfig cfg;
    GlucoseEnv env(cfg);
    env.reset(1);
    const ShieldConfig sh{true, static_cast<int>(state.range(0)), static_cast<int>(state.range(1))};
    RngStream rng(3);
    for (auto _ : state) benchmark::DoNotOptimize(shield(sh, env, InterventionAction::fast(2.0), rng));
}
BENCHMARK(BM_ShieldGlucose)->Args({6, 1})->Args({24, 4})->Unit(benchmark::kMicrosecond);
BENCHMARK_MAIN();
