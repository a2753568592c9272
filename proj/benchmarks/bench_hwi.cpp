#include "hwi/efficiency.hpp"
#include "hwi/gp_core.hpp"
#include "hwi/index_engine.hpp"
#include "hwi/market_data.hpp"
#include "hwi/stylized_sim.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

struct Panel {
    hwi::PanelExport ex;
    std::vector<hwi::StockRecord> records;
};

/// Simulated panel with 3 regions, 2/5/16 countries, 3 groups of `stocks` stocks.
const Panel& panel(std::size_t stocks, double years) {
    static std::map<std::pair<std::size_t, double>, Panel> cache;
    auto it = cache.find({stocks, years});
    if (it != cache.end()) return it->second;
    hwi::SimConfig cfg;
    cfg.group_counts = {{3}, {2, 5, 16}, {3}, {stocks}};
    cfg.horizon = years;
    Panel p;
    p.ex = hwi::export_panel(hwi::simulate_panel(cfg), cfg);
    p.records = hwi::assemble_records(p.ex.rows, p.ex.classification, p.ex.calendar).records;
    return cache.emplace(std::make_pair(stocks, years), std::move(p)).first->second;
}

void BM_SolveGp(benchmark::State& state) {
    const auto m = static_cast<Eigen::Index>(state.range(0));
    std::mt19937_64 rng(1);
    std::normal_distribution<double> z;
    hwi::MarketCoefficients mc;
    mc.a = Eigen::VectorXd::NullaryExpr(m, [&] { return 0.05 + 0.1 * z(rng); });
    mc.b = Eigen::MatrixXd::NullaryExpr(m, m + 5, [&] { return 0.3 * z(rng) / std::sqrt(static_cast<double>(m)); });
    mc.b.diagonal().array() += 1.0;
    mc.b *= 0.2;
    for (auto _ : state) benchmark::DoNotOptimize(hwi::solve_gp(mc));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SolveGp)->RangeMultiplier(2)->Range(8, 256)->Complexity();

void BM_HwiWeights(benchmark::State& state) {
    const auto& p = panel(static_cast<std::size_t>(state.range(0)), 0.25);
    const auto tree = hwi::build_hierarchy(p.records, p.ex.policies, p.ex.calendar.front());
    const auto scheme = hwi::WeightScheme::parse("HWI");
    for (auto _ : state) benchmark::DoNotOptimize(hwi::hwi_weights(tree, scheme));
    state.counters["stocks"] = static_cast<double>(p.records.size());
}
BENCHMARK(BM_HwiWeights)->Arg(5)->Arg(20)->Arg(80);

void BM_BuildHierarchy(benchmark::State& state) {
    const auto& p = panel(static_cast<std::size_t>(state.range(0)), 0.25);
    for (auto _ : state) benchmark::DoNotOptimize(hwi::build_hierarchy(p.records, p.ex.policies, p.ex.calendar.front()));
}
BENCHMARK(BM_BuildHierarchy)->Arg(5)->Arg(20);

void BM_Backtest(benchmark::State& state) {
    const auto& p = panel(5, static_cast<double>(state.range(0)));
    hwi::BacktestConfig cfg;
    cfg.scheme = hwi::WeightScheme::parse("HWI");
    cfg.tc_bps = 40.0;
    for (auto _ : state) benchmark::DoNotOptimize(hwi::backtest(p.records, p.ex.policies, p.ex.calendar, cfg));
    state.counters["days"] = static_cast<double>(p.ex.calendar.size());
}
BENCHMARK(BM_Backtest)->Arg(1)->Arg(5)->Unit(benchmark::kMillisecond);

void BM_BlockBootstrap(benchmark::State& state) {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> z;
    hwi::ReturnSample s;
    std::vector<double> seg(static_cast<std::size_t>(state.range(0)));
    for (int k = 0; k < 10; ++k) {
        for (auto& v : seg) v = z(rng);
        s.append_segment(seg);
    }
    hwi::BootstrapOptions o;
    o.replicates = 200;
    for (auto _ : state) benchmark::DoNotOptimize(hwi::block_bootstrap_test(s, o));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s.n()) * o.replicates);
}
BENCHMARK(BM_BlockBootstrap)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_SimulationStep(benchmark::State& state) {
    hwi::SimConfig cfg;
    cfg.group_counts = {{3}, {2, 5, 16}, {3}, {static_cast<std::size_t>(state.range(0))}};
    cfg.horizon = 1.0;
    for (auto _ : state) benchmark::DoNotOptimize(hwi::simulate_panel(cfg));
    const auto stocks = 69 * static_cast<std::int64_t>(state.range(0));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(cfg.steps()) * stocks);
}
BENCHMARK(BM_SimulationStep)->Arg(5)->Arg(20)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
