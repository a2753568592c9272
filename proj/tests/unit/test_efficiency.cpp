#include "catch_amalgamated.hpp"

#include "oracles.hpp"

#include "hwi/efficiency.hpp"
#include "hwi/error.hpp"
#include "hwi/market_data.hpp"
#include "hwi/stylized_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

using namespace hwi;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Series series_on(const std::vector<Date>& cal, const std::vector<double>& v) {
    Series s;
    s.dates = cal;
    s.values = v;
    return s;
}

ReturnSample iid_sample(std::uint64_t seed, std::size_t n, double mean = 0.0, double sd = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(mean, sd);
    ReturnSample s;
    s.source = "iid";
    std::vector<double> v(n);
    for (auto& x : v) x = z(rng);
    s.append_segment(v);
    return s;
}

} // namespace

TEST_CASE("pool: stock identical to the benchmark gives zeros", "[efficiency]") {
    const auto cal = oracle::weekdays(Date::from_ymd(2020, 1, 6), 6);
    const std::vector<double> px{10, 11, 10.5, 12, 12.5, 13};
    std::vector<StockRecord> recs{oracle::make_record("x", oracle::classification("R", "C", "G"), cal, px, {})};
    const auto s = pool_benchmarked_returns(recs, series_on(cal, px), "self");
    REQUIRE(s.n() == 5);
    for (double v : s.observations) CHECK_THAT(v, WithinAbs(0.0, 1e-12));
}

TEST_CASE("pool: counts and annualized percent scaling", "[efficiency]") {
    const auto cal = oracle::weekdays(Date::from_ymd(2020, 1, 6), 4);
    std::vector<StockRecord> recs;
    for (int j = 0; j < 3; ++j) {
        recs.push_back(oracle::make_record("s" + std::to_string(j), oracle::classification("R", "C", "G"), cal,
                                           {1.0, 1.01, 1.02 + 0.01 * j, 1.0}, {}));
    }
    const Series flat = series_on(cal, {1, 1, 1, 1});
    const auto s = pool_benchmarked_returns(recs, flat, "flat");
    CHECK(s.n() == 9);
    CHECK(s.segments() == 3);
    CHECK_THAT(s.observations[0], WithinRel(0.01 * kAnnualizedPercent, 1e-12));

    // A doubling benchmark halves every benchmarked value step.
    const Series doubling = series_on(cal, {1, 2, 4, 8});
    const auto d = pool_benchmarked_returns(recs, doubling, "double");
    CHECK_THAT(d.observations[0], WithinRel((1.01 / 2.0 - 1.0) * kAnnualizedPercent, 1e-12));
}

TEST_CASE("pool: pairs need consecutive benchmark dates and stop at death", "[efficiency]") {
    const auto cal = oracle::weekdays(Date::from_ymd(2020, 1, 6), 8);
    auto gap = oracle::make_record("gap", oracle::classification("R", "C", "G"), cal, {1, 2, 3, 4, 5, 6, 7, 8}, {});
    gap.dates.erase(gap.dates.begin() + 3);
    gap.calendar_index.erase(gap.calendar_index.begin() + 3);
    gap.prices.erase(gap.prices.begin() + 3);
    gap.market_values.erase(gap.market_values.begin() + 3);
    const auto dead = oracle::make_record("dead", oracle::classification("R", "C", "G"), cal, {1, 2, 3}, {});
    const auto late = oracle::make_record("late", oracle::classification("R", "C", "G"), cal, {1, 2, 3, 4}, {}, 4);
    std::vector<StockRecord> recs{gap, dead, late};
    const auto s = pool_benchmarked_returns(recs, series_on(cal, std::vector<double>(8, 1.0)), "b");
    // gap: 7 observations, one missing day breaks two pairs -> 5; dead: 2; late: 3.
    CHECK(s.n() == 10);
    CHECK(s.segment_offsets == std::vector<std::size_t>{0, 5, 7, 10});
    CHECK_THROWS_AS(pool_benchmarked_returns(std::vector<StockRecord>{}, series_on(cal, std::vector<double>(8, 1.0)), "e"),
                    DataError);
}

TEST_CASE("z-test examples", "[efficiency]") {
    const auto zero = z_test_from_summary(0.0, 0.5, 1000, 0.99);
    CHECK(zero.p_value == 0.5);
    CHECK(zero.statistic == 0.0);

    const auto mci = z_test_from_summary(3.504079, 0.142278, 31472596, 0.99);
    CHECK_THAT(mci.statistic, WithinAbs(24.628, 5e-4));
    CHECK(mci.p_value < 1e-100);

    const auto hwi = z_test_from_summary(-1.671584, 0.141828, 31472596, 0.99);
    CHECK_THAT(hwi.statistic, WithinAbs(-11.786, 5e-4));
    CHECK(hwi.p_value > 1.0 - 1e-12);
    CHECK(hwi.ci_high < 0.0);
    CHECK_THAT(hwi.ci_high - hwi.ci_low, WithinRel(2.0 * 2.5758293035489 * 0.141828, 1e-10));

    const auto small = z_test_from_summary(1.0, 1.0, 10, 0.99);
    const bool warned = std::any_of(small.warnings.begin(), small.warnings.end(),
                                    [](const std::string& w) { return w.find("fewer than 30") != std::string::npos; });
    CHECK(warned);
}

TEST_CASE("z-test on a sample", "[efficiency]") {
    const auto s = iid_sample(1, 5000, 0.3, 2.0);
    const auto r = z_test_nonpositive_mean(s, 0.99);
    const double mean = std::accumulate(s.observations.begin(), s.observations.end(), 0.0) / 5000.0;
    double ss = 0.0;
    for (double v : s.observations) ss += (v - mean) * (v - mean);
    const double se = std::sqrt(ss / 4999.0 / 5000.0);
    CHECK_THAT(r.sample_mean, WithinRel(mean, 1e-12));
    CHECK_THAT(r.standard_error, WithinRel(se, 1e-12));
    CHECK_THAT(r.statistic, WithinRel(mean / se, 1e-12));
    CHECK_THAT(r.p_value, WithinAbs(0.5 * std::erfc(mean / se / std::sqrt(2.0)), 1e-14));
    CHECK(r.ci_low <= r.sample_mean);
    CHECK(r.sample_mean <= r.ci_high);

    ReturnSample flat;
    flat.append_segment(std::vector<double>(50, 1.25));
    CHECK_THROWS_AS(z_test_nonpositive_mean(flat, 0.99), NumericalError);
}

TEST_CASE("z-test monotonicity under a positive shift", "[efficiency][property]") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto s = iid_sample(seed, 300);
        const double before = z_test_nonpositive_mean(s, 0.99).statistic;
        for (auto& v : s.observations) v += 0.05;
        CHECK(z_test_nonpositive_mean(s, 0.99).statistic > before);
    }
}

TEST_CASE("z-test size control under iid nulls", "[efficiency][monte-carlo]") {
    int rejected = 0;
    const int trials = 1000;
    for (int t = 0; t < trials; ++t) {
        const auto s = iid_sample(10000 + static_cast<std::uint64_t>(t), 500);
        if (z_test_nonpositive_mean(s, 0.99).p_value < 0.01) ++rejected;
    }
    const double rate = static_cast<double>(rejected) / trials;
    INFO("rejection rate " << rate);
    CHECK(rate >= 0.002);
    CHECK(rate <= 0.03);
}

TEST_CASE("bootstrap: constant series", "[efficiency]") {
    ReturnSample s;
    s.source = "const";
    s.append_segment(std::vector<double>(100, 2.5));
    s.append_segment(std::vector<double>(60, 2.5));
    const auto r = block_bootstrap_test(s, {});
    CHECK(r.ci_low == 2.5);
    CHECK(r.ci_high == 2.5);
    CHECK(r.sample_mean == 2.5);
    CHECK(r.statistic == 0.0);
    CHECK_FALSE(r.warnings.empty());
}

TEST_CASE("bootstrap: blocks stay inside their segment", "[efficiency]") {
    // Segment values differ but are constant within a segment; any block that
    // crossed a boundary would move the replicate mean.
    ReturnSample s;
    s.append_segment(std::vector<double>(40, 0.0));
    s.append_segment(std::vector<double>(25, 4.0));
    s.append_segment(std::vector<double>(35, -1.0));
    BootstrapOptions o;
    o.mean_block_length = 30.0;
    const auto r = block_bootstrap_test(s, o);
    CHECK(r.ci_low == r.ci_high);
    CHECK_THAT(r.ci_low, WithinAbs((25 * 4.0 - 35.0) / 100.0, 1e-14));
}

TEST_CASE("bootstrap: short segments are skipped with a warning", "[efficiency]") {
    auto s = iid_sample(3, 400);
    s.append_segment(std::vector<double>{7.0});
    const auto r = block_bootstrap_test(s, {});
    CHECK(r.n == 400);
    CHECK(std::any_of(r.warnings.begin(), r.warnings.end(),
                      [](const std::string& w) { return w.find("skipped") != std::string::npos; }));
    BootstrapOptions few;
    few.replicates = 100;
    CHECK_THROWS_AS(block_bootstrap_test(s, few), UsageError);
    BootstrapOptions tiny;
    tiny.mean_block_length = 0.5;
    CHECK_THROWS_AS(block_bootstrap_test(s, tiny), UsageError);
}

TEST_CASE("bootstrap: deterministic and thread-count independent", "[efficiency]") {
    ReturnSample s = iid_sample(9, 3000);
    s.append_segment(iid_sample(10, 2000).observations);
    BootstrapOptions o;
    o.seed = 123;
    const auto a = block_bootstrap_test(s, o);
    const auto b = block_bootstrap_test(s, o);
    o.threads = 4;
    const auto c = block_bootstrap_test(s, o);
    for (const auto* other : {&b, &c}) {
        CHECK(a.ci_low == other->ci_low);
        CHECK(a.ci_high == other->ci_high);
        CHECK(a.standard_error == other->standard_error);
        CHECK(a.p_value == other->p_value);
        CHECK(a.bootstrap_mean == other->bootstrap_mean);
    }
    o.seed = 124;
    CHECK(block_bootstrap_test(s, o).ci_low != a.ci_low);
}

TEST_CASE("bootstrap: iid CI width with unit blocks", "[efficiency][monte-carlo]") {
    const double z = normal_quantile(0.995);
    int within = 0;
    double worst = 0.0;
    for (int seed = 0; seed < 50; ++seed) {
        const auto s = iid_sample(200 + static_cast<std::uint64_t>(seed), 2000);
        BootstrapOptions o;
        o.mean_block_length = 1.0;
        o.replicates = 2000;
        o.seed = static_cast<std::uint64_t>(seed);
        const auto boot = block_bootstrap_test(s, o);
        const auto zt = z_test_nonpositive_mean(s, 0.99);
        const double rel = (boot.ci_high - boot.ci_low) / (2.0 * z * zt.standard_error) - 1.0;
        worst = std::max(worst, std::abs(rel));
        if (std::abs(rel) <= 0.15) ++within;
    }
    INFO("largest relative width error " << worst);
    CHECK(within == 50);
}

TEST_CASE("bootstrap CI resembles the Z CI on a simulated panel", "[efficiency][monte-carlo]") {
    SimConfig cfg;
    cfg.group_counts = {{2}, {2}, {2}, {3}};
    cfg.horizon = 8.0;
    cfg.seed = 31;
    const auto panel = simulate_panel(cfg);
    const auto ex = export_panel(panel, cfg);
    const auto recs = assemble_records(ex.rows, ex.classification, ex.calendar).records;
    const auto sample = pool_benchmarked_returns(recs, ex.hwi, "HWI-sim");
    const auto zt = z_test_nonpositive_mean(sample, 0.99);
    BootstrapOptions o;
    o.seed = 5;
    const auto bt = block_bootstrap_test(sample, o);
    // Intervals overlap and are of comparable width.
    CHECK(bt.ci_low <= zt.ci_high);
    CHECK(zt.ci_low <= bt.ci_high);
    const double ratio = (bt.ci_high - bt.ci_low) / (zt.ci_high - zt.ci_low);
    INFO("width ratio " << ratio);
    CHECK(ratio > 0.5);
    CHECK(ratio < 2.0);
    // Supermartingale sign on HWI-benchmarked stocks.
    CHECK(zt.sample_mean <= 3.0 * zt.standard_error);
}

TEST_CASE("index versus index", "[efficiency]") {
    const auto cal = oracle::weekdays(Date::from_ymd(2000, 1, 3), 252 * 10);
    std::mt19937_64 rng(6);
    std::normal_distribution<double> z(0.0003, 0.01);
    std::vector<double> v{100.0};
    for (std::size_t i = 1; i < cal.size(); ++i) v.push_back(v.back() * std::exp(z(rng)));
    const Series bench = series_on(cal, v);

    try {
        (void)index_vs_index_test(bench, bench, 0.99, "same");
        FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("identical series") != std::string::npos);
    }

    // Tilt plus a small idiosyncratic wobble so the benchmarked series has variance.
    Series tilted = bench;
    std::normal_distribution<double> wob(0.0, 0.0005);
    double x = 0.0;
    for (std::size_t i = 0; i < tilted.size(); ++i) {
        x += wob(rng);
        tilted.values[i] *= std::exp(0.05 * year_fraction(cal[0], cal[i]) + x);
    }
    const auto r = index_vs_index_test(tilted, bench, 0.99, "tilt");
    CHECK(r.p_value < 0.01);
    CHECK(r.label == "tilt");
}
