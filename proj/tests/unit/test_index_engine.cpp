#include "catch_amalgamated.hpp"

#include "oracles.hpp"

#include "hwi/error.hpp"
#include "hwi/index_engine.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <set>

using namespace hwi;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

HierarchyTree tree_of(const std::vector<StockRecord>& recs, const std::vector<Date>& cal, std::size_t t = 0) {
    std::set<std::string> countries;
    for (const auto& r : recs) countries.insert(r.classification.country);
    std::vector<CountryPolicy> pol;
    for (const auto& c : countries) pol.push_back({c, cal.front(), 100000, IndustrialLevel::Sector});
    return build_hierarchy(recs, pol, cal[t]);
}

std::vector<CountryPolicy> policies_for(const std::vector<StockRecord>& recs, Date base) {
    std::set<std::string> countries;
    for (const auto& r : recs) countries.insert(r.classification.country);
    std::vector<CountryPolicy> pol;
    for (const auto& c : countries) pol.push_back({c, base, 100000, IndustrialLevel::Sector});
    return pol;
}

std::vector<StockRecord> flat_universe(const std::vector<Date>& cal, const std::vector<double>& mvs) {
    std::vector<StockRecord> recs;
    for (std::size_t i = 0; i < mvs.size(); ++i) {
        recs.push_back(oracle::make_record("s" + std::to_string(i), oracle::classification("R", "C", "G"), cal,
                                           std::vector<double>(cal.size(), 1.0),
                                           std::vector<double>(cal.size(), mvs[i])));
    }
    return recs;
}

/// Symmetric layout: 3 regions x 2 countries x 2 groups x 2 stocks, random prices.
std::vector<StockRecord> symmetric_panel(const std::vector<Date>& cal, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 0.01);
    std::vector<StockRecord> recs;
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 2; ++c) {
            for (int g = 0; g < 2; ++g) {
                for (int s = 0; s < 2; ++s) {
                    std::vector<double> px{10.0};
                    for (std::size_t t = 1; t < cal.size(); ++t) px.push_back(px.back() * std::exp(z(rng)));
                    std::vector<double> mv(cal.size(), 1.0 + static_cast<double>(rng() % 100));
                    const auto country = "R" + std::to_string(r) + "C" + std::to_string(c);
                    recs.push_back(oracle::make_record(country + "G" + std::to_string(g) + "S" + std::to_string(s),
                                                       oracle::classification("R" + std::to_string(r), country,
                                                                              "G" + std::to_string(g)),
                                                       cal, px, mv));
                }
            }
        }
    }
    return recs;
}

} // namespace

TEST_CASE("mci weights", "[index-engine]") {
    const auto cal = oracle::weekdays(Date::from_ymd(2020, 1, 6), 2);
    auto w = mci_weights(tree_of(flat_universe(cal, {2, 3, 5}), cal));
    REQUIRE(w.entries.size() == 3);
    CHECK_THAT(w.entries[0].weight, WithinAbs(0.2, 1e-15));
    CHECK_THAT(w.entries[1].weight, WithinAbs(0.3, 1e-15));
    CHECK_THAT(w.entries[2].weight, WithinAbs(0.5, 1e-15));

    CHECK(mci_weights(tree_of(flat_universe(cal, {7}), cal)).entries[0].weight == 1.0);

    const auto tree4 = tree_of(flat_universe(cal, {1, 1, 1, 1}), cal);
    const auto m4 = mci_weights(tree4);
    const auto e4 = ewi_weights(tree4);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(m4.entries[i].weight == 0.25);
        CHECK(e4.entries[i].weight == m4.entries[i].weight);
    }
}

TEST_CASE("mci excludes zero market value and fails when all are zero", "[index-engine]") {
    const auto cal = oracle::weekdays(Date::from_ymd(2020, 1, 6), 2);
    const auto w = mci_weights(tree_of(flat_universe(cal, {0, 4}), cal));
    REQUIRE(w.entries.size() == 1);
    CHECK(w.entries[0].weight == 1.0);
    CHECK(w.excluded == std::vector<std::string>{"s0"});
    CHECK_THROWS_AS(mci_weights(tree_of(flat_universe(cal, {0, 0}), cal)), DataError);
}

TEST_CASE("ewi weights", "[index-engine]") {
    const auto cal = oracle::weekdays(Date::from_ymd(2020, 1, 6), 2);
    const auto w = ewi_weights(tree_of(flat_universe(cal, std::vector<double>(4810, 1.0)), cal));
    CHECK_THAT(w.entries.front().weight, WithinRel(2.0790e-4, 1e-4));
    CHECK_THAT(w.sum(), WithinAbs(1.0, 1e-12));

    std::vector<StockRecord> two_countries;
    for (int i = 0; i < 5; ++i) {
        two_countries.push_back(oracle::make_record("x" + std::to_string(i),
                                                    oracle::classification("R", i < 2 ? "A" : "B", "G"), cal,
                                                    {1, 1}, {}));
    }
    for (const auto& e : ewi_weights(tree_of(two_countries, cal)).entries) CHECK(e.weight == 0.2);

    HierarchyTree empty;
    CHECK_THROWS_AS(ewi_weights(empty), DataError);
}

TEST_CASE("hwi weight is the product of reciprocal counts", "[index-engine]") {
    // M = 3 regions; the target region has 2 countries, its country 10 groups,
    // its group 5 stocks: weight 1/300.
    const auto cal = oracle::weekdays(Date::from_ymd(2020, 1, 6), 2);
    std::vector<StockRecord> recs;
    auto add = [&](const std::string& id, const std::string& reg, const std::string& cty, const std::string& grp) {
        recs.push_back(oracle::make_record(id, oracle::classification(reg, cty, grp), cal, {1, 1}, {}));
    };
    for (int g = 0; g < 10; ++g) {
        for (int s = 0; s < 5; ++s) add("A" + std::to_string(g) + "_" + std::to_string(s), "R1", "C1", "G" + std::to_string(g));
    }
    add("B", "R1", "C2", "G0");
    add("C", "R2", "C3", "G0");
    add("D", "R3", "C4", "G0");
    const auto w = hwi_weights(tree_of(recs, cal), WeightScheme::parse("HWI"));
    CHECK_THAT(*w.weight_of("A3_2"), WithinAbs(1.0 / 300.0, 1e-16));
    CHECK_THAT(*w.weight_of("B"), WithinAbs(1.0 / 6.0, 1e-16));
    CHECK_THAT(*w.weight_of("D"), WithinAbs(1.0 / 3.0, 1e-16));
    CHECK_THAT(w.sum(), WithinAbs(1.0, 1e-12));
}

TEST_CASE("scheme variants use only their levels", "[index-engine]") {
    const auto cal = oracle::weekdays(Date::from_ymd(2020, 1, 6), 2);
    std::vector<StockRecord> recs;
    auto add = [&](const std::string& id, const std::string& reg, const std::string& cty, const std::string& sec) {
        recs.push_back(oracle::make_record(id, {reg, cty, sec, sec, sec}, cal, {1, 1}, {}));
    };
    add("a", "R1", "C1", "S1");
    add("b", "R1", "C1", "S2");
    add("c", "R1", "C2", "S1");
    add("d", "R2", "C3", "S1");
    const auto tree = tree_of(recs, cal);

    // HWI.r: 1/M x 1/(stocks in region).
    const auto r = hwi_weights(tree, WeightScheme::parse("HWI.r"));
    CHECK_THAT(*r.weight_of("a"), WithinAbs(1.0 / 6.0, 1e-15));
    CHECK_THAT(*r.weight_of("d"), WithinAbs(0.5, 1e-15));
    // HWI.c.r: region, country, then equal within country.
    const auto cr = hwi_weights(tree, WeightScheme::parse("HWI.c.r"));
    CHECK_THAT(*cr.weight_of("a"), WithinAbs(0.125, 1e-15));
    CHECK_THAT(*cr.weight_of("c"), WithinAbs(0.25, 1e-15));
    // HWI.s: sectors S1 (a, c, d) and S2 (b).
    const auto s = hwi_weights(tree, WeightScheme::parse("HWI.s"));
    CHECK_THAT(*s.weight_of("b"), WithinAbs(0.5, 1e-15));
    CHECK_THAT(*s.weight_of("d"), WithinAbs(1.0 / 6.0, 1e-15));
    // HWI.c.g: sector then country within sector.
    const auto cg = hwi_weights(tree, WeightScheme::parse("HWI.c.g"));
    CHECK_THAT(*cg.weight_of("a"), WithinAbs(1.0 / 6.0, 1e-15));
    // HWI.c.r.g: sector, region, country.
    const auto crg = hwi_weights(tree, WeightScheme::parse("HWI.c.r.g"));
    CHECK_THAT(*crg.weight_of("a"), WithinAbs(0.125, 1e-15));
    CHECK_THAT(*crg.weight_of("d"), WithinAbs(0.25, 1e-15));
    // Custom levels equal the named scheme they spell out.
    const auto custom = hwi_weights(tree, WeightScheme::parse("custom:region,country"));
    for (const auto& e : custom.entries) CHECK(e.weight == *cr.weight_of(e.id));

    CHECK_THROWS_AS(WeightScheme::parse("HWI.x"), UsageError);
    CHECK_THROWS_AS(WeightScheme::parse("custom:planet"), UsageError);
    CHECK(display_name(WeightScheme::parse("HWI"), 40.0) == "HWI-TC");
    CHECK(display_name(WeightScheme::parse("MCI"), 0.0) == "MCI");
}

TEST_CASE("one region, one country, one group: HWI variants equal EWI", "[index-engine]") {
    const auto cal = oracle::weekdays(Date::from_ymd(2020, 1, 6), 2);
    const auto tree = tree_of(flat_universe(cal, {1, 2, 3, 4, 5}), cal);
    const auto e = ewi_weights(tree);
    for (const char* name : {"HWI", "HWI.r", "HWI.c.r"}) {
        const auto w = hwi_weights(tree, WeightScheme::parse(name));
        for (std::size_t i = 0; i < e.entries.size(); ++i) CHECK_THAT(w.entries[i].weight, WithinAbs(e.entries[i].weight, 1e-16));
    }
}

TEST_CASE("rebalance calendar", "[index-engine]") {
    std::vector<Date> cal;
    for (Date d = Date::from_ymd(1984, 1, 2); d <= Date::from_ymd(1984, 12, 31); d = d + 1) {
        if (d.weekday() != 0 && d.weekday() != 6) cal.push_back(d);
    }
    const auto r = rebalance_calendar(cal, cal.front());
    REQUIRE(r.size() == 4);
    CHECK(r[0] == Date::from_ymd(1984, 1, 2));
    CHECK(r[1] == Date::from_ymd(1984, 4, 2));
    CHECK(r[2] == Date::from_ymd(1984, 7, 2));
    CHECK(r[3] == Date::from_ymd(1984, 10, 1));

    const auto mid = rebalance_calendar(cal, Date::from_ymd(1984, 2, 15));
    REQUIRE(mid.size() == 4);
    CHECK(mid[0] == Date::from_ymd(1984, 2, 15));
    CHECK(mid[1] == Date::from_ymd(1984, 4, 2));

    // Remove all of April: that quarter's rebalance moves to the first date in May.
    std::vector<Date> gappy;
    for (const auto& d : cal) {
        if (d.month() != 4) gappy.push_back(d);
    }
    const auto g = rebalance_calendar(gappy, gappy.front());
    REQUIRE(g.size() == 4);
    CHECK(g[1] == Date::from_ymd(1984, 5, 1));
}

TEST_CASE("backtest: single asset and symmetric pair", "[index-engine]") {
    const auto cal = oracle::weekdays(Date::from_ymd(2020, 1, 6), 2);
    std::vector<StockRecord> one{oracle::make_record("x", oracle::classification("R", "C", "G"), cal, {100, 110}, {})};
    BacktestConfig cfg;
    cfg.scheme = WeightScheme::ewi();
    const auto p = backtest(one, policies_for(one, cal[0]), cal, cfg);
    CHECK_THAT(p.values.values[0], WithinAbs(100.0, 1e-12));
    CHECK_THAT(p.values.values[1], WithinAbs(110.0, 1e-12));

    std::vector<StockRecord> two{oracle::make_record("a", oracle::classification("R", "C", "G"), cal, {10, 11}, {}),
                                 oracle::make_record("b", oracle::classification("R", "C", "G"), cal, {10, 9}, {})};
    const auto q = backtest(two, policies_for(two, cal[0]), cal, cfg);
    CHECK_THAT(q.values.values[1], WithinAbs(100.0, 1e-12));
}

TEST_CASE("backtest: initial cost is tc times traded value", "[index-engine]") {
    const auto cal = oracle::weekdays(Date::from_ymd(2020, 1, 6), 3);
    std::vector<StockRecord> two{oracle::make_record("a", oracle::classification("R", "C", "G"), cal, {10, 10, 10}, {}),
                                 oracle::make_record("b", oracle::classification("R", "C", "G"), cal, {5, 5, 5}, {})};
    BacktestConfig cfg;
    cfg.scheme = WeightScheme::ewi();
    cfg.tc_bps = 40.0;
    const auto p = backtest(two, policies_for(two, cal[0]), cal, cfg);
    REQUIRE_FALSE(p.rebalance_log.empty());
    const auto& ev = p.rebalance_log.front();
    CHECK_THAT(ev.cost, WithinAbs(0.004 * 100.0, 1e-12));
    CHECK_THAT(ev.turnover, WithinAbs(1.0, 1e-15));
    CHECK_THAT(p.values.values[0], WithinAbs(99.6, 1e-12));
    CHECK_THAT(p.values.values[2], WithinAbs(99.6, 1e-12));
    CHECK(p.name == "EWI-TC");
}

TEST_CASE("backtest: symmetric panel gives HWI path equal to EWI path", "[index-engine]") {
    const auto cal = oracle::weekdays(Date::from_ymd(2019, 12, 2), 160);
    const auto recs = symmetric_panel(cal, 5);
    const auto pol = policies_for(recs, cal[0]);
    BacktestConfig cfg;
    cfg.scheme = WeightScheme::parse("HWI");
    const auto h = backtest(recs, pol, cal, cfg);
    cfg.scheme = WeightScheme::ewi();
    const auto e = backtest(recs, pol, cal, cfg);
    REQUIRE(h.values.size() == e.values.size());
    double worst = 0.0;
    for (std::size_t t = 0; t < h.values.size(); ++t) {
        worst = std::max(worst, std::abs(h.values.values[t] / e.values.values[t] - 1.0));
    }
    CHECK(worst < 1e-13);
}

TEST_CASE("backtest: self-financing recursion at rebalance dates", "[index-engine]") {
    const auto cal = oracle::weekdays(Date::from_ymd(2019, 12, 2), 200);
    const auto recs = symmetric_panel(cal, 9);
    const auto pol = policies_for(recs, cal[0]);
    for (const char* name : {"MCI", "EWI", "HWI", "HWI.s"}) {
        BacktestConfig cfg;
        cfg.scheme = WeightScheme::parse(name);
        const auto path = backtest(recs, pol, cal, cfg);

        // Oracle: V_{t_i} = V_{t_{i-1}} sum_j pi_j S_j(t_i) / S_j(t_{i-1}).
        const auto dates = rebalance_calendar(cal, cal[0]);
        double v = 100.0;
        for (std::size_t i = 0; i + 1 < dates.size(); ++i) {
            const auto t0 = static_cast<std::size_t>(std::find(cal.begin(), cal.end(), dates[i]) - cal.begin());
            const auto t1 = static_cast<std::size_t>(std::find(cal.begin(), cal.end(), dates[i + 1]) - cal.begin());
            const auto w = compute_weights(build_hierarchy(recs, pol, dates[i]), cfg.scheme);
            double growth = 0.0;
            for (const auto& e : w.entries) growth += e.weight * recs[e.record].prices[t1] / recs[e.record].prices[t0];
            v *= growth;
            CHECK_THAT(path.values.values[t1], WithinRel(v, 1e-10));
        }
    }
}

TEST_CASE("backtest: costs never raise the path", "[index-engine][property]") {
    const auto cal = oracle::weekdays(Date::from_ymd(2019, 12, 2), 200);
    const auto recs = symmetric_panel(cal, 21);
    const auto pol = policies_for(recs, cal[0]);
    for (const char* name : {"MCI", "EWI", "HWI"}) {
        BacktestConfig cfg;
        cfg.scheme = WeightScheme::parse(name);
        const auto free = backtest(recs, pol, cal, cfg);
        cfg.tc_bps = 40.0;
        const auto costly = backtest(recs, pol, cal, cfg);
        for (std::size_t t = 0; t < free.values.size(); ++t) CHECK(costly.values.values[t] <= free.values.values[t]);
        for (const auto& ev : costly.rebalance_log) {
            CHECK(ev.turnover >= 0.0);
            CHECK(ev.turnover <= 2.0 + 1e-12);
        }
    }
}

TEST_CASE("backtest: interim death conserves value up to cost", "[index-engine]") {
    const auto cal = oracle::weekdays(Date::from_ymd(2020, 1, 6), 10);
    // "dead" trades until day 4; a rebalance on day 0 only (same quarter).
    std::vector<StockRecord> recs{
        oracle::make_record("alive1", oracle::classification("R", "C", "G"), cal,
                            {10, 10.5, 10.2, 10.8, 11, 11.1, 11.3, 11.0, 11.2, 11.4}, {}),
        oracle::make_record("alive2", oracle::classification("R", "C", "G"), cal,
                            {20, 19.8, 20.4, 20.1, 20.3, 20.0, 20.6, 20.9, 21.1, 21.0}, {}),
        oracle::make_record("dead", oracle::classification("R", "C", "G"), cal, {5, 5.2, 5.1, 5.4, 5.5}, {}),
    };
    REQUIRE(recs[2].delisted);
    for (double tc : {0.0, 40.0}) {
        BacktestConfig cfg;
        cfg.scheme = WeightScheme::ewi();
        cfg.tc_bps = tc;
        const auto p = backtest(recs, policies_for(recs, cal[0]), cal, cfg);
        REQUIRE(p.rebalance_log.size() == 2);
        const auto& death = p.rebalance_log[1];
        CHECK(death.interim);
        CHECK(death.date == cal[4]);

        // Oracle: mark the day-0 units to day 4, then subtract the cost.
        const double v0 = 100.0 * (1.0 - tc / 1e4);
        double marked = 0.0;
        for (const auto& r : recs) marked += v0 / 3.0 / r.prices[0] * r.prices[4];
        const double proceeds = v0 / 3.0 / 5.0 * 5.5;
        const double cost = tc / 1e4 * 2.0 * proceeds;
        CHECK_THAT(death.cost, WithinAbs(cost, 1e-12));
        CHECK_THAT(p.values.values[4], WithinRel(marked - cost, 1e-13));

        // After the death the survivors hold everything, pro rata to their values.
        double h1 = v0 / 3.0 / 10.0 * 11.0;
        double h2 = v0 / 3.0 / 20.0 * 20.3;
        const double reinvest = proceeds - cost;
        const double u1 = (h1 + reinvest * h1 / (h1 + h2)) / 11.0;
        const double u2 = (h2 + reinvest * h2 / (h1 + h2)) / 20.3;
        CHECK_THAT(p.values.values[9], WithinRel(u1 * 11.4 + u2 * 21.0, 1e-13));
    }
}

TEST_CASE("backtest: last holding dies into cash", "[index-engine]") {
    const auto cal = oracle::weekdays(Date::from_ymd(2020, 1, 6), 5);
    std::vector<StockRecord> recs{
        oracle::make_record("only", oracle::classification("R", "C", "G"), cal, {10, 11, 12}, {})};
    BacktestConfig cfg;
    cfg.scheme = WeightScheme::ewi();
    cfg.tc_bps = 10.0;
    const auto p = backtest(recs, policies_for(recs, cal[0]), cal, cfg);
    const double v0 = 100.0 * (1 - 0.001);
    const double proceeds = v0 * 1.2;
    CHECK_THAT(p.values.values[2], WithinRel(proceeds * (1 - 0.001), 1e-13));
    CHECK(p.values.values[4] == p.values.values[2]);
}

TEST_CASE("backtest: carries the last price forward on gaps", "[index-engine]") {
    const auto cal = oracle::weekdays(Date::from_ymd(2020, 1, 6), 4);
    auto rec = oracle::make_record("gap", oracle::classification("R", "C", "G"), cal, {10, 12, 13, 14}, {});
    // Drop day 1.
    rec.dates.erase(rec.dates.begin() + 1);
    rec.calendar_index.erase(rec.calendar_index.begin() + 1);
    rec.prices.erase(rec.prices.begin() + 1);
    rec.market_values.erase(rec.market_values.begin() + 1);
    std::vector<StockRecord> recs{rec};
    BacktestConfig cfg;
    cfg.scheme = WeightScheme::ewi();
    const auto p = backtest(recs, policies_for(recs, cal[0]), cal, cfg);
    CHECK_THAT(p.values.values[1], WithinAbs(100.0, 1e-12));
    CHECK_THAT(p.values.values[2], WithinAbs(130.0, 1e-12));
}

TEST_CASE("backtest: argument checks", "[index-engine]") {
    const auto cal = oracle::weekdays(Date::from_ymd(2020, 1, 6), 3);
    std::vector<StockRecord> recs{oracle::make_record("x", oracle::classification("R", "C", "G"), cal, {1, 2, 3}, {})};
    BacktestConfig cfg;
    cfg.v0 = 0.0;
    CHECK_THROWS_AS(backtest(recs, policies_for(recs, cal[0]), cal, cfg), UsageError);
    cfg.v0 = 100.0;
    cfg.tc_bps = -1.0;
    CHECK_THROWS_AS(backtest(recs, policies_for(recs, cal[0]), cal, cfg), UsageError);
    cfg.tc_bps = 0.0;
    cfg.start = cal.back() + 10;
    CHECK_THROWS_AS(backtest(recs, policies_for(recs, cal[0]), cal, cfg), UsageError);
}

TEST_CASE("weights are a pure function of records, scheme and date", "[index-engine][property]") {
    const auto cal = oracle::weekdays(Date::from_ymd(2019, 12, 2), 80);
    const auto recs = symmetric_panel(cal, 3);
    const auto pol = policies_for(recs, cal[0]);
    for (const char* name : {"MCI", "EWI", "HWI", "HWI.c.r.g"}) {
        const auto s = WeightScheme::parse(name);
        const auto a = compute_weights(build_hierarchy(recs, pol, cal[40]), s);
        const auto b = compute_weights(build_hierarchy(recs, pol, cal[40]), s);
        REQUIRE(a.entries.size() == b.entries.size());
        for (std::size_t i = 0; i < a.entries.size(); ++i) {
            CHECK(a.entries[i].weight == b.entries[i].weight);
            CHECK(a.entries[i].weight >= 0.0);
        }
        CHECK_THAT(a.sum(), WithinAbs(1.0, 1e-12));
    }
}
