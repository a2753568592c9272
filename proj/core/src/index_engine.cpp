#include "hwi/index_engine.hpp"

#include "hwi/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace hwi {

std::string_view to_string(GroupLevel level) {
    switch (level) {
    case GroupLevel::Region: return "region";
    case GroupLevel::Country: return "country";
    case GroupLevel::Industry: return "industry";
    case GroupLevel::Supersector: return "supersector";
    case GroupLevel::Sector: return "sector";
    case GroupLevel::Subsector: return "subsector";
    }
    return "industry";
}

GroupLevel parse_group_level(std::string_view text) {
    for (auto level : {GroupLevel::Region, GroupLevel::Country, GroupLevel::Industry, GroupLevel::Supersector,
                       GroupLevel::Sector, GroupLevel::Subsector}) {
        if (to_string(level) == text) return level;
    }
    throw UsageError("unknown grouping level '" + std::string(text) + "'");
}

WeightScheme WeightScheme::mci() { return {SchemeKind::MCI, {}, "MCI"}; }
WeightScheme WeightScheme::ewi() { return {SchemeKind::EWI, {}, "EWI"}; }

WeightScheme WeightScheme::hierarchical(std::string name, std::vector<GroupLevel> levels) {
    if (levels.empty()) throw UsageError("hierarchical scheme " + name + " needs at least one level");
    return {SchemeKind::Hierarchical, std::move(levels), std::move(name)};
}

WeightScheme WeightScheme::parse(std::string_view text) {
    using L = GroupLevel;
    if (text == "MCI") return mci();
    if (text == "EWI") return ewi();
    if (text == "HWI") return hierarchical("HWI", {L::Region, L::Country, L::Industry});
    if (text == "HWI.r") return hierarchical("HWI.r", {L::Region});
    if (text == "HWI.c.r") return hierarchical("HWI.c.r", {L::Region, L::Country});
    if (text == "HWI.s") return hierarchical("HWI.s", {L::Sector});
    if (text == "HWI.c.g") return hierarchical("HWI.c.g", {L::Sector, L::Country});
    if (text == "HWI.c.r.g") return hierarchical("HWI.c.r.g", {L::Sector, L::Region, L::Country});
    constexpr std::string_view prefix = "custom:";
    if (text.substr(0, prefix.size()) == prefix) {
        std::vector<GroupLevel> levels;
        std::string_view rest = text.substr(prefix.size());
        while (!rest.empty()) {
            const auto comma = rest.find(',');
            levels.push_back(parse_group_level(rest.substr(0, comma)));
            if (comma == std::string_view::npos) break;
            rest = rest.substr(comma + 1);
        }
        return hierarchical(std::string(text), std::move(levels));
    }
    throw UsageError("unknown weighting scheme '" + std::string(text) + "'");
}

std::string display_name(const WeightScheme& scheme, double tc_bps) {
    return tc_bps > 0.0 ? scheme.name + "-TC" : scheme.name;
}

double WeightVector::sum() const {
    double s = 0.0;
    for (const auto& e : entries) s += e.weight;
    return s;
}

std::optional<double> WeightVector::weight_of(std::string_view id) const {
    const auto it = std::lower_bound(entries.begin(), entries.end(), id,
                                     [](const WeightEntry& e, std::string_view key) { return e.id < key; });
    if (it == entries.end() || it->id != id) return std::nullopt;
    return it->weight;
}

WeightVector mci_weights(const HierarchyTree& tree) {
    WeightVector wv;
    wv.date = tree.snapshot_date;
    wv.scheme = "MCI";
    double total = 0.0;
    for (const auto& m : tree.members) {
        if (m.market_value > 0.0) {
            total += m.market_value;
        } else {
            wv.excluded.push_back(m.id);
        }
    }
    if (!(total > 0.0)) {
        throw DataError("MCI weights on " + tree.snapshot_date.iso() + ": all market values are zero");
    }
    for (const auto& m : tree.members) {
        if (m.market_value > 0.0) wv.entries.push_back({m.id, m.record, m.market_value / total});
    }
    return wv;
}

WeightVector ewi_weights(const HierarchyTree& tree) {
    if (tree.members.empty()) throw DataError("EWI weights on " + tree.snapshot_date.iso() + ": empty universe");
    WeightVector wv;
    wv.date = tree.snapshot_date;
    wv.scheme = "EWI";
    const double w = 1.0 / static_cast<double>(tree.members.size());
    for (const auto& m : tree.members) wv.entries.push_back({m.id, m.record, w});
    return wv;
}

namespace {

const std::string& group_key(const Member& m, GroupLevel level) {
    switch (level) {
    case GroupLevel::Region: return m.classification.region;
    case GroupLevel::Country: return m.classification.country;
    case GroupLevel::Industry: return m.industry;
    case GroupLevel::Supersector: return m.classification.supersector;
    case GroupLevel::Sector: return m.classification.sector;
    case GroupLevel::Subsector: return m.classification.subsector;
    }
    return m.industry;
}

void assign_nested(const HierarchyTree& tree, const std::vector<std::size_t>& members,
                   std::span<const GroupLevel> levels, double weight, const std::string& path,
                   std::vector<double>& out) {
    if (members.empty()) throw DataError("hierarchical weights: empty group " + path);
    if (levels.empty()) {
        const double w = weight / static_cast<double>(members.size());
        for (auto k : members) out[k] = w;
        return;
    }
    std::map<std::string, std::vector<std::size_t>> groups;
    for (auto k : members) {
        const auto& key = group_key(tree.members[k], levels.front());
        if (key.empty()) {
            throw DataError("stock " + tree.members[k].id + ": empty " + std::string(to_string(levels.front())) +
                            " code");
        }
        groups[key].push_back(k);
    }
    const double share = weight / static_cast<double>(groups.size());
    for (const auto& [key, sub] : groups) {
        assign_nested(tree, sub, levels.subspan(1), share, path + "/" + key, out);
    }
}

} // namespace

WeightVector hwi_weights(const HierarchyTree& tree, const WeightScheme& scheme) {
    if (scheme.kind != SchemeKind::Hierarchical || scheme.level_order.empty()) {
        throw UsageError("hwi_weights needs a hierarchical scheme with at least one level");
    }
    if (tree.members.empty()) {
        throw DataError(scheme.name + " weights on " + tree.snapshot_date.iso() + ": empty universe");
    }
    std::vector<std::size_t> all(tree.members.size());
    for (std::size_t k = 0; k < all.size(); ++k) all[k] = k;
    std::vector<double> w(all.size(), 0.0);
    assign_nested(tree, all, scheme.level_order, 1.0, "", w);

    WeightVector wv;
    wv.date = tree.snapshot_date;
    wv.scheme = scheme.name;
    for (std::size_t k = 0; k < w.size(); ++k) {
        wv.entries.push_back({tree.members[k].id, tree.members[k].record, w[k]});
    }
    return wv;
}

WeightVector compute_weights(const HierarchyTree& tree, const WeightScheme& scheme) {
    switch (scheme.kind) {
    case SchemeKind::MCI: return mci_weights(tree);
    case SchemeKind::EWI: return ewi_weights(tree);
    case SchemeKind::Hierarchical: return hwi_weights(tree, scheme);
    }
    throw UsageError("unknown scheme kind");
}

std::vector<Date> rebalance_calendar(std::span<const Date> calendar, Date base_date) {
    std::vector<Date> out;
    const auto first = std::lower_bound(calendar.begin(), calendar.end(), base_date);
    if (first == calendar.end()) return out;
    out.push_back(*first);
    auto quarter_of = [](Date d) { return d.year() * 4 + static_cast<int>((d.month() - 1) / 3); };
    int current = quarter_of(*first);
    for (auto it = first + 1; it != calendar.end(); ++it) {
        const int q = quarter_of(*it);
        if (q != current) {
            out.push_back(*it);
            current = q;
        }
    }
    return out;
}

namespace {

/// Last-observation-carried-forward price lookup with monotone cursors.
class PriceCursor {
public:
    explicit PriceCursor(std::span<const StockRecord> records)
        : records_(records), cursor_(records.size(), 0), started_(records.size(), false) {}

    double price(std::size_t j, std::size_t calendar_index) {
        const auto& rec = records_[j];
        const auto& idx = rec.calendar_index;
        if (!started_[j]) {
            if (idx.front() > calendar_index) {
                throw DataError("stock " + rec.id + ": no price on or before a held date");
            }
            started_[j] = true;
        }
        auto& c = cursor_[j];
        while (c + 1 < idx.size() && idx[c + 1] <= calendar_index) ++c;
        return rec.prices[c];
    }

private:
    std::span<const StockRecord> records_;
    std::vector<std::size_t> cursor_;
    std::vector<bool> started_;
};

} // namespace

IndexPath backtest(std::span<const StockRecord> records, std::span<const CountryPolicy> policies,
                   std::span<const Date> calendar, const BacktestConfig& config) {
    if (calendar.empty()) throw UsageError("backtest: empty calendar");
    if (!(config.v0 > 0.0)) throw UsageError("backtest: initial value must be positive");
    if (config.tc_bps < 0.0) throw UsageError("backtest: negative transaction cost");
    const Date start = config.start.value_or(calendar.front());
    const Date end = config.end.value_or(calendar.back());
    const std::size_t k0 = static_cast<std::size_t>(std::lower_bound(calendar.begin(), calendar.end(), start) -
                                                    calendar.begin());
    const std::size_t k_end = static_cast<std::size_t>(std::upper_bound(calendar.begin(), calendar.end(), end) -
                                                       calendar.begin());
    if (k0 >= k_end) throw UsageError("backtest: no trading dates between start and end");

    const auto rebalances = rebalance_calendar(calendar.subspan(0, k_end), start);
    const double tc = config.tc_bps / 1.0e4;

    IndexPath path;
    path.name = display_name(config.scheme, config.tc_bps);
    path.tc_bps = config.tc_bps;

    PriceCursor prices(records);
    std::vector<double> units(records.size(), 0.0);
    std::vector<std::size_t> held;
    double cash = config.v0;
    std::size_t next_rebalance = 0;

    for (std::size_t k = k0; k < k_end; ++k) {
        const Date t = calendar[k];
        double value = cash;
        for (auto j : held) value += units[j] * prices.price(j, k);

        const bool scheduled = next_rebalance < rebalances.size() && rebalances[next_rebalance] == t;
        if (scheduled) {
            ++next_rebalance;
            const auto tree = build_hierarchy(records, policies, t);
            const auto target = compute_weights(tree, config.scheme);

            std::map<std::size_t, double> trade_of; // record -> signed trade value
            for (auto j : held) trade_of[j] = -units[j] * prices.price(j, k);
            for (const auto& e : target.entries) trade_of[e.record] += e.weight * value;

            RebalanceEvent ev;
            ev.date = t;
            ev.value_before = value;
            double traded = 0.0;
            for (const auto& [j, trade] : trade_of) traded += std::abs(trade);
            ev.turnover = traded / value;
            ev.cost = tc * traded;
            const double after = value - ev.cost;

            for (auto j : held) units[j] = 0.0;
            held.clear();
            for (const auto& e : target.entries) {
                if (e.weight <= 0.0) continue;
                units[e.record] = e.weight * after / prices.price(e.record, k);
                held.push_back(e.record);
            }
            for (const auto& [j, trade] : trade_of) {
                const auto w = target.weight_of(records[j].id).value_or(0.0);
                ev.trades.push_back({records[j].id, w, trade, tc * std::abs(trade)});
            }
            std::sort(ev.trades.begin(), ev.trades.end(),
                      [](const Trade& a, const Trade& b) { return a.id < b.id; });
            cash = 0.0;
            value = after;
            path.rebalance_log.push_back(std::move(ev));
        } else {
            std::vector<std::size_t> dying;
            std::vector<std::size_t> survivors;
            for (auto j : held) {
                const auto& rec = records[j];
                (rec.delisted && rec.last_date() == t ? dying : survivors).push_back(j);
            }
            if (!dying.empty()) {
                RebalanceEvent ev;
                ev.date = t;
                ev.interim = true;
                ev.value_before = value;
                double proceeds = 0.0;
                for (auto j : dying) {
                    const double v = units[j] * prices.price(j, k);
                    proceeds += v;
                    ev.trades.push_back({records[j].id, 0.0, -v, tc * v});
                    units[j] = 0.0;
                }
                double held_value = 0.0;
                for (auto j : survivors) held_value += units[j] * prices.price(j, k);
                const double traded = survivors.empty() ? proceeds : 2.0 * proceeds;
                ev.cost = tc * traded;
                ev.turnover = traded / value;
                if (survivors.empty()) {
                    cash += proceeds - ev.cost;
                } else {
                    const double reinvest = proceeds - ev.cost;
                    const double after = value - ev.cost;
                    for (auto j : survivors) {
                        const double p = prices.price(j, k);
                        const double h = units[j] * p;
                        const double buy = proceeds * h / held_value;
                        units[j] = (h + reinvest * h / held_value) / p;
                        ev.trades.push_back({records[j].id, units[j] * p / after, buy, tc * buy});
                    }
                }
                std::sort(ev.trades.begin(), ev.trades.end(),
                          [](const Trade& a, const Trade& b) { return a.id < b.id; });
                held = std::move(survivors);
                value -= ev.cost;
                path.rebalance_log.push_back(std::move(ev));
            }
        }
        if (!(value > 0.0) || !std::isfinite(value)) {
            throw NumericalError("backtest: non-positive portfolio value on " + t.iso());
        }
        path.values.dates.push_back(t);
        path.values.values.push_back(value);
    }
    return path;
}

} // namespace hwi
