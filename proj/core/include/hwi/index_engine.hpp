#pragma once

#include "hwi/date.hpp"
#include "hwi/market_data.hpp"
#include "hwi/series.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hwi {

/// Grouping keys usable in a hierarchical scheme. `Industry` is the
/// country-specific grouping selected by the country's policy.
enum class GroupLevel { Region, Country, Industry, Supersector, Sector, Subsector };

[[nodiscard]] std::string_view to_string(GroupLevel level);
[[nodiscard]] GroupLevel parse_group_level(std::string_view text);

enum class SchemeKind { MCI, EWI, Hierarchical };

/// Weighting rule for an index. Hierarchical schemes equal-weight the
/// constituents of every group along `level_order` (outermost first) and
/// finally the stocks of the innermost group.
struct WeightScheme {
    SchemeKind kind = SchemeKind::EWI;
    std::vector<GroupLevel> level_order;
    std::string name;

    static WeightScheme mci();
    static WeightScheme ewi();
    static WeightScheme hierarchical(std::string name, std::vector<GroupLevel> levels);
    /// MCI, EWI, HWI, HWI.r, HWI.c.r, HWI.s, HWI.c.g, HWI.c.r.g, or
    /// custom:<level>,<level>,... ; throws UsageError otherwise.
    static WeightScheme parse(std::string_view text);
};

/// Display name; "-TC" is appended when transaction costs apply.
[[nodiscard]] std::string display_name(const WeightScheme& scheme, double tc_bps);

struct WeightEntry {
    std::string id;
    std::size_t record = 0;
    double weight = 0.0;
};

struct WeightVector {
    Date date;
    std::string scheme;
    std::vector<WeightEntry> entries; // sorted by id
    /// Stocks skipped by the scheme (e.g. zero market value).
    std::vector<std::string> excluded;

    [[nodiscard]] double sum() const;
    [[nodiscard]] std::optional<double> weight_of(std::string_view id) const;
};

[[nodiscard]] WeightVector mci_weights(const HierarchyTree& tree);
[[nodiscard]] WeightVector ewi_weights(const HierarchyTree& tree);
[[nodiscard]] WeightVector hwi_weights(const HierarchyTree& tree, const WeightScheme& scheme);
[[nodiscard]] WeightVector compute_weights(const HierarchyTree& tree, const WeightScheme& scheme);

/// First trading date of every calendar quarter on or after `base_date`,
/// with the first trading date at or after `base_date` as rebalance zero.
[[nodiscard]] std::vector<Date> rebalance_calendar(std::span<const Date> calendar, Date base_date);

struct Trade {
    std::string id;
    double weight = 0.0;      // target weight after the trade (0 when sold out)
    double trade_value = 0.0; // signed: positive buys
    double cost = 0.0;
};

struct RebalanceEvent {
    Date date;
    bool interim = false; // death-triggered repair trade
    double value_before = 0.0;
    double turnover = 0.0;
    double cost = 0.0;
    std::vector<Trade> trades;
};

/// Value path of a self-financing portfolio plus its rebalancing log.
struct IndexPath {
    std::string name;
    double tc_bps = 0.0;
    Series values;
    std::vector<RebalanceEvent> rebalance_log;
};

struct BacktestConfig {
    WeightScheme scheme;
    double tc_bps = 0.0;
    double v0 = 100.0;
    std::optional<Date> start;
    std::optional<Date> end;
};

/// Runs the rebalancing recursion: units are held fixed between rebalance
/// dates, costs of tc_bps per unit of traded value are deducted from the
/// portfolio, and stocks that delist between rebalances have their proceeds
/// spread over the surviving holdings in proportion to their values.
[[nodiscard]] IndexPath backtest(std::span<const StockRecord> records,
                                 std::span<const CountryPolicy> policies,
                                 std::span<const Date> calendar,
                                 const BacktestConfig& config);

} // namespace hwi
