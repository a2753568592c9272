#pragma once

#include "hwi/date.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hwi {

enum class IndustrialLevel { Subsector, Sector, Supersector };

[[nodiscard]] std::string_view to_string(IndustrialLevel level);
[[nodiscard]] IndustrialLevel parse_industrial_level(std::string_view text);

struct Classification {
    std::string region;
    std::string country;
    std::string supersector;
    std::string sector;
    std::string subsector;

    [[nodiscard]] const std::string& industry(IndustrialLevel level) const;
};

/// One stock's cum-dividend price and market-value observations.
///
/// Observations are sparse over the trading calendar; `calendar_index`
/// holds each observation's position in the calendar used at ingestion.
/// Prices are strictly positive and the trailing run of repeated prices
/// left by a delisting has been stripped.
struct StockRecord {
    std::string id;
    Classification classification;
    std::vector<Date> dates;
    std::vector<std::size_t> calendar_index;
    std::vector<double> prices;
    std::vector<double> market_values;
    /// True when the series ends before the calendar does.
    bool delisted = false;

    [[nodiscard]] Date first_date() const { return dates.front(); }
    [[nodiscard]] Date last_date() const { return dates.back(); }
    [[nodiscard]] bool alive_at(Date d) const { return !dates.empty() && d >= first_date() && d <= last_date(); }
    /// Last observation at or before `d` within the alive interval.
    [[nodiscard]] std::optional<std::size_t> observation_at_or_before(Date d) const;
};

struct CountryPolicy {
    std::string country;
    Date base_date;
    std::size_t max_stocks = 0;
    /// Empty means "auto": resolved per snapshot via classify_country.
    std::optional<IndustrialLevel> industrial_level;
};

/// Industrial grouping level from the number of stocks a country makes available.
[[nodiscard]] IndustrialLevel classify_country(std::size_t available_count);

struct Rejection {
    std::string stock_id;
    std::string reason;
};

struct PanelFiles {
    std::string prices;
    std::string classification;
};

struct IngestResult {
    std::vector<StockRecord> records;
    std::vector<Rejection> rejections;
};

/// Maximal trailing run of equal prices collapsed to its first element,
/// never shortening the series below two observations.
[[nodiscard]] std::size_t trailing_repeat_cut(std::span<const double> prices);

[[nodiscard]] std::vector<Date> read_calendar(const std::string& path);
[[nodiscard]] std::vector<CountryPolicy> read_policies(const std::string& path);
[[nodiscard]] std::map<std::string, Classification> read_classification(const std::string& path);

/// Loads and validates a panel. Malformed rows throw DataError carrying the
/// file and line; record-level problems land in `rejections`.
[[nodiscard]] IngestResult ingest_panel(const PanelFiles& files, std::span<const Date> calendar);

/// Same validation on an in-memory table of observations; used by file
/// ingestion and by simulated panels.
struct PriceRow {
    std::string stock_id;
    Date date;
    double price = 0.0;
    double market_value = 0.0;
};
[[nodiscard]] IngestResult assemble_records(std::vector<PriceRow> rows,
                                            const std::map<std::string, Classification>& classes,
                                            std::span<const Date> calendar);

/// A stock selected into the universe at a snapshot date.
struct Member {
    std::string id;
    Classification classification;
    /// Code of the country's industrial grouping at this snapshot.
    std::string industry;
    double market_value = 0.0;
    /// Position in the record list passed to build_hierarchy.
    std::size_t record = 0;
};

struct IndustryGroup {
    std::string code;
    std::vector<std::size_t> members; // indices into HierarchyTree::members
};

struct CountryNode {
    std::string code;
    IndustrialLevel level = IndustrialLevel::Sector;
    std::vector<IndustryGroup> groups;
    [[nodiscard]] std::size_t stock_count() const;
};

struct RegionNode {
    std::string code;
    std::vector<CountryNode> countries;
    [[nodiscard]] std::size_t stock_count() const;
};

/// Region -> country -> industrial group -> stock snapshot. Immutable after
/// construction; nodes and members are sorted by code / id.
struct HierarchyTree {
    Date snapshot_date;
    std::vector<Member> members; // sorted by id
    std::vector<RegionNode> regions;

    /// N_t: the quadruple sum of leaf counts.
    [[nodiscard]] std::size_t stock_count() const;
    /// Deterministic text serialization (one line per leaf member).
    [[nodiscard]] std::string serialize() const;
};

/// Selects the universe at `date` and builds the nested grouping. Throws
/// DataError naming the stock when its country has no policy or a required
/// classification code is empty.
[[nodiscard]] HierarchyTree build_hierarchy(std::span<const StockRecord> records,
                                            std::span<const CountryPolicy> policies,
                                            Date date);

} // namespace hwi
