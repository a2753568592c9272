#include "hwi/market_data.hpp"

#include "hwi/csv.hpp"
#include "hwi/error.hpp"

#include <algorithm>
#include <unordered_map>

namespace hwi {

std::string_view to_string(IndustrialLevel level) {
    switch (level) {
    case IndustrialLevel::Subsector: return "subsector";
    case IndustrialLevel::Sector: return "sector";
    case IndustrialLevel::Supersector: return "supersector";
    }
    return "sector";
}

IndustrialLevel parse_industrial_level(std::string_view text) {
    if (text == "subsector") return IndustrialLevel::Subsector;
    if (text == "sector") return IndustrialLevel::Sector;
    if (text == "supersector") return IndustrialLevel::Supersector;
    throw DataError("unknown industrial level '" + std::string(text) + "'");
}

const std::string& Classification::industry(IndustrialLevel level) const {
    switch (level) {
    case IndustrialLevel::Subsector: return subsector;
    case IndustrialLevel::Sector: return sector;
    case IndustrialLevel::Supersector: return supersector;
    }
    return sector;
}

std::optional<std::size_t> StockRecord::observation_at_or_before(Date d) const {
    if (!alive_at(d)) return std::nullopt;
    const auto it = std::upper_bound(dates.begin(), dates.end(), d);
    return static_cast<std::size_t>(it - dates.begin()) - 1;
}

IndustrialLevel classify_country(std::size_t available_count) {
    if (available_count > 900) return IndustrialLevel::Subsector;
    if (available_count >= 80) return IndustrialLevel::Sector;
    return IndustrialLevel::Supersector;
}

std::size_t trailing_repeat_cut(std::span<const double> prices) {
    const std::size_t n = prices.size();
    if (n < 2) return n;
    std::size_t run_start = n - 1;
    while (run_start > 0 && prices[run_start - 1] == prices[n - 1]) --run_start;
    return std::max(run_start + 1, std::size_t{2});
}

std::vector<Date> read_calendar(const std::string& path) {
    const auto table = csv::read_file(path);
    const auto col = table.column("date");
    std::vector<Date> dates;
    dates.reserve(table.rows.size());
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        Date d;
        try {
            d = Date::parse(table.rows[i][col]);
        } catch (const DataError& e) {
            throw DataError(path + ":" + std::to_string(table.line_numbers[i]) + ": " + e.what());
        }
        if (!dates.empty() && !(dates.back() < d)) {
            throw DataError(path + ":" + std::to_string(table.line_numbers[i]) +
                            ": calendar must be strictly increasing");
        }
        dates.push_back(d);
    }
    if (dates.empty()) throw DataError(path + ": calendar is empty");
    return dates;
}

std::vector<CountryPolicy> read_policies(const std::string& path) {
    const auto table = csv::read_file(path);
    const auto c_country = table.column("country");
    const auto c_base = table.column("base_date");
    const auto c_max = table.column("max_stocks");
    const auto c_level = table.column("industrial_level");
    std::vector<CountryPolicy> out;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        const auto where = path + ":" + std::to_string(table.line_numbers[i]) + ": ";
        CountryPolicy p;
        p.country = row[c_country];
        if (p.country.empty()) throw DataError(where + "empty country code");
        try {
            p.base_date = Date::parse(row[c_base]);
            if (row[c_level] != "auto") p.industrial_level = parse_industrial_level(row[c_level]);
        } catch (const DataError& e) {
            throw DataError(where + e.what());
        }
        const auto max_stocks = csv::parse_int(row[c_max], table, i);
        if (max_stocks < 1) throw DataError(where + "max_stocks must be positive");
        p.max_stocks = static_cast<std::size_t>(max_stocks);
        for (const auto& q : out) {
            if (q.country == p.country) throw DataError(where + "duplicate policy for " + p.country);
        }
        out.push_back(std::move(p));
    }
    return out;
}

std::map<std::string, Classification> read_classification(const std::string& path) {
    const auto table = csv::read_file(path);
    const auto c_id = table.column("stock_id");
    const auto c_region = table.column("region");
    const auto c_country = table.column("country");
    const auto c_super = table.column("supersector");
    const auto c_sector = table.column("sector");
    const auto c_sub = table.column("subsector");
    std::map<std::string, Classification> out;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        if (row[c_id].empty()) {
            throw DataError(path + ":" + std::to_string(table.line_numbers[i]) + ": empty stock_id");
        }
        Classification c{row[c_region], row[c_country], row[c_super], row[c_sector], row[c_sub]};
        if (!out.emplace(row[c_id], std::move(c)).second) {
            throw DataError(path + ":" + std::to_string(table.line_numbers[i]) + ": duplicate stock_id " +
                            row[c_id]);
        }
    }
    return out;
}

IngestResult assemble_records(std::vector<PriceRow> rows, const std::map<std::string, Classification>& classes,
                              std::span<const Date> calendar) {
    for (std::size_t i = 1; i < calendar.size(); ++i) {
        if (!(calendar[i - 1] < calendar[i])) throw UsageError("calendar must be strictly increasing");
    }
    std::stable_sort(rows.begin(), rows.end(), [](const PriceRow& a, const PriceRow& b) {
        return a.stock_id != b.stock_id ? a.stock_id < b.stock_id : a.date < b.date;
    });

    IngestResult result;
    std::size_t i = 0;
    while (i < rows.size()) {
        std::size_t j = i;
        while (j < rows.size() && rows[j].stock_id == rows[i].stock_id) ++j;
        const std::string& id = rows[i].stock_id;

        const auto cls = classes.find(id);
        if (cls == classes.end()) {
            result.rejections.push_back({id, "no classification entry"});
            i = j;
            continue;
        }

        StockRecord rec;
        rec.id = id;
        rec.classification = cls->second;
        std::string problem;
        for (std::size_t k = i; k < j && problem.empty(); ++k) {
            const auto& row = rows[k];
            const auto it = std::lower_bound(calendar.begin(), calendar.end(), row.date);
            if (it == calendar.end() || *it != row.date) {
                throw DataError("stock " + id + ": " + row.date.iso() + " is not a trading date");
            }
            if (!rec.dates.empty() && rec.dates.back() == row.date) {
                problem = "duplicate observation on " + row.date.iso();
            } else if (!(row.price > 0.0)) {
                problem = "non-positive price on " + row.date.iso();
            } else if (!(row.market_value >= 0.0)) {
                problem = "negative market value on " + row.date.iso();
            }
            rec.dates.push_back(row.date);
            rec.calendar_index.push_back(static_cast<std::size_t>(it - calendar.begin()));
            rec.prices.push_back(row.price);
            rec.market_values.push_back(row.market_value);
        }
        i = j;
        if (!problem.empty()) {
            result.rejections.push_back({id, problem});
            continue;
        }

        const std::size_t keep = trailing_repeat_cut(rec.prices);
        rec.dates.resize(keep);
        rec.calendar_index.resize(keep);
        rec.prices.resize(keep);
        rec.market_values.resize(keep);
        if (rec.prices.size() < 2) {
            result.rejections.push_back({id, "fewer than 2 valid prices"});
            continue;
        }
        rec.delisted = rec.calendar_index.back() + 1 < calendar.size();
        result.records.push_back(std::move(rec));
    }
    return result;
}

IngestResult ingest_panel(const PanelFiles& files, std::span<const Date> calendar) {
    if (calendar.empty()) throw UsageError("calendar is empty");
    const auto classes = read_classification(files.classification);
    const auto table = csv::read_file(files.prices);
    const auto c_id = table.column("stock_id");
    const auto c_date = table.column("date");
    const auto c_price = table.column("price");
    const auto c_mv = table.column("market_value");

    std::vector<PriceRow> rows;
    rows.reserve(table.rows.size());
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        const auto where = files.prices + ":" + std::to_string(table.line_numbers[i]) + ": ";
        if (row[c_id].empty()) throw DataError(where + "empty stock_id");
        PriceRow pr;
        pr.stock_id = row[c_id];
        try {
            pr.date = Date::parse(row[c_date]);
        } catch (const DataError& e) {
            throw DataError(where + e.what());
        }
        if (!std::binary_search(calendar.begin(), calendar.end(), pr.date)) {
            throw DataError(where + pr.date.iso() + " is not in the trading calendar");
        }
        pr.price = csv::parse_double(row[c_price], table, i);
        pr.market_value = csv::parse_double(row[c_mv], table, i);
        rows.push_back(std::move(pr));
    }
    return assemble_records(std::move(rows), classes, calendar);
}

std::size_t CountryNode::stock_count() const {
    std::size_t n = 0;
    for (const auto& g : groups) n += g.members.size();
    return n;
}

std::size_t RegionNode::stock_count() const {
    std::size_t n = 0;
    for (const auto& c : countries) n += c.stock_count();
    return n;
}

std::size_t HierarchyTree::stock_count() const {
    std::size_t n = 0;
    for (const auto& r : regions) n += r.stock_count();
    return n;
}

std::string HierarchyTree::serialize() const {
    std::string out = "snapshot " + snapshot_date.iso() + "\n";
    for (const auto& r : regions) {
        for (const auto& c : r.countries) {
            for (const auto& g : c.groups) {
                for (auto m : g.members) {
                    out += r.code + "/" + c.code + "/" + std::string(to_string(c.level)) + ":" + g.code + "/" +
                           members[m].id + "\n";
                }
            }
        }
    }
    return out;
}

HierarchyTree build_hierarchy(std::span<const StockRecord> records, std::span<const CountryPolicy> policies,
                              Date date) {
    std::unordered_map<std::string, const CountryPolicy*> by_country;
    for (const auto& p : policies) by_country.emplace(p.country, &p);

    // Candidates per country, before the size cap.
    std::map<std::string, std::vector<Member>> candidates;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& rec = records[i];
        if (!rec.alive_at(date)) continue;
        if (rec.delisted && rec.last_date() == date) continue; // sold by the death rule today
        const auto pol = by_country.find(rec.classification.country);
        if (pol == by_country.end()) {
            throw DataError("stock " + rec.id + ": country '" + rec.classification.country + "' has no policy");
        }
        if (date < pol->second->base_date) continue;
        const auto obs = rec.observation_at_or_before(date);
        Member m;
        m.id = rec.id;
        m.classification = rec.classification;
        m.market_value = rec.market_values[*obs];
        m.record = i;
        candidates[rec.classification.country].push_back(std::move(m));
    }

    HierarchyTree tree;
    tree.snapshot_date = date;
    std::map<std::string, IndustrialLevel> level_of;
    for (auto& [country, list] : candidates) {
        const auto& pol = *by_country.at(country);
        std::sort(list.begin(), list.end(), [](const Member& a, const Member& b) {
            return a.market_value != b.market_value ? a.market_value > b.market_value : a.id < b.id;
        });
        if (list.size() > pol.max_stocks) list.resize(pol.max_stocks);
        const auto level = pol.industrial_level.value_or(classify_country(list.size()));
        level_of[country] = level;
        for (auto& m : list) {
            if (m.classification.region.empty()) throw DataError("stock " + m.id + ": empty region code");
            m.industry = m.classification.industry(level);
            if (m.industry.empty()) {
                throw DataError("stock " + m.id + ": empty " + std::string(to_string(level)) + " code");
            }
            tree.members.push_back(std::move(m));
        }
    }
    std::sort(tree.members.begin(), tree.members.end(),
              [](const Member& a, const Member& b) { return a.id < b.id; });

    std::map<std::string, std::map<std::string, std::map<std::string, std::vector<std::size_t>>>> nested;
    for (std::size_t k = 0; k < tree.members.size(); ++k) {
        const auto& m = tree.members[k];
        nested[m.classification.region][m.classification.country][m.industry].push_back(k);
    }
    for (auto& [region, countries] : nested) {
        RegionNode rn{region, {}};
        for (auto& [country, groups] : countries) {
            CountryNode cn{country, level_of.at(country), {}};
            for (auto& [code, members] : groups) cn.groups.push_back({code, std::move(members)});
            rn.countries.push_back(std::move(cn));
        }
        tree.regions.push_back(std::move(rn));
    }
    return tree;
}

} // namespace hwi
