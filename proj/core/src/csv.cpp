#include "hwi/csv.hpp"

#include "hwi/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <sstream>

namespace hwi::csv {

namespace {

std::vector<std::string> split_line(const std::string& line, const std::string& source, std::size_t lineno) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else {
            field.push_back(c);
        }
    }
    if (quoted) throw DataError(source + ":" + std::to_string(lineno) + ": unterminated quoted field");
    fields.push_back(std::move(field));
    for (auto& f : fields) {
        const auto first = f.find_first_not_of(" \t");
        const auto last = f.find_last_not_of(" \t");
        f = first == std::string::npos ? std::string{} : f.substr(first, last - first + 1);
    }
    return fields;
}

} // namespace

std::size_t Table::column(std::string_view name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError(source + ": missing column '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - header.begin());
}

bool Table::has_column(std::string_view name) const {
    return std::find(header.begin(), header.end(), name) != header.end();
}

Table read_stream(std::istream& in, std::string source) {
    Table table;
    table.source = std::move(source);
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        auto fields = split_line(line, table.source, lineno);
        if (!have_header) {
            table.header = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != table.header.size()) {
            throw DataError(table.source + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(table.header.size()) + " fields, found " +
                            std::to_string(fields.size()));
        }
        table.rows.push_back(std::move(fields));
        table.line_numbers.push_back(lineno);
    }
    if (!have_header) throw DataError(table.source + ": empty file (header row required)");
    return table;
}

Table read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    return read_stream(in, path);
}

double parse_double(std::string_view text, const Table& table, std::size_t row) {
    double value = 0.0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (text.empty() || ec != std::errc{} || ptr != end || !std::isfinite(value)) {
        throw DataError(table.source + ":" + std::to_string(table.line_numbers.at(row)) +
                        ": not a finite number: '" + std::string(text) + "'");
    }
    return value;
}

long long parse_int(std::string_view text, const Table& table, std::size_t row) {
    long long value = 0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (text.empty() || ec != std::errc{} || ptr != end) {
        throw DataError(table.source + ":" + std::to_string(table.line_numbers.at(row)) +
                        ": not an integer: '" + std::string(text) + "'");
    }
    return value;
}

std::string format_double(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    if (ec != std::errc{}) return "nan";
    return std::string(buf, ptr);
}

std::string escape(std::string_view field) {
    if (field.find_first_of(",\"\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

} // namespace hwi::csv
