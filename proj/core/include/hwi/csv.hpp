#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace hwi::csv {

/// A parsed CSV table. Rows keep their 1-based line numbers for error messages.
struct Table {
    std::string source;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;

    /// Column index by name; throws DataError naming the file if absent.
    [[nodiscard]] std::size_t column(std::string_view name) const;
    [[nodiscard]] bool has_column(std::string_view name) const;
};

/// Reads a comma-separated file with a mandatory header row. Double-quoted
/// fields are supported; blank lines are skipped.
[[nodiscard]] Table read_file(const std::string& path);
[[nodiscard]] Table read_stream(std::istream& in, std::string source);

[[nodiscard]] double parse_double(std::string_view text, const Table& table, std::size_t row);
[[nodiscard]] long long parse_int(std::string_view text, const Table& table, std::size_t row);

/// Shortest round-trip decimal representation, locale independent.
[[nodiscard]] std::string format_double(double value);

/// Quotes a field only when it contains a comma, quote or newline.
[[nodiscard]] std::string escape(std::string_view field);

} // namespace hwi::csv
