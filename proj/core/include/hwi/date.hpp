#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace hwi {

/// Calendar date stored as days since 1970-01-01.
class Date {
public:
    constexpr Date() = default;
    constexpr explicit Date(std::int32_t days_since_epoch) : days_(days_since_epoch) {}

    static Date from_ymd(int year, unsigned month, unsigned day);
    /// Parses YYYY-MM-DD; throws DataError on anything else.
    static Date parse(std::string_view iso);

    [[nodiscard]] constexpr std::int32_t days() const { return days_; }
    [[nodiscard]] int year() const;
    [[nodiscard]] unsigned month() const;
    [[nodiscard]] unsigned day() const;
    /// 0 = Sunday ... 6 = Saturday.
    [[nodiscard]] unsigned weekday() const;
    [[nodiscard]] std::string iso() const;

    constexpr Date operator+(std::int32_t n) const { return Date(days_ + n); }
    constexpr std::int32_t operator-(Date other) const { return days_ - other.days_; }
    constexpr auto operator<=>(const Date&) const = default;

private:
    std::int32_t days_ = 0;
};

/// Year fraction between two dates on the 365.25-day convention.
[[nodiscard]] inline double year_fraction(Date from, Date to) {
    return static_cast<double>(to - from) / 365.25;
}

} // namespace hwi
