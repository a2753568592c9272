#include "hwi/date.hpp"

#include "hwi/error.hpp"

#include <charconv>
#include <cstdio>

namespace hwi {

namespace {

using std::chrono::days;
using std::chrono::sys_days;
using std::chrono::year_month_day;

year_month_day ymd(Date d) { return year_month_day{sys_days{days{d.days()}}}; }

bool parse_field(std::string_view text, int& out) {
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, out);
    return ec == std::errc{} && ptr == end;
}

} // namespace

Date Date::from_ymd(int y, unsigned m, unsigned d) {
    const year_month_day value{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!value.ok()) {
        throw DataError("invalid calendar date " + std::to_string(y) + "-" + std::to_string(m) + "-" +
                        std::to_string(d));
    }
    return Date(static_cast<std::int32_t>(sys_days{value}.time_since_epoch().count()));
}

Date Date::parse(std::string_view iso) {
    int y = 0;
    int m = 0;
    int d = 0;
    if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-' || !parse_field(iso.substr(0, 4), y) ||
        !parse_field(iso.substr(5, 2), m) || !parse_field(iso.substr(8, 2), d) || m < 1 || d < 1) {
        throw DataError("expected ISO-8601 date YYYY-MM-DD, got '" + std::string(iso) + "'");
    }
    return from_ymd(y, static_cast<unsigned>(m), static_cast<unsigned>(d));
}

int Date::year() const { return static_cast<int>(ymd(*this).year()); }
unsigned Date::month() const { return static_cast<unsigned>(ymd(*this).month()); }
unsigned Date::day() const { return static_cast<unsigned>(ymd(*this).day()); }

unsigned Date::weekday() const {
    return std::chrono::weekday{sys_days{std::chrono::days{days_}}}.c_encoding();
}

std::string Date::iso() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", year(), month(), day());
    return buf;
}

} // namespace hwi
