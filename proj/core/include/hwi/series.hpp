#pragma once

#include "hwi/date.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace hwi {

/// Date-indexed real series with strictly increasing dates.
struct Series {
    std::vector<Date> dates;
    std::vector<double> values;

    [[nodiscard]] std::size_t size() const { return dates.size(); }
    [[nodiscard]] bool empty() const { return dates.empty(); }
    /// Index of `d`, or npos.
    [[nodiscard]] std::size_t find(Date d) const;
    /// Throws DataError when sizes differ or dates are not strictly increasing.
    void validate(const std::string& what) const;

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

/// Simple returns v[i+1]/v[i] - 1.
[[nodiscard]] std::vector<double> simple_returns(std::span<const double> values);

} // namespace hwi
