#include "hwi/series.hpp"

#include "hwi/error.hpp"

#include <algorithm>

namespace hwi {

std::size_t Series::find(Date d) const {
    const auto it = std::lower_bound(dates.begin(), dates.end(), d);
    if (it == dates.end() || *it != d) return npos;
    return static_cast<std::size_t>(it - dates.begin());
}

void Series::validate(const std::string& what) const {
    if (dates.size() != values.size()) throw DataError(what + ": dates and values differ in length");
    for (std::size_t i = 1; i < dates.size(); ++i) {
        if (!(dates[i - 1] < dates[i])) {
            throw DataError(what + ": dates not strictly increasing at " + dates[i].iso());
        }
    }
}

std::vector<double> simple_returns(std::span<const double> values) {
    std::vector<double> out;
    if (values.size() < 2) return out;
    out.reserve(values.size() - 1);
    for (std::size_t i = 1; i < values.size(); ++i) out.push_back(values[i] / values[i - 1] - 1.0);
    return out;
}

} // namespace hwi
