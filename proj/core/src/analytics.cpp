#include "hwi/analytics.hpp"

#include "hwi/efficiency.hpp"
#include "hwi/error.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace hwi {

namespace {

void require_positive(const Series& path, const char* what) {
    for (std::size_t i = 0; i < path.size(); ++i) {
        if (!(path.values[i] > 0.0) || !std::isfinite(path.values[i])) {
            throw DataError(std::string(what) + ": non-positive value on " + path.dates[i].iso());
        }
    }
}

void require_same_calendar(const Series& a, const Series& b, const char* what) {
    if (a.dates != b.dates) throw DataError(std::string(what) + ": paths are not on the same calendar");
}

/// End index of the window starting at i: the first j with T(i, j) >= years.
std::size_t window_end(const std::vector<Date>& dates, std::size_t i, double years) {
    std::size_t j = i + 1;
    while (j < dates.size() && year_fraction(dates[i], dates[j]) < years) ++j;
    return j;
}

double mean_of(std::span<const double> x) {
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

} // namespace

double growth_rate(const Series& path, Date start, Date end) {
    const auto i = path.find(start);
    const auto j = path.find(end);
    if (i == Series::npos || j == Series::npos) {
        throw DataError("growth_rate: " + (i == Series::npos ? start : end).iso() + " is not on the path");
    }
    if (!(start < end)) throw UsageError("growth_rate: start must precede end");
    const double v0 = path.values[i];
    const double v1 = path.values[j];
    if (!(v0 > 0.0) || !(v1 > 0.0)) throw DataError("growth_rate: non-positive value");
    return std::log(v1 / v0) / year_fraction(start, end);
}

double lower_quantile(std::span<const double> values, double q) {
    if (values.empty()) throw UsageError("lower_quantile: empty input");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const auto k = static_cast<std::size_t>(std::floor(q * static_cast<double>(sorted.size() - 1)));
    return sorted[std::min(k, sorted.size() - 1)];
}

DrawdownSummary drawdowns(std::span<const double> values) {
    DrawdownSummary out;
    if (values.empty()) return out;
    double peak = values[0];
    double dd_sum = 0.0;
    std::size_t dd_days = 0;
    double recovery_sum = 0.0;
    std::size_t recovered = 0;
    bool in_episode = false;
    std::size_t trough = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] < peak) {
            if (!in_episode) {
                in_episode = true;
                trough = i;
                ++out.episodes;
            } else if (values[i] < values[trough]) {
                trough = i;
            }
            dd_sum += 1.0 - values[i] / peak;
            ++dd_days;
        } else {
            if (in_episode) {
                recovery_sum += static_cast<double>(i - trough);
                ++recovered;
                in_episode = false;
            }
            peak = values[i];
        }
    }
    if (dd_days > 0) out.avg_drawdown = dd_sum / static_cast<double>(dd_days);
    if (recovered > 0) out.avg_recovery_days = recovery_sum / static_cast<double>(recovered);
    return out;
}

PerfStats perf_stats(const Series& path, const Series& risk_free) {
    if (path.size() < 2) throw UsageError("perf_stats: path needs at least 2 points");
    require_positive(path, "perf_stats");
    const auto returns = simple_returns(path.values);

    std::vector<std::string> missing;
    double rf_sum = 0.0;
    std::size_t cursor = 0;
    for (std::size_t i = 1; i < path.size(); ++i) {
        const Date d = path.dates[i];
        while (cursor < risk_free.size() && risk_free.dates[cursor] < d) ++cursor;
        if (cursor < risk_free.size() && risk_free.dates[cursor] == d) {
            rf_sum += risk_free.values[cursor];
        } else {
            missing.push_back(d.iso());
        }
    }
    if (!missing.empty()) {
        std::string msg = "perf_stats: risk-free rate missing on " + std::to_string(missing.size()) + " date(s):";
        for (std::size_t k = 0; k < missing.size() && k < 10; ++k) msg += " " + missing[k];
        if (missing.size() > 10) msg += " ...";
        throw DataError(msg);
    }

    PerfStats s;
    s.n_returns = returns.size();
    s.gr = growth_rate(path, path.dates.front(), path.dates.back());
    const double mu = mean_of(returns);
    s.avg_return = mu * kTradingDaysPerYear;
    s.risk_free_avg = rf_sum / static_cast<double>(returns.size());
    s.risk_premium = s.avg_return - s.risk_free_avg;
    if (returns.size() > 1) {
        double ss = 0.0;
        for (double r : returns) ss += (r - mu) * (r - mu);
        s.volatility = std::sqrt(ss / static_cast<double>(returns.size() - 1)) * std::sqrt(kTradingDaysPerYear);
    }
    if (s.volatility > 1e-10) s.sharpe = s.risk_premium / s.volatility;
    s.var95 = lower_quantile(returns, 0.05);
    double tail = 0.0;
    std::size_t tail_n = 0;
    for (double r : returns) {
        if (r <= s.var95) {
            tail += r;
            ++tail_n;
        }
    }
    s.es95 = tail / static_cast<double>(tail_n);
    const auto dd = drawdowns(path.values);
    s.avg_drawdown = dd.avg_drawdown;
    s.avg_recovery_days = dd.avg_recovery_days;
    s.drawdown_episodes = dd.episodes;
    return s;
}

GrDiffReport gr_difference(const Series& a, const Series& b, double window_years, double confidence) {
    if (!(window_years > 0.0)) throw UsageError("gr_difference: window must be positive");
    if (!(confidence > 0.0 && confidence < 1.0)) throw UsageError("gr_difference: confidence must be in (0,1)");
    require_same_calendar(a, b, "gr_difference");
    require_positive(a, "gr_difference");
    require_positive(b, "gr_difference");

    std::vector<double> diffs;
    std::size_t span_obs = 0;
    for (std::size_t i = 0; i + 1 < a.size(); ++i) {
        const auto j = window_end(a.dates, i, window_years);
        if (j >= a.size()) break;
        const double t = year_fraction(a.dates[i], a.dates[j]);
        diffs.push_back((std::log(a.values[j] / a.values[i]) - std::log(b.values[j] / b.values[i])) / t);
        span_obs = std::max(span_obs, j - i);
    }
    if (diffs.empty()) throw DataError("gr_difference: common span is shorter than the window");

    GrDiffReport r;
    r.window_years = window_years;
    r.windows = diffs.size();
    r.confidence = confidence;
    r.mean = mean_of(diffs);

    // Bartlett long-run variance; overlapping windows are strongly autocorrelated.
    const std::size_t w = diffs.size();
    const std::size_t lag_max = std::min(8 * span_obs, w - 1);
    auto autocov = [&](std::size_t lag) {
        double s = 0.0;
        for (std::size_t t = lag; t < w; ++t) s += (diffs[t] - r.mean) * (diffs[t - lag] - r.mean);
        return s / static_cast<double>(w);
    };
    double lrv = autocov(0);
    for (std::size_t l = 1; l <= lag_max; ++l) {
        lrv += 2.0 * (1.0 - static_cast<double>(l) / static_cast<double>(lag_max + 1)) * autocov(l);
    }
    const double bw = static_cast<double>(lag_max + 1) / static_cast<double>(w);
    lrv /= 1.0 - bw + bw * bw / 3.0;
    r.bandwidth_ratio = bw;
    r.degrees_of_freedom = 1.5 / bw;
    r.standard_error = std::sqrt(std::max(lrv, 0.0) / static_cast<double>(w));
    const double z = boost::math::quantile(boost::math::students_t_distribution<double>(r.degrees_of_freedom),
                                           0.5 + confidence / 2.0);
    r.lower = r.mean - z * r.standard_error;
    r.upper = r.mean + z * r.standard_error;
    return r;
}

double outperformance_frequency(const Series& a, const Series& b, double horizon_years) {
    if (!(horizon_years > 0.0)) throw UsageError("outperformance_frequency: horizon must be positive");
    require_same_calendar(a, b, "outperformance_frequency");
    require_positive(a, "outperformance_frequency");
    require_positive(b, "outperformance_frequency");
    std::size_t windows = 0;
    std::size_t wins = 0;
    for (std::size_t i = 0; i + 1 < a.size(); ++i) {
        const auto j = window_end(a.dates, i, horizon_years);
        if (j >= a.size()) break;
        ++windows;
        if (a.values[j] / a.values[i] > b.values[j] / b.values[i]) ++wins;
    }
    if (windows == 0) throw DataError("outperformance_frequency: common span is shorter than the horizon");
    return static_cast<double>(wins) / static_cast<double>(windows);
}

Series rolling_growth_rate(const Series& path, double window_years) {
    if (!(window_years > 0.0)) throw UsageError("rolling_growth_rate: window must be positive");
    require_positive(path, "rolling_growth_rate");
    Series out;
    std::size_t i = 0;
    for (std::size_t j = 1; j < path.size(); ++j) {
        if (year_fraction(path.dates[0], path.dates[j]) < window_years) continue;
        // latest start that still leaves a full window
        while (i + 1 < j && year_fraction(path.dates[i + 1], path.dates[j]) >= window_years) ++i;
        out.dates.push_back(path.dates[j]);
        out.values.push_back(std::log(path.values[j] / path.values[i]) / year_fraction(path.dates[i], path.dates[j]));
    }
    return out;
}

Series expanding_growth_rate(const Series& path) {
    require_positive(path, "expanding_growth_rate");
    Series out;
    for (std::size_t j = 1; j < path.size(); ++j) {
        out.dates.push_back(path.dates[j]);
        out.values.push_back(std::log(path.values[j] / path.values[0]) / year_fraction(path.dates[0], path.dates[j]));
    }
    return out;
}

} // namespace hwi
