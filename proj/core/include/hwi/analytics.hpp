#pragma once

#include "hwi/date.hpp"
#include "hwi/series.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace hwi {

inline constexpr double kTradingDaysPerYear = 252.0;

/// Long-term growth rate (1/T) ln(V_end / V_start), T in 365.25-day years.
[[nodiscard]] double growth_rate(const Series& path, Date start, Date end);

struct PerfStats {
    std::size_t n_returns = 0;
    double gr = 0.0;
    double avg_return = 0.0;
    double risk_free_avg = 0.0;
    double risk_premium = 0.0;
    double volatility = 0.0;
    std::optional<double> sharpe; // absent when volatility is zero
    double var95 = 0.0;
    double es95 = 0.0;
    double avg_drawdown = 0.0;
    std::optional<double> avg_recovery_days; // absent when no episode recovers
    std::size_t drawdown_episodes = 0;
};

/// Statistics over the whole path. `risk_free` holds annualized short rates
/// on (at least) every return date except the first path date.
[[nodiscard]] PerfStats perf_stats(const Series& path, const Series& risk_free);

/// Lower-interpolation empirical quantile: sorted[floor(q (n-1))].
[[nodiscard]] double lower_quantile(std::span<const double> values, double q);

struct DrawdownSummary {
    double avg_drawdown = 0.0;
    std::optional<double> avg_recovery_days;
    std::size_t episodes = 0;
};

/// Episodes are maximal runs strictly below the running maximum. The average
/// drawdown is taken over all days in episodes; recovery counts trading days
/// from an episode's trough to its first value at or above the prior maximum.
[[nodiscard]] DrawdownSummary drawdowns(std::span<const double> values);

struct GrDiffReport {
    double window_years = 0.0;
    std::size_t windows = 0;
    double mean = 0.0;
    double standard_error = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    double confidence = 0.0;
    /// Bartlett bandwidth over the number of windows.
    double bandwidth_ratio = 0.0;
    /// Degrees of freedom of the t reference used for the interval.
    double degrees_of_freedom = 0.0;
};

/// Mean GR(a) - GR(b) over all daily-rolling windows of `window_years`.
/// The standard error uses a Bartlett-weighted long-run variance with
/// bandwidth eight times the window length in observations. With that few
/// effective windows the estimate is inflated by its fixed-bandwidth mean
/// 1 - b + b^2/3 and the interval uses a t reference with 3 / (2b) degrees of
/// freedom, b = bandwidth / windows.
[[nodiscard]] GrDiffReport gr_difference(const Series& a, const Series& b, double window_years,
                                         double confidence);

/// Fraction of rolling windows of `horizon_years` with total return of a
/// strictly above that of b.
[[nodiscard]] double outperformance_frequency(const Series& a, const Series& b, double horizon_years);

/// GR over every trailing window ending at each date with at least
/// `window_years` of history (plot data).
[[nodiscard]] Series rolling_growth_rate(const Series& path, double window_years);

/// GR from the first date to each later date (plot data).
[[nodiscard]] Series expanding_growth_rate(const Series& path);

} // namespace hwi
