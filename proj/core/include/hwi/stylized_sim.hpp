#pragma once

#include "hwi/date.hpp"
#include "hwi/efficiency.hpp"
#include "hwi/gp_core.hpp"
#include "hwi/market_data.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hwi {

/// Scalar coefficient process for theta, gamma or r.
///
/// MeanReverting is a log-Ornstein-Uhlenbeck process
///   d ln x = speed (ln level - ln x) dt + vol dB,   x_0 = initial,
/// sampled exactly on the simulation grid, so it stays positive.
/// Piecewise holds values[i] from times[i] (years) until times[i+1].
struct ProcessSpec {
    enum class Kind { Constant, MeanReverting, Piecewise };
    Kind kind = Kind::Constant;
    double value = 0.0;
    double initial = 0.0;
    double speed = 0.0;
    double level = 0.0;
    double vol = 0.0;
    std::vector<double> times;
    std::vector<double> values;

    static ProcessSpec constant(double v);
    static ProcessSpec mean_reverting(double initial, double speed, double level, double vol);
    void validate(const std::string& name, bool strictly_positive) const;
};

enum class Integrator { LogEuler, Euler, Milstein };

/// Node layout of a regular-depth hierarchy whose deepest level holds the
/// stocks. Node ids are assigned level by level in lexicographic order, so
/// level h occupies [level_begin[h], level_begin[h + 1]).
class HierarchyShape {
public:
    /// counts[h] is either a single value used for every parent, or one value
    /// per node of level h - 1 (one value per root for h = 0).
    static HierarchyShape from_counts(const std::vector<std::vector<std::size_t>>& counts);

    [[nodiscard]] std::size_t depth() const { return level_begin_.size() - 1; }
    [[nodiscard]] std::size_t nodes() const { return parent_.size(); }
    [[nodiscard]] std::size_t stocks() const { return level_begin_.back() - level_begin_[depth() - 1]; }
    [[nodiscard]] std::size_t level_begin(std::size_t h) const { return level_begin_[h]; }
    [[nodiscard]] std::size_t level_of(std::size_t node) const { return level_[node]; }
    [[nodiscard]] std::size_t parent(std::size_t node) const { return parent_[node]; }
    [[nodiscard]] std::size_t child_count(std::size_t node) const { return child_count_[node]; }
    [[nodiscard]] std::size_t descendant_stocks(std::size_t node) const { return descendants_[node]; }
    [[nodiscard]] std::size_t roots() const { return level_begin_[1]; }
    /// Product of 1/(group sizes) from the root down to `node`.
    [[nodiscard]] double hwi_weight(std::size_t node) const { return weight_[node]; }
    /// Ancestors of stock j, outermost first, the stock's own node last.
    [[nodiscard]] std::span<const std::size_t> path(std::size_t stock) const;
    /// Label such as "R1.C2.G3.S4" (1-based positions within each parent).
    [[nodiscard]] std::string label(std::size_t node) const;
    /// N x K 0/1 matrix: entry (j, k) is one when node k is on stock j's path.
    [[nodiscard]] Eigen::MatrixXd incidence() const;
    [[nodiscard]] bool symmetric() const;

private:
    std::vector<std::size_t> level_begin_;
    std::vector<std::size_t> level_;
    std::vector<std::size_t> parent_;
    std::vector<std::size_t> child_count_;
    std::vector<std::size_t> descendants_;
    std::vector<std::size_t> position_;
    std::vector<double> weight_;
    std::vector<std::size_t> paths_; // stocks x depth
};

struct SimConfig {
    std::vector<std::vector<std::size_t>> group_counts;
    ProcessSpec theta = ProcessSpec::mean_reverting(0.2, 2.0, 0.2, 0.3);
    ProcessSpec gamma = ProcessSpec::mean_reverting(2.0, 1.0, 2.0, 0.2);
    ProcessSpec r = ProcessSpec::mean_reverting(0.03, 0.5, 0.03, 0.2);
    double dt = 1.0 / 252.0;
    double horizon = 10.0;
    std::uint64_t seed = 1;
    std::size_t n_paths = 1;
    Integrator integrator = Integrator::LogEuler;
    /// Brownian increments are drawn on a grid of dt / 2^refinement and summed,
    /// so configs differing only in (dt, refinement) share one Brownian path.
    unsigned brownian_refinement = 0;
    bool keep_drivers = false;
    double s0 = 1.0;
    double shares_outstanding = 1.0e6;
    Date start_date = Date::from_ymd(2000, 1, 3);

    [[nodiscard]] std::size_t steps() const;
    /// Throws UsageError on invalid settings.
    void validate() const;
    /// Scaled-down version of the developed-market layout: 3 regions with
    /// 2, 5 and 16 countries, 3 groups per country, 5 stocks per group.
    static SimConfig developed_market_shape();
};

/// Stylized hierarchical market coefficients at one instant: every stock has
/// drift r + H theta^2 / gamma and loading theta / gamma on each driver along
/// its path.
[[nodiscard]] MarketCoefficients stylized_coefficients(const HierarchyShape& shape, double theta,
                                                       double gamma, double r);

/// Diffusion loadings of every stock benchmarked by the HWI:
/// (theta / gamma) (1{k on path of j} - w_HWI(k)), an N x K matrix.
[[nodiscard]] Eigen::MatrixXd hwi_benchmarked_loadings(const HierarchyShape& shape, double theta,
                                                       double gamma);

struct SimPanel {
    HierarchyShape shape;
    std::size_t path_index = 0;
    double dt = 0.0;
    std::vector<double> times;
    /// (steps + 1) x N, row-major by time.
    std::vector<double> stock_values;
    std::vector<double> hwi;
    std::vector<double> gp;
    /// Coefficients frozen over step i (size steps).
    std::vector<double> theta_path;
    std::vector<double> gamma_path;
    std::vector<double> r_path;
    /// steps x K driver increments when requested.
    std::vector<double> drivers;
    /// GP of the stylized market for theta / gamma = 1 and a = 0; the GP at
    /// any instant follows by rescaling (pi* depends on the shape only).
    GpSolution gp_unit;
    std::size_t fallback_steps = 0;

    [[nodiscard]] std::size_t steps() const { return times.size() - 1; }
    [[nodiscard]] double value(std::size_t step, std::size_t stock) const {
        return stock_values[step * shape.stocks() + stock];
    }
};

/// Simulates one path of the stylized market together with the HWI (from
/// its own SDE, same drivers) and the GP (solved by solve_gp and integrated
/// exactly over each step with frozen coefficients).
[[nodiscard]] SimPanel simulate_panel(const SimConfig& config, std::size_t path_index = 0);

/// Weekday trading calendar of `steps + 1` dates from `start`.
[[nodiscard]] std::vector<Date> weekday_calendar(Date start, std::size_t count);

struct PanelExport {
    std::vector<Date> calendar;
    std::vector<PriceRow> rows;
    std::map<std::string, Classification> classification;
    std::vector<CountryPolicy> policies;
    Series hwi;
    Series gp;
};

/// Maps a simulated panel onto the market-data schema: level 1 -> region,
/// level 2 -> country, level 3 -> industrial group (all ICB codes), with
/// market value = price x shares outstanding.
[[nodiscard]] PanelExport export_panel(const SimPanel& panel, const SimConfig& config);

struct DriftlessReport {
    TestReport pooled;
    std::vector<TestReport> per_stock;
    double max_abs_stock_statistic = 0.0;
    /// Largest deviation of regression-estimated loadings from the closed form,
    /// present when drivers were retained and coefficients are constant.
    std::optional<double> max_loading_error;
    std::optional<double> loading_tolerance;
};

/// Benchmarks every simulated stock by the simulated HWI and tests the
/// benchmarked mean returns (per stock and pooled).
[[nodiscard]] DriftlessReport verify_driftless(const SimPanel& panel, double confidence = 0.99);

/// Time derivative of the quadratic variation of a benchmarked portfolio:
/// sum over drivers k of (sum_j pi_j psi_{j,k})^2.
[[nodiscard]] double benchmarked_qv_rate(std::span<const double> weights, const Eigen::MatrixXd& loadings);

enum class WeightFamily { EWI, HWI, Concentrated };

struct ScanConfig {
    WeightFamily family = WeightFamily::EWI;
    /// Exponent of the max-weight condition; Concentrated spreads weight over
    /// the first ceil(M^(H - xi)) stocks.
    double xi = 0.0;
    /// Constant of the max-weight condition; defaults to the family's own.
    std::optional<double> c;
    std::size_t depth = 3;
    std::size_t k_low = 1;
    std::size_t k_high = 2;
    /// Loadings on each driver along a stock's path are drawn from U(0, sigma).
    double sigma = 0.2;
    std::size_t draws = 4;
    std::uint64_t seed = 1;
    std::vector<std::size_t> m_list{2, 4, 8, 16, 32};
    unsigned threads = 1;
};

struct ScanPoint {
    std::size_t m = 0;
    std::vector<double> estimates; // per draw
    std::vector<double> bounds;    // per draw
    std::vector<std::size_t> stocks;
    double mean_estimate = 0.0;
    double mean_bound = 0.0;
    double max_weight = 0.0;
    bool within_bound = true;
};

struct DiversificationScanResult {
    WeightFamily family = WeightFamily::EWI;
    double xi = 0.0;
    double c = 0.0;
    std::vector<ScanPoint> points;
    double fitted_slope = 0.0;
    double theoretical_slope = 0.0; // 2 xi - 1
    [[nodiscard]] bool all_within_bound() const;
};

[[nodiscard]] DiversificationScanResult diversification_scan(const ScanConfig& config);

[[nodiscard]] std::string to_string(WeightFamily family);
[[nodiscard]] WeightFamily parse_weight_family(const std::string& text);
[[nodiscard]] std::string to_string(Integrator integrator);
[[nodiscard]] Integrator parse_integrator(const std::string& text);

} // namespace hwi
