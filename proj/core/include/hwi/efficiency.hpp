#pragma once

#include "hwi/market_data.hpp"
#include "hwi/series.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hwi {

/// Pooled daily annualized percentage returns (return x 252 x 100).
/// `segment_offsets` delimits the contribution of each security so that
/// resampling can stay within one security's series.
struct ReturnSample {
    std::string source;
    std::vector<double> observations;
    std::vector<std::size_t> segment_offsets{0};

    [[nodiscard]] std::size_t n() const { return observations.size(); }
    [[nodiscard]] std::size_t segments() const { return segment_offsets.size() - 1; }
    void append_segment(std::span<const double> values);
};

enum class TestMethod { Z, BlockBootstrap };

struct TestReport {
    std::string label;
    TestMethod method = TestMethod::Z;
    std::size_t n = 0;
    double sample_mean = 0.0;
    double standard_error = 0.0;
    double confidence = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double statistic = 0.0;
    double p_value = 0.0;
    // bootstrap only
    std::size_t replicates = 0;
    double mean_block_length = 0.0;
    double bootstrap_mean = 0.0;
    std::uint64_t seed = 0;
    std::vector<std::string> warnings;
};

inline constexpr double kAnnualizedPercent = 252.0 * 100.0;

/// Benchmarked returns of every stock over consecutive benchmark dates on
/// which the stock is observed, pooled into one sample.
[[nodiscard]] ReturnSample pool_benchmarked_returns(std::span<const StockRecord> records,
                                                    const Series& benchmark, std::string source);

/// One-sided Z-test of H0: mu <= 0 with a two-sided CI at `confidence`.
/// Throws NumericalError on zero variance.
[[nodiscard]] TestReport z_test_nonpositive_mean(const ReturnSample& sample, double confidence);

/// Same test from summary statistics.
[[nodiscard]] TestReport z_test_from_summary(double mean, double standard_error, std::size_t n,
                                             double confidence);

struct BootstrapOptions {
    std::size_t replicates = 1000;
    double mean_block_length = 20.0;
    double confidence = 0.99;
    std::uint64_t seed = 1;
    unsigned threads = 1;
};

/// Stationary bootstrap of the pooled mean. Block lengths are geometric with
/// mean `mean_block_length`; every block wraps circularly within its own
/// segment. The CI is the percentile interval of replicate means, the
/// statistic is the observed mean over the replicate standard deviation, and
/// p is the share of centered replicate means at or above the observed mean.
[[nodiscard]] TestReport block_bootstrap_test(const ReturnSample& sample, const BootstrapOptions& options);

/// Z-test on the benchmarked return series candidate / benchmark.
[[nodiscard]] TestReport index_vs_index_test(const Series& candidate, const Series& benchmark,
                                             double confidence, std::string label = {});

/// Standard normal CDF and quantile.
[[nodiscard]] double normal_cdf(double x);
[[nodiscard]] double normal_upper_tail(double x);
[[nodiscard]] double normal_quantile(double p);

} // namespace hwi
