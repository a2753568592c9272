#include "hwi/efficiency.hpp"

#include "hwi/error.hpp"
#include "hwi/gp_core.hpp"
#include "hwi/parallel.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace hwi {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_upper_tail(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw UsageError("normal_quantile: probability must be in (0,1)");
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

void ReturnSample::append_segment(std::span<const double> values) {
    observations.insert(observations.end(), values.begin(), values.end());
    segment_offsets.push_back(observations.size());
}

ReturnSample pool_benchmarked_returns(std::span<const StockRecord> records, const Series& benchmark,
                                      std::string source) {
    ReturnSample sample;
    sample.source = std::move(source);
    std::vector<double> segment;
    for (const auto& rec : records) {
        segment.clear();
        std::size_t prev = Series::npos;
        for (std::size_t k = 0; k < rec.dates.size(); ++k) {
            const auto i = benchmark.find(rec.dates[k]);
            if (i != Series::npos && prev != Series::npos && i == prev + 1) {
                const double b0 = benchmark.values[prev];
                const double b1 = benchmark.values[i];
                if (!(b0 > 0.0) || !(b1 > 0.0)) {
                    throw NumericalError("pool_benchmarked_returns: non-positive benchmark on " +
                                         benchmark.dates[i].iso());
                }
                const double r = (rec.prices[k] / b1) / (rec.prices[k - 1] / b0) - 1.0;
                segment.push_back(r * kAnnualizedPercent);
            }
            prev = i;
        }
        if (!segment.empty()) sample.append_segment(segment);
    }
    if (sample.n() == 0) throw DataError("pool_benchmarked_returns: empty sample for " + sample.source);
    return sample;
}

namespace {

void finish_z(TestReport& r, double confidence) {
    if (!(confidence > 0.0 && confidence < 1.0)) throw UsageError("confidence must be in (0,1)");
    r.method = TestMethod::Z;
    r.confidence = confidence;
    r.statistic = r.sample_mean / r.standard_error;
    r.p_value = std::clamp(normal_upper_tail(r.statistic), 0.0, 1.0);
    if (r.p_value == 0.0 || r.p_value == 1.0) r.warnings.emplace_back("p-value at the limit of double precision");
    const double z = normal_quantile(0.5 + confidence / 2.0);
    r.ci_low = r.sample_mean - z * r.standard_error;
    r.ci_high = r.sample_mean + z * r.standard_error;
    if (r.n < 30) r.warnings.emplace_back("fewer than 30 observations; normal approximation is doubtful");
}

} // namespace

TestReport z_test_nonpositive_mean(const ReturnSample& sample, double confidence) {
    const auto& x = sample.observations;
    if (x.size() < 2) throw DataError("z-test: need at least 2 observations");
    for (double v : x) {
        if (!std::isfinite(v)) throw DataError("z-test: non-finite observation in " + sample.source);
    }
    const double n = static_cast<double>(x.size());
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
        throw NumericalError("z-test: zero variance in " + sample.source);
    }
    TestReport r;
    r.label = sample.source;
    r.n = x.size();
    r.sample_mean = mean;
    r.standard_error = sd / std::sqrt(n);
    finish_z(r, confidence);
    return r;
}

TestReport z_test_from_summary(double mean, double standard_error, std::size_t n, double confidence) {
    if (!(standard_error > 0.0)) throw NumericalError("z-test: standard error must be positive");
    TestReport r;
    r.n = n;
    r.sample_mean = mean;
    r.standard_error = standard_error;
    finish_z(r, confidence);
    return r;
}

TestReport block_bootstrap_test(const ReturnSample& sample, const BootstrapOptions& options) {
    if (options.replicates < 200) throw UsageError("bootstrap: at least 200 replicates required");
    if (!(options.mean_block_length >= 1.0)) throw UsageError("bootstrap: mean block length must be >= 1");
    if (!(options.confidence > 0.0 && options.confidence < 1.0)) throw UsageError("confidence must be in (0,1)");

    TestReport r;
    r.label = sample.source;
    r.method = TestMethod::BlockBootstrap;
    r.confidence = options.confidence;
    r.replicates = options.replicates;
    r.mean_block_length = options.mean_block_length;
    r.seed = options.seed;

    struct Segment {
        std::size_t begin;
        std::size_t length;
    };
    std::vector<Segment> segments;
    std::size_t used = 0;
    double total = 0.0;
    for (std::size_t s = 0; s < sample.segments(); ++s) {
        const auto b = sample.segment_offsets[s];
        const auto len = sample.segment_offsets[s + 1] - b;
        if (len < 2) {
            r.warnings.push_back("segment " + std::to_string(s) + " shorter than 2 observations skipped");
            continue;
        }
        segments.push_back({b, len});
        used += len;
        for (std::size_t i = 0; i < len; ++i) total += sample.observations[b + i];
    }
    if (used == 0) throw DataError("bootstrap: no segment with at least 2 observations in " + sample.source);
    r.n = used;
    r.sample_mean = total / static_cast<double>(used);

    const double p = 1.0 / options.mean_block_length;
    const auto& x = sample.observations;
    std::vector<double> means(options.replicates);
    parallel_for(options.replicates, options.threads, [&](std::size_t b) {
        std::mt19937_64 rng(mix_seed(options.seed, b));
        std::geometric_distribution<std::size_t> block(p);
        double sum = 0.0;
        for (const auto& seg : segments) {
            std::uniform_int_distribution<std::size_t> start(0, seg.length - 1);
            std::size_t filled = 0;
            while (filled < seg.length) {
                const std::size_t s0 = start(rng);
                const std::size_t len = std::min(1 + block(rng), seg.length - filled);
                for (std::size_t t = 0; t < len; ++t) sum += x[seg.begin + (s0 + t) % seg.length];
                filled += len;
            }
        }
        means[b] = sum / static_cast<double>(used);
    });

    const double reps = static_cast<double>(means.size());
    r.bootstrap_mean = std::accumulate(means.begin(), means.end(), 0.0) / reps;
    double ss = 0.0;
    for (double m : means) ss += (m - r.bootstrap_mean) * (m - r.bootstrap_mean);
    r.standard_error = std::sqrt(ss / (reps - 1.0));

    std::vector<double> sorted = means;
    std::sort(sorted.begin(), sorted.end());
    const double alpha = (1.0 - options.confidence) / 2.0;
    const auto lo = static_cast<std::size_t>(std::floor(alpha * (reps - 1.0)));
    const auto hi = static_cast<std::size_t>(std::ceil((1.0 - alpha) * (reps - 1.0)));
    r.ci_low = sorted[lo];
    r.ci_high = sorted[std::min(hi, sorted.size() - 1)];

    if (r.standard_error > 0.0) {
        r.statistic = r.sample_mean / r.standard_error;
    } else {
        r.statistic = 0.0;
        r.warnings.emplace_back("zero bootstrap variance; statistic undefined and reported as 0");
    }
    std::size_t exceed = 0;
    for (double m : means) {
        if (m - r.bootstrap_mean >= r.sample_mean) ++exceed;
    }
    r.p_value = static_cast<double>(exceed) / reps;
    return r;
}

TestReport index_vs_index_test(const Series& candidate, const Series& benchmark, double confidence,
                               std::string label) {
    const auto bench = benchmark_series(candidate, benchmark);
    ReturnSample sample;
    sample.source = label.empty() ? "candidate/benchmark" : std::move(label);
    std::vector<double> obs;
    obs.reserve(bench.returns.size());
    bool all_zero = true;
    for (double r : bench.returns) {
        obs.push_back(r * kAnnualizedPercent);
        all_zero = all_zero && r == 0.0;
    }
    if (obs.size() >= 2 && all_zero) {
        throw NumericalError(sample.source + ": identical series (zero variance)");
    }
    sample.append_segment(obs);
    return z_test_nonpositive_mean(sample, confidence);
}

} // namespace hwi
