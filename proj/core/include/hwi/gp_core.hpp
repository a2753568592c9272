#pragma once

#include "hwi/series.hpp"

#include <Eigen/Dense>

#include <string>

namespace hwi {

/// Instantaneous market coefficients: dS/S = a dt + b dW, m stocks and n
/// Brownian drivers (rows of b are stocks).
struct MarketCoefficients {
    Eigen::VectorXd a;
    Eigen::MatrixXd b;
};

struct GpSolution {
    Eigen::VectorXd pi_star;
    double lambda = 0.0;
    Eigen::VectorXd theta;
    /// ||b b^T pi* + lambda 1 - a||_inf
    double residual = 0.0;
    /// Ratio of extreme pivots of the rank-revealing factorization.
    double condition_estimate = 0.0;
    /// Set when the bordered system is singular but consistent; pi* is then
    /// the minimum-norm solution, one of many.
    bool minimum_norm = false;
};

/// Solves [[b b^T, 1], [1^T, 0]] (pi*, lambda) = (a, 1) for the growth
/// optimal portfolio and sets theta = b^T pi*. Throws UsageError on
/// dimension mismatch and NumericalError when the system has no solution.
[[nodiscard]] GpSolution solve_gp(const MarketCoefficients& coeffs);

/// Euler increment of the GP value: lambda dt + theta^T (theta dt + dW).
[[nodiscard]] double gp_increment(const GpSolution& sol, const Eigen::Ref<const Eigen::VectorXd>& dW,
                                  double dt);

struct BenchmarkedSeries {
    Series values;
    std::vector<double> returns;
};

/// numerator / benchmark on identical dates; throws DataError on mismatch
/// and NumericalError on a non-positive benchmark value.
[[nodiscard]] BenchmarkedSeries benchmark_series(const Series& numerator, const Series& benchmark);

} // namespace hwi
