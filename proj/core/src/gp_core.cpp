#include "hwi/gp_core.hpp"

#include "hwi/error.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace hwi {

GpSolution solve_gp(const MarketCoefficients& coeffs) {
    const auto m = coeffs.a.size();
    if (m == 0) throw UsageError("solve_gp: no assets");
    if (coeffs.b.rows() != m || coeffs.b.cols() == 0) {
        std::ostringstream msg;
        msg << "solve_gp: b is " << coeffs.b.rows() << "x" << coeffs.b.cols() << " but a has " << m << " entries";
        throw UsageError(msg.str());
    }
    if (!coeffs.a.allFinite() || !coeffs.b.allFinite()) throw NumericalError("solve_gp: non-finite coefficients");

    const Eigen::MatrixXd sigma = coeffs.b * coeffs.b.transpose();
    Eigen::MatrixXd k(m + 1, m + 1);
    k.topLeftCorner(m, m) = sigma;
    k.topRightCorner(m, 1).setOnes();
    k.bottomLeftCorner(1, m).setOnes();
    k(m, m) = 0.0;
    Eigen::VectorXd rhs(m + 1);
    rhs.head(m) = coeffs.a;
    rhs(m) = 1.0;

    GpSolution sol;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(k);
    const auto diag = qr.matrixQR().diagonal().cwiseAbs();
    const double largest = diag.maxCoeff();
    const double smallest = diag.minCoeff();
    sol.condition_estimate = smallest > 0.0 ? largest / smallest : std::numeric_limits<double>::infinity();

    Eigen::VectorXd x;
    if (qr.isInvertible()) {
        x = qr.solve(rhs);
    } else {
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(k);
        x = cod.solve(rhs);
        const double mismatch = (k * x - rhs).lpNorm<Eigen::Infinity>();
        if (!std::isfinite(mismatch) || mismatch > 1e-8 * (1.0 + rhs.lpNorm<Eigen::Infinity>())) {
            std::ostringstream msg;
            msg << "solve_gp: singular bordered system (condition estimate " << sol.condition_estimate << ")";
            throw NumericalError(msg.str());
        }
        sol.minimum_norm = true;
    }
    sol.pi_star = x.head(m);
    sol.lambda = x(m);
    sol.theta = coeffs.b.transpose() * sol.pi_star;
    sol.residual = (sigma * sol.pi_star + Eigen::VectorXd::Constant(m, sol.lambda) - coeffs.a).lpNorm<Eigen::Infinity>();
    if (!std::isfinite(sol.residual)) throw NumericalError("solve_gp: non-finite solution");
    return sol;
}

double gp_increment(const GpSolution& sol, const Eigen::Ref<const Eigen::VectorXd>& dW, double dt) {
    if (dW.size() != sol.theta.size()) throw UsageError("gp_increment: driver dimension mismatch");
    return sol.lambda * dt + sol.theta.dot(sol.theta * dt + dW);
}

BenchmarkedSeries benchmark_series(const Series& numerator, const Series& benchmark) {
    if (numerator.dates != benchmark.dates) throw DataError("benchmark_series: date mismatch");
    BenchmarkedSeries out;
    out.values.dates = numerator.dates;
    out.values.values.resize(numerator.size());
    for (std::size_t i = 0; i < numerator.size(); ++i) {
        const double b = benchmark.values[i];
        if (!(b > 0.0)) throw NumericalError("benchmark_series: non-positive benchmark on " + benchmark.dates[i].iso());
        out.values.values[i] = numerator.values[i] / b;
    }
    out.returns = simple_returns(out.values.values);
    return out;
}

} // namespace hwi
