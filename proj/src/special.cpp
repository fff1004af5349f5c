#include "perfstop/special.hpp"

#include "perfstop/errors.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <array>
#include <cmath>
#include <numbers>
#include <sstream>

namespace perfstop::special {

double normal_cdf(double y) {
    if (std::isnan(y)) return y;
    return 0.5 * std::erfc(-y / std::numbers::sqrt2);
}

namespace {

// P. J. Acklam, "An algorithm for computing the inverse normal cumulative
// distribution function" (2003). Relative error of the raw approximation is
// below 1.15e-9 on (0,1).
constexpr std::array<double, 6> kA{-3.969683028665376e+01, 2.209460984245205e+02,
                                   -2.759285104469687e+02, 1.383577518672690e+02,
                                   -3.066479806614716e+01, 2.506628277459239e+00};
constexpr std::array<double, 5> kB{-5.447609879822406e+01, 1.615858368580409e+02,
                                   -1.556989798598866e+02, 6.680131188771972e+01,
                                   -1.328068155288572e+01};
constexpr std::array<double, 6> kC{-7.784894002430293e-03, -3.223964580411365e-01,
                                   -2.400758277161838e+00, -2.549732539343734e+00,
                                   4.374664141464968e+00,  2.938163982698783e+00};
constexpr std::array<double, 4> kD{7.784695709041462e-03, 3.224671290700398e-01,
                                   2.445134137142996e+00, 3.754408661907416e+00};
constexpr double kLowRegion = 0.02425;

double acklam(double p) {
    if (p < kLowRegion) {
        const double q = std::sqrt(-2.0 * std::log(p));
        return (((((kC[0] * q + kC[1]) * q + kC[2]) * q + kC[3]) * q + kC[4]) * q + kC[5]) /
               ((((kD[0] * q + kD[1]) * q + kD[2]) * q + kD[3]) * q + 1.0);
    }
    if (p > 1.0 - kLowRegion) {
        const double q = std::sqrt(-2.0 * std::log1p(-p));
        return -(((((kC[0] * q + kC[1]) * q + kC[2]) * q + kC[3]) * q + kC[4]) * q + kC[5]) /
               ((((kD[0] * q + kD[1]) * q + kD[2]) * q + kD[3]) * q + 1.0);
    }
    const double q = p - 0.5;
    const double r = q * q;
    return (((((kA[0] * r + kA[1]) * r + kA[2]) * r + kA[3]) * r + kA[4]) * r + kA[5]) * q /
           (((((kB[0] * r + kB[1]) * r + kB[2]) * r + kB[3]) * r + kB[4]) * r + 1.0);
}

}  // namespace

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        std::ostringstream msg;
        msg << "normal_quantile: p = " << p << " outside (0,1)";
        throw DomainError(msg.str());
    }
    double x = acklam(p);
    // one Halley step on Φ(x) - p; the upper half uses (1-p) - Q(x) to keep digits
    const double e = p > 0.5 ? (1.0 - p) - 0.5 * std::erfc(x / std::numbers::sqrt2)
                             : 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    x -= u / (1.0 + 0.5 * x * u);
    return x;
}

double kummer_m(double a, double b, double z, int max_terms) {
    if (b <= 0.0 && b == std::floor(b)) {
        std::ostringstream msg;
        msg << "kummer_m: b = " << b << " is a non-positive integer";
        throw DomainError(msg.str());
    }
    if (z < 0.0) {
        // Kummer's transformation avoids the alternating series
        return std::exp(z) * kummer_m(b - a, b, -z, max_terms);
    }
    double term = 1.0;
    double sum = 1.0;
    for (int n = 0; n < max_terms; ++n) {
        term *= (a + n) / (b + n) * z / (n + 1);
        sum += term;
        if (std::abs(term) < 1e-15 * std::abs(sum)) return sum;
    }
    std::ostringstream msg;
    msg << "kummer_m(" << a << ", " << b << ", " << z << ") did not converge in " << max_terms
        << " terms";
    throw AccuracyError(msg.str());
}

double h_function(double z, double q) {
    if (!(z >= 0.0)) throw DomainError("h_function: z must be >= 0");
    if (!(q > 1.0)) throw ParameterError("h_function: q must be > 1");
    using boost::math::quadrature::gauss_kronrod;
    const auto integrand = [q](double v) {
        return 0.5 * std::erfc(v / std::numbers::sqrt2) * std::pow(v, q - 1.0);
    };
    double err_near = 0.0;
    double err_far = 0.0;
    // split at z+1; v^{q-1} has an endpoint singularity in its derivative at v=0 for q<2,
    // which tanh-sinh handles and Gauss-Kronrod does not
    thread_local boost::math::quadrature::tanh_sinh<double> near_rule;
    const double near = near_rule.integrate(integrand, z, z + 1.0, 1e-13, &err_near);
    const double far = gauss_kronrod<double, 15>::integrate(integrand, z + 1.0, z + 10.0, 12, 1e-13, &err_far);
    const double tail = 2.0 * q * (near + far);
    if (2.0 * q * (err_near + err_far) > 1e-10 * std::max(1.0, tail)) {
        std::ostringstream msg;
        msg << "h_function(" << z << ", " << q << "): quadrature error estimate "
            << 2.0 * q * (err_near + err_far);
        throw AccuracyError(msg.str());
    }
    return std::pow(z, q) + tail;
}

double h_derivative(double z, double q) {
    if (!(z >= 0.0)) throw DomainError("h_derivative: z must be >= 0");
    if (!(q > 1.0)) throw ParameterError("h_derivative: q must be > 1");
    // 2Φ(z) - 1 = erf(z/√2)
    return q * std::pow(z, q - 1.0) * std::erf(z / std::numbers::sqrt2);
}

double zq_residual(double z, double q) {
    const double x = 0.5 * z * z;
    const double lhs = h_derivative(z, q) / h_function(z, q) + z;
    const double rhs = (1.0 + q) * z * kummer_m(0.5 * (3.0 + q), 1.5, x) / kummer_m(0.5 * (1.0 + q), 0.5, x);
    return lhs - rhs;
}

ZqSolution solve_zq(double q, double sigma, double tol) {
    if (!(q > 1.0)) {
        std::ostringstream msg;
        msg << "solve_zq: q = " << q << " must be > 1";
        throw ParameterError(msg.str());
    }
    if (!(sigma > 0.0)) throw ParameterError("solve_zq: sigma must be > 0");
    if (!(tol > 0.0)) throw ParameterError("solve_zq: tol must be > 0");

    // the residual behaves like -q z near 0
    double lo = 1e-6;
    double hi = 8.0;
    double f_lo = zq_residual(lo, q);
    double f_hi = zq_residual(hi, q);
    if (f_lo * f_hi > 0.0) {
        hi = 16.0;
        f_hi = zq_residual(hi, q);
    }
    if (f_lo * f_hi > 0.0 || std::isnan(f_lo) || std::isnan(f_hi)) {
        std::ostringstream msg;
        msg << "solve_zq(q=" << q << "): no sign change on [" << lo << ", " << hi
            << "], residual(lo) = " << f_lo << ", residual(hi) = " << f_hi;
        throw SolverError(msg.str());
    }

    int iterations = 0;
    while (hi - lo > tol && iterations < 200) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double f_mid = zq_residual(mid, q);
        if ((f_mid < 0.0) == (f_lo < 0.0)) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
        ++iterations;
    }
    const double z = std::abs(f_lo) < std::abs(f_hi) ? lo : hi;
    const double residual = std::abs(f_lo) < std::abs(f_hi) ? f_lo : f_hi;
    return {q, z, sigma * z, std::erf(z / std::numbers::sqrt2), residual, iterations};
}

}  // namespace perfstop::special
