#pragma once

#include <vector>

namespace perfstop::special {

/// Standard normal CDF Φ(y).
double normal_cdf(double y);

/// Φ⁻¹(p) for p in (0,1). Acklam's rational approximation followed by one
/// Halley step against normal_cdf; |Φ(Φ⁻¹(p)) - p| is at rounding level.
double normal_quantile(double p);

/// Kummer's confluent hypergeometric function M(a, b, z) by direct series.
///
/// Summation stops once a term falls below 1e-15 of the partial sum; throws
/// AccuracyError after `max_terms`, DomainError for b a non-positive integer.
double kummer_m(double a, double b, double z, int max_terms = 10000);

/// H(z) = z^q + 2 ∫_{z^q}^∞ (1 - Φ(u^{1/q})) du, evaluated as
/// z^q + 2q ∫_z^{z+10} (1 - Φ(v)) v^{q-1} dv.
double h_function(double z, double q);

/// H'(z) = q z^{q-1} (2Φ(z) - 1).
double h_derivative(double z, double q);

/// Left minus right side of the q-mean threshold equation
///   H'(z)/H(z) + z = (1+q) z M((3+q)/2, 3/2, z²/2) / M((1+q)/2, 1/2, z²/2).
double zq_residual(double z, double q);

struct ZqSolution {
    double q;
    double z_q;       // dimensionless threshold
    double c_delta;   // sigma * z_q
    double delta;     // 2Φ(z_q) - 1
    double residual;  // zq_residual at z_q
    int iterations;
};

/// Unique positive root of the q-mean threshold equation, bracketed on (0, 8]
/// (widened once to 16) and refined by bisection to |Δz| <= tol.
/// Throws ParameterError for q <= 1 and SolverError if no sign change is found.
ZqSolution solve_zq(double q, double sigma = 1.0, double tol = 1e-10);

}  // namespace perfstop::special
