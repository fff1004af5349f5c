#pragma once

// Independent reference computations used by the tests. Nothing here calls
// into the library's numerics, so agreement is evidence rather than tautology.

#include "perfstop/oracle.hpp"
#include "perfstop/paths.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

namespace testsupport {

/// Composite Simpson rule with n (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n) {
    if (n % 2) ++n;
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

inline double gaussian_density(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

/// Φ(y) by Simpson quadrature of the density on [-12, y].
inline double cdf_by_quadrature(double y) { return simpson(gaussian_density, -12.0, y, 200000); }

/// Random piecewise-linear path with slopes drawn uniformly in [-L1, L2].
inline perfstop::PricePath random_band_path(std::mt19937_64& gen, double L1, double L2, double T, int n_knots) {
    std::uniform_real_distribution<double> slope(-L1, L2);
    std::uniform_real_distribution<double> cut(0.0, T);
    std::vector<double> times{0.0, T};
    for (int i = 0; i + 2 < n_knots; ++i) times.push_back(cut(gen));
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
    std::vector<perfstop::Knot> knots{{0.0, 0.0}};
    for (std::size_t i = 1; i < times.size(); ++i) {
        knots.push_back({times[i], knots.back().price + slope(gen) * (times[i] - times[i - 1])});
    }
    return perfstop::PricePath(std::move(knots));
}

/// Running maximum and drawdown on a uniform grid, walking the knots directly.
struct GridScan {
    std::vector<double> t, price, running_max;
};

inline GridScan scan(const perfstop::PricePath& path, int n) {
    GridScan g;
    const auto k = path.knots();
    std::size_t seg = 0;
    double m = -INFINITY;
    for (int i = 0; i <= n; ++i) {
        const double t = path.horizon() * i / n;
        while (seg + 2 < k.size() && k[seg + 1].t < t) ++seg;
        const double w = (t - k[seg].t) / (k[seg + 1].t - k[seg].t);
        const double x = k[seg].price + std::clamp(w, 0.0, 1.0) * (k[seg + 1].price - k[seg].price);
        m = std::max(m, x);
        g.t.push_back(t);
        g.price.push_back(x);
        g.running_max.push_back(m);
    }
    return g;
}

/// First grid time where drawdown >= ψ.
inline double first_crossing_on_grid(const perfstop::PricePath& path, const std::function<double(double)>& psi,
                                     int n) {
    const GridScan g = scan(path, n);
    for (std::size_t i = 0; i < g.t.size(); ++i) {
        if (g.running_max[i] - g.price[i] >= psi(g.t[i])) return g.t[i];
    }
    return path.horizon();
}

// ---- scenario trees ------------------------------------------------------

using perfstop::oracle::TreeSpec;

inline std::vector<double> uniform_levels(int depth, double T = 1.0) {
    std::vector<double> t;
    for (int k = 0; k <= depth; ++k) t.push_back(T * k / depth);
    return t;
}

/// ψ_k = slope · (T - t_k).
inline std::vector<double> affine_psi(int depth, double slope, double T = 1.0) {
    std::vector<double> p;
    for (int k = 0; k <= depth; ++k) p.push_back(slope * (T - T * k / depth));
    return p;
}

/// Full binary tree; children move the price by -step and +step.
inline TreeSpec binary_spec(int depth, double price = 0.0, double step = 0.25) {
    TreeSpec s{price, {}};
    if (depth > 0) {
        s.children.push_back(binary_spec(depth - 1, price - step, step));
        s.children.push_back(binary_spec(depth - 1, price + step, step));
    }
    return s;
}

/// Single declining branch.
inline TreeSpec chain_spec(int depth, double price = 0.0, double step = 0.25) {
    TreeSpec s{price, {}};
    if (depth > 0) s.children.push_back(chain_spec(depth - 1, price - step, step));
    return s;
}

inline perfstop::oracle::ScenarioTree binary_tree(int depth, double psi_slope = 1.0) {
    return {uniform_levels(depth), affine_psi(depth, psi_slope), binary_spec(depth)};
}

}  // namespace testsupport
