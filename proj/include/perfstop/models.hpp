#pragma once

#include "perfstop/paths.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <variant>
#include <vector>

namespace perfstop {

/// Piecewise-linear process whose slope is redrawn at the jump times of a
/// Poisson(λ) process: +L2 with probability p, -L1 with probability 1 - p.
struct PoissonSlopeParams {
    double lambda = 1.0;
    double p = 0.5;
    double L1 = 1.0;
    double L2 = 1.0;
    double x0 = 0.0;
    double T = 1.0;

    void validate() const;
};

/// Bachelier model X_t = x0 + σ W_t sampled on a uniform grid and
/// interpolated linearly. Max-based statistics carry an O(√(T/n_steps)) bias.
struct BachelierParams {
    double x0 = 0.0;
    double sigma = 1.0;
    double T = 1.0;
    int n_steps = 10000;

    void validate() const;
};

using ModelParams = std::variant<PoissonSlopeParams, BachelierParams>;

double horizon(const ModelParams& model);

/// Exact event-driven sample; knots at 0, every jump time before T, and T.
PricePath sample_poisson_slope(const PoissonSlopeParams& params, std::uint64_t seed);
PricePath sample_bachelier(const BachelierParams& params, std::uint64_t seed);
PricePath sample_path(const ModelParams& model, std::uint64_t seed);

/// Buffer-reusing variants for hot Monte Carlo loops; `knots` is overwritten.
void sample_poisson_slope_into(const PoissonSlopeParams& params, std::uint64_t seed, std::vector<Knot>& knots);
void sample_bachelier_into(const BachelierParams& params, std::uint64_t seed, std::vector<Knot>& knots);

/// True iff every segment slope lies in [-L1, L2], up to rounding of size
/// tol relative to the knot prices.
bool check_lipschitz_band(const PricePath& path, double L1, double L2, double tol = kStructuralTol);

void to_json(nlohmann::json& j, const PoissonSlopeParams& p);
void from_json(const nlohmann::json& j, PoissonSlopeParams& p);
void to_json(nlohmann::json& j, const BachelierParams& p);
void from_json(const nlohmann::json& j, BachelierParams& p);
void to_json(nlohmann::json& j, const ModelParams& m);
ModelParams model_from_json(const nlohmann::json& j);

}  // namespace perfstop
