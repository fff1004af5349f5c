#pragma once

#include <nlohmann/json.hpp>

#include <functional>
#include <string>
#include <variant>
#include <vector>

namespace perfstop {

/// Worst-case forecast for paths with upward slope bounded by L2: ψ(t) = L2 (T - t).
struct LipschitzWorstCase {
    double L2;
};

/// δ-quantile of the future running maximum of σW: ψ(t) = σ Φ⁻¹((1+δ)/2) √(T - t).
struct BrownianQuantile {
    double sigma;
    double delta;
};

/// Forecast ψ(t) of the maximal future price increment.
///
/// Both variants depend on t only, so ψ is automatically the same for all
/// outcomes sharing a history. ψ(T) = 0 and ψ(0) > 0 for every valid spec.
class ForecastSpec {
public:
    using Kind = std::variant<LipschitzWorstCase, BrownianQuantile>;

    ForecastSpec(Kind kind, double horizon);

    static ForecastSpec lipschitz(double L2, double horizon) {
        return ForecastSpec(LipschitzWorstCase{L2}, horizon);
    }
    static ForecastSpec brownian_quantile(double sigma, double delta, double horizon) {
        return ForecastSpec(BrownianQuantile{sigma, delta}, horizon);
    }

    const Kind& kind() const noexcept { return kind_; }
    double horizon() const noexcept { return horizon_; }
    bool is_affine() const noexcept { return std::holds_alternative<LipschitzWorstCase>(kind_); }

    /// L2 for the affine variant, c_δ = σ Φ⁻¹((1+δ)/2) for the quantile variant.
    double scale() const noexcept { return scale_; }

    double operator()(double t) const;

private:
    Kind kind_;
    double horizon_;
    double scale_;
};

/// c_δ = σ Φ⁻¹((1+δ)/2).
double quantile_scale(double sigma, double delta);

double psi(const ForecastSpec& spec, double t);

struct ForecastViolation {
    std::string property;
    double t;
    double value;
};

struct ValidationReport {
    bool passed = true;
    std::vector<ForecastViolation> violations;
};

/// Samples ψ on an n_check-point uniform grid over [0, T] and reports
/// violations of ψ(T) = 0 (tol 1e-12), ψ(0) > 0 and strict decrease.
ValidationReport validate(const ForecastSpec& spec, int n_check = 1024);
ValidationReport validate(const std::function<double(double)>& forecast, double horizon,
                          int n_check = 1024);

void to_json(nlohmann::json& j, const ForecastSpec& spec);
ForecastSpec forecast_from_json(const nlohmann::json& j);

}  // namespace perfstop

namespace nlohmann {
template <>
struct adl_serializer<perfstop::ForecastSpec> {
    static perfstop::ForecastSpec from_json(const json& j) { return perfstop::forecast_from_json(j); }
    static void to_json(json& j, const perfstop::ForecastSpec& s) { perfstop::to_json(j, s); }
};
}  // namespace nlohmann
