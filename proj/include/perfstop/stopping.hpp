#pragma once

#include "perfstop/forecast.hpp"
#include "perfstop/paths.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <variant>

namespace perfstop {

/// Sell at the first time the drawdown reaches the forecast ψ.
struct PerfectRule {
    ForecastSpec forecast;
};

/// Sell at the fixed time u, whatever the history.
struct DeterministicRule {
    double u;
};

using StoppingRuleSpec = std::variant<PerfectRule, DeterministicRule>;

/// Default bracket width (in time) for the √(T-t) crossing solver.
inline constexpr double kCrossingTol = 1e-10;

struct StopResult {
    double stop_time;
    double stop_price;
    double drawdown_at_stop;
    std::optional<double> psi_at_stop;  // perfect rules only
};

/// σ* = inf{s : X*_s - X_s >= ψ(s)}.
///
/// The path is walked segment by segment; each segment is split where the
/// running maximum starts to move, so the drawdown is linear on every piece.
/// Against an affine ψ the crossing is solved in closed form. Against
/// c√(T-s), D - ψ is convex on a piece, so a sign change at the piece ends
/// brackets the unique first crossing, which is bisected until the bracket is
/// below `tol` and D - ψ at the returned time is at most `tol`.
///
/// Always stops by T because D(T) >= 0 = ψ(T). Throws DomainError on a
/// horizon mismatch and ParameterError for tol <= 0.
StopResult perfect_stop(const PricePath& path, const ForecastSpec& forecast, double tol = kCrossingTol);

/// Dispatches on the rule kind. Deterministic u must lie in [0, T].
StopResult apply_rule(const PricePath& path, const StoppingRuleSpec& rule, double tol = kCrossingTol);

/// ρ = X*_T - X_τ.
double realized_regret(const PricePath& path, double stop_time);

/// R = max{X*_τ - X_τ, ψ(τ)}.
double estimated_regret(const PricePath& path, double stop_time, const ForecastSpec& forecast);

/// Lower bound for σ* on Lipschitz-band paths observed up to t with drawdown
/// D: (L1 t + L2 T - D) / (L1 + L2). Attained by the path falling at slope -L1.
double sigma_star_lower_bound(double t, double drawdown_t, double L1, double L2, double T);

/// Worst-case estimated regret of σ* given history up to t with drawdown D,
/// L2/(L1+L2) D + L1/(L1+L2) L2 (T - t). Requires D <= L2 (T - t).
double worst_case_regret_lipschitz(double t, double drawdown_t, double L1, double L2, double T);

/// τ̂ = L2 T / (L1 + L2), the deterministic rule that is optimal at t = 0 only.
DeterministicRule minimax_deterministic_rule(double L1, double L2, double T);

void to_json(nlohmann::json& j, const StopResult& r);
void to_json(nlohmann::json& j, const StoppingRuleSpec& rule);
StoppingRuleSpec rule_from_json(const nlohmann::json& j);

}  // namespace perfstop
