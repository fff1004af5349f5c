#include "perfstop/stopping.hpp"

#include "perfstop/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace perfstop {

namespace {

void check_horizons(const PricePath& path, const ForecastSpec& forecast) {
    const double T = path.horizon();
    if (std::abs(T - forecast.horizon()) > kStructuralTol * std::max(1.0, T)) {
        std::ostringstream msg;
        msg << "forecast horizon " << forecast.horizon() << " differs from path horizon " << T;
        throw DomainError(msg.str());
    }
}

void check_time(double t, double T, const char* what) {
    if (!(t >= 0.0 && t <= T)) {
        std::ostringstream msg;
        msg << what << ": time " << t << " outside [0, " << T << "]";
        throw DomainError(msg.str());
    }
}

// ψ on the path's own time axis; forecast and path horizons agree within tolerance
double psi_clamped(const ForecastSpec& f, double s) { return f(std::min(s, f.horizon())); }

// Same values as psi_clamped for s >= 0, without the per-call domain checks.
struct FastPsi {
    double scale;
    double T;
    bool affine;

    explicit FastPsi(const ForecastSpec& f) : scale(f.scale()), T(f.horizon()), affine(f.is_affine()) {}

    double operator()(double s) const {
        if (s >= T) return 0.0;
        return affine ? scale * (T - s) : scale * std::sqrt(T - s);
    }
};

// A piece of a segment on which the running maximum is constant and the
// drawdown is running_max - price (linear), or on which the price sets a new
// maximum and the drawdown is identically zero.
struct Piece {
    double s0, s1;
    double running_max;
    bool at_maximum;
};

struct Segment {
    Knot a, b;
    double slope() const { return (b.price - a.price) / (b.t - a.t); }
    double price(double s) const {
        if (s == a.t) return a.price;
        if (s == b.t) return b.price;
        return a.price + slope() * (s - a.t);
    }
};

std::optional<double> first_crossing(const Segment& seg, const Piece& piece, const FastPsi& psi, double tol) {
    const auto gap = [&](double s) {
        const double d = piece.at_maximum ? 0.0 : piece.running_max - seg.price(s);
        return d - psi(s);
    };
    const double g0 = gap(piece.s0);
    if (g0 >= 0.0) return piece.s0;
    const double g1 = gap(piece.s1);
    if (g1 < 0.0) return std::nullopt;
    if (piece.at_maximum) return piece.s1;  // -ψ reaches 0 only at T

    if (psi.affine) {
        const double s = piece.s0 + (-g0) / (g1 - g0) * (piece.s1 - piece.s0);
        return std::clamp(s, piece.s0, piece.s1);
    }
    double lo = piece.s0;
    double hi = piece.s1;
    double g_hi = g1;
    for (int it = 0; it < 400 && (hi - lo > tol || g_hi > tol); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double g_mid = gap(mid);
        if (g_mid >= 0.0) {
            hi = mid;
            g_hi = g_mid;
        } else {
            lo = mid;
        }
    }
    return hi;
}

}  // namespace

StopResult perfect_stop(const PricePath& path, const ForecastSpec& forecast, double tol) {
    check_horizons(path, forecast);
    if (!(tol > 0.0)) throw ParameterError("perfect_stop: tol must be > 0");

    const FastPsi psi(forecast);
    const auto knots = path.knots();
    double running = knots.front().price;
    for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
        const Segment seg{knots[i], knots[i + 1]};
        // D on the segment is at most the new running max minus the lower end, ψ at least ψ(b.t)
        const double next_running = std::max(running, seg.b.price);
        if (next_running - std::min(seg.a.price, seg.b.price) < psi(seg.b.t)) {
            running = next_running;
            continue;
        }
        Piece pieces[2];
        int n_pieces = 0;
        if (seg.b.price <= running) {
            pieces[n_pieces++] = {seg.a.t, seg.b.t, running, false};
        } else if (seg.a.price >= running) {
            pieces[n_pieces++] = {seg.a.t, seg.b.t, running, true};
        } else {
            const double s_m = std::clamp(seg.a.t + (running - seg.a.price) / seg.slope(), seg.a.t, seg.b.t);
            pieces[n_pieces++] = {seg.a.t, s_m, running, false};
            pieces[n_pieces++] = {s_m, seg.b.t, running, true};
        }
        for (int p = 0; p < n_pieces; ++p) {
            if (const auto s = first_crossing(seg, pieces[p], psi, tol)) {
                const double price = seg.price(*s);
                const double m = pieces[p].at_maximum ? std::max(running, price) : running;
                return {*s, price, m - price, psi_clamped(forecast, *s)};
            }
        }
        running = std::max(running, seg.b.price);
    }
    // D(T) >= 0 = ψ(T) makes this unreachable up to rounding
    const Knot& last = knots.back();
    return {last.t, last.price, running - last.price, 0.0};
}

StopResult apply_rule(const PricePath& path, const StoppingRuleSpec& rule, double tol) {
    if (const auto* perfect = std::get_if<PerfectRule>(&rule)) {
        return perfect_stop(path, perfect->forecast, tol);
    }
    const double u = std::get<DeterministicRule>(rule).u;
    check_time(u, path.horizon(), "deterministic rule");
    return {u, price_at(path, u), drawdown(path, u), std::nullopt};
}

double realized_regret(const PricePath& path, double stop_time) {
    check_time(stop_time, path.horizon(), "realized_regret");
    return running_max(path, path.horizon()) - price_at(path, stop_time);
}

double estimated_regret(const PricePath& path, double stop_time, const ForecastSpec& forecast) {
    check_horizons(path, forecast);
    check_time(stop_time, path.horizon(), "estimated_regret");
    return std::max(drawdown(path, stop_time), psi_clamped(forecast, stop_time));
}

namespace {

void check_lipschitz_args(double t, double drawdown_t, double L1, double L2, double T) {
    if (!(L1 > 0.0) || !(L2 > 0.0)) throw ParameterError("L1 and L2 must be > 0");
    if (!(T > 0.0)) throw ParameterError("T must be > 0");
    if (!(drawdown_t >= 0.0)) throw ParameterError("drawdown must be >= 0");
    check_time(t, T, "lipschitz bound");
}

}  // namespace

double sigma_star_lower_bound(double t, double drawdown_t, double L1, double L2, double T) {
    check_lipschitz_args(t, drawdown_t, L1, L2, T);
    return (L1 * t + L2 * T - drawdown_t) / (L1 + L2);
}

double worst_case_regret_lipschitz(double t, double drawdown_t, double L1, double L2, double T) {
    check_lipschitz_args(t, drawdown_t, L1, L2, T);
    if (drawdown_t > L2 * (T - t) + kStructuralTol) {
        std::ostringstream msg;
        msg << "drawdown " << drawdown_t << " already exceeds L2 (T - t) = " << L2 * (T - t);
        throw DomainError(msg.str());
    }
    return (L2 * drawdown_t + L1 * L2 * (T - t)) / (L1 + L2);
}

DeterministicRule minimax_deterministic_rule(double L1, double L2, double T) {
    return {sigma_star_lower_bound(0.0, 0.0, L1, L2, T)};
}

void to_json(nlohmann::json& j, const StopResult& r) {
    j = {{"stop_time", r.stop_time},
         {"stop_price", r.stop_price},
         {"drawdown_at_stop", r.drawdown_at_stop},
         {"psi_at_stop", r.psi_at_stop ? nlohmann::json(*r.psi_at_stop) : nlohmann::json(nullptr)}};
}

void to_json(nlohmann::json& j, const StoppingRuleSpec& rule) {
    if (const auto* perfect = std::get_if<PerfectRule>(&rule)) {
        j = {{"kind", "perfect"}, {"forecast", perfect->forecast}};
    } else {
        j = {{"kind", "deterministic"}, {"u", std::get<DeterministicRule>(rule).u}};
    }
}

StoppingRuleSpec rule_from_json(const nlohmann::json& j) {
    try {
        const std::string kind = j.at("kind").get<std::string>();
        if (kind == "perfect") return PerfectRule{forecast_from_json(j.at("forecast"))};
        if (kind == "deterministic") return DeterministicRule{j.at("u").get<double>()};
        throw ParameterError("unknown rule kind '" + kind + "'");
    } catch (const nlohmann::json::exception& e) {
        throw ParameterError(std::string("rule JSON: ") + e.what());
    }
}

}  // namespace perfstop
