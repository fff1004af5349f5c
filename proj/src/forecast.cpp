#include "perfstop/forecast.hpp"

#include "perfstop/errors.hpp"
#include "perfstop/special.hpp"

#include <cmath>
#include <sstream>

namespace perfstop {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

double quantile_scale(double sigma, double delta) {
    if (!(sigma > 0.0)) throw ParameterError("brownian_quantile: sigma must be > 0");
    if (!(delta > 0.0 && delta < 1.0)) throw ParameterError("brownian_quantile: delta must lie in (0,1)");
    return sigma * special::normal_quantile(0.5 * (1.0 + delta));
}

ForecastSpec::ForecastSpec(Kind kind, double horizon) : kind_(kind), horizon_(horizon) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ParameterError("forecast horizon must be > 0");
    scale_ = std::visit(overloaded{
                            [](const LipschitzWorstCase& l) {
                                if (!(l.L2 > 0.0) || !std::isfinite(l.L2)) {
                                    throw ParameterError("lipschitz: L2 must be > 0");
                                }
                                return l.L2;
                            },
                            [](const BrownianQuantile& b) { return quantile_scale(b.sigma, b.delta); },
                        },
                        kind_);
}

double ForecastSpec::operator()(double t) const {
    if (!(t >= 0.0 && t <= horizon_)) {
        std::ostringstream msg;
        msg << "psi: time " << t << " outside [0, " << horizon_ << "]";
        throw DomainError(msg.str());
    }
    if (t == horizon_) return 0.0;
    return is_affine() ? scale_ * (horizon_ - t) : scale_ * std::sqrt(horizon_ - t);
}

double psi(const ForecastSpec& spec, double t) { return spec(t); }

ValidationReport validate(const std::function<double(double)>& forecast, double horizon, int n_check) {
    if (n_check < 2) throw ParameterError("validate: n_check must be >= 2");
    ValidationReport report;
    const auto flag = [&](std::string property, double t, double v) {
        report.passed = false;
        report.violations.push_back({std::move(property), t, v});
    };
    double prev = 0.0;
    for (int i = 0; i < n_check; ++i) {
        const double t = i == n_check - 1 ? horizon : horizon * i / (n_check - 1);
        const double v = forecast(t);
        if (!std::isfinite(v) || v < 0.0) flag("non-negative", t, v);
        if (i == 0 && !(v > 0.0)) flag("positive at 0", t, v);
        if (i > 0 && !(v < prev)) flag("strictly decreasing", t, v);
        if (i == n_check - 1 && std::abs(v) > 1e-12) flag("zero at horizon", t, v);
        prev = v;
    }
    return report;
}

ValidationReport validate(const ForecastSpec& spec, int n_check) {
    return validate([&spec](double t) { return spec(t); }, spec.horizon(), n_check);
}

void to_json(nlohmann::json& j, const ForecastSpec& spec) {
    std::visit(overloaded{
                   [&](const LipschitzWorstCase& l) {
                       j = {{"kind", "lipschitz"}, {"L2", l.L2}, {"T", spec.horizon()}};
                   },
                   [&](const BrownianQuantile& b) {
                       j = {{"kind", "brownian_quantile"},
                            {"sigma", b.sigma},
                            {"delta", b.delta},
                            {"T", spec.horizon()}};
                   },
               },
               spec.kind());
}

ForecastSpec forecast_from_json(const nlohmann::json& j) {
    try {
        const std::string kind = j.at("kind").get<std::string>();
        const double horizon = j.at("T").get<double>();
        if (kind == "lipschitz") return ForecastSpec::lipschitz(j.at("L2").get<double>(), horizon);
        if (kind == "brownian_quantile") {
            return ForecastSpec::brownian_quantile(j.at("sigma").get<double>(), j.at("delta").get<double>(),
                                                   horizon);
        }
        throw ParameterError("unknown forecast kind '" + kind + "'");
    } catch (const nlohmann::json::exception& e) {
        throw ParameterError(std::string("forecast JSON: ") + e.what());
    }
}

}  // namespace perfstop
