#include "perfstop/models.hpp"

#include "perfstop/errors.hpp"
#include "perfstop/rng.hpp"

#include <cmath>
#include <string>

namespace perfstop {

void PoissonSlopeParams::validate() const {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ParameterError("poisson_slope: lambda must be > 0");
    if (!(p > 0.0 && p < 1.0)) throw ParameterError("poisson_slope: p must lie in (0,1)");
    if (!(L1 > 0.0) || !(L2 > 0.0)) throw ParameterError("poisson_slope: L1 and L2 must be > 0");
    if (!std::isfinite(x0)) throw ParameterError("poisson_slope: x0 must be finite");
    if (!(T > 0.0) || !std::isfinite(T)) throw ParameterError("poisson_slope: T must be > 0");
}

void BachelierParams::validate() const {
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ParameterError("bachelier: sigma must be >= 0");
    if (!std::isfinite(x0)) throw ParameterError("bachelier: x0 must be finite");
    if (!(T > 0.0) || !std::isfinite(T)) throw ParameterError("bachelier: T must be > 0");
    if (n_steps < 1) throw ParameterError("bachelier: n_steps must be >= 1");
}

double horizon(const ModelParams& model) {
    return std::visit([](const auto& m) { return m.T; }, model);
}

void sample_poisson_slope_into(const PoissonSlopeParams& params, std::uint64_t seed, std::vector<Knot>& knots) {
    params.validate();
    RandomStream rng(seed);
    knots.clear();
    double t = 0.0;
    double x = params.x0;
    knots.push_back({t, x});
    while (t < params.T) {
        // slope first, then the holding time, so a single draw fixes the no-jump path
        const double slope = rng.bernoulli(params.p) ? params.L2 : -params.L1;
        const double next = t + rng.exponential(params.lambda);
        const double end = next < params.T ? next : params.T;
        if (!(end > t)) continue;  // zero-length holding time from rounding
        x += slope * (end - t);
        t = end;
        knots.push_back({t, x});
    }
}

void sample_bachelier_into(const BachelierParams& params, std::uint64_t seed, std::vector<Knot>& knots) {
    params.validate();
    RandomStream rng(seed);
    const int n = params.n_steps;
    const double dt = params.T / n;
    const double step_sd = params.sigma * std::sqrt(dt);
    knots.resize(static_cast<std::size_t>(n) + 1);
    knots[0] = {0.0, params.x0};
    double x = params.x0;
    for (int k = 1; k <= n; ++k) {
        x += step_sd * rng.normal();
        knots[static_cast<std::size_t>(k)] = {k == n ? params.T : k * dt, x};
    }
}

PricePath sample_poisson_slope(const PoissonSlopeParams& params, std::uint64_t seed) {
    std::vector<Knot> knots;
    sample_poisson_slope_into(params, seed, knots);
    return PricePath(std::move(knots));
}

PricePath sample_bachelier(const BachelierParams& params, std::uint64_t seed) {
    std::vector<Knot> knots;
    sample_bachelier_into(params, seed, knots);
    return PricePath(std::move(knots));
}

PricePath sample_path(const ModelParams& model, std::uint64_t seed) {
    return std::visit(
        [seed](const auto& m) -> PricePath {
            if constexpr (std::is_same_v<std::decay_t<decltype(m)>, PoissonSlopeParams>) {
                return sample_poisson_slope(m, seed);
            } else {
                return sample_bachelier(m, seed);
            }
        },
        model);
}

bool check_lipschitz_band(const PricePath& path, double L1, double L2, double tol) {
    if (!(L1 > 0.0) || !(L2 > 0.0)) throw ParameterError("check_lipschitz_band: L1 and L2 must be > 0");
    const auto k = path.knots();
    for (std::size_t i = 0; i + 1 < k.size(); ++i) {
        // compare increments, not slopes: dividing by a short dt amplifies price rounding
        const double dx = k[i + 1].price - k[i].price, dt = k[i + 1].t - k[i].t;
        const double slack = tol * (dt + std::abs(k[i].price) + std::abs(k[i + 1].price) + 1.0);
        if (dx < -L1 * dt - slack || dx > L2 * dt + slack) return false;
    }
    return true;
}

void to_json(nlohmann::json& j, const PoissonSlopeParams& p) {
    j = {{"model", "poisson_slope"}, {"lambda", p.lambda}, {"p", p.p}, {"L1", p.L1},
         {"L2", p.L2},               {"x0", p.x0},         {"T", p.T}};
}

void from_json(const nlohmann::json& j, PoissonSlopeParams& p) {
    PoissonSlopeParams d;
    p.lambda = j.value("lambda", d.lambda);
    p.p = j.value("p", d.p);
    p.L1 = j.value("L1", d.L1);
    p.L2 = j.value("L2", d.L2);
    p.x0 = j.value("x0", d.x0);
    p.T = j.value("T", d.T);
    p.validate();
}

void to_json(nlohmann::json& j, const BachelierParams& p) {
    j = {{"model", "bachelier"}, {"x0", p.x0}, {"sigma", p.sigma}, {"T", p.T}, {"n_steps", p.n_steps}};
}

void from_json(const nlohmann::json& j, BachelierParams& p) {
    BachelierParams d;
    p.x0 = j.value("x0", d.x0);
    p.sigma = j.value("sigma", d.sigma);
    p.T = j.value("T", d.T);
    p.n_steps = j.value("n_steps", d.n_steps);
    p.validate();
}

void to_json(nlohmann::json& j, const ModelParams& m) {
    std::visit([&j](const auto& params) { to_json(j, params); }, m);
}

ModelParams model_from_json(const nlohmann::json& j) {
    try {
        const std::string kind = j.at("model").get<std::string>();
        if (kind == "poisson_slope") return j.get<PoissonSlopeParams>();
        if (kind == "bachelier") return j.get<BachelierParams>();
        throw ParameterError("unknown model '" + kind + "'");
    } catch (const nlohmann::json::exception& e) {
        throw ParameterError(std::string("model JSON: ") + e.what());
    }
}

}  // namespace perfstop
