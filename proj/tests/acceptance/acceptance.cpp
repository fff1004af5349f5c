// Runs the ten acceptance criteria and prints one PASS/FAIL line for each.
// Exit status is 0 only when every criterion passes.

#include "commands.hpp"
#include "perfstop/forecast.hpp"
#include "perfstop/models.hpp"
#include "perfstop/montecarlo.hpp"
#include "perfstop/oracle.hpp"
#include "perfstop/special.hpp"
#include "perfstop/stopping.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace perfstop;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [" << what << "]";
        }
    }
};

std::string fmt(double x, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, x);
    return buf;
}

double simpson(const std::function<double(double)>& f, double a, double b, int n) {
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

PricePath random_band_path(std::mt19937_64& gen, double L1, double L2, double T, int n_knots) {
    std::uniform_real_distribution<double> slope(-L1, L2), cut(0.0, T);
    std::vector<double> times{0.0, T};
    for (int i = 0; i + 2 < n_knots; ++i) times.push_back(cut(gen));
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
    std::vector<Knot> knots{{0.0, 0.0}};
    for (std::size_t i = 1; i < times.size(); ++i) {
        knots.push_back({times[i], knots.back().price + slope(gen) * (times[i] - times[i - 1])});
    }
    return PricePath(std::move(knots));
}

// 1. q-mean thresholds
Outcome table3() {
    Outcome o;
    const double q[] = {1.1, 2, 4, 6, 8, 10};
    const double z[] = {1.03, 1.12, 1.35, 1.57, 1.77, 1.96};
    const double d[] = {0.70, 0.74, 0.82, 0.88, 0.92, 0.95};
    double worst = 0.0;
    for (int i = 0; i < 6; ++i) {
        const special::ZqSolution s = special::solve_zq(q[i]);
        const double delta = 2.0 * special::normal_cdf(s.z_q) - 1.0;
        worst = std::max({worst, std::abs(s.z_q - z[i]), std::abs(delta - d[i])});
        o.require(std::abs(s.z_q - z[i]) <= 0.01, "z_q at q=" + fmt(q[i]) + ": " + fmt(s.z_q));
        o.require(std::abs(delta - d[i]) <= 0.01, "delta at q=" + fmt(q[i]) + ": " + fmt(delta));
    }
    o.detail << " max deviation " << fmt(worst, 3);
    return o;
}

// 2. expected regret over lambda at p = 1/2
Outcome table1() {
    Outcome o;
    const cli::Table t = cli::run_table1({});
    const double es[] = {0.75, 0.75, 0.8, 0.88, 0.9, 0.97};
    const double eh[] = {0.25, 0.25, 0.2, 0.12, 0.09, 0.03};
    double worst = 0.0, widest = 0.0;
    for (std::size_t i = 0; i < 6; ++i) {
        const double a = t.at(i, "E_sigma_star"), b = t.at(i, "E_hat_sigma_star");
        worst = std::max({worst, std::abs(a - es[i]), std::abs(b - eh[i])});
        widest = std::max({widest, t.at(i, "E_sigma_star_ci99"), t.at(i, "E_hat_sigma_star_ci99")});
        o.require(std::abs(a - es[i]) <= 0.01, "E sigma* at lambda=" + fmt(t.at(i, "lambda")) + ": " + fmt(a));
        o.require(std::abs(b - eh[i]) <= 0.01, "E^ sigma* at lambda=" + fmt(t.at(i, "lambda")) + ": " + fmt(b));
    }
    o.require(widest <= 0.003, "CI99 half-width " + fmt(widest));
    o.detail << " max deviation " << fmt(worst, 3) << ", max CI99 " << fmt(widest, 3);
    return o;
}

// 3. expected regret over p at lambda = 10
Outcome table2() {
    Outcome o;
    const cli::Table t = cli::run_table2({});
    const char* cols[] = {"E_sigma_star", "E_hat_sigma_star", "E_hat_0", "E_hat_half", "E_hat_T"};
    const double ref[4][5] = {{0.61, 0.39, 0.06, 0.36, 0.66},
                              {0.74, 0.26, 0.18, 0.28, 0.38},
                              {0.86, 0.14, 0.38, 0.28, 0.18},
                              {0.95, 0.05, 0.66, 0.36, 0.06}};
    double worst = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        for (int c = 0; c < 5; ++c) {
            const double v = t.at(i, cols[c]);
            worst = std::max(worst, std::abs(v - ref[i][c]));
            o.require(std::abs(v - ref[i][c]) <= 0.01, std::string(cols[c]) + " at p=" + fmt(t.at(i, "p")) + ": " + fmt(v));
        }
    }
    o.detail << " max deviation " << fmt(worst, 3);
    return o;
}

// 4. lower bound for σ* and the worst-case regret on the extremal path
Outcome closed_forms() {
    Outcome o;
    std::mt19937_64 gen(4);
    std::uniform_real_distribution<double> l(0.2, 3.0);
    double min_gap = INFINITY;
    for (int i = 0; i < 1000; ++i) {
        const double L1 = l(gen), L2 = l(gen);
        const PricePath path = random_band_path(gen, L1, L2, 1.0, 2 + i % 30);
        const double s = perfect_stop(path, ForecastSpec::lipschitz(L2, 1.0)).stop_time;
        min_gap = std::min(min_gap, s - sigma_star_lower_bound(0, 0, L1, L2, 1.0));
    }
    o.require(min_gap >= -1e-9, "sigma* below bound by " + fmt(-min_gap));

    double err = 0.0;
    struct Case {
        std::vector<Knot> history;
        double L1, L2;
    };
    for (const Case& c : {Case{{{0, 0}}, 1.0, 1.0}, Case{{{0, 0}, {0.3, 0.3}, {0.5, 0.1}}, 1.0, 1.0},
                          Case{{{0, 0}}, 1.5, 0.5}, Case{{{0, 0}, {0.2, 0.4}, {0.4, 0.2}}, 1.0, 2.0}}) {
        std::vector<Knot> k = c.history;
        const Knot last = k.back();
        k.push_back({1.0, last.price - c.L1 * (1.0 - last.t)});
        const PricePath path(std::move(k));
        const ForecastSpec f = ForecastSpec::lipschitz(c.L2, 1.0);
        const double D = drawdown(path, last.t);
        const double s = perfect_stop(path, f).stop_time;
        err = std::max(err, std::abs(s - sigma_star_lower_bound(last.t, D, c.L1, c.L2, 1.0)));
        err = std::max(err, std::abs(estimated_regret(path, s, f) -
                                     worst_case_regret_lipschitz(last.t, D, c.L1, c.L2, 1.0)));
    }
    o.require(err <= 1e-9, "extremal path error " + fmt(err));
    o.detail << " min(sigma* - bound) " << fmt(min_gap, 3) << ", extremal error " << fmt(err, 3);
    return o;
}

// 5. drawdown equals ψ at σ*
Outcome crossing_identity() {
    Outcome o;
    const ForecastSpec lip = ForecastSpec::lipschitz(1.0, 1.0);
    const ForecastSpec quant = ForecastSpec::brownian_quantile(1.0, 0.74, 1.0);
    double ep = 0.0, eb = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const PricePath a = sample_poisson_slope({10.0, 0.5, 1.0, 1.0, 0.0, 1.0}, stream_seed(5, i));
        const double sa = perfect_stop(a, lip).stop_time;
        ep = std::max(ep, std::abs(drawdown(a, sa) - lip(sa)));
        const PricePath b = sample_bachelier({0.0, 1.0, 1.0, 1000}, stream_seed(6, i));
        const double sb = perfect_stop(b, quant).stop_time;
        eb = std::max(eb, std::abs(drawdown(b, sb) - quant(sb)));
    }
    o.require(ep <= 1e-9, "poisson " + fmt(ep));
    o.require(eb <= 1e-9, "bachelier " + fmt(eb));
    o.detail << " max error poisson " << fmt(ep, 3) << ", bachelier " << fmt(eb, 3);
    return o;
}

// 6. exhaustive perfection check on random trees
Outcome trees() {
    Outcome o;
    int passed = 0;
    std::uint64_t rules = 0;
    for (int i = 0; i < 100; ++i) {
        RandomStream rng(6, static_cast<std::uint64_t>(i));
        const oracle::ScenarioTree t = oracle::random_tree({4, 3, 1.0, 100'000, true}, rng);
        const oracle::VerificationReport r = oracle::verify_perfection(t);
        passed += r.passed;
        rules += r.n_rules;
        if (!r.passed) o.require(false, "tree " + std::to_string(i) + ": " + nlohmann::json(r).dump());
    }
    o.detail << " " << passed << "/100 depth-4 trees, " << rules << " rules enumerated";
    return o;
}

// 7. coverage of the quantile forecast
Outcome calibration() {
    Outcome o;
    const BachelierParams params{0.0, 1.0, 1.0, 10000};
    double worst = 0.0;
    for (double delta : {0.74, 0.95}) {
        const auto pts = future_max_coverage(params, ForecastSpec::brownian_quantile(1.0, delta, 1.0), {0.0, 0.5},
                                             100000, 7);
        for (const CoveragePoint& p : pts) {
            worst = std::max(worst, std::abs(p.frequency.mean - delta));
            o.require(std::abs(p.frequency.mean - delta) <= 0.01,
                      "delta=" + fmt(delta) + " t=" + fmt(p.t) + ": " + fmt(p.frequency.mean));
        }
    }
    o.detail << " max |coverage - delta| " << fmt(worst, 3);
    return o;
}

// 8. optional sampling for a martingale
Outcome doob() {
    Outcome o;
    const DoobReport r = doob_check({0.0, 1.0, 1.0, 1000}, {{0.0}, {0.5}, {1.0}}, 100000, 8);
    double worst = 0.0;
    for (const PairDifference& d : r.pairs) worst = std::max(worst, std::abs(d.mean_diff) / d.std_error);
    o.require(r.within_3se, "max |diff|/se " + fmt(worst));
    o.detail << " max |diff| " << fmt(r.max_abs_diff, 3) << " = " << fmt(worst, 3) << " se";
    return o;
}

// 9. special functions
Outcome special_functions() {
    using namespace special;
    Outcome o;
    double qerr = 0.0, qerr_at = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const double y = -6.0 + 12.0 * i / 999;
        const double e = std::abs(normal_quantile(normal_cdf(y)) - y);
        if (e > qerr) qerr = e, qerr_at = y;
    }
    o.require(qerr <= 1e-9, "quantile(cdf(y)) error " + fmt(qerr) + " at y=" + fmt(qerr_at));

    double kerr = 0.0;
    for (double a : {0.5, 1.0, 2.5, 6.5}) {
        for (double b : {0.5, 1.5, 3.0}) kerr = std::max(kerr, std::abs(kummer_m(a, b, 0.0) - 1.0));
    }
    for (int i = 0; i <= 100; ++i) {
        const double z = -10.0 + 20.0 * i / 100;
        kerr = std::max(kerr, std::abs(kummer_m(1.0, 1.0, z) / std::exp(z) - 1.0));
    }
    o.require(kerr <= 1e-10, "kummer identities " + fmt(kerr));

    double derr = 0.0, derr_q = 0.0, derr_z = 0.0;
    int dfail = 0;
    const double step = 1e-5;
    for (double q : {1.1, 2.0, 4.0, 10.0}) {
        for (int i = 0; i <= 39; ++i) {
            const double z = 0.1 + 3.9 * i / 39;
            const double fd = (h_function(z + step, q) - h_function(z - step, q)) / (2.0 * step);
            const double rel = std::abs(fd / h_derivative(z, q) - 1.0);
            dfail += rel > 1e-6;
            if (rel > derr) derr = rel, derr_q = q, derr_z = z;
        }
    }
    o.require(derr <= 1e-6, "h' vs differences: " + std::to_string(dfail) + "/160 points above 1e-6, worst " +
                                fmt(derr) + " at q=" + fmt(derr_q) + " z=" + fmt(derr_z));

    const double oracle = 2.0 * simpson([](double v) { return 0.5 * std::erfc(v / std::sqrt(2.0)) * 2.0 * v; },
                                        0.0, 40.0, 400000);
    const double herr = std::max(std::abs(h_function(0.0, 2.0) - oracle), std::abs(h_function(0.0, 2.0) - 1.0));
    o.require(herr <= 1e-8, "H(0) for q=2 " + fmt(herr));
    o.detail << " cdf/quantile " << fmt(qerr, 3) << ", kummer " << fmt(kerr, 3) << ", h' " << fmt(derr, 3)
             << ", H(0) " << fmt(herr, 3);
    return o;
}

// 10. two-trajectory approximation for rare jumps
Outcome small_lambda() {
    Outcome o;
    const ForecastSpec f = ForecastSpec::lipschitz(1.0, 1.0);
    ExperimentSpec spec{PoissonSlopeParams{0.01, 0.5, 1.0, 1.0, 0.0, 1.0},
                        {PerfectRule{f}, DeterministicRule{0.0}, DeterministicRule{0.5}, DeterministicRule{1.0}},
                        f};
    spec.n_paths = 100000;
    spec.master_seed = 10;
    const RegretReport r = run_experiment(spec);
    const SmallLambdaApproximation a = small_lambda_approximation(0.5, 1.0);
    std::vector<std::pair<std::string, std::pair<double, double>>> checks{
        {"E sigma*", {r.rules[0].stop_time.mean, a.mean_stop_time()}},
        {"E sigma* estimated", {r.rules[0].estimated_regret.mean, a.estimated_regret_perfect()}},
        {"E^ sigma*", {r.rules[0].realized_regret.mean, a.realized_regret_perfect()}}};
    const double us[] = {0.0, 0.5, 1.0};
    for (int k = 0; k < 3; ++k) {
        checks.push_back({"E tau_" + fmt(us[k]), {r.rules[k + 1].estimated_regret.mean, a.estimated_regret_deterministic(us[k])}});
        checks.push_back({"E^ tau_" + fmt(us[k]), {r.rules[k + 1].realized_regret.mean, a.realized_regret_deterministic(us[k])}});
    }
    double worst = 0.0;
    for (const auto& [name, v] : checks) {
        worst = std::max(worst, std::abs(v.first - v.second));
        o.require(std::abs(v.first - v.second) <= 0.02, name + ": " + fmt(v.first) + " vs " + fmt(v.second));
    }
    o.detail << " max deviation " << fmt(worst, 3) << " over " << checks.size() << " quantities";
    return o;
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        Outcome (*run)();
        double time_limit;  // seconds, 0 for none
    };
    const Criterion criteria[] = {
        {"table 3 thresholds", table3, 1.0},          {"table 1 over lambda", table1, 120.0},
        {"table 2 over p", table2, 120.0},            {"lower bound and worst case", closed_forms, 0.0},
        {"crossing identity", crossing_identity, 0.0}, {"perfection on random trees", trees, 60.0},
        {"quantile calibration", calibration, 0.0},   {"optional sampling", doob, 0.0},
        {"special functions", special_functions, 0.0}, {"small lambda approximation", small_lambda, 0.0},
    };
    int failed = 0;
    for (std::size_t i = 0; i < std::size(criteria); ++i) {
        const Criterion& c = criteria[i];
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.require(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (c.time_limit > 0.0) o.require(secs < c.time_limit, "runtime over " + fmt(c.time_limit) + " s");
        failed += !o.pass;
        std::printf("%s %2zu %-28s %8.2f s %s\n", o.pass ? "PASS" : "FAIL", i + 1, c.name, secs,
                    o.detail.str().c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(std::size(criteria)) - failed, std::size(criteria));
    return failed == 0 ? 0 : 1;
}
