#include "perfstop/errors.hpp"
#include "perfstop/montecarlo.hpp"
#include "perfstop/special.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace perfstop;

namespace {

ExperimentSpec poisson_experiment(double lambda, double p, std::uint64_t n, unsigned threads = 0) {
    const ForecastSpec f = ForecastSpec::lipschitz(1.0, 1.0);
    ExperimentSpec spec{PoissonSlopeParams{lambda, p, 1.0, 1.0, 0.0, 1.0},
                        {PerfectRule{f}, DeterministicRule{0.0}, DeterministicRule{0.5}, DeterministicRule{1.0}},
                        f};
    spec.n_paths = n;
    spec.master_seed = 77;
    spec.n_threads = threads;
    return spec;
}

}  // namespace

TEST(MeanAccumulator, MatchesTwoPassAndMergesInAnyOrder) {
    std::mt19937_64 gen(5);
    std::normal_distribution<double> d(3.0, 2.0);
    std::vector<double> xs(10001);
    for (double& x : xs) x = d(gen);
    double mean = 0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double ss = 0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    const double var = ss / static_cast<double>(xs.size() - 1);

    MeanAccumulator whole, a, b, c;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        whole.add(xs[i]);
        (i < 17 ? a : i < 6000 ? b : c).add(xs[i]);
    }
    a.merge(b);
    a.merge(c);
    MeanAccumulator empty;
    a.merge(empty);
    empty.merge(whole);
    for (const MeanAccumulator* acc : {&whole, &a, &empty}) {
        EXPECT_EQ(acc->count(), xs.size());
        EXPECT_NEAR(acc->mean(), mean, 1e-12);
        EXPECT_NEAR(acc->variance(), var, 1e-10);
    }
}

TEST(Estimate, SmallSamples) {
    MeanAccumulator one;
    one.add(0.3);
    const Estimate e = Estimate::from(one);
    EXPECT_EQ(e.mean, 0.3);
    EXPECT_EQ(e.std_error, std::numeric_limits<double>::infinity());
    EXPECT_EQ(e.ci99, std::numeric_limits<double>::infinity());
    const nlohmann::json j = e;
    EXPECT_EQ(nlohmann::json::parse(j.dump())["stderr"], nullptr);

    MeanAccumulator two;
    two.add(1.0);
    two.add(3.0);
    const Estimate f = Estimate::from(two);
    EXPECT_DOUBLE_EQ(f.std_error, 1.0);
    EXPECT_DOUBLE_EQ(f.ci99, kZ99);
}

TEST(Experiment, ReproducibleAcrossThreadCounts) {
    const RegretReport a = run_experiment(poisson_experiment(10.0, 0.5, 10000, 1));
    const RegretReport b = run_experiment(poisson_experiment(10.0, 0.5, 10000, 3));
    const RegretReport c = run_experiment(poisson_experiment(10.0, 0.5, 10000, 0));
    EXPECT_EQ(a.path_digest, b.path_digest);
    EXPECT_EQ(a.path_digest, c.path_digest);
    for (std::size_t r = 0; r < a.rules.size(); ++r) {
        for (const RegretReport* o : {&b, &c}) {
            EXPECT_EQ(a.rules[r].realized_regret.mean, o->rules[r].realized_regret.mean);
            EXPECT_EQ(a.rules[r].estimated_regret.mean, o->rules[r].estimated_regret.mean);
            EXPECT_EQ(a.rules[r].stop_time.std_error, o->rules[r].stop_time.std_error);
        }
    }
    EXPECT_EQ(nlohmann::json(a).dump(), nlohmann::json(b).dump());
}

TEST(Experiment, CommonRandomNumbersAcrossRuleSets) {
    ExperimentSpec one = poisson_experiment(50.0, 0.4, 5000);
    ExperimentSpec other = one;
    other.rules = {DeterministicRule{0.25}};
    const RegretReport a = run_experiment(one), b = run_experiment(other);
    EXPECT_EQ(a.path_digest, b.path_digest);
    other.master_seed += 1;
    EXPECT_NE(run_experiment(other).path_digest, a.path_digest);
}

TEST(Experiment, VarianceBoundOnConfidenceLength) {
    // regrets and stop times lie in [0, T], so sd <= T/2 and the CI99 half-width is at most 2.576 T / (2√n)
    const std::uint64_t n = 20000;
    const RegretReport r = run_experiment(poisson_experiment(1.0, 0.5, n));
    for (const RuleSummary& s : r.rules) {
        for (const Estimate& e : {s.realized_regret, s.estimated_regret, s.stop_time}) {
            EXPECT_LE(e.ci99, kZ99 * 0.5 / std::sqrt(static_cast<double>(n)) + 1e-12);
        }
    }
    // at the full 10^6 paths the CI99 length is below 0.006
    EXPECT_LT(2.0 * kZ99 * 0.5 / std::sqrt(1e6), 0.006);
}

TEST(Experiment, RuleIdentities) {
    const RegretReport r = run_experiment(poisson_experiment(10.0, 0.5, 20000));
    // τ = T: estimated regret is the terminal drawdown, which equals the realized regret
    EXPECT_EQ(r.rules[3].estimated_regret.mean, r.rules[3].realized_regret.mean);
    // τ = 0: estimated regret is ψ(0) = L2 T
    EXPECT_EQ(r.rules[1].estimated_regret.mean, 1.0);
    EXPECT_EQ(r.rules[1].stop_time.mean, 0.0);
    // σ* has the smallest estimated regret among the rules on every path, so also on average
    for (std::size_t k = 1; k < r.rules.size(); ++k) {
        EXPECT_LE(r.rules[0].estimated_regret.mean, r.rules[k].estimated_regret.mean + 1e-12);
    }
}

TEST(Experiment, ValidationErrors) {
    ExperimentSpec s = poisson_experiment(1.0, 0.5, 10);
    s.n_paths = 0;
    EXPECT_THROW(run_experiment(s), ParameterError);
    s = poisson_experiment(1.0, 0.5, 10);
    s.rules = {DeterministicRule{2.0}};
    EXPECT_THROW(run_experiment(s), DomainError);
    s = poisson_experiment(1.0, 0.5, 10);
    s.forecast = ForecastSpec::lipschitz(1.0, 2.0);
    EXPECT_THROW(run_experiment(s), DomainError);
    s = poisson_experiment(1.0, 0.5, 10);
    s.rules.clear();
    EXPECT_THROW(run_experiment(s), ParameterError);
}

TEST(Experiment, SinglePathHasInfiniteError) {
    const RegretReport r = run_experiment(poisson_experiment(1.0, 0.5, 1));
    EXPECT_TRUE(std::isinf(r.rules[0].stop_time.ci99));
}

TEST(Experiment, FlatBachelierPath) {
    const ForecastSpec f = ForecastSpec::brownian_quantile(1.0, 0.74, 1.0);
    ExperimentSpec spec{BachelierParams{1.0, 0.0, 1.0, 100}, {PerfectRule{f}}, f};
    spec.n_paths = 50;
    const RegretReport r = run_experiment(spec);
    EXPECT_EQ(r.rules[0].realized_regret.mean, 0.0);
    EXPECT_EQ(r.rules[0].stop_time.mean, 1.0);
    EXPECT_EQ(r.rules[0].estimated_regret.mean, 0.0);  // ψ(T) = 0
}

TEST(SmallLambda, Examples) {
    const SmallLambdaApproximation a = small_lambda_approximation(0.5, 1.0);
    EXPECT_DOUBLE_EQ(a.mean_stop_time(), 0.75);
    EXPECT_DOUBLE_EQ(a.realized_regret_perfect(), 0.25);
    EXPECT_DOUBLE_EQ(a.realized_regret_deterministic(0.3), 0.5);
    EXPECT_DOUBLE_EQ(a.estimated_regret_deterministic(0.0), 1.0);
    EXPECT_DOUBLE_EQ(a.estimated_regret_deterministic(0.5), 0.5);
    EXPECT_DOUBLE_EQ(a.estimated_regret_deterministic(1.0), 0.5);
    const SmallLambdaApproximation b = small_lambda_approximation(0.2, 2.0);
    EXPECT_DOUBLE_EQ(b.realized_regret_deterministic(1.0), 0.4 + 0.6);
    EXPECT_THROW(small_lambda_approximation(1.0, 1.0), ParameterError);
    EXPECT_THROW(small_lambda_approximation(0.5, 0.0), ParameterError);
}

TEST(SmallLambda, MonteCarloAgrees) {
    for (double p : {0.3, 0.5, 0.7}) {
        const RegretReport r = run_experiment(poisson_experiment(0.01, p, 40000));
        const SmallLambdaApproximation a = small_lambda_approximation(p, 1.0);
        EXPECT_NEAR(r.rules[0].stop_time.mean, a.mean_stop_time(), 0.02);
        EXPECT_NEAR(r.rules[0].realized_regret.mean, a.realized_regret_perfect(), 0.02);
        EXPECT_NEAR(r.rules[0].estimated_regret.mean, a.estimated_regret_perfect(), 0.02);
        const double us[] = {0.0, 0.5, 1.0};
        for (int k = 0; k < 3; ++k) {
            EXPECT_NEAR(r.rules[k + 1].realized_regret.mean, a.realized_regret_deterministic(us[k]), 0.02);
            EXPECT_NEAR(r.rules[k + 1].estimated_regret.mean, a.estimated_regret_deterministic(us[k]), 0.02);
        }
    }
}

TEST(Doob, FlatPathsGiveEqualRegrets) {
    const DoobReport r = doob_check({0.0, 0.0, 1.0, 50}, {{0.0}, {0.5}, {1.0}}, 100, 1);
    EXPECT_EQ(r.max_abs_diff, 0.0);
    EXPECT_EQ(r.pairs.size(), 3u);
    for (const Estimate& e : r.realized_regret) EXPECT_EQ(e.mean, 0.0);
}

TEST(Doob, SingleTimeHasNoPairs) {
    const DoobReport r = doob_check({0.0, 1.0, 1.0, 50}, {{0.3}}, 100, 1);
    EXPECT_TRUE(r.pairs.empty());
    EXPECT_TRUE(r.within_3se);
    EXPECT_THROW(doob_check({0.0, 1.0, 1.0, 50}, {{1.3}}, 100, 1), DomainError);
}

TEST(Doob, MartingaleRegretsAgree) {
    const DoobReport r = doob_check({0.0, 1.0, 1.0, 256}, {{0.0}, {0.5}, {1.0}}, 20000, 3);
    EXPECT_TRUE(r.within_3se) << nlohmann::json(r).dump();
    // E X*_T - x0 is √(2T/π) for the continuous path; the grid max sits slightly below it
    const double expected = std::sqrt(2.0 / std::numbers::pi);
    for (const Estimate& e : r.realized_regret) {
        EXPECT_LT(e.mean, expected + 4 * e.std_error);
        EXPECT_GT(e.mean, expected - 0.06 - 4 * e.std_error);
    }
}

TEST(Coverage, QuantileForecastIsCalibrated) {
    const BachelierParams params{0.0, 1.0, 1.0, 1000};
    for (double delta : {0.74, 0.95}) {
        const auto points = future_max_coverage(params, ForecastSpec::brownian_quantile(1.0, delta, 1.0),
                                                {0.0, 0.5, 1.0}, 20000, 11);
        ASSERT_EQ(points.size(), 3u);
        for (int k = 0; k < 2; ++k) EXPECT_NEAR(points[k].frequency.mean, delta, 0.02) << delta;
        EXPECT_EQ(points[2].frequency.mean, 1.0);
        EXPECT_EQ(points[2].psi, 0.0);
    }
    EXPECT_THROW(future_max_coverage(params, ForecastSpec::lipschitz(1.0, 2.0), {0.0}, 10, 1), DomainError);
}
