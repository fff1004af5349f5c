#pragma once

#include "perfstop/forecast.hpp"
#include "perfstop/models.hpp"
#include "perfstop/stopping.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <vector>

namespace perfstop {

/// z for a two-sided 99% normal confidence interval.
inline constexpr double kZ99 = 2.576;

/// Paths per accumulation block. Blocks are summed internally and merged in
/// index order, so results do not depend on how blocks are spread over threads.
inline constexpr std::uint64_t kBlockSize = 4096;

/// Streaming mean/variance (Welford), mergeable with Chan's update.
class MeanAccumulator {
public:
    void add(double x) noexcept {
        ++n_;
        const double d = x - mean_;
        mean_ += d / static_cast<double>(n_);
        m2_ += d * (x - mean_);
    }
    void merge(const MeanAccumulator& o) noexcept;

    std::uint64_t count() const noexcept { return n_; }
    double mean() const noexcept { return mean_; }
    /// Sample variance with n-1 denominator; 0 for fewer than two samples.
    double variance() const noexcept { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }

private:
    std::uint64_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

struct Estimate {
    double mean = 0.0;
    double std_error = 0.0;  // sample sd / √n, infinite below two samples
    double ci99 = 0.0;       // kZ99 * std_error

    static Estimate from(const MeanAccumulator& acc);
};

struct ExperimentSpec {
    ModelParams model;
    std::vector<StoppingRuleSpec> rules;
    ForecastSpec forecast;
    std::uint64_t n_paths = 1'000'000;
    std::uint64_t master_seed = 20140701;
    unsigned n_threads = 0;  // 0: hardware concurrency
    double tol = kCrossingTol;

    void validate() const;
};

struct RuleSummary {
    StoppingRuleSpec rule;
    Estimate realized_regret;   // Ê(τ) = E(X*_T - X_τ)
    Estimate estimated_regret;  // E(τ) = E max{X*_τ - X_τ, ψ(τ)}
    Estimate stop_time;         // E τ
};

struct RegretReport {
    std::vector<RuleSummary> rules;
    std::uint64_t n_paths = 0;
    std::uint64_t master_seed = 0;
    /// Digest of every sampled knot, in path order. Equal digests mean the
    /// same path sequence was drawn.
    std::uint64_t path_digest = 0;
};

/// Evaluates every rule on the same sampled path for each of n_paths indices;
/// path i uses the stream derived from (master_seed, i).
RegretReport run_experiment(const ExperimentSpec& spec);

/// Two-trajectory (λ → 0) approximations for the Poisson slope model with
/// L1 = L2 = 1: only x0 + s (probability p) and x0 - s (probability q) remain.
struct SmallLambdaApproximation {
    double p;
    double T;

    double q() const noexcept { return 1.0 - p; }
    /// E σ* ≈ p T + q T/2.
    double mean_stop_time() const noexcept { return T - q() * T / 2.0; }
    /// Ê(σ*) ≈ E(σ*) ≈ qT/2.
    double realized_regret_perfect() const noexcept { return q() * T / 2.0; }
    double estimated_regret_perfect() const noexcept { return q() * T / 2.0; }
    /// Ê(τ_u) ≈ pT + (q - p)u.
    double realized_regret_deterministic(double u) const noexcept { return p * T + (q() - p) * u; }
    /// E(τ_u) ≈ max{pT + (q - p)u, T - u}.
    double estimated_regret_deterministic(double u) const noexcept;
};

SmallLambdaApproximation small_lambda_approximation(double p, double T);

struct PairDifference {
    std::size_t i, j;
    double mean_diff;  // Ê(τ_{u_i}) - Ê(τ_{u_j})
    double std_error;    // of the paired per-path difference
    bool within_ci99;
    bool within_3se;
};

struct DoobReport {
    std::vector<double> times;
    std::vector<Estimate> realized_regret;
    std::vector<PairDifference> pairs;
    double max_abs_diff = 0.0;
    bool within_ci99 = true;
    bool within_3se = true;
    std::uint64_t n_paths = 0;
    std::uint64_t master_seed = 0;
};

/// Under the Bachelier model X is a martingale, so Ê(τ_u) = E X*_T - x0 for
/// every deterministic u. Estimates Ê(τ_u) with common random numbers and
/// tests each pairwise difference against its paired standard error.
DoobReport doob_check(const BachelierParams& params, const std::vector<DeterministicRule>& rules,
                      std::uint64_t n_paths, std::uint64_t master_seed, unsigned n_threads = 0);

struct CoveragePoint {
    double t;
    double psi;
    Estimate frequency;  // of {max_{t<=s<=T} X_s - X_t <= ψ(t)}
};

/// Empirical coverage of the forecast by the future running maximum.
std::vector<CoveragePoint> future_max_coverage(const BachelierParams& params, const ForecastSpec& forecast,
                                               const std::vector<double>& times, std::uint64_t n_paths,
                                               std::uint64_t master_seed, unsigned n_threads = 0);

void to_json(nlohmann::json& j, const Estimate& e);
void to_json(nlohmann::json& j, const RegretReport& r);
void to_json(nlohmann::json& j, const DoobReport& r);

}  // namespace perfstop
