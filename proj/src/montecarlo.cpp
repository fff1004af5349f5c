#include "perfstop/montecarlo.hpp"

#include "perfstop/errors.hpp"
#include "perfstop/rng.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace perfstop {

void MeanAccumulator::merge(const MeanAccumulator& o) noexcept {
    if (o.n_ == 0) return;
    if (n_ == 0) {
        *this = o;
        return;
    }
    const double n_a = static_cast<double>(n_);
    const double n_b = static_cast<double>(o.n_);
    const double n = n_a + n_b;
    const double d = o.mean_ - mean_;
    mean_ += d * n_b / n;
    m2_ += o.m2_ + d * d * n_a * n_b / n;
    n_ += o.n_;
}

Estimate Estimate::from(const MeanAccumulator& acc) {
    Estimate e;
    e.mean = acc.mean();
    // a single sample says nothing about the spread
    e.std_error = acc.count() > 1 ? std::sqrt(acc.variance() / static_cast<double>(acc.count()))
                                  : std::numeric_limits<double>::infinity();
    e.ci99 = kZ99 * e.std_error;
    return e;
}

namespace {

unsigned resolve_threads(unsigned requested) {
    if (requested > 0) return requested;
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs `per_path(index, block_state)` for every index, one state per block of
/// kBlockSize consecutive indices, and returns the block states in order.
template <class State, class MakeState, class PerPath>
std::vector<State> run_blocks(std::uint64_t n_paths, unsigned n_threads, MakeState make_state, PerPath per_path) {
    const std::uint64_t n_blocks = (n_paths + kBlockSize - 1) / kBlockSize;
    std::vector<State> blocks;
    blocks.reserve(n_blocks);
    for (std::uint64_t b = 0; b < n_blocks; ++b) blocks.push_back(make_state());

    std::atomic<std::uint64_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    const auto worker = [&] {
        try {
            for (std::uint64_t b = next++; b < n_blocks; b = next++) {
                const std::uint64_t end = std::min(n_paths, (b + 1) * kBlockSize);
                for (std::uint64_t i = b * kBlockSize; i < end; ++i) per_path(i, blocks[b]);
            }
        } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            next = n_blocks;
        }
    };
    const unsigned threads = static_cast<unsigned>(std::min<std::uint64_t>(resolve_threads(n_threads), n_blocks));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned k = 0; k < threads; ++k) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);
    return blocks;
}

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

// FNV-1a over 64-bit words rather than bytes, with an xor-shift to fold the high bits back
std::uint64_t fnv_mix(std::uint64_t h, std::uint64_t word) {
    h = (h ^ word) * kFnvPrime;
    return h ^ (h >> 29);
}

std::uint64_t path_hash(std::span<const Knot> knots) {
    std::uint64_t h = kFnvOffset;
    for (const Knot& k : knots) {
        h = fnv_mix(h, std::bit_cast<std::uint64_t>(k.t));
        h = fnv_mix(h, std::bit_cast<std::uint64_t>(k.price));
    }
    return h;
}

void sample_into(const ModelParams& model, std::uint64_t seed, std::vector<Knot>& knots) {
    if (const auto* poisson = std::get_if<PoissonSlopeParams>(&model)) {
        sample_poisson_slope_into(*poisson, seed, knots);
    } else {
        sample_bachelier_into(std::get<BachelierParams>(model), seed, knots);
    }
}

double max_price(std::span<const Knot> knots) {
    double m = knots.front().price;
    for (const Knot& k : knots) m = std::max(m, k.price);
    return m;
}

struct ExperimentBlock {
    std::vector<MeanAccumulator> realized, estimated, stop_time;
    std::uint64_t digest = kFnvOffset;
    std::vector<Knot> buffer;
};

}  // namespace

void ExperimentSpec::validate() const {
    std::visit([](const auto& m) { m.validate(); }, model);
    if (n_paths == 0) throw ParameterError("experiment: n_paths must be >= 1");
    if (rules.empty()) throw ParameterError("experiment: at least one rule is required");
    const double T = horizon(model);
    const auto mismatch = [T](double other) {
        return std::abs(other - T) > kStructuralTol * std::max(1.0, T);
    };
    if (mismatch(forecast.horizon())) throw DomainError("experiment: forecast horizon differs from model horizon");
    for (const auto& rule : rules) {
        if (const auto* perfect = std::get_if<PerfectRule>(&rule)) {
            if (mismatch(perfect->forecast.horizon())) {
                throw DomainError("experiment: rule forecast horizon differs from model horizon");
            }
        } else {
            const double u = std::get<DeterministicRule>(rule).u;
            if (!(u >= 0.0 && u <= T)) throw DomainError("experiment: deterministic time outside [0, T]");
        }
    }
    if (!(tol > 0.0)) throw ParameterError("experiment: tol must be > 0");
}

RegretReport run_experiment(const ExperimentSpec& spec) {
    spec.validate();
    const std::size_t n_rules = spec.rules.size();
    const auto make_block = [n_rules] {
        ExperimentBlock b;
        b.realized.resize(n_rules);
        b.estimated.resize(n_rules);
        b.stop_time.resize(n_rules);
        return b;
    };
    const auto per_path = [&spec, n_rules](std::uint64_t index, ExperimentBlock& block) {
        sample_into(spec.model, stream_seed(spec.master_seed, index), block.buffer);
        block.digest = fnv_mix(block.digest, path_hash(block.buffer));
        PricePath path(std::move(block.buffer));
        const double ultimate_max = max_price(path.knots());
        for (std::size_t r = 0; r < n_rules; ++r) {
            const StopResult res = apply_rule(path, spec.rules[r], spec.tol);
            const double psi_at = spec.forecast(std::min(res.stop_time, spec.forecast.horizon()));
            block.realized[r].add(ultimate_max - res.stop_price);
            block.estimated[r].add(std::max(res.drawdown_at_stop, psi_at));
            block.stop_time[r].add(res.stop_time);
        }
        block.buffer = std::move(path).release();
    };
    const auto blocks = run_blocks<ExperimentBlock>(spec.n_paths, spec.n_threads, make_block, per_path);

    RegretReport report;
    report.n_paths = spec.n_paths;
    report.master_seed = spec.master_seed;
    report.path_digest = kFnvOffset;
    std::vector<MeanAccumulator> realized(n_rules), estimated(n_rules), stop_time(n_rules);
    for (const auto& b : blocks) {
        for (std::size_t r = 0; r < n_rules; ++r) {
            realized[r].merge(b.realized[r]);
            estimated[r].merge(b.estimated[r]);
            stop_time[r].merge(b.stop_time[r]);
        }
        report.path_digest = fnv_mix(report.path_digest, b.digest);
    }
    for (std::size_t r = 0; r < n_rules; ++r) {
        report.rules.push_back({spec.rules[r], Estimate::from(realized[r]), Estimate::from(estimated[r]),
                                Estimate::from(stop_time[r])});
    }
    return report;
}

double SmallLambdaApproximation::estimated_regret_deterministic(double u) const noexcept {
    return std::max(p * T + (q() - p) * u, T - u);
}

SmallLambdaApproximation small_lambda_approximation(double p, double T) {
    if (!(p > 0.0 && p < 1.0)) throw ParameterError("small_lambda_approximation: p must lie in (0,1)");
    if (!(T > 0.0)) throw ParameterError("small_lambda_approximation: T must be > 0");
    return {p, T};
}

namespace {

struct DoobBlock {
    std::vector<MeanAccumulator> realized;
    std::vector<MeanAccumulator> diffs;  // upper-triangular pairs in row order
    std::vector<Knot> buffer;
    std::vector<double> values;
};

}  // namespace

DoobReport doob_check(const BachelierParams& params, const std::vector<DeterministicRule>& rules,
                      std::uint64_t n_paths, std::uint64_t master_seed, unsigned n_threads) {
    params.validate();
    if (n_paths == 0) throw ParameterError("doob_check: n_paths must be >= 1");
    if (rules.empty()) throw ParameterError("doob_check: at least one deterministic time is required");
    for (const auto& r : rules) {
        if (!(r.u >= 0.0 && r.u <= params.T)) throw DomainError("doob_check: time outside [0, T]");
    }
    const std::size_t n = rules.size();
    const std::size_t n_pairs = n * (n - 1) / 2;
    const auto make_block = [n, n_pairs] {
        DoobBlock b;
        b.realized.resize(n);
        b.diffs.resize(n_pairs);
        b.values.resize(n);
        return b;
    };
    const auto per_path = [&](std::uint64_t index, DoobBlock& block) {
        sample_bachelier_into(params, stream_seed(master_seed, index), block.buffer);
        PricePath path(std::move(block.buffer));
        const double ultimate_max = max_price(path.knots());
        for (std::size_t k = 0; k < n; ++k) {
            block.values[k] = ultimate_max - price_at(path, rules[k].u);
            block.realized[k].add(block.values[k]);
        }
        std::size_t pair = 0;
        for (std::size_t a = 0; a < n; ++a) {
            for (std::size_t b = a + 1; b < n; ++b) block.diffs[pair++].add(block.values[a] - block.values[b]);
        }
        block.buffer = std::move(path).release();
    };
    const auto blocks = run_blocks<DoobBlock>(n_paths, n_threads, make_block, per_path);

    std::vector<MeanAccumulator> realized(n), diffs(n_pairs);
    for (const auto& b : blocks) {
        for (std::size_t k = 0; k < n; ++k) realized[k].merge(b.realized[k]);
        for (std::size_t k = 0; k < n_pairs; ++k) diffs[k].merge(b.diffs[k]);
    }

    DoobReport report;
    report.n_paths = n_paths;
    report.master_seed = master_seed;
    for (std::size_t k = 0; k < n; ++k) {
        report.times.push_back(rules[k].u);
        report.realized_regret.push_back(Estimate::from(realized[k]));
    }
    std::size_t pair = 0;
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a + 1; b < n; ++b) {
            const Estimate e = Estimate::from(diffs[pair++]);
            const double abs_diff = std::abs(e.mean);
            PairDifference d{a, b, e.mean, e.std_error, abs_diff <= kZ99 * e.std_error, abs_diff <= 3.0 * e.std_error};
            report.max_abs_diff = std::max(report.max_abs_diff, abs_diff);
            report.within_ci99 = report.within_ci99 && d.within_ci99;
            report.within_3se = report.within_3se && d.within_3se;
            report.pairs.push_back(d);
        }
    }
    return report;
}

namespace {

struct CoverageBlock {
    std::vector<MeanAccumulator> hits;
    std::vector<Knot> buffer;
};

}  // namespace

std::vector<CoveragePoint> future_max_coverage(const BachelierParams& params, const ForecastSpec& forecast,
                                               const std::vector<double>& times, std::uint64_t n_paths,
                                               std::uint64_t master_seed, unsigned n_threads) {
    params.validate();
    if (n_paths == 0) throw ParameterError("future_max_coverage: n_paths must be >= 1");
    if (std::abs(forecast.horizon() - params.T) > kStructuralTol * std::max(1.0, params.T)) {
        throw DomainError("future_max_coverage: forecast horizon differs from model horizon");
    }
    std::vector<double> thresholds;
    for (double t : times) {
        if (!(t >= 0.0 && t <= params.T)) throw DomainError("future_max_coverage: time outside [0, T]");
        thresholds.push_back(forecast(std::min(t, forecast.horizon())));
    }
    const std::size_t n = times.size();
    const auto make_block = [n] {
        CoverageBlock b;
        b.hits.resize(n);
        return b;
    };
    const auto per_path = [&](std::uint64_t index, CoverageBlock& block) {
        sample_bachelier_into(params, stream_seed(master_seed, index), block.buffer);
        PricePath path(std::move(block.buffer));
        const auto knots = path.knots();
        for (std::size_t k = 0; k < n; ++k) {
            const double x_t = price_at(path, times[k]);
            double future_max = x_t;
            for (std::size_t i = path.segment_index(times[k]) + 1; i < knots.size(); ++i) {
                future_max = std::max(future_max, knots[i].price);
            }
            block.hits[k].add(future_max - x_t <= thresholds[k] ? 1.0 : 0.0);
        }
        block.buffer = std::move(path).release();
    };
    const auto blocks = run_blocks<CoverageBlock>(n_paths, n_threads, make_block, per_path);

    std::vector<CoveragePoint> out;
    for (std::size_t k = 0; k < n; ++k) {
        MeanAccumulator acc;
        for (const auto& b : blocks) acc.merge(b.hits[k]);
        out.push_back({times[k], thresholds[k], Estimate::from(acc)});
    }
    return out;
}

void to_json(nlohmann::json& j, const Estimate& e) {
    j = {{"mean", e.mean}, {"stderr", e.std_error}, {"ci99", e.ci99}};
}

void to_json(nlohmann::json& j, const RegretReport& r) {
    j = nlohmann::json::object();
    j["n_paths"] = r.n_paths;
    j["master_seed"] = r.master_seed;
    j["path_digest"] = r.path_digest;
    auto& rules = j["rules"] = nlohmann::json::array();
    for (const auto& s : r.rules) {
        nlohmann::json rule;
        to_json(rule, s.rule);
        rules.push_back({{"rule", rule},
                         {"mean_realized_regret", s.realized_regret},
                         {"mean_estimated_regret", s.estimated_regret},
                         {"mean_stop_time", s.stop_time}});
    }
}

void to_json(nlohmann::json& j, const DoobReport& r) {
    j = nlohmann::json::object();
    j["n_paths"] = r.n_paths;
    j["master_seed"] = r.master_seed;
    j["times"] = r.times;
    j["realized_regret"] = r.realized_regret;
    auto& pairs = j["pairs"] = nlohmann::json::array();
    for (const auto& p : r.pairs) {
        pairs.push_back({{"i", p.i},
                         {"j", p.j},
                         {"mean_diff", p.mean_diff},
                         {"stderr", p.std_error},
                         {"within_ci99", p.within_ci99},
                         {"within_3se", p.within_3se}});
    }
    j["max_abs_diff"] = r.max_abs_diff;
    j["within_ci99"] = r.within_ci99;
    j["within_3se"] = r.within_3se;
}

}  // namespace perfstop
