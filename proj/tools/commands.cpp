#include "commands.hpp"

#include "perfstop/errors.hpp"
#include "perfstop/montecarlo.hpp"
#include "perfstop/oracle.hpp"
#include "perfstop/special.hpp"
#include "perfstop/stopping.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace perfstop::cli {

namespace {

void require_nonempty(const std::vector<double>& v, const char* flag) {
    if (v.empty()) throw UsageError(std::string(flag) + " needs at least one value");
}

void push_estimate(std::vector<double>& row, const Estimate& e) {
    row.push_back(e.mean);
    row.push_back(e.ci99);
}

void add_estimate_columns(std::vector<Column>& cols, const std::string& name) {
    cols.push_back({name});
    cols.push_back({name + "_ci99"});
}

std::string format_number(double v, bool round2) {
    if (round2) {
        std::ostringstream s;
        s << std::fixed << std::setprecision(2) << v;
        return s.str();
    }
    // shortest text that reads back to the same double
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::ofstream open_output(const std::string& path) {
    std::ofstream f(path, std::ios::out | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    return f;
}

void finish_output(std::ofstream& f, const std::string& path) {
    f.flush();
    if (!f) throw IoError("error while writing '" + path + "'");
}

}  // namespace

std::vector<double> parse_list(const std::string& text, const std::string& flag) {
    std::vector<double> values;
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        const auto first = item.find_first_not_of(" \t");
        if (first == std::string::npos) throw UsageError(flag + ": empty entry in '" + text + "'");
        const auto last = item.find_last_not_of(" \t");
        double v = 0.0;
        const char* begin = item.data() + first;
        const char* end = item.data() + last + 1;
        const auto res = std::from_chars(begin, end, v);
        if (res.ec != std::errc() || res.ptr != end) throw UsageError(flag + ": not a number: '" + item + "'");
        values.push_back(v);
    }
    if (values.empty()) throw UsageError(flag + " needs at least one value");
    return values;
}

double Table::at(std::size_t row, const std::string& column) const {
    for (std::size_t c = 0; c < columns.size(); ++c) {
        if (columns[c].name == column) return rows.at(row).at(c);
    }
    throw std::out_of_range("no column '" + column + "'");
}

Table run_table1(const Table1Config& cfg) {
    require_nonempty(cfg.lambdas, "--lambdas");
    Table table;
    table.command = "table1";
    table.config = {{"lambdas", cfg.lambdas}, {"p", cfg.p},          {"L1", cfg.L1},
                    {"L2", cfg.L2},           {"T", cfg.T},          {"u", cfg.T / 2.0},
                    {"n_paths", cfg.n_paths}, {"seed", cfg.seed},    {"model", "poisson_slope"},
                    {"forecast", ForecastSpec::lipschitz(cfg.L2, cfg.T)}};
    table.columns = {{"lambda", true}};
    add_estimate_columns(table.columns, "E_sigma_star");
    add_estimate_columns(table.columns, "E_hat_sigma_star");
    add_estimate_columns(table.columns, "E_hat_u");

    const ForecastSpec forecast = ForecastSpec::lipschitz(cfg.L2, cfg.T);
    for (double lambda : cfg.lambdas) {
        ExperimentSpec spec{PoissonSlopeParams{lambda, cfg.p, cfg.L1, cfg.L2, 0.0, cfg.T},
                            {PerfectRule{forecast}, DeterministicRule{cfg.T / 2.0}},
                            forecast,
                            cfg.n_paths,
                            cfg.seed,
                            cfg.threads};
        const RegretReport r = run_experiment(spec);
        std::vector<double> row{lambda};
        push_estimate(row, r.rules[0].stop_time);
        push_estimate(row, r.rules[0].realized_regret);
        push_estimate(row, r.rules[1].realized_regret);
        table.rows.push_back(std::move(row));
    }
    return table;
}

Table run_table2(const Table2Config& cfg) {
    require_nonempty(cfg.ps, "--ps");
    Table table;
    table.command = "table2";
    table.config = {{"ps", cfg.ps},           {"lambda", cfg.lambda}, {"L1", cfg.L1},
                    {"L2", cfg.L2},           {"T", cfg.T},           {"n_paths", cfg.n_paths},
                    {"seed", cfg.seed},       {"model", "poisson_slope"},
                    {"forecast", ForecastSpec::lipschitz(cfg.L2, cfg.T)}};
    table.columns = {{"p", true}};
    for (const char* name : {"E_sigma_star", "E_hat_sigma_star", "E_hat_0", "E_hat_half", "E_hat_T"}) {
        add_estimate_columns(table.columns, name);
    }

    const ForecastSpec forecast = ForecastSpec::lipschitz(cfg.L2, cfg.T);
    for (double p : cfg.ps) {
        ExperimentSpec spec{PoissonSlopeParams{cfg.lambda, p, cfg.L1, cfg.L2, 0.0, cfg.T},
                            {PerfectRule{forecast}, DeterministicRule{0.0}, DeterministicRule{cfg.T / 2.0},
                             DeterministicRule{cfg.T}},
                            forecast,
                            cfg.n_paths,
                            cfg.seed,
                            cfg.threads};
        const RegretReport r = run_experiment(spec);
        std::vector<double> row{p};
        push_estimate(row, r.rules[0].stop_time);
        for (const auto& rule : r.rules) push_estimate(row, rule.realized_regret);
        table.rows.push_back(std::move(row));
    }
    return table;
}

Table run_table3(const Table3Config& cfg) {
    require_nonempty(cfg.qs, "--qs");
    Table table;
    table.command = "table3";
    table.config = {{"qs", cfg.qs}, {"sigma", cfg.sigma}};
    table.columns = {{"q", true}, {"z_q"}, {"c_delta"}, {"delta"}, {"residual", true}, {"iterations", true}};
    for (double q : cfg.qs) {
        const special::ZqSolution s = special::solve_zq(q, cfg.sigma);
        table.rows.push_back({q, s.z_q, s.c_delta, s.delta, s.residual, static_cast<double>(s.iterations)});
    }
    return table;
}

nlohmann::json run_verify(const VerifyConfig& cfg) {
    if (cfg.trees < 1) throw ParameterError("--trees must be >= 1");
    oracle::TreeGenConfig gen;
    gen.depth = cfg.max_depth;
    gen.max_branching = cfg.max_branching;

    nlohmann::json trees = nlohmann::json::array();
    int passed = 0;
    for (int i = 0; i < cfg.trees; ++i) {
        RandomStream rng(cfg.seed, static_cast<std::uint64_t>(i));
        // depth drawn per tree so shallow trees are covered too
        gen.depth = 1 + static_cast<int>(rng.uniform() * cfg.max_depth);
        if (cfg.max_depth > oracle::kMaxDepth) gen.depth = cfg.max_depth;
        const oracle::ScenarioTree tree = oracle::random_tree(gen, rng);
        const oracle::VerificationReport report = oracle::verify_perfection(tree);
        if (report.passed) ++passed;
        nlohmann::json entry = report;
        entry["tree"] = i;
        entry["depth"] = tree.depth();
        entry["n_nodes"] = tree.nodes().size();
        if (!report.passed) entry["tree_spec"] = tree;
        trees.push_back(std::move(entry));
    }
    return {{"command", "verify"},
            {"config",
             {{"trees", cfg.trees},
              {"max_depth", cfg.max_depth},
              {"max_branching", cfg.max_branching},
              {"seed", cfg.seed}}},
            {"passed", passed == cfg.trees},
            {"n_passed", passed},
            {"n_failed", cfg.trees - passed},
            {"trees", std::move(trees)}};
}

nlohmann::json run_apply(const ApplyConfig& cfg) {
    const PricePath path = read_path_csv_file(cfg.csv_path);
    nlohmann::json fj;
    std::string text = cfg.forecast_json;
    if (!text.empty() && text.front() == '@') {
        std::ifstream in(text.substr(1));
        if (!in) throw IoError("cannot open '" + text.substr(1) + "'");
        std::ostringstream buf;
        buf << in.rdbuf();
        text = buf.str();
    }
    try {
        fj = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParameterError(std::string("forecast JSON: ") + e.what());
    }
    if (fj.is_object() && !fj.contains("T")) fj["T"] = path.horizon();
    const ForecastSpec forecast = forecast_from_json(fj);
    const StopResult r = perfect_stop(path, forecast);

    nlohmann::json j = r;
    j["realized_regret"] = realized_regret(path, r.stop_time);
    j["estimated_regret"] = estimated_regret(path, r.stop_time, forecast);
    return {{"command", "apply"},
            {"config", {{"csv", cfg.csv_path}, {"forecast", forecast}, {"n_knots", path.size()}}},
            {"result", std::move(j)}};
}

void write_table(std::ostream& out, const Table& table, const OutputOptions& options) {
    if (options.format == Format::json) {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& row : table.rows) {
            nlohmann::json r = nlohmann::json::object();
            for (std::size_t c = 0; c < table.columns.size(); ++c) r[table.columns[c].name] = row[c];
            rows.push_back(std::move(r));
        }
        write_json(out, {{"command", table.command}, {"config", table.config}, {"rows", std::move(rows)}});
        return;
    }
    out << "# command: " << table.command << '\n';
    out << "# config: " << table.config.dump() << '\n';
    if (options.paper_rounding) out << "# paper_rounding: 2 decimals\n";
    for (std::size_t c = 0; c < table.columns.size(); ++c) out << (c ? "," : "") << table.columns[c].name;
    out << '\n';
    for (const auto& row : table.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            out << (c ? "," : "") << format_number(row[c], options.paper_rounding && !table.columns[c].key);
        }
        out << '\n';
    }
}

void write_json(std::ostream& out, const nlohmann::json& j) { out << j.dump(2) << '\n'; }

void emit_table(const Table& table, const OutputOptions& options, std::ostream& fallback) {
    if (options.out.empty()) {
        write_table(fallback, table, options);
        return;
    }
    std::ofstream f = open_output(options.out);
    write_table(f, table, options);
    finish_output(f, options.out);
}

void emit_json(const nlohmann::json& j, const std::string& out, std::ostream& fallback) {
    if (out.empty()) {
        write_json(fallback, j);
        return;
    }
    std::ofstream f = open_output(out);
    write_json(f, j);
    finish_output(f, out);
}

int exit_code_for(const std::exception& e) noexcept {
    if (dynamic_cast<const UsageError*>(&e)) return 2;
    if (dynamic_cast<const ParameterError*>(&e) || dynamic_cast<const DomainError*>(&e)) return 3;
    if (dynamic_cast<const SolverError*>(&e) || dynamic_cast<const AccuracyError*>(&e)) return 4;
    if (dynamic_cast<const SizeError*>(&e)) return 5;
    if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const ParseError*>(&e)) return 6;
    return 1;
}

}  // namespace perfstop::cli
