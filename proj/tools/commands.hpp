#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace perfstop::cli {

/// Output file could not be opened or written.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed command line that the argument parser cannot catch (e.g. an empty list).
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class Format { csv, json };

struct Column {
    std::string name;
    bool key = false;  // parameter column, never rounded
};

/// A result table plus the resolved configuration that produced it.
struct Table {
    std::string command;
    nlohmann::json config;
    std::vector<Column> columns;
    std::vector<std::vector<double>> rows;

    double at(std::size_t row, const std::string& column) const;
};

struct OutputOptions {
    Format format = Format::csv;
    bool paper_rounding = false;  // CSV only: round estimates to 2 decimals
    std::string out;              // empty: stdout
};

struct Table1Config {
    std::vector<double> lambdas{0.1, 1.0, 10.0, 50.0, 100.0, 1000.0};
    double p = 0.5;
    double L1 = 1.0;
    double L2 = 1.0;
    double T = 1.0;
    std::uint64_t n_paths = 1'000'000;
    std::uint64_t seed = 20140701;
    unsigned threads = 0;
};

struct Table2Config {
    std::vector<double> ps{0.2, 0.4, 0.6, 0.8};
    double lambda = 10.0;
    double L1 = 1.0;
    double L2 = 1.0;
    double T = 1.0;
    std::uint64_t n_paths = 1'000'000;
    std::uint64_t seed = 20140701;
    unsigned threads = 0;
};

struct Table3Config {
    std::vector<double> qs{1.1, 2.0, 4.0, 6.0, 8.0, 10.0};
    double sigma = 1.0;
};

struct VerifyConfig {
    int trees = 100;
    int max_depth = 4;
    int max_branching = 3;
    std::uint64_t seed = 20140701;
};

struct ApplyConfig {
    std::string csv_path;
    std::string forecast_json;  // inline JSON, or @file
};

/// Parses a comma-separated list of numbers. Throws UsageError for an empty list or a bad entry.
std::vector<double> parse_list(const std::string& text, const std::string& flag);

/// Columns: lambda, E_sigma_star, E_hat_sigma_star, E_hat_u (u = T/2), each estimate followed by its CI99 half-width.
Table run_table1(const Table1Config& config);
/// Columns: p, E_sigma_star, E_hat_sigma_star, E_hat_0, E_hat_half, E_hat_T with CI99 half-widths.
Table run_table2(const Table2Config& config);
/// Columns: q, z_q, delta, residual, iterations.
Table run_table3(const Table3Config& config);

nlohmann::json run_verify(const VerifyConfig& config);
nlohmann::json run_apply(const ApplyConfig& config);

void write_table(std::ostream& out, const Table& table, const OutputOptions& options);
void write_json(std::ostream& out, const nlohmann::json& j);

/// Writes to options.out, or to `fallback` when it is empty. Throws IoError naming the path.
void emit_table(const Table& table, const OutputOptions& options, std::ostream& fallback);
void emit_json(const nlohmann::json& j, const std::string& out, std::ostream& fallback);

/// Process exit code for an exception escaping a command.
int exit_code_for(const std::exception& e) noexcept;

}  // namespace perfstop::cli
