#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace perfstop {

/// Default tolerance for structural comparisons of times and prices.
inline constexpr double kStructuralTol = 1e-12;

struct Knot {
    double t;
    double price;
};

/// Continuous piecewise-linear price trajectory on [0, T].
///
/// Knot times are strictly increasing, start at 0 and end at T; there are at
/// least two knots. Values are immutable after construction.
class PricePath {
public:
    explicit PricePath(std::vector<Knot> knots);

    std::span<const Knot> knots() const noexcept { return knots_; }
    double horizon() const noexcept { return knots_.back().t; }
    std::size_t size() const noexcept { return knots_.size(); }

    /// Index i of the segment [t_i, t_{i+1}] containing t (the last segment for t = T).
    std::size_t segment_index(double t) const;

    /// Hands the knot storage back for reuse.
    std::vector<Knot> release() && { return std::move(knots_); }

private:
    std::vector<Knot> knots_;
};

struct PathStatistics {
    double running_max;
    double drawdown;
    double at_time;
};

double price_at(const PricePath& path, double t);
double running_max(const PricePath& path, double t);
double drawdown(const PricePath& path, double t);
PathStatistics statistics_at(const PricePath& path, double t);

/// True iff |a(s) - b(s)| <= tol for all s in [0, t]. Sampling on the union of
/// knot times up to t plus t itself is exact for piecewise-linear paths.
bool same_prefix(const PricePath& a, const PricePath& b, double t, double tol = kStructuralTol);

/// Reads the `t,price` CSV format. Throws ParseError with the line number.
PricePath read_path_csv(std::istream& in);
PricePath read_path_csv_file(const std::string& filename);
void write_path_csv(std::ostream& out, const PricePath& path);

}  // namespace perfstop
