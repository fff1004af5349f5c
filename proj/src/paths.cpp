#include "perfstop/paths.hpp"

#include "perfstop/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

namespace perfstop {

namespace {

void check_time(const PricePath& path, double t) {
    if (!(t >= 0.0 && t <= path.horizon())) {
        std::ostringstream msg;
        msg << "time " << t << " outside [0, " << path.horizon() << "]";
        throw DomainError(msg.str());
    }
}

double interpolate(const Knot& a, const Knot& b, double t) {
    if (t == a.t) return a.price;
    if (t == b.t) return b.price;
    const double w = (t - a.t) / (b.t - a.t);
    return a.price + w * (b.price - a.price);
}

std::string trim(std::string s) {
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

double parse_number(const std::string& field, std::size_t line) {
    const std::string s = trim(field);
    if (s.empty()) throw ParseError("empty field", line);
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v)) {
        throw ParseError("not a finite number: '" + s + "'", line);
    }
    return v;
}

}  // namespace

PricePath::PricePath(std::vector<Knot> knots) : knots_(std::move(knots)) {
    if (knots_.size() < 2) throw ParameterError("a price path needs at least 2 knots");
    if (knots_.front().t != 0.0) throw ParameterError("first knot time must be 0");
    for (std::size_t i = 0; i < knots_.size(); ++i) {
        if (!std::isfinite(knots_[i].t) || !std::isfinite(knots_[i].price)) {
            throw ParameterError("knot " + std::to_string(i) + " is not finite");
        }
        if (i > 0 && !(knots_[i].t > knots_[i - 1].t)) {
            throw ParameterError("knot times must be strictly increasing (knot " + std::to_string(i) +
                                 ")");
        }
    }
}

std::size_t PricePath::segment_index(double t) const {
    // first knot with time > t, minus one; clamp so that t = T maps to the last segment
    auto it = std::upper_bound(knots_.begin(), knots_.end(), t,
                               [](double v, const Knot& k) { return v < k.t; });
    std::size_t i = static_cast<std::size_t>(it - knots_.begin());
    if (i == 0) return 0;
    return std::min(i - 1, knots_.size() - 2);
}

double price_at(const PricePath& path, double t) {
    check_time(path, t);
    const auto k = path.knots();
    const std::size_t i = path.segment_index(t);
    return interpolate(k[i], k[i + 1], t);
}

double running_max(const PricePath& path, double t) {
    check_time(path, t);
    const auto k = path.knots();
    const std::size_t i = path.segment_index(t);
    double m = interpolate(k[i], k[i + 1], t);
    for (std::size_t j = 0; j <= i; ++j) m = std::max(m, k[j].price);
    return m;
}

double drawdown(const PricePath& path, double t) {
    return running_max(path, t) - price_at(path, t);
}

PathStatistics statistics_at(const PricePath& path, double t) {
    const double m = running_max(path, t);
    return {m, m - price_at(path, t), t};
}

bool same_prefix(const PricePath& a, const PricePath& b, double t, double tol) {
    if (a.horizon() != b.horizon()) throw DomainError("paths have different horizons");
    if (tol < 0.0) throw DomainError("tolerance must be non-negative");
    check_time(a, t);
    const auto agree = [&](double s) { return std::abs(price_at(a, s) - price_at(b, s)) <= tol; };
    for (const Knot& k : a.knots()) {
        if (k.t > t) break;
        if (!agree(k.t)) return false;
    }
    for (const Knot& k : b.knots()) {
        if (k.t > t) break;
        if (!agree(k.t)) return false;
    }
    return agree(t);
}

PricePath read_path_csv(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    std::vector<Knot> knots;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        if (!have_header) {
            std::string h = trim(line);
            h.erase(std::remove(h.begin(), h.end(), ' '), h.end());
            if (h != "t,price") throw ParseError("expected header 't,price', got '" + line + "'", line_no);
            have_header = true;
            continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) {
            throw ParseError("expected two comma-separated fields", line_no);
        }
        const double t = parse_number(line.substr(0, comma), line_no);
        const double p = parse_number(line.substr(comma + 1), line_no);
        if (knots.empty() && t != 0.0) throw ParseError("first row must have t = 0", line_no);
        if (!knots.empty() && !(t > knots.back().t)) {
            throw ParseError("times must be strictly increasing", line_no);
        }
        knots.push_back({t, p});
    }
    if (!have_header) throw ParseError("missing header 't,price'", line_no == 0 ? 1 : line_no);
    if (knots.size() < 2) throw ParseError("need at least 2 data rows", line_no);
    return PricePath(std::move(knots));
}

PricePath read_path_csv_file(const std::string& filename) {
    std::ifstream in(filename);
    if (!in) throw std::runtime_error("cannot open '" + filename + "'");
    return read_path_csv(in);
}

void write_path_csv(std::ostream& out, const PricePath& path) {
    const auto old = out.precision(17);
    out << "t,price\n";
    for (const Knot& k : path.knots()) out << k.t << ',' << k.price << '\n';
    out.precision(old);
}

}  // namespace perfstop
