#include "coup/cdfrank.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <sstream>

#include <fmt/format.h>

namespace coup {
namespace {

// Sign of F_A(t) - F_B(t) without rounding: compares cA/NA with cB/NB.
int compare_at(const EmpiricalCdf& a, const EmpiricalCdf& b, double t) {
    const auto lhs = static_cast<std::uint64_t>(a.count_at(t)) * b.total();
    const auto rhs = static_cast<std::uint64_t>(b.count_at(t)) * a.total();
    return lhs > rhs ? 1 : (lhs < rhs ? -1 : 0);
}

std::string trim(std::string s) {
    const auto issp = [](unsigned char c) { return std::isspace(c) != 0; };
    while (!s.empty() && issp(static_cast<unsigned char>(s.back()))) s.pop_back();
    std::size_t i = 0;
    while (i < s.size() && issp(static_cast<unsigned char>(s[i]))) ++i;
    return s.substr(i);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, ',')) out.push_back(trim(field));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

bool parse_double(const std::string& s, double& out) {
    const char* end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc() && p == end;
}

void append_interval(std::vector<Interval>& list, double lo, double hi, bool closed) {
    if (!list.empty() && list.back().hi == lo && !list.back().closed) {
        list.back().hi = hi;
        list.back().closed = closed;
        return;
    }
    list.push_back({lo, hi, closed});
}

} // namespace

EmpiricalCdf::EmpiricalCdf(std::string solver, std::vector<double> uncensored, std::size_t censored_count, double cap)
    : solver_(std::move(solver)), uncensored_(std::move(uncensored)), censored_(censored_count), cap_(cap) {
    if (!(cap_ > 0.0) || !std::isfinite(cap_)) throw std::invalid_argument("cap must be positive and finite");
    std::sort(uncensored_.begin(), uncensored_.end());
    if (total() == 0) throw std::invalid_argument("a CDF needs at least one sample");
    if (!uncensored_.empty() && (uncensored_.front() < 0.0 || uncensored_.back() > cap_))
        throw std::invalid_argument("uncensored runtimes must lie in [0, cap]");
}

std::size_t EmpiricalCdf::count_at(double t) const {
    return static_cast<std::size_t>(std::upper_bound(uncensored_.begin(), uncensored_.end(), t) - uncensored_.begin());
}

double EmpiricalCdf::operator()(double t) const {
    return static_cast<double>(count_at(t)) / static_cast<double>(total());
}

double EmpiricalCdf::left_limit(double t) const {
    const auto c = std::lower_bound(uncensored_.begin(), uncensored_.end(), t) - uncensored_.begin();
    return static_cast<double>(c) / static_cast<double>(total());
}

std::vector<double> EmpiricalCdf::jump_points() const {
    std::vector<double> out = uncensored_;
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

EmpiricalCdf build_cdf(const std::vector<RuntimeSample>& samples, double cap, std::string solver) {
    if (samples.empty()) throw std::invalid_argument("cannot build a CDF from an empty sample");
    std::vector<double> done;
    std::size_t censored = 0;
    for (const auto& s : samples) {
        if (!(s.runtime >= 0.0)) throw std::invalid_argument(fmt::format("negative runtime {}", s.runtime));
        if (s.censored) {
            ++censored;
        } else if (s.runtime > cap) {
            throw std::invalid_argument(fmt::format("uncensored runtime {} exceeds the cap {}", s.runtime, cap));
        } else {
            done.push_back(s.runtime);
        }
    }
    return EmpiricalCdf(std::move(solver), std::move(done), censored, cap);
}

std::string to_string(Dominance d) {
    switch (d) {
    case Dominance::a_dominates: return "a_dominates";
    case Dominance::b_dominates: return "b_dominates";
    case Dominance::equal: return "equal";
    case Dominance::incomparable: return "incomparable";
    }
    return "unknown";
}

std::vector<double> comparison_grid(const EmpiricalCdf& a, const EmpiricalCdf& b) {
    std::vector<double> grid{0.0, a.cap(), b.cap()};
    grid.insert(grid.end(), a.uncensored().begin(), a.uncensored().end());
    grid.insert(grid.end(), b.uncensored().begin(), b.uncensored().end());
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    return grid;
}

Dominance fosd(const EmpiricalCdf& a, const EmpiricalCdf& b) {
    bool a_above = false;
    bool b_above = false;
    for (double t : comparison_grid(a, b)) {
        const int c = compare_at(a, b, t);
        a_above |= c > 0;
        b_above |= c < 0;
    }
    if (a_above && b_above) return Dominance::incomparable;
    if (a_above) return Dominance::a_dominates;
    if (b_above) return Dominance::b_dominates;
    return Dominance::equal;
}

FosdRegions fosd_regions(const EmpiricalCdf& a, const EmpiricalCdf& b) {
    if (a.cap() != b.cap()) throw std::invalid_argument("fosd_regions needs CDFs with the same cap");
    const std::vector<double> grid = comparison_grid(a, b);
    FosdRegions out;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const bool last = k + 1 == grid.size();
        const double lo = grid[k];
        const double hi = last ? grid[k] : grid[k + 1];
        auto& target = compare_at(a, b, lo) >= 0 ? out.a : out.b;
        append_interval(target, lo, hi, last);
    }
    return out;
}

double expected_utility(const EmpiricalCdf& cdf, const UtilityFunction& u) {
    double s = 0.0;
    for (double t : cdf.uncensored()) s += evaluate(u, t);
    s += static_cast<double>(cdf.censored_count()) * evaluate(u, cdf.cap());
    return s / static_cast<double>(cdf.total());
}

double expected_utility_via_measure(const EmpiricalCdf& cdf, const UtilityFunction& u) {
    std::vector<double> grid = cdf.jump_points();
    grid.push_back(0.0);
    grid.push_back(cdf.cap());
    for (double b : u.breakpoints()) {
        if (b > 0.0 && b < cdf.cap()) grid.push_back(b);
    }
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

    const auto mu = [&](double t) { return 1.0 - evaluate(u, t); };
    double integral = 0.0;
    for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
        integral += cdf(grid[k]) * (mu(grid[k + 1]) - mu(grid[k]));
    }
    return evaluate(u, cdf.cap()) + integral;
}

double mean_par_score(const EmpiricalCdf& cdf, double c, double kappa) {
    double s = 0.0;
    for (double t : cdf.uncensored()) s += par_score(t, c, kappa);
    s += static_cast<double>(cdf.censored_count()) * c * kappa;
    return s / static_cast<double>(cdf.total());
}

std::vector<double> parse_grid(const std::string& spec) {
    std::vector<std::string> parts;
    std::string part;
    std::istringstream is(spec);
    while (std::getline(is, part, ':')) parts.push_back(trim(part));
    if (parts.size() != 3 && parts.size() != 4)
        throw std::invalid_argument(fmt::format("grid '{}' is not lo:hi:steps[:log]", spec));
    double lo = 0.0;
    double hi = 0.0;
    double steps_d = 0.0;
    if (!parse_double(parts[0], lo) || !parse_double(parts[1], hi) || !parse_double(parts[2], steps_d))
        throw std::invalid_argument(fmt::format("grid '{}' has non-numeric fields", spec));
    const bool log_scale = parts.size() == 4;
    if (log_scale && parts[3] != "log") throw std::invalid_argument(fmt::format("grid '{}': expected ':log'", spec));
    const auto steps = static_cast<long>(steps_d);
    if (static_cast<double>(steps) != steps_d || steps < 1)
        throw std::invalid_argument(fmt::format("grid '{}' needs a positive integer step count", spec));
    if (steps == 1 ? !(lo <= hi) : !(lo < hi))
        throw std::invalid_argument(fmt::format("grid '{}' needs lo < hi", spec));
    if (log_scale && !(lo > 0.0)) throw std::invalid_argument(fmt::format("log grid '{}' needs lo > 0", spec));

    std::vector<double> grid;
    grid.reserve(static_cast<std::size_t>(steps));
    for (long i = 0; i < steps; ++i) {
        const double f = steps == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(steps - 1);
        grid.push_back(log_scale ? std::exp(std::log(lo) + f * (std::log(hi) - std::log(lo))) : lo + f * (hi - lo));
    }
    if (steps > 1) grid.back() = hi;
    return grid;
}

RegretTable regret_curve(const std::vector<EmpiricalCdf>& cdfs, const UtilitySweep& sweep,
                         const std::vector<double>& grid) {
    if (cdfs.empty()) throw std::invalid_argument("regret_curve needs at least one solver");
    if (grid.empty()) throw std::invalid_argument("regret_curve needs a non-empty grid");
    for (std::size_t g = 1; g < grid.size(); ++g) {
        if (!(grid[g] > grid[g - 1])) throw std::invalid_argument("regret grid must be strictly increasing");
    }
    RegretTable t;
    t.grid = grid;
    for (const auto& c : cdfs) t.solvers.push_back(c.solver());
    t.utility.assign(cdfs.size(), std::vector<double>(grid.size()));
    t.regret.assign(cdfs.size(), std::vector<double>(grid.size()));
    for (std::size_t g = 0; g < grid.size(); ++g) {
        const UtilityFunction u = sweep.at(grid[g]);
        std::size_t best = 0;
        for (std::size_t s = 0; s < cdfs.size(); ++s) {
            t.utility[s][g] = expected_utility(cdfs[s], u);
            if (t.utility[s][g] > t.utility[best][g]) best = s;
        }
        for (std::size_t s = 0; s < cdfs.size(); ++s) t.regret[s][g] = t.utility[best][g] - t.utility[s][g];
        t.best.push_back(t.solvers[best]);
    }
    return t;
}

Ranking rank_by_utility(const std::vector<std::pair<std::string, double>>& utilities) {
    std::vector<std::pair<std::string, double>> sorted = utilities;
    for (const auto& [name, v] : sorted) {
        if (!std::isfinite(v)) throw std::invalid_argument(fmt::format("utility of '{}' is not finite", name));
    }
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    Ranking r;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (!r.emplace(sorted[i].first, static_cast<int>(i + 1)).second)
            throw std::invalid_argument(fmt::format("duplicate solver '{}'", sorted[i].first));
    }
    return r;
}

long l1_distance(const Ranking& x, const Ranking& y) {
    if (x.size() != y.size()) throw std::invalid_argument("rankings cover different solver sets");
    long d = 0;
    for (const auto& [name, rank] : x) {
        const auto it = y.find(name);
        if (it == y.end()) throw std::invalid_argument(fmt::format("solver '{}' missing from the other ranking", name));
        d += std::abs(rank - it->second);
    }
    return d;
}

long max_footrule(long n) { return n * n / 2; }

RuntimeTable read_runtime_csv(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++lineno;
        if (!trim(line).empty()) {
            header = split_csv(trim(line));
            break;
        }
    }
    if (header.empty()) throw CsvError("runtime CSV is empty", {"missing header"});

    const auto column = [&](const char* name) -> std::ptrdiff_t {
        const auto it = std::find(header.begin(), header.end(), name);
        return it == header.end() ? -1 : it - header.begin();
    };
    const std::ptrdiff_t c_solver = column("solver");
    const std::ptrdiff_t c_instance = column("instance");
    const std::ptrdiff_t c_runtime = column("runtime");
    const std::ptrdiff_t c_status = column("status");
    if (c_solver < 0 || c_instance < 0 || c_runtime < 0 || c_status < 0)
        throw CsvError("runtime CSV header must name solver, instance, runtime and status",
                       {fmt::format("line {}: bad header", lineno)});

    RuntimeTable table;
    std::vector<std::string> problems;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string row = trim(line);
        if (row.empty()) continue;
        const auto f = split_csv(row);
        if (f.size() != header.size()) {
            problems.push_back(fmt::format("line {}: expected {} fields, got {}", lineno, header.size(), f.size()));
            continue;
        }
        const std::string& solver = f[static_cast<std::size_t>(c_solver)];
        const std::string& status = f[static_cast<std::size_t>(c_status)];
        double runtime = 0.0;
        if (solver.empty()) {
            problems.push_back(fmt::format("line {}: empty solver name", lineno));
            continue;
        }
        if (!parse_double(f[static_cast<std::size_t>(c_runtime)], runtime) || !(runtime >= 0.0) ||
            !std::isfinite(runtime)) {
            problems.push_back(fmt::format("line {}: bad runtime '{}'", lineno, f[static_cast<std::size_t>(c_runtime)]));
            continue;
        }
        if (status != "solved" && status != "timeout") {
            problems.push_back(fmt::format("line {}: unknown status '{}'", lineno, status));
            continue;
        }
        if (!table.samples.contains(solver)) table.solvers.push_back(solver);
        table.samples[solver].push_back({runtime, status == "timeout"});
        table.max_runtime = std::max(table.max_runtime, runtime);
    }
    if (!problems.empty()) throw CsvError(fmt::format("{} malformed row(s) in runtime CSV", problems.size()), problems);
    if (table.solvers.empty()) throw CsvError("runtime CSV has no rows", {"no data rows"});
    return table;
}

std::vector<EmpiricalCdf> build_cdfs(const RuntimeTable& table, double cap) {
    const double c = cap > 0.0 ? cap : table.max_runtime;
    std::vector<EmpiricalCdf> out;
    for (const auto& s : table.solvers) out.push_back(build_cdf(table.samples.at(s), c, s));
    return out;
}

} // namespace coup
