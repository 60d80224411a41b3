#pragma once

#include <cstddef>
#include <istream>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "coup/utility.hpp"

namespace coup {

struct RuntimeSample {
    double runtime = 0.0;
    bool censored = false;
};

/// Empirical runtime CDF of one solver with right-censoring at `cap`.
class EmpiricalCdf {
public:
    EmpiricalCdf(std::string solver, std::vector<double> uncensored, std::size_t censored_count, double cap);

    /// Fraction of samples that finished at or before t.
    double operator()(double t) const;
    /// Fraction that finished strictly before t.
    double left_limit(double t) const;
    /// Number of uncensored samples <= t.
    std::size_t count_at(double t) const;

    const std::string& solver() const { return solver_; }
    const std::vector<double>& uncensored() const { return uncensored_; }
    std::size_t censored_count() const { return censored_; }
    std::size_t total() const { return uncensored_.size() + censored_; }
    double cap() const { return cap_; }

    /// Distinct uncensored runtimes in increasing order.
    std::vector<double> jump_points() const;

private:
    std::string solver_;
    std::vector<double> uncensored_;
    std::size_t censored_;
    double cap_;
};

/// Censored entries count as unfinished at the cap whatever runtime they
/// carry. Throws std::invalid_argument on an empty sample, negative
/// runtimes, or an uncensored runtime above the cap.
EmpiricalCdf build_cdf(const std::vector<RuntimeSample>& samples, double cap, std::string solver = {});

enum class Dominance { a_dominates, b_dominates, equal, incomparable };

std::string to_string(Dominance d);

/// Grid of 0, every jump of either CDF, and both caps.
std::vector<double> comparison_grid(const EmpiricalCdf& a, const EmpiricalCdf& b);

/// First-order stochastic dominance on the comparison grid (exact rational
/// comparison of the two step functions).
Dominance fosd(const EmpiricalCdf& a, const EmpiricalCdf& b);

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    /// Intervals are [lo, hi) except the one ending at the cap, which is
    /// closed.
    bool closed = false;
};

struct FosdRegions {
    std::vector<Interval> a; // F_A >= F_B
    std::vector<Interval> b; // F_A < F_B
};

/// Partition of [0, cap] into maximal intervals by the sign of F_A - F_B.
/// Requires equal caps.
FosdRegions fosd_regions(const EmpiricalCdf& a, const EmpiricalCdf& b);

/// Mean utility with censored samples scored at u(cap).
double expected_utility(const EmpiricalCdf& cdf, const UtilityFunction& u);

/// u(cap) + sum_k F(x_k) (mu(x_{k+1}) - mu(x_k)) with mu = 1 - u over the
/// merged grid of CDF jumps and utility breakpoints on [0, cap].
double expected_utility_via_measure(const EmpiricalCdf& cdf, const UtilityFunction& u);

/// Mean PAR(c, kappa) score; censored samples score c*kappa.
double mean_par_score(const EmpiricalCdf& cdf, double c, double kappa);

/// Parses `lo:hi:steps[:log]` into an increasing grid.
std::vector<double> parse_grid(const std::string& spec);

struct RegretTable {
    std::vector<double> grid;
    std::vector<std::string> solvers;
    /// [solver][grid point]
    std::vector<std::vector<double>> utility;
    std::vector<std::vector<double>> regret;
    /// Best solver per grid point (ties to the earlier solver).
    std::vector<std::string> best;
};

RegretTable regret_curve(const std::vector<EmpiricalCdf>& cdfs, const UtilitySweep& sweep,
                         const std::vector<double>& grid);

/// Solver name to rank; rank 1 is best.
using Ranking = std::map<std::string, int>;

/// Rank 1 = highest utility; ties go to the lexicographically smaller name.
Ranking rank_by_utility(const std::vector<std::pair<std::string, double>>& utilities);

/// Spearman footrule. Throws std::invalid_argument on different solver sets.
long l1_distance(const Ranking& x, const Ranking& y);

/// floor(n^2 / 2), the largest footrule distance between two rankings of n.
long max_footrule(long n);

// ---------------------------------------------------------------------------
// Runtime tables

class CsvError : public std::runtime_error {
public:
    CsvError(const std::string& what, std::vector<std::string> problems)
        : std::runtime_error(what), problems_(std::move(problems)) {}
    const std::vector<std::string>& problems() const { return problems_; }

private:
    std::vector<std::string> problems_;
};

struct RuntimeTable {
    /// Solvers in order of first appearance.
    std::vector<std::string> solvers;
    std::map<std::string, std::vector<RuntimeSample>> samples;
    /// Largest recorded runtime (timeouts are recorded at the cap).
    double max_runtime = 0.0;
};

/// Reads `solver,instance,runtime,status` rows (status solved|timeout; any
/// column order, header required). Throws CsvError listing every bad line.
RuntimeTable read_runtime_csv(std::istream& in);

/// One CDF per solver in table order; `cap` <= 0 uses the table maximum.
std::vector<EmpiricalCdf> build_cdfs(const RuntimeTable& table, double cap);

} // namespace coup
