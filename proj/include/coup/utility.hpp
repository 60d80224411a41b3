#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace coup {

// Utility families. All map runtime (seconds) to [0,1], are non-increasing,
// and equal 1 at t = 0. Step and Par use the half-open convention: a run
// finishing at exactly kappa is a timeout and scores 0.

/// 1 on [0, kappa0], 0 on [kappa1, inf), log-linear in between.
struct LogCapped {
    double kappa0;
    double kappa1;
};

/// Penalized-average-runtime utility: 1 - t/(c*kappa) for t < kappa, else 0.
struct Par {
    double c;
    double kappa;
};

/// Fraction-solved utility: 1 for t < kappa, else 0.
struct Step {
    double kappa;
};

/// exp(-lambda * t).
struct Exponential {
    double lambda;
};

class UtilityFunction {
public:
    using Family = std::variant<LogCapped, Par, Step, Exponential>;

    /// Throws std::invalid_argument when the parameters violate the family's
    /// constraints.
    explicit UtilityFunction(Family family);

    /// Parses `family:key=value,...`, e.g. `logcap:k0=0.001,k1=3600`,
    /// `par:c=2,k=5000`, `step:k=5000`, `exp:lambda=0.001`.
    static UtilityFunction parse(std::string_view spec);

    double operator()(double t) const;

    const Family& family() const { return family_; }
    std::string to_string() const;

    /// Smallest runtime at which the utility is 0, when one exists.
    std::optional<double> zero_point() const;

    /// Runtimes where the function has a kink or a jump.
    std::vector<double> breakpoints() const;

private:
    Family family_;
};

/// Throws std::invalid_argument for negative or NaN t.
double evaluate(const UtilityFunction& u, double t);

/// PAR(c, kappa) score: t when t < kappa, c*kappa otherwise.
double par_score(double t, double c, double kappa);

/// A utility spec with exactly one parameter left open as `*`, e.g.
/// `par:c=2,k=*`. Used for sensitivity sweeps.
class UtilitySweep {
public:
    static UtilitySweep parse(std::string_view spec);

    UtilityFunction at(double value) const;

    const std::string& swept_parameter() const { return swept_; }
    const std::string& spec() const { return spec_; }

private:
    std::string spec_;
    std::string swept_;
};

} // namespace coup
