#include "coup/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

namespace coup {
namespace {

void check_unit(double x, const char* what) {
    if (!(x >= 0.0 && x <= 1.0)) throw std::invalid_argument(fmt::format("{} must lie in [0,1], got {}", what, x));
}

void check_radius(double a) {
    if (!(a >= 0.0) || std::isnan(a)) throw std::invalid_argument(fmt::format("radius must be >= 0, got {}", a));
}

// p log(p/q), with the 0 log 0 = 0 convention.
double xlogy_ratio(double p, double q) {
    if (p == 0.0) return 0.0;
    if (q == 0.0) return std::numeric_limits<double>::infinity();
    return p * std::log(p / q);
}

} // namespace

double kl_bernoulli(double p, double q) {
    check_unit(p, "p");
    check_unit(q, "q");
    if (p == q) return 0.0;
    const double d = xlogy_ratio(p, q) + xlogy_ratio(1.0 - p, 1.0 - q);
    return std::max(d, 0.0);
}

double kl_ucb(double p_hat, double a) {
    check_unit(p_hat, "p_hat");
    check_radius(a);
    if (a == 0.0 || p_hat == 1.0) return p_hat;
    const double top = 1.0 - kBoundTolerance;
    if (p_hat >= top || kl_bernoulli(p_hat, top) <= a) return 1.0;

    // y = -log(1 - q); lo is feasible, hi is not.
    double lo = -std::log1p(-p_hat);
    double hi = -std::log1p(-top);
    for (int it = 0; it < kBisectionIterations && hi - lo > kBoundTolerance; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (kl_bernoulli(p_hat, -std::expm1(-mid)) <= a) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return std::max(p_hat, -std::expm1(-lo));
}

double kl_lcb(double p_hat, double a) {
    check_unit(p_hat, "p_hat");
    check_radius(a);
    if (a == 0.0 || p_hat == 0.0) return p_hat;
    const double bottom = kBoundTolerance;
    if (p_hat <= bottom || kl_bernoulli(p_hat, bottom) <= a) return 0.0;

    // x = log q; hi is feasible, lo is not.
    double lo = std::log(bottom);
    double hi = std::log(p_hat);
    for (int it = 0; it < kBisectionIterations && hi - lo > kBoundTolerance; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (kl_bernoulli(p_hat, std::exp(mid)) <= a) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    return std::min(p_hat, std::exp(hi));
}

double radius(long n, long m, double kappa, double delta) {
    if (n < 1 || m < 1) throw std::invalid_argument("radius needs n >= 1 and m >= 1");
    if (!(kappa > 0.0) || !std::isfinite(kappa)) throw std::invalid_argument("radius needs a positive captime");
    if (!(delta > 0.0) || !std::isfinite(delta)) throw std::invalid_argument("radius needs delta > 0");
    const double nn = static_cast<double>(n);
    const double mm = static_cast<double>(m);
    const double log_kappa = std::log(kappa + 1.0);
    // Computed as a sum of logs so large n, m cannot overflow the argument.
    const double log_arg = std::log(36.0) + 2.0 * std::log(nn) + 2.0 * std::log(mm) + 2.0 * std::log(log_kappa) -
                           std::log(delta);
    return std::max(0.0, log_arg / mm);
}

double hoeffding_radius(double a) {
    check_radius(a);
    return std::sqrt(a / 2.0);
}

double composite_lcb(double u_lcb, double f_lcb, double u_at_kappa) {
    check_unit(u_lcb, "u_lcb");
    check_unit(f_lcb, "f_lcb");
    check_unit(u_at_kappa, "u_at_kappa");
    return std::max(0.0, u_lcb - u_at_kappa * (1.0 - f_lcb));
}

} // namespace coup
