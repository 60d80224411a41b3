#pragma once

namespace coup {

// Confidence bounds on a [0,1]-valued mean from the Bernoulli KL divergence.
//
// kl_ucb / kl_lcb invert d(p_hat, q) <= a by bisection. The search runs in
// log coordinates (log q below p_hat, -log(1 - q) above it) where the
// divergence has slope at most 1, so a bracket of width 1e-9 bounds both the
// error in q and the residual |d - a| by 1e-9. Roots closer than 1e-9 to the
// interval ends are reported as the end itself (0 or 1).

inline constexpr double kBoundTolerance = 1e-9;
inline constexpr int kBisectionIterations = 100;

/// Bernoulli KL divergence d(p, q) with 0 log 0 = 0. +inf when q is 0 or 1
/// and p differs from it. Throws std::invalid_argument outside [0,1].
double kl_bernoulli(double p, double q);

/// Largest q in [p_hat, 1] with d(p_hat, q) <= a.
double kl_ucb(double p_hat, double a);

/// Smallest q in [0, p_hat] with d(p_hat, q) <= a.
double kl_lcb(double p_hat, double a);

/// Union-bounded confidence radius in nats:
/// (1/m) ln(36 n^2 m^2 ln(kappa + 1)^2 / delta).
/// Requires n >= 1, m >= 1, kappa > 0, delta > 0 (procedures additionally
/// keep delta below 1).
double radius(long n, long m, double kappa, double delta);

/// Hoeffding deviation at the same confidence: sqrt(a / 2).
double hoeffding_radius(double a);

/// Lower bound on the uncapped mean utility from bounds on the capped mean
/// and on the completion probability: max(0, u_lcb - u(kappa) (1 - f_lcb)).
double composite_lcb(double u_lcb, double f_lcb, double u_at_kappa);

} // namespace coup
