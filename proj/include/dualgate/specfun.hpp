#pragma once

// Scalar special functions with relative accuracy in the deep tails.
//
// Every tail quantity has a log-space twin so that probabilities down to
// 1e-300 (and far below, in log form) stay representable. All functions
// are pure and thread-safe.

namespace dualgate {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kLogSqrtTwoPi = 0.91893853320467274178;  // log(sqrt(2*pi))

double std_normal_pdf(double x);
double log_std_normal_pdf(double x);

/// Phi(x). The lower tail is evaluated directly (never as 1 - Phi(-x)).
double std_normal_cdf(double x);

/// log(Phi(x)), finite for every finite x.
double log_std_normal_cdf(double x);

/// log(1 - Phi(x)), finite for every finite x. Uses the continued fraction
/// for the Mills ratio once x is in the upper tail.
double log_std_normal_tail(double x);

/// Phi^{-1}(p) for 0 < p < 1; throws DomainError otherwise.
double std_normal_quantile(double p);

/// Phi^{-1}(exp(log_p)) for log_p < 0; usable far below the smallest double.
double std_normal_quantile_from_log(double log_p);

/// Mills ratio (1 - Phi(x)) / phi(x) for x >= 0.
double mills_ratio(double x);

/// P(s, x) = gamma(s, x) / Gamma(s). Series below x = s + 1, Lentz continued
/// fraction above. Throws DomainError for s <= 0 or x < 0.
double regularized_lower_gamma(double s, double x);

/// Q(s, x) = 1 - P(s, x), evaluated without cancellation.
double regularized_upper_gamma(double s, double x);

/// CDF of the chi-square distribution with `dof` degrees of freedom.
double chi_square_cdf(double dof, double x);

}  // namespace dualgate
