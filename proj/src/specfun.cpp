#include "dualgate/specfun.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "dualgate/errors.hpp"

namespace dualgate {
namespace {

constexpr double kSqrtHalf = 0.70710678118654752440;
constexpr double kLogHalf = -0.69314718055994530942;

// Below this the erfc route enters the subnormal range.
constexpr double kCdfLogSwitch = -37.0;
// Above this the tail is evaluated through the Mills continued fraction.
constexpr double kTailMillsSwitch = 5.0;

// Rational approximation of the normal quantile (P. J. Acklam). Relative
// error about 1e-9; only used to seed the Newton refinement.
double quantile_seed(double p) {
  static constexpr std::array<double, 6> a = {
      -3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr std::array<double, 5> b = {
      -5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01};
  static constexpr std::array<double, 6> c = {
      -7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr std::array<double, 4> d = {
      7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  const double q = std::sqrt(-2.0 * std::log1p(-p));
  return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
         ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
}

// Lower-half quantile: solves log Phi(x) = log_p for log_p <= log(1/2).
// log Phi is concave and increasing, so Newton on it converges monotonically
// after the first step from any seed.
double lower_quantile_from_log(double log_p) {
  double x;
  if (log_p > -700.0) {
    x = quantile_seed(std::exp(log_p));
  } else {
    const double t = -2.0 * log_p;
    x = -std::sqrt(t - std::log(t) - std::log(2.0 * kPi));
  }
  for (int iter = 0; iter < 100; ++iter) {
    const double lc = log_std_normal_cdf(x);
    const double g = lc - log_p;
    const double slope = std::exp(log_std_normal_pdf(x) - lc);
    const double step = g / slope;
    x -= step;
    if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(x))) break;
  }
  return x;
}

}  // namespace

double std_normal_pdf(double x) { return std::exp(log_std_normal_pdf(x)); }

double log_std_normal_pdf(double x) { return -0.5 * x * x - kLogSqrtTwoPi; }

double mills_ratio(double x) {
  if (x < 0.0) throw DomainError("mills_ratio: x must be >= 0");
  if (x < kTailMillsSwitch) {
    return 0.5 * std::erfc(x * kSqrtHalf) / std_normal_pdf(x);
  }
  // R(x) = 1 / (x + 1/(x + 2/(x + 3/(x + ...)))), modified Lentz.
  constexpr double tiny = 1e-300;
  double f = x;
  double c = f;
  double d = 0.0;
  for (int j = 1; j < 5000; ++j) {
    d = x + j * d;
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    c = x + j / c;
    if (std::abs(c) < tiny) c = tiny;
    const double delta = c * d;
    f *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return 1.0 / f;
}

double log_std_normal_tail(double x) {
  if (std::isnan(x)) return x;
  if (x < 0.0) return std::log1p(-0.5 * std::erfc(-x * kSqrtHalf));
  if (x < kTailMillsSwitch) return std::log(0.5 * std::erfc(x * kSqrtHalf));
  return log_std_normal_pdf(x) + std::log(mills_ratio(x));
}

double log_std_normal_cdf(double x) { return log_std_normal_tail(-x); }

double std_normal_cdf(double x) {
  if (x < kCdfLogSwitch) return std::exp(log_std_normal_tail(-x));
  return 0.5 * std::erfc(-x * kSqrtHalf);
}

double std_normal_quantile_from_log(double log_p) {
  if (!(log_p < 0.0)) {
    throw DomainError("std_normal_quantile_from_log: log_p must be < 0");
  }
  if (log_p <= kLogHalf) return lower_quantile_from_log(log_p);
  return std_normal_quantile(std::exp(log_p));
}

double std_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw DomainError("std_normal_quantile: p must lie strictly inside (0, 1), got " +
                      std::to_string(p));
  }
  if (p == 0.5) return 0.0;
  if (p < 0.5) return lower_quantile_from_log(std::log(p));
  // 1 - p is exact for p in [0.5, 1).
  return -lower_quantile_from_log(std::log(1.0 - p));
}

namespace {

double gamma_prefactor(double s, double x) {
  return std::exp(-x + s * std::log(x) - std::lgamma(s));
}

double lower_gamma_series(double s, double x) {
  double ap = s;
  double del = 1.0 / s;
  double sum = del;
  for (int n = 0; n < 100000; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::abs(del) < std::abs(sum) * 1e-17) break;
  }
  return sum * gamma_prefactor(s, x);
}

double upper_gamma_fraction(double s, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - s;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 100000; ++i) {
    const double an = -i * (i - s);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  return h * gamma_prefactor(s, x);
}

void check_gamma_args(double s, double x) {
  if (!(s > 0.0)) throw DomainError("incomplete gamma: s must be > 0");
  if (!(x >= 0.0)) throw DomainError("incomplete gamma: x must be >= 0");
}

}  // namespace

double regularized_lower_gamma(double s, double x) {
  check_gamma_args(s, x);
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  if (x < s + 1.0) return std::min(1.0, lower_gamma_series(s, x));
  return std::max(0.0, 1.0 - upper_gamma_fraction(s, x));
}

double regularized_upper_gamma(double s, double x) {
  check_gamma_args(s, x);
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  if (x < s + 1.0) return std::max(0.0, 1.0 - lower_gamma_series(s, x));
  return std::min(1.0, upper_gamma_fraction(s, x));
}

double chi_square_cdf(double dof, double x) {
  if (x <= 0.0) return 0.0;
  return regularized_lower_gamma(0.5 * dof, 0.5 * x);
}

}  // namespace dualgate
