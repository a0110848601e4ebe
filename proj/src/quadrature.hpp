#pragma once

// Thin wrapper over Boost's adaptive Gauss-Kronrod rule: integrates across
// the real line split at caller-provided breakpoints.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "dualgate/distpair.hpp"

namespace dualgate::detail {

template <class F>
QuadratureValue integrate_interval(F&& f, double a, double b, double tol = 1e-13,
                                   unsigned max_depth = 20) {
  double err = 0.0;
  const double v = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      f, a, b, max_depth, tol, &err);
  return {v, err};
}

/// Integral over (-inf, inf) split at the sorted, de-duplicated breakpoints.
template <class F>
QuadratureValue integrate_real_line(F&& f, std::vector<double> breaks, double tol = 1e-13) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  if (breaks.empty()) breaks.push_back(0.0);
  QuadratureValue total;
  auto add = [&](double a, double b) {
    const QuadratureValue piece = integrate_interval(f, a, b, tol);
    total.value += piece.value;
    total.error += piece.error;
  };
  add(-inf, breaks.front());
  for (std::size_t i = 1; i < breaks.size(); ++i) add(breaks[i - 1], breaks[i]);
  add(breaks.back(), inf);
  return total;
}

/// Bisection on a monotone predicate boundary: returns the point in [lo, hi]
/// where `is_high` switches from false to true.
template <class Pred>
double bisect_boundary(double lo, double hi, Pred&& is_high, int max_iter = 200) {
  for (int i = 0; i < max_iter; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (is_high(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace dualgate::detail
