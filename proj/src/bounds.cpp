#include "dualgate/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "dualgate/errors.hpp"
#include "dualgate/montecarlo.hpp"
#include "dualgate/specfun.hpp"
#include "quadrature.hpp"

namespace dualgate {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_power(double p) {
  if (!(p > 1.0)) {
    throw MomentDiverged(fmt::format("counting bound requires p > 1, got {}", p));
  }
}

double log_tpr(const DistributionPair& pair, double log_delta) {
  if (log_delta >= 0.0) return 0.0;
  if (const auto ds = pair.gaussian_separation()) {
    return log_std_normal_cdf(std_normal_quantile_from_log(log_delta) + *ds);
  }
  const double delta = std::exp(log_delta);
  if (delta <= 0.0) return -kInf;
  return std::log(np_tpr(pair, delta));
}

double tpr_or_one(const DistributionPair& pair, double delta) {
  if (delta >= 1.0) return 1.0;
  if (delta <= 0.0) return 0.0;
  return np_tpr(pair, delta);
}

// Integral of x * K exp(-a (x - x0)^2) over [X, inf).
double gaussian_moment_tail(double k, double a, double x0, double x) {
  const double d = x - x0;
  return k * (std::exp(-a * d * d) / (2.0 * a) +
              x0 * 0.5 * std::sqrt(kPi / a) * std::erfc(std::sqrt(a) * d));
}

QuadratureValue gaussian_counting_expectation(double ds, double p) {
  const double inv_p = 1.0 / p;
  auto integrand = [&](double x) {
    return std::exp(log_std_normal_pdf(x - ds) - inv_p * log_std_normal_tail(x));
  };
  const double lower = ds - 40.0;
  const double peak = ds * p / (p - 1.0);
  const double width = 1.0 / std::sqrt(1.0 - inv_p);
  const double upper = std::max(ds, peak) + 40.0 * width + 10.0;

  QuadratureValue total;
  for (auto [a, b] : {std::pair{lower, ds}, std::pair{ds, std::max(ds, peak) + width},
                      std::pair{std::max(ds, peak) + width, upper}}) {
    const QuadratureValue piece = detail::integrate_interval(integrand, a, b, 1e-13);
    total.value += piece.value;
    total.error += piece.error;
  }
  // Left remainder: U >= 1/2 there, so the integrand is at most 2 phi(x - ds).
  total.error += 2.0 * std_normal_cdf(-40.0);
  // Right remainder, x >= upper >= 1: 1 - Phi(x) >= phi(x) x / (1 + x^2), hence
  // U^{-1/p} <= phi(x)^{-1/p} (2x). Complete the square in the exponent.
  const double a = 0.5 * (1.0 - inv_p);
  const double x0 = ds / (2.0 * a);
  const double k = 2.0 * std::exp(-(1.0 - inv_p) * kLogSqrtTwoPi + ds * ds / (4.0 * a) -
                                  0.5 * ds * ds);
  total.error += gaussian_moment_tail(k, a, x0, upper);
  return total;
}

// True when log L reaches its supremum on a set of positive P+ mass (a
// plateau), which makes U vanish there and the counting moment infinite.
bool has_ratio_plateau(const DistributionPair& pair) {
  if (!pair.sup_is_interior()) return false;
  const double sup = pair.log_ratio_sup();
  const double wide = pair.mass_above(sup - 1e-8).safe;
  const double narrow = pair.mass_above(sup - 1e-12).safe;
  return narrow > 0.0 && narrow > 0.5 * wide;
}

QuadratureValue generic_counting_expectation(const DistributionPair& pair, double p) {
  if (has_ratio_plateau(pair)) {
    throw MomentDiverged(fmt::format(
        "counting bound: {} has a likelihood-ratio plateau at its supremum; "
        "E[U^(-1/p)] is infinite",
        pair.name()));
  }
  const double inv_p = 1.0 / p;
  const bool interior = pair.sup_is_interior();
  const double peak = pair.argmax_log_ratio();
  const double near = 1e-5 * std::max(1.0, std::abs(peak));
  const double peak_density = pair.density(Side::Unsafe, peak);
  auto integrand = [&](double x) {
    const double lp = pair.log_density(Side::Safe, x);
    const double gap = std::abs(x - peak);
    // Within rounding distance of an interior maximum log L(x) is
    // indistinguishable from the supremum; use the local form
    // U ~ 2 p-(x*) |x - x*| of the symmetric level set instead.
    const double u = interior && gap < near ? 2.0 * peak_density * gap : pvalue(pair, x);
    if (!(u > 0.0)) {
      // U underflows only far in a tail; there P+ must be negligible too.
      return lp < -700.0 ? 0.0 : kInf;
    }
    return std::exp(lp - inv_p * std::log(u));
  };
  std::vector<double> breaks = pair.breakpoints();
  if (interior) breaks.push_back(peak);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

  QuadratureValue total;
  auto add = [&](const QuadratureValue& piece) {
    total.value += piece.value;
    total.error += piece.error;
  };
  add(detail::integrate_interval(integrand, -kInf, breaks.front(), 1e-10));
  boost::math::quadrature::tanh_sinh<double> ts;
  for (std::size_t i = 1; i < breaks.size(); ++i) {
    double err = 0.0;
    double l1 = 0.0;
    // tanh-sinh never evaluates the endpoints, where U may vanish.
    const double v = ts.integrate(integrand, breaks[i - 1], breaks[i], 1e-10, &err, &l1);
    add({v, err});
  }
  add(detail::integrate_interval(integrand, breaks.back(), kInf, 1e-10));
  if (!std::isfinite(total.value) || !std::isfinite(total.error)) {
    throw MomentDiverged(
        fmt::format("counting bound: quadrature did not converge for {}", pair.name()));
  }
  return total;
}

}  // namespace

std::string to_string(BoundName name) {
  switch (name) {
    case BoundName::HolderPerStep: return "HolderPerStep";
    case BoundName::Counting: return "Counting";
    case BoundName::MIFiniteHorizon: return "MIFiniteHorizon";
    case BoundName::ExactCeiling: return "ExactCeiling";
    case BoundName::HolderJensenCeiling: return "HolderJensenCeiling";
    case BoundName::AsymptoticCeiling: return "AsymptoticCeiling";
  }
  return "unknown";
}

std::string to_string(BoundMethod method) {
  switch (method) {
    case BoundMethod::ClosedForm: return "ClosedForm";
    case BoundMethod::Quadrature: return "Quadrature";
    case BoundMethod::MonteCarlo: return "MonteCarlo";
  }
  return "unknown";
}

std::string to_json_line(const BoundReport& report) {
  nlohmann::ordered_json j;
  j["bound_name"] = to_string(report.bound_name);
  j["value"] = report.value;
  j["inputs"] = report.inputs;
  j["method"] = to_string(report.method);
  j["error_estimate"] = report.error_estimate;
  if (report.seed) j["seed"] = *report.seed;
  return j.dump();
}

HolderConstants holder_constants(const DistributionPair& pair, RenyiOrder order) {
  const double d = renyi_divergence(pair, order);
  HolderConstants hc;
  hc.alpha = order.alpha();
  hc.beta = order.beta();
  hc.c_alpha = std::exp(hc.beta * d);
  return hc;
}

RenyiOrder optimal_alpha(double delta_s) {
  if (!(delta_s > 0.0)) throw DomainError("optimal_alpha: delta_s must be > 0");
  return RenyiOrder(1.0 + 2.0 / (delta_s * delta_s));
}

double holder_per_step(const HolderConstants& constants, double delta) {
  if (delta <= 0.0) return 0.0;
  return std::min(1.0, constants.c_alpha * std::pow(delta, constants.beta));
}

double holder_per_step(const DistributionPair& pair, RenyiOrder order, double delta) {
  return holder_per_step(holder_constants(pair, order), delta);
}

BoundReport counting_bound(const DistributionPair& pair, double c, double p) {
  if (!(c > 0.0)) throw DomainError("counting_bound: c must be > 0");
  require_power(p);
  const QuadratureValue e = pair.gaussian_separation()
                                ? gaussian_counting_expectation(*pair.gaussian_separation(), p)
                                : generic_counting_expectation(pair, p);
  const double scale = std::pow(c, 1.0 / p);
  BoundReport r;
  r.bound_name = BoundName::Counting;
  r.method = BoundMethod::Quadrature;
  r.value = scale * e.value;
  r.error_estimate = scale * e.error;
  r.inputs = {{"c", c}, {"p", p}};
  if (auto ds = pair.gaussian_separation()) r.inputs["delta_s"] = *ds;
  return r;
}

BoundReport counting_bound_monte_carlo(const DistributionPair& pair, double c, double p,
                                       std::int64_t samples, std::uint64_t seed,
                                       unsigned workers) {
  if (!(c > 0.0)) throw DomainError("counting_bound_monte_carlo: c must be > 0");
  require_power(p);
  const double inv_p = 1.0 / p;
  MonteCarloEstimate est;
  if (const auto ds = pair.gaussian_separation()) {
    // The integrand behaves like exp(-(1 - 1/p) x^2 / 2 + ds x); match it.
    const double s = std::sqrt(p / (p - 1.0));
    const double mu = *ds * p / (p - 1.0);
    const double shift = *ds;
    est = monte_carlo_mean(
        seed, samples,
        [&](Rng& rng) {
          std::normal_distribution<double> proposal(mu, s);
          const double x = proposal(rng);
          const double log_w =
              log_std_normal_pdf(x - shift) - (log_std_normal_pdf((x - mu) / s) - std::log(s));
          return std::exp(log_w - inv_p * log_std_normal_tail(x));
        },
        workers);
  } else {
    est = monte_carlo_mean(
        seed, samples,
        [&](Rng& rng) {
          const double x = pair.sample(Side::Safe, rng);
          const double u = pvalue(pair, x);
          return u > 0.0 ? std::pow(u, -inv_p) : kInf;
        },
        workers);
  }
  const double scale = std::pow(c, inv_p);
  BoundReport r;
  r.bound_name = BoundName::Counting;
  r.method = BoundMethod::MonteCarlo;
  r.value = scale * est.mean;
  r.error_estimate = scale * est.standard_error;
  r.seed = seed;
  r.inputs = {{"c", c}, {"p", p}, {"samples", static_cast<double>(samples)}};
  if (auto ds = pair.gaussian_separation()) r.inputs["delta_s"] = *ds;
  return r;
}

double holder_series_bound(const DistributionPair& pair, RenyiOrder order, double c,
                           double p) {
  const HolderConstants hc = holder_constants(pair, order);
  const double q = p * hc.beta;
  if (!(q > 1.0)) return kInf;
  return hc.c_alpha * std::pow(c, hc.beta) * std::riemann_zeta(q);
}

namespace {

// Sum_{n > horizon} C_alpha (c n^{-p})^beta <= C_alpha c^beta H^{1 - p beta} / (p beta - 1),
// minimised over orders with p beta > 1.
double holder_tail(const DistributionPair& pair, double c, double p, double horizon) {
  std::vector<double> alphas;
  const double alpha_min = p / (p - 1.0);
  for (int k = 0; k <= 14; ++k) alphas.push_back(alpha_min * (1.0 + std::ldexp(1.0, k) / 256.0));
  if (auto ds = pair.gaussian_separation()) alphas.push_back(optimal_alpha(*ds).alpha());
  double best = kInf;
  for (const double alpha : alphas) {
    if (!(alpha > 1.0)) continue;
    const RenyiOrder order(alpha);
    const double q = p * order.beta();
    if (!(q > 1.0)) continue;
    try {
      const HolderConstants hc = holder_constants(pair, order);
      const double t = hc.c_alpha * std::pow(c, hc.beta) * std::pow(horizon, 1.0 - q) / (q - 1.0);
      best = std::min(best, t);
    } catch (const DivergenceInfinite&) {
    }
  }
  return best;
}

// Sum_{n > H} f(n) <= integral_H^inf f(x) dx for f(x) = TPR_NP(c x^{-p}),
// nonincreasing in x. Substituting x = H e^u makes the integrand decay
// exponentially in u.
double integral_tail(const DistributionPair& pair, double c, double p, double horizon) {
  const double log_h = std::log(horizon);
  auto integrand = [&](double u) {
    if (!std::isfinite(u)) return 0.0;
    const double log_delta = std::log(c) - p * (log_h + u);
    return std::exp(log_h + u + log_tpr(pair, log_delta));
  };
  const QuadratureValue v = detail::integrate_interval(integrand, 0.0, kInf, 1e-10);
  return v.value + v.error;
}

}  // namespace

DirectSumInterval direct_np_sum(const DistributionPair& pair, double c, double p,
                                std::int64_t horizon) {
  if (!(c > 0.0)) throw DomainError("direct_np_sum: c must be > 0");
  if (!(p > 0.0)) throw DomainError("direct_np_sum: p must be > 0");
  DirectSumInterval out;
  if (horizon <= 0) return out;
  for (std::int64_t n = 1; n <= horizon; ++n) {
    out.partial += tpr_or_one(pair, c * std::pow(static_cast<double>(n), -p));
  }
  if (!(p > 1.0)) {
    out.tail = kInf;
    return out;
  }
  const double h = static_cast<double>(horizon);
  const double by_holder = holder_tail(pair, c, p, h);
  const double by_integral = integral_tail(pair, c, p, h);
  if (by_holder <= by_integral) {
    out.tail = by_holder;
    out.tail_method = TailMethod::Holder;
  } else {
    out.tail = by_integral;
    out.tail_method = TailMethod::IntegralComparison;
  }
  return out;
}

double mi_finite_horizon(double delta_sum, std::int64_t horizon, double mi_budget) {
  if (horizon < 1) throw DomainError("mi_finite_horizon: horizon must be >= 1");
  if (!(mi_budget >= 0.0)) throw DomainError("mi_finite_horizon: mi_budget must be >= 0");
  return delta_sum + std::sqrt(2.0 * static_cast<double>(horizon) * mi_budget);
}

namespace {

// a log(a / b) with the 0 log 0 = 0 convention.
double xlogy_ratio(double a, double b) {
  if (a <= 0.0) return 0.0;
  return a * std::log(a / b);
}

}  // namespace

double channel_mi(double delta, double tpr, double prior_safe) {
  for (const double v : {delta, tpr, prior_safe}) {
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError("channel_mi: inputs must lie in [0, 1]");
  }
  const double accept = prior_safe * tpr + (1.0 - prior_safe) * delta;
  if (accept <= 0.0 || accept >= 1.0) return 0.0;
  // I = sum_s P(s) KL(P(g | s) || P(g)).
  const double kl_safe = xlogy_ratio(tpr, accept) + xlogy_ratio(1.0 - tpr, 1.0 - accept);
  const double kl_unsafe = xlogy_ratio(delta, accept) + xlogy_ratio(1.0 - delta, 1.0 - accept);
  return std::max(0.0, prior_safe * kl_safe + (1.0 - prior_safe) * kl_unsafe);
}

double exact_ceiling(const DistributionPair& pair, std::int64_t horizon, double budget) {
  if (horizon < 1) throw DomainError("exact_ceiling: horizon must be >= 1");
  if (!(budget > 0.0)) throw DomainError("exact_ceiling: budget must be > 0");
  const double n = static_cast<double>(horizon);
  if (!(budget / n < 1.0)) {
    throw BudgetExceedsHorizon(
        fmt::format("exact_ceiling: budget {} must be below horizon {}", budget, horizon));
  }
  return n * np_tpr(pair, budget / n);
}

double holder_jensen_ceiling(const DistributionPair& pair, std::int64_t horizon, double budget,
                             RenyiOrder order) {
  if (horizon < 1) throw DomainError("holder_jensen_ceiling: horizon must be >= 1");
  const HolderConstants hc = holder_constants(pair, order);
  return hc.c_alpha * std::pow(static_cast<double>(horizon), 1.0 - hc.beta) *
         std::pow(budget, hc.beta);
}

double ceiling_asymptotic(double delta_s, double horizon, double budget) {
  if (!(delta_s > 0.0)) throw DomainError("ceiling_asymptotic: delta_s must be > 0");
  if (!(budget > 0.0) || !(horizon / budget >= 1e3)) {
    throw DomainError("ceiling_asymptotic: requires N / B >= 1e3");
  }
  const double l = std::log(horizon / budget);
  const double z = std::sqrt(2.0 * l - std::log(4.0 * kPi * l));
  if (!(z > delta_s)) throw DomainError("ceiling_asymptotic: N / B too small for this separation");
  return budget * z / (z - delta_s) * std::exp(delta_s * z - 0.5 * delta_s * delta_s);
}

double log_exponent_diagnostic_from_log(double delta_s, double log_delta) {
  const double z = std_normal_quantile_from_log(log_delta);
  return log_std_normal_cdf(z + delta_s) / log_delta;
}

double log_exponent_diagnostic(double delta_s, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw DomainError("log_exponent_diagnostic: delta must lie in (0, 1)");
  }
  return log_exponent_diagnostic_from_log(delta_s, std::log(delta));
}

std::vector<double> diagnostic_delta_grid(int points) {
  std::vector<double> grid(points);
  const double lo = -12.0;
  const double hi = -1.0;
  for (int i = 0; i < points; ++i) {
    const double e = points == 1 ? lo : lo + (hi - lo) * i / (points - 1);
    grid[i] = std::pow(10.0, e);
  }
  return grid;
}

}  // namespace dualgate
