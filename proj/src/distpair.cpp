#include "dualgate/distpair.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "dualgate/errors.hpp"
#include "dualgate/specfun.hpp"
#include "quadrature.hpp"

namespace dualgate {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kGridPoints = 2001;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double log_sum_exp(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(std::min(a, b) - m));
}

double mixture_log_density(const std::vector<MixtureComponent>& comps, double x) {
  double acc = -kInf;
  for (const auto& c : comps) {
    const double z = (x - c.mean) / c.sd;
    acc = log_sum_exp(acc, std::log(c.weight) + log_std_normal_pdf(z) - std::log(c.sd));
  }
  return acc;
}

double mixture_survival(const std::vector<MixtureComponent>& comps, double x) {
  double s = 0.0;
  for (const auto& c : comps) s += c.weight * std_normal_cdf(-(x - c.mean) / c.sd);
  return s;
}

double mixture_cdf(const std::vector<MixtureComponent>& comps, double x) {
  double s = 0.0;
  for (const auto& c : comps) s += c.weight * std_normal_cdf((x - c.mean) / c.sd);
  return s;
}

double max_sd(const std::vector<MixtureComponent>& comps) {
  double m = 0.0;
  for (const auto& c : comps) m = std::max(m, c.sd);
  return m;
}

void validate_components(std::vector<MixtureComponent>& comps, const char* which) {
  if (comps.empty()) {
    throw DomainError(fmt::format("GaussianMixture: {} components must be nonempty", which));
  }
  double total = 0.0;
  for (const auto& c : comps) {
    if (!(c.weight > 0.0) || !(c.sd > 0.0) || !std::isfinite(c.mean)) {
      throw DomainError(
          fmt::format("GaussianMixture: {} component needs weight > 0 and sd > 0", which));
    }
    total += c.weight;
  }
  for (auto& c : comps) c.weight /= total;
}

double t_log_density(double dof, double x) {
  return std::lgamma(0.5 * (dof + 1.0)) - std::lgamma(0.5 * dof) -
         0.5 * std::log(dof * kPi) - 0.5 * (dof + 1.0) * std::log1p(x * x / dof);
}

double t_survival(double dof, double x) {
  const boost::math::students_t_distribution<double> dist(dof);
  return boost::math::cdf(boost::math::complement(dist, x));
}

double t_cdf(double dof, double x) {
  const boost::math::students_t_distribution<double> dist(dof);
  return boost::math::cdf(dist, x);
}

}  // namespace

RenyiOrder::RenyiOrder(double alpha) : alpha_(alpha) {
  if (!(alpha > 1.0)) {
    throw DomainError(fmt::format("RenyiOrder: alpha must be > 1, got {}", alpha));
  }
}

DistributionPair::DistributionPair(Family family) : family_(std::move(family)) {
  std::visit(Overloaded{
                 [](const UnitGaussian& g) {
                   if (!(g.separation > 0.0) || !std::isfinite(g.separation)) {
                     throw DomainError("UnitGaussian: separation must be > 0");
                   }
                 },
                 [](const Laplace& l) {
                   if (!(l.shift > 0.0) || !(l.scale > 0.0)) {
                     throw DomainError("Laplace: shift and scale must be > 0");
                   }
                 },
                 [](const StudentT& t) {
                   if (!(t.shift > 0.0)) throw DomainError("StudentT: shift must be > 0");
                   if (!(t.dof > 2.0)) throw DomainError("StudentT: dof must be > 2");
                 },
                 [](GaussianMixture& m) {
                   validate_components(m.safe, "safe");
                   validate_components(m.unsafe, "unsafe");
                 },
             },
             family_);
  build_grid();
}

DistributionPair DistributionPair::unit_gaussian(double separation) {
  return DistributionPair(UnitGaussian{separation});
}

DistributionPair DistributionPair::laplace(double shift, double scale) {
  return DistributionPair(Laplace{shift, scale});
}

DistributionPair DistributionPair::student_t(double shift, double dof) {
  return DistributionPair(StudentT{shift, dof});
}

DistributionPair DistributionPair::symmetric_mixture(double shift, double spread, double sd) {
  GaussianMixture m;
  m.unsafe = {{0.5, -spread, sd}, {0.5, spread, sd}};
  m.safe = {{0.5, shift - spread, sd}, {0.5, shift + spread, sd}};
  return DistributionPair(std::move(m));
}

std::string DistributionPair::name() const {
  return std::visit(
      Overloaded{
          [](const UnitGaussian& g) { return fmt::format("gaussian(ds={})", g.separation); },
          [](const Laplace& l) { return fmt::format("laplace(shift={},scale={})", l.shift, l.scale); },
          [](const StudentT& t) { return fmt::format("student_t(shift={},dof={})", t.shift, t.dof); },
          [](const GaussianMixture& m) {
            return fmt::format("mixture({}+,{}-)", m.safe.size(), m.unsafe.size());
          },
      },
      family_);
}

std::optional<double> DistributionPair::gaussian_separation() const {
  if (const auto* g = std::get_if<UnitGaussian>(&family_)) return g->separation;
  return std::nullopt;
}

double DistributionPair::log_density(Side side, double x) const {
  const bool safe = side == Side::Safe;
  return std::visit(
      Overloaded{
          [&](const UnitGaussian& g) {
            return log_std_normal_pdf(safe ? x - g.separation : x);
          },
          [&](const Laplace& l) {
            const double m = safe ? l.shift : 0.0;
            return -std::abs(x - m) / l.scale - std::log(2.0 * l.scale);
          },
          [&](const StudentT& t) { return t_log_density(t.dof, safe ? x - t.shift : x); },
          [&](const GaussianMixture& m) {
            return mixture_log_density(safe ? m.safe : m.unsafe, x);
          },
      },
      family_);
}

double DistributionPair::density(Side side, double x) const {
  return std::exp(log_density(side, x));
}

double DistributionPair::survival(Side side, double x) const {
  if (x == -kInf) return 1.0;
  if (x == kInf) return 0.0;
  const bool safe = side == Side::Safe;
  return std::visit(
      Overloaded{
          [&](const UnitGaussian& g) {
            return std_normal_cdf(-(safe ? x - g.separation : x));
          },
          [&](const Laplace& l) {
            const double z = (x - (safe ? l.shift : 0.0)) / l.scale;
            return z >= 0.0 ? 0.5 * std::exp(-z) : 1.0 - 0.5 * std::exp(z);
          },
          [&](const StudentT& t) { return t_survival(t.dof, safe ? x - t.shift : x); },
          [&](const GaussianMixture& m) {
            return mixture_survival(safe ? m.safe : m.unsafe, x);
          },
      },
      family_);
}

double DistributionPair::cdf(Side side, double x) const {
  if (x == -kInf) return 0.0;
  if (x == kInf) return 1.0;
  const bool safe = side == Side::Safe;
  return std::visit(
      Overloaded{
          [&](const UnitGaussian& g) { return std_normal_cdf(safe ? x - g.separation : x); },
          [&](const Laplace& l) {
            const double z = (x - (safe ? l.shift : 0.0)) / l.scale;
            return z <= 0.0 ? 0.5 * std::exp(z) : 1.0 - 0.5 * std::exp(-z);
          },
          [&](const StudentT& t) { return t_cdf(t.dof, safe ? x - t.shift : x); },
          [&](const GaussianMixture& m) { return mixture_cdf(safe ? m.safe : m.unsafe, x); },
      },
      family_);
}

double DistributionPair::sample(Side side, Rng& rng) const {
  const bool safe = side == Side::Safe;
  return std::visit(
      Overloaded{
          [&](const UnitGaussian& g) {
            std::normal_distribution<double> n(safe ? g.separation : 0.0, 1.0);
            return n(rng);
          },
          [&](const Laplace& l) {
            std::exponential_distribution<double> e(1.0);
            std::bernoulli_distribution coin(0.5);
            const double mag = l.scale * e(rng);
            return (safe ? l.shift : 0.0) + (coin(rng) ? mag : -mag);
          },
          [&](const StudentT& t) {
            std::student_t_distribution<double> st(t.dof);
            return (safe ? t.shift : 0.0) + st(rng);
          },
          [&](const GaussianMixture& m) {
            const auto& comps = safe ? m.safe : m.unsafe;
            std::uniform_real_distribution<double> u(0.0, 1.0);
            double pick = u(rng);
            std::size_t i = 0;
            for (; i + 1 < comps.size(); ++i) {
              if (pick < comps[i].weight) break;
              pick -= comps[i].weight;
            }
            std::normal_distribution<double> n(comps[i].mean, comps[i].sd);
            return n(rng);
          },
      },
      family_);
}

double DistributionPair::log_likelihood_ratio(double x) const {
  return std::visit(
      Overloaded{
          [&](const UnitGaussian& g) {
            return g.separation * x - 0.5 * g.separation * g.separation;
          },
          // |x| - |x - mu| written through a clamp so the plateaus are exact.
          [&](const Laplace& l) {
            return (2.0 * std::clamp(x, 0.0, l.shift) - l.shift) / l.scale;
          },
          [&](const StudentT& t) {
            const double z = x - t.shift;
            return -0.5 * (t.dof + 1.0) *
                   (std::log1p(z * z / t.dof) - std::log1p(x * x / t.dof));
          },
          [&](const GaussianMixture& m) {
            return mixture_log_density(m.safe, x) - mixture_log_density(m.unsafe, x);
          },
      },
      family_);
}

void DistributionPair::build_grid() {
  double center = 0.0;
  double scale = 1.0;
  double extent = 0.0;
  std::visit(Overloaded{
                 [&](const UnitGaussian& g) {
                   center = 0.5 * g.separation;
                   extent = 60.0 + g.separation;
                 },
                 [&](const Laplace& l) {
                   center = 0.5 * l.shift;
                   scale = l.scale;
                   extent = 800.0 * l.scale + l.shift;
                 },
                 [&](const StudentT& t) {
                   center = 0.5 * t.shift;
                   extent = 1e8;
                 },
                 [&](const GaussianMixture& m) {
                   double lo = kInf;
                   double hi = -kInf;
                   double min_sd = kInf;
                   for (const auto* comps : {&m.safe, &m.unsafe}) {
                     for (const auto& c : *comps) {
                       lo = std::min(lo, c.mean);
                       hi = std::max(hi, c.mean);
                       min_sd = std::min(min_sd, c.sd);
                     }
                   }
                   center = 0.5 * (lo + hi);
                   scale = min_sd;
                   extent = 0.5 * (hi - lo) + 60.0 * std::max(max_sd(m.safe), max_sd(m.unsafe));
                 },
             },
             family_);
  const double u_max = std::asinh(extent / scale);
  grid_.resize(kGridPoints);
  grid_log_ratio_.resize(kGridPoints);
  log_ratio_sup_ = -kInf;
  log_ratio_inf_ = kInf;
  for (int i = 0; i < kGridPoints; ++i) {
    const double u = -u_max + 2.0 * u_max * i / (kGridPoints - 1);
    grid_[i] = center + scale * std::sinh(u);
    grid_log_ratio_[i] = log_likelihood_ratio(grid_[i]);
    if (grid_log_ratio_[i] > log_ratio_sup_) {
      log_ratio_sup_ = grid_log_ratio_[i];
      argmax_ = grid_[i];
    }
    log_ratio_inf_ = std::min(log_ratio_inf_, grid_log_ratio_[i]);
  }
  // Level sets narrower than the grid spacing would be missed around local
  // extrema, so each one is polished by golden-section search and inserted
  // into the grid.
  const std::size_t n = grid_.size();
  std::vector<std::pair<double, double>> extra;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double l = grid_log_ratio_[i - 1];
    const double m = grid_log_ratio_[i];
    const double r = grid_log_ratio_[i + 1];
    const bool is_max = (m > l && m >= r) || (m >= l && m > r);
    const bool is_min = (m < l && m <= r) || (m <= l && m < r);
    if (!is_max && !is_min) continue;
    const double sign = is_max ? 1.0 : -1.0;
    double a = grid_[i - 1];
    double b = grid_[i + 1];
    constexpr double invphi = 0.6180339887498949;
    for (int k = 0; k < 200 && b - a > 1e-15 * std::max(1.0, std::abs(a)); ++k) {
      const double c = b - invphi * (b - a);
      const double d = a + invphi * (b - a);
      if (sign * log_likelihood_ratio(c) > sign * log_likelihood_ratio(d)) {
        b = d;
      } else {
        a = c;
      }
    }
    const double x = 0.5 * (a + b);
    const double lx = log_likelihood_ratio(x);
    if (sign * lx > sign * m) extra.emplace_back(x, lx);
  }
  argmax_interior_ = false;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (grid_log_ratio_[i] == log_ratio_sup_ && grid_[i] == argmax_) argmax_interior_ = true;
  }
  for (const auto& [x, lx] : extra) {
    const auto pos = std::upper_bound(grid_.begin(), grid_.end(), x);
    const auto k = std::distance(grid_.begin(), pos);
    grid_.insert(pos, x);
    grid_log_ratio_.insert(grid_log_ratio_.begin() + k, lx);
    if (lx > log_ratio_sup_) {
      log_ratio_sup_ = lx;
      argmax_ = x;
      argmax_interior_ = true;
    }
    log_ratio_inf_ = std::min(log_ratio_inf_, lx);
  }
}

std::vector<double> DistributionPair::breakpoints() const {
  return std::visit(Overloaded{
                        [](const UnitGaussian& g) {
                          return std::vector<double>{0.0, g.separation};
                        },
                        [](const Laplace& l) { return std::vector<double>{0.0, l.shift}; },
                        [](const StudentT& t) { return std::vector<double>{0.0, t.shift}; },
                        [](const GaussianMixture& m) {
                          std::vector<double> b;
                          for (const auto& c : m.safe) b.push_back(c.mean);
                          for (const auto& c : m.unsafe) b.push_back(c.mean);
                          return b;
                        },
                    },
                    family_);
}

double DistributionPair::refine_crossing(double lo, double hi, double log_threshold) const {
  const bool lo_inside = log_likelihood_ratio(lo) > log_threshold;
  return detail::bisect_boundary(lo, hi, [&](double x) {
    return (log_likelihood_ratio(x) > log_threshold) != lo_inside;
  });
}

double DistributionPair::interval_mass(Side side, double a, double b) const {
  if (!(b > a)) return 0.0;
  if (a == -kInf) return cdf(side, b);
  if (b == kInf) return survival(side, a);
  const double sa = survival(side, a);
  double diff;
  double scale;
  if (sa < 0.5) {
    diff = sa - survival(side, b);
    scale = sa;
  } else {
    const double cb = cdf(side, b);
    diff = cb - cdf(side, a);
    scale = cb;
  }
  // Narrow intervals in the bulk: the difference of two O(1) probabilities
  // has lost its relative accuracy, integrate the density instead.
  if (diff < 1e-6 * scale) {
    // The density is smooth on such intervals; a shallow rule is exact to
    // rounding and avoids chasing an absolute tolerance near underflow.
    return detail::integrate_interval([&](double x) { return density(side, x); }, a, b, 1e-13, 3)
        .value;
  }
  return std::max(0.0, diff);
}

LevelSetMass DistributionPair::mass_above(double log_threshold) const {
  LevelSetMass mass;
  bool inside = grid_log_ratio_.front() > log_threshold;
  double start = -kInf;
  auto close = [&](double a, double b) {
    mass.unsafe += interval_mass(Side::Unsafe, a, b);
    mass.safe += interval_mass(Side::Safe, a, b);
  };
  for (std::size_t i = 1; i < grid_.size(); ++i) {
    const bool now = grid_log_ratio_[i] > log_threshold;
    if (now == inside) continue;
    const double xc = refine_crossing(grid_[i - 1], grid_[i], log_threshold);
    if (now) {
      start = xc;
    } else {
      close(start, xc);
    }
    inside = now;
  }
  if (inside) close(start, kInf);
  mass.unsafe = std::min(1.0, mass.unsafe);
  mass.safe = std::min(1.0, mass.safe);
  return mass;
}

double likelihood_ratio(const DistributionPair& pair, double x) {
  return std::exp(pair.log_likelihood_ratio(x));
}

namespace {

void check_delta(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw DomainError(fmt::format("np_tpr: delta must lie in (0, 1), got {}", delta));
  }
}

}  // namespace

double np_tpr(const DistributionPair& pair, double delta) {
  check_delta(delta);
  if (const auto ds = pair.gaussian_separation()) {
    return std_normal_cdf(std_normal_quantile(delta) + *ds);
  }
  return np_tpr_threshold_search(pair, delta);
}

double np_tpr_threshold_search(const DistributionPair& pair, double delta) {
  check_delta(delta);
  double lo = pair.log_ratio_inf() - 1.0;
  double hi = pair.log_ratio_sup() + 1.0;
  LevelSetMass at_lo = pair.mass_above(lo);
  LevelSetMass at_hi = pair.mass_above(hi);
  if (!(at_lo.unsafe > delta) || !(at_hi.unsafe <= delta)) {
    throw RootNotBracketed(fmt::format(
        "np_tpr: cannot bracket level {} for {} (P-(L>t) spans [{}, {}])", delta, pair.name(),
        at_hi.unsafe, at_lo.unsafe));
  }
  for (int iter = 0; iter < 300; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (hi - lo < 1e-15 * std::max(1.0, std::abs(mid))) break;
    const LevelSetMass m = pair.mass_above(mid);
    if (m.unsafe > delta) {
      lo = mid;
      at_lo = m;
    } else {
      hi = mid;
      at_hi = m;
    }
  }
  // Randomise on the boundary {L = t*}, where dP+ = t* dP-.
  const double tpr = at_hi.safe + std::exp(hi) * (delta - at_hi.unsafe);
  return std::clamp(tpr, 0.0, 1.0);
}

double pvalue(const DistributionPair& pair, double x) {
  if (pair.gaussian_separation()) return std_normal_cdf(-x);
  return pair.mass_above(pair.log_likelihood_ratio(x)).unsafe;
}

QuadratureValue renyi_divergence_with_error(const DistributionPair& pair, RenyiOrder order) {
  const double alpha = order.alpha();
  if (const auto ds = pair.gaussian_separation()) {
    return {alpha * (*ds) * (*ds) / 2.0, 0.0};
  }
  if (const auto* m = std::get_if<GaussianMixture>(&pair.family())) {
    // Tails are governed by the widest component on each side.
    const double s_safe = max_sd(m->safe);
    const double s_unsafe = max_sd(m->unsafe);
    const double curvature = alpha / (s_safe * s_safe) - (alpha - 1.0) / (s_unsafe * s_unsafe);
    if (!(curvature > 0.0)) {
      throw DivergenceInfinite(fmt::format(
          "renyi_divergence: integral diverges for {} at alpha = {}", pair.name(), alpha));
    }
  }
  auto integrand = [&](double x) {
    return std::exp(alpha * pair.log_density(Side::Safe, x) +
                    (1.0 - alpha) * pair.log_density(Side::Unsafe, x));
  };
  const QuadratureValue integral = detail::integrate_real_line(integrand, pair.breakpoints());
  if (!std::isfinite(integral.value) || !(integral.value > 0.0)) {
    throw DivergenceInfinite(fmt::format(
        "renyi_divergence: integral is not finite for {} at alpha = {}", pair.name(), alpha));
  }
  const double d = std::log(integral.value) / (alpha - 1.0);
  const double err = integral.error / (integral.value * (alpha - 1.0));
  return {std::max(0.0, d), err};
}

double renyi_divergence(const DistributionPair& pair, RenyiOrder order) {
  return renyi_divergence_with_error(pair, order).value;
}

}  // namespace dualgate
