#pragma once

// Safe/unsafe feature-distribution pairs (P+, P-) on the real line.
//
// Every family is reduced to its one-dimensional sufficient statistic. The
// pair exposes densities, tail probabilities, the likelihood ratio
// L = dP+/dP-, and the Neyman-Pearson machinery built on the level sets
// {x : L(x) > t}.

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "dualgate/montecarlo.hpp"

namespace dualgate {

/// Which member of the pair: Safe is P+, Unsafe is P-.
enum class Side { Safe, Unsafe };

/// P- = N(0, 1), P+ = N(separation, 1).
struct UnitGaussian {
  double separation = 1.0;
};

/// P- = Laplace(0, scale), P+ = Laplace(shift, scale).
struct Laplace {
  double shift = 1.0;
  double scale = 1.0;
};

/// P- = t_dof, P+ = t_dof + shift.
struct StudentT {
  double shift = 1.0;
  double dof = 5.0;
};

struct MixtureComponent {
  double weight = 1.0;
  double mean = 0.0;
  double sd = 1.0;
};

struct GaussianMixture {
  std::vector<MixtureComponent> safe;
  std::vector<MixtureComponent> unsafe;
};

using Family = std::variant<UnitGaussian, Laplace, StudentT, GaussianMixture>;

/// Renyi order alpha, strictly greater than one.
class RenyiOrder {
 public:
  explicit RenyiOrder(double alpha);

  double alpha() const { return alpha_; }
  /// Holder exponent (alpha - 1) / alpha.
  double beta() const { return (alpha_ - 1.0) / alpha_; }

 private:
  double alpha_;
};

/// P-(L > t) and P+(L > t) for one threshold t.
struct LevelSetMass {
  double unsafe = 0.0;
  double safe = 0.0;
};

class DistributionPair {
 public:
  explicit DistributionPair(Family family);

  static DistributionPair unit_gaussian(double separation);
  static DistributionPair laplace(double shift = 1.0, double scale = 1.0);
  static DistributionPair student_t(double shift = 1.0, double dof = 5.0);
  /// P- = w N(-spread, sd) + (1-w) N(spread, sd) with w = 1/2, P+ = P- shifted
  /// by `shift`.
  static DistributionPair symmetric_mixture(double shift = 1.0, double spread = 1.0,
                                            double sd = 1.0);

  const Family& family() const { return family_; }
  std::string name() const;

  /// Delta_s when the pair is a UnitGaussian, empty otherwise.
  std::optional<double> gaussian_separation() const;

  double log_density(Side side, double x) const;
  double density(Side side, double x) const;
  /// P(X > x) for the given side, accurate in the upper tail.
  double survival(Side side, double x) const;
  /// P(X <= x), accurate in the lower tail.
  double cdf(Side side, double x) const;
  double sample(Side side, Rng& rng) const;

  double log_likelihood_ratio(double x) const;

  /// Masses of the strict level set {L > exp(log_threshold)}.
  LevelSetMass mass_above(double log_threshold) const;

  /// Extremes of log L over the evaluation grid (the grid spans the support
  /// far enough that the log ratio is monotone beyond it).
  double log_ratio_sup() const { return log_ratio_sup_; }
  double log_ratio_inf() const { return log_ratio_inf_; }
  /// Grid point where log L attains its supremum.
  double argmax_log_ratio() const { return argmax_; }
  /// False when log L is still increasing at a grid end (unbounded ratio).
  bool sup_is_interior() const { return argmax_interior_; }

  /// Points where densities have kinks or concentrate mass; used to split
  /// quadrature ranges.
  std::vector<double> breakpoints() const;

 private:
  void build_grid();
  double refine_crossing(double lo, double hi, double log_threshold) const;
  double interval_mass(Side side, double a, double b) const;

  Family family_;
  std::vector<double> grid_;
  std::vector<double> grid_log_ratio_;
  double log_ratio_sup_ = 0.0;
  double log_ratio_inf_ = 0.0;
  double argmax_ = 0.0;
  bool argmax_interior_ = false;
};

struct QuadratureValue {
  double value = 0.0;
  double error = 0.0;
};

/// D_alpha(P+ || P-) = log(integral of (dP+/dP-)^alpha dP-) / (alpha - 1).
/// Closed form alpha * Delta_s^2 / 2 for UnitGaussian, adaptive quadrature
/// otherwise. Throws DivergenceInfinite when the integral diverges.
double renyi_divergence(const DistributionPair& pair, RenyiOrder order);
QuadratureValue renyi_divergence_with_error(const DistributionPair& pair, RenyiOrder order);

double likelihood_ratio(const DistributionPair& pair, double x);

/// TPR of the Neyman-Pearson test at false-accept level delta in (0, 1).
/// Closed form for UnitGaussian; otherwise the threshold search below.
double np_tpr(const DistributionPair& pair, double delta);

/// Family-independent NP TPR: finds the critical ratio t* with
/// P-(L > t*) <= delta < P-(L >= t*) and randomises on {L = t*}.
double np_tpr_threshold_search(const DistributionPair& pair, double delta);

/// U(x) = P-(L > L(x)).
double pvalue(const DistributionPair& pair, double x);

}  // namespace dualgate
