#include <doctest.h>

#include <cmath>
#include <random>

#include <boost/math/distributions/laplace.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "dualgate/distpair.hpp"
#include "dualgate/errors.hpp"
#include "dualgate/specfun.hpp"

using namespace dualgate;

namespace {

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

// A unit Gaussian pair written as a one-component mixture, which forces the
// generic grid / quadrature routes.
DistributionPair gaussian_as_mixture(double ds) {
  return DistributionPair(GaussianMixture{{{1.0, ds, 1.0}}, {{1.0, 0.0, 1.0}}});
}

}  // namespace

TEST_CASE("closed-form NP TPR frozen values") {
  const auto g = DistributionPair::unit_gaussian(1.0);
  CHECK(rel(np_tpr(g, 1e-6), 8.72176e-5) < 1e-5);
  CHECK(rel(np_tpr(g, 0.01), 0.0923622) < 1e-5);
  CHECK(rel(np_tpr(g, 0.25), 0.627603) < 1e-5);
  CHECK(rel(np_tpr(DistributionPair::unit_gaussian(2.0), 1e-6), 0.00294877028645372) < 1e-12);
}

TEST_CASE("generic threshold search matches the Gaussian closed form") {
  for (double ds : {0.5, 1.0, 2.0}) {
    const auto g = DistributionPair::unit_gaussian(ds);
    const auto m = gaussian_as_mixture(ds);
    for (double delta : {1e-9, 1e-6, 1e-3, 0.05, 0.3, 0.7, 0.95}) {
      const double closed = np_tpr(g, delta);
      CHECK(rel(np_tpr_threshold_search(g, delta), closed) < 1e-9);
      CHECK(rel(np_tpr(m, delta), closed) < 1e-9);
    }
  }
}

TEST_CASE("Renyi quadrature matches the Gaussian closed form") {
  for (double ds : {0.5, 1.0, 2.0}) {
    for (double alpha : {1.1, 2.0, 3.0, 9.0}) {
      const RenyiOrder order(alpha);
      const double closed = renyi_divergence(DistributionPair::unit_gaussian(ds), order);
      CHECK(rel(closed, alpha * ds * ds / 2) < 1e-15);
      CHECK(rel(renyi_divergence(gaussian_as_mixture(ds), order), closed) < 1e-8);
    }
  }
}

TEST_CASE("Laplace Renyi divergence against an independent integral") {
  // D_alpha for location-shifted Laplace has the closed form
  // log[(alpha e^{(alpha-1)mu} + (alpha-1) e^{-alpha mu}) / (2 alpha - 1)] / (alpha - 1)
  // for mu in units of the scale.
  for (double mu : {0.5, 1.0, 3.0}) {
    for (double alpha : {1.5, 2.0, 5.0}) {
      const double expected =
          std::log((alpha * std::exp((alpha - 1) * mu) + (alpha - 1) * std::exp(-alpha * mu)) /
                   (2 * alpha - 1)) /
          (alpha - 1);
      CHECK(rel(renyi_divergence(DistributionPair::laplace(mu, 1.0), RenyiOrder(alpha)), expected) <
            1e-9);
    }
  }
}

TEST_CASE("distribution functions against boost") {
  const auto t = DistributionPair::student_t(1.0, 5.0);
  const boost::math::students_t_distribution<double> t5(5.0);
  for (double x : {-30.0, -2.0, 0.0, 0.7, 4.0, 50.0}) {
    CHECK(rel(t.cdf(Side::Unsafe, x), boost::math::cdf(t5, x)) < 1e-12);
    CHECK(rel(t.survival(Side::Safe, x), boost::math::cdf(boost::math::complement(t5, x - 1.0))) <
          1e-12);
  }
  const auto l = DistributionPair::laplace(1.0, 2.0);
  const boost::math::laplace_distribution<double> lap(1.0, 2.0);
  for (double x : {-30.0, -2.0, 0.0, 0.7, 4.0, 50.0}) {
    CHECK(rel(l.survival(Side::Safe, x), boost::math::cdf(boost::math::complement(lap, x))) < 1e-12);
    CHECK(rel(std::exp(l.log_density(Side::Safe, x)), boost::math::pdf(lap, x)) < 1e-12);
  }
}

TEST_CASE("level-set mass is monotone and bounded") {
  for (const auto& pair :
       {DistributionPair::unit_gaussian(1.0), DistributionPair::laplace(), DistributionPair::student_t(),
        DistributionPair::symmetric_mixture()}) {
    double prev_u = 1.0;
    double prev_s = 1.0;
    const double lo = pair.log_ratio_inf() - 0.5;
    const double hi = std::min(pair.log_ratio_sup() + 0.5, 20.0);
    for (int i = 0; i <= 60; ++i) {
      const double t = lo + (hi - lo) * i / 60.0;
      const LevelSetMass m = pair.mass_above(t);
      CHECK(m.unsafe >= 0.0);
      CHECK(m.safe <= 1.0 + 1e-12);
      CHECK(m.unsafe <= prev_u + 1e-12);
      CHECK(m.safe <= prev_s + 1e-12);
      // On {L > t}, P+ >= e^t P-.
      CHECK(m.safe + 1e-12 >= std::exp(t) * m.unsafe);
      prev_u = m.unsafe;
      prev_s = m.safe;
    }
  }
}

TEST_CASE("NP TPR properties across families") {
  for (const auto& pair :
       {DistributionPair::unit_gaussian(0.5), DistributionPair::laplace(), DistributionPair::laplace(2.0, 0.5),
        DistributionPair::student_t(), DistributionPair::student_t(2.0, 3.0),
        DistributionPair::symmetric_mixture()}) {
    double prev = 0.0;
    for (double e = -10.0; e <= -0.05; e += 0.25) {
      const double delta = std::pow(10.0, e);
      const double tpr = np_tpr(pair, delta);
      CAPTURE(pair.name());
      CAPTURE(delta);
      CHECK(tpr >= delta - 1e-12);  // NP dominates the coin flip
      CHECK(tpr <= 1.0);
      CHECK(tpr >= prev - 1e-12);   // monotone in delta
      prev = tpr;
    }
  }
}

TEST_CASE("Laplace NP TPR has a closed form on the plateau") {
  // Between the kinks L is linear; the randomised test on the plateau at
  // t = e^{mu/b} gives TPR = e^{mu/b} delta for delta <= P-(X >= mu).
  const auto l = DistributionPair::laplace(1.0, 1.0);
  for (double delta : {1e-6, 1e-3, 0.1}) {
    CHECK(rel(np_tpr(l, delta), std::exp(1.0) * delta) < 1e-9);
  }
}

TEST_CASE("pvalue is the level-set mass at the observed ratio") {
  const auto g = DistributionPair::unit_gaussian(1.0);
  for (double x : {-2.0, 0.0, 1.5, 6.0}) CHECK(rel(pvalue(g, x), std_normal_cdf(-x)) < 1e-14);
  const auto m = gaussian_as_mixture(1.0);
  for (double x : {-2.0, 0.0, 1.5, 6.0}) CHECK(rel(pvalue(m, x), std_normal_cdf(-x)) < 1e-9);
}

TEST_CASE("sampling matches the model") {
  const auto pair = DistributionPair::student_t(1.0, 5.0);
  Rng rng(7);
  int above = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) above += pair.sample(Side::Safe, rng) > 1.0;
  CHECK(std::abs(above / double(n) - 0.5) < 5 * std::sqrt(0.25 / n));
}

TEST_CASE("input validation") {
  CHECK_THROWS_AS(DistributionPair::unit_gaussian(0.0), DomainError);
  CHECK_THROWS_AS(DistributionPair::laplace(1.0, -1.0), DomainError);
  CHECK_THROWS_AS(DistributionPair::student_t(1.0, 2.0), DomainError);
  CHECK_THROWS_AS(RenyiOrder(1.0), DomainError);
  const auto g = DistributionPair::unit_gaussian(1.0);
  CHECK_THROWS_AS(np_tpr(g, 0.0), DomainError);
  CHECK_THROWS_AS(np_tpr(g, 1.0), DomainError);
}

TEST_CASE("Renyi divergence is infinite when P+ has heavier Gaussian tails") {
  const DistributionPair wide(GaussianMixture{{{1.0, 1.0, 2.0}}, {{1.0, 0.0, 1.0}}});
  CHECK_THROWS_AS(renyi_divergence(wide, RenyiOrder(2.0)), DivergenceInfinite);
  // Finite for alpha / 4 - (alpha - 1) > 0, i.e. alpha < 4/3.
  CHECK(std::isfinite(renyi_divergence(wide, RenyiOrder(1.2))));
}
