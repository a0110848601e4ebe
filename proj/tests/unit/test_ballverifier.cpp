#include <doctest.h>

#include <cmath>

#include <Eigen/SVD>
#include <boost/math/special_functions/gamma.hpp>

#include "dualgate/ballverifier.hpp"
#include "dualgate/distpair.hpp"
#include "dualgate/errors.hpp"
#include "dualgate/montecarlo.hpp"

using namespace dualgate;

namespace {

// Closed-loop sensitivity d traj / d theta of the affine policy, propagated
// by the linearised recursion S_{k+1} = S_k + dt (W df/dp S_k + du/dtheta).
// Valid while the speed clamp is inactive.
double affine_gain(const ToyEnvironment& env, const Vec& theta) {
  const double ell = env.length_scale;
  Eigen::Matrix<double, 2, 4> w;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 4; ++j) w(i, j) = theta[i * 4 + j];
  const Eigen::Vector2d b(theta[8], theta[9]);
  Eigen::Matrix<double, 4, 2> df;
  df << -Eigen::Matrix2d::Identity() / ell, Eigen::Matrix2d::Identity() / ell;
  double gain = 0.0;
  for (const auto& s : env.scenarios) {
    Eigen::Vector2d p = s.start;
    Eigen::Matrix<double, 2, 10> sens = Eigen::Matrix<double, 2, 10>::Zero();
    for (int k = 0; k < env.horizon_steps; ++k) {
      Eigen::Matrix<double, 4, 1> f;
      f << (s.target - p) / ell, p / ell;
      Eigen::Matrix<double, 2, 10> du = Eigen::Matrix<double, 2, 10>::Zero();
      for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 4; ++j) du(i, i * 4 + j) = f[j];
        du(i, 8 + i) = 1.0;
      }
      sens += env.dt * (w * df * sens + du);
      p += env.dt * (w * f + b);
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(sens);
      gain = std::max(gain, svd.singularValues()[0]);
    }
  }
  return gain;
}

}  // namespace

TEST_CASE("zero policy stays at the start") {
  const auto env = ToyEnvironment::standard(0);
  const Vec zero = Vec::Zero(env.controller_dim());
  for (std::size_t i = 0; i < env.scenarios.size(); ++i) {
    const Trajectory t = rollout(env, zero, i);
    CHECK(t.size() == static_cast<std::size_t>(env.horizon_steps));
    for (const auto& p : t) CHECK((p - env.scenarios[i].start).norm() == 0.0);
  }
}

TEST_CASE("nominal rollout matches independently integrated dynamics") {
  for (int h : {0, 34}) {
    const auto env = ToyEnvironment::standard(h);
    const Vec theta = nominal_parameters(env, 5);
    for (std::size_t i = 0; i < env.scenarios.size(); ++i) {
      const auto& s = env.scenarios[i];
      Point p = s.start;
      for (int k = 0; k < env.horizon_steps; ++k) {
        Point u = s.target - p;
        if (h > 0) {
          u = env.gain * env.length_scale *
              Point(std::tanh(u.x() / env.length_scale), std::tanh(u.y() / env.length_scale));
        } else {
          u *= env.gain;
        }
        if (u.norm() > env.max_speed) u *= env.max_speed / u.norm();
        p += env.dt * u;
      }
      const Trajectory t = rollout(env, theta, i);
      CHECK((t.back() - p).norm() < 1e-12);
      CHECK((t.back() - s.target).norm() < 0.05);
    }
  }
}

TEST_CASE("rollout is Lipschitz-continuous along coordinates") {
  const auto env = ToyEnvironment::standard(12);
  const Vec theta = nominal_parameters(env, 2);
  for (int idx : {0, 5, 40, env.controller_dim() - 1}) {
    Vec e = Vec::Zero(env.controller_dim());
    e[idx] = 1.0;
    const double q1 = trajectory_deviation(env, theta, theta + 1e-4 * e) / 1e-4;
    const double q2 = trajectory_deviation(env, theta, theta + 1e-6 * e) / 1e-6;
    CHECK(std::abs(q1 - q2) <= 0.01 * std::max(q1, 1e-12) + 1e-9);
  }
}

TEST_CASE("dimension checks") {
  const auto env = ToyEnvironment::standard(0);
  CHECK_THROWS_AS(rollout(env, Vec::Zero(3), 0), DimensionMismatch);
  const Vec theta = nominal_parameters(env);
  const BallCertificate cert =
      make_certificate(theta, 0.1, 1.0, LipschitzProvenance::FiniteDifferenceEstimate);
  CHECK_THROWS_AS(verify(cert, Vec::Zero(4)), DimensionMismatch);
  CHECK(env.controller_dim() == 10);
  CHECK(ToyEnvironment::standard(34).controller_dim() == 240);
}

TEST_CASE("margin sign convention and active constraint") {
  auto env = ToyEnvironment::standard(0);
  const Vec theta = nominal_parameters(env);
  const double m = margin(env, theta);
  CHECK(m > 0.0);
  // Exhaustive recomputation over the rolled-out discretisation.
  double brute = 1e300;
  for (std::size_t i = 0; i < env.scenarios.size(); ++i)
    for (const auto& p : rollout(env, theta, i))
      for (const auto& o : env.obstacles) brute = std::min(brute, (p - o.center).norm() - o.radius);
  CHECK(m == brute);

  // Shrinking every obstacle by x (the active one among them) adds exactly x.
  auto shrunk = env;
  for (auto& o : shrunk.obstacles) o.radius -= 0.01;
  CHECK(margin(shrunk, theta) == doctest::Approx(m + 0.01).epsilon(1e-12));

  auto blocked = env;
  blocked.obstacles.push_back({Point(1.0, 1.0), 0.1});
  CHECK(margin(blocked, theta) < 0.0);
}

TEST_CASE("finite-difference Lipschitz estimate against the analytic closed-loop gain") {
  const auto env = ToyEnvironment::standard(0);
  const Vec theta = nominal_parameters(env);
  LipschitzOptions o;
  o.n_probes = 512;
  o.safety_factor = 1.0;
  o.seed = 17;
  const double est = estimate_lipschitz(env, theta, o);
  const double gain = affine_gain(env, theta);
  CHECK(est <= gain * (1 + 1e-3));
  CHECK(est >= gain / 2);

  LipschitzOptions five = o;
  five.safety_factor = 5.0;
  CHECK(estimate_lipschitz(env, theta, five) == 5.0 * est);

  LipschitzOptions fewer = o;
  fewer.n_probes = 64;
  CHECK(estimate_lipschitz(env, theta, fewer) <= est);
  LipschitzOptions more_scales = fewer;
  more_scales.scales.push_back(0.05);
  CHECK(estimate_lipschitz(env, theta, more_scales) >= estimate_lipschitz(env, theta, fewer));

  LipschitzOptions one_worker = fewer;
  one_worker.workers = 1;
  LipschitzOptions four_workers = fewer;
  four_workers.workers = 4;
  CHECK(estimate_lipschitz(env, theta, one_worker) == estimate_lipschitz(env, theta, four_workers));
}

TEST_CASE("certificate arithmetic") {
  const Vec theta0 = Vec::Ones(4);
  CHECK(make_certificate(theta0, 0.286, 13.75, LipschitzProvenance::FiniteDifferenceEstimate)
            .radius_r == doctest::Approx(0.0208).epsilon(2e-3));
  CHECK(make_certificate(theta0, 0.3, 0.6, LipschitzProvenance::AnalyticBound).radius_r == 0.5);
  const BallCertificate big =
      make_certificate(theta0, 16.31, 0.168, LipschitzProvenance::FiniteDifferenceEstimate);
  CHECK(big.radius_r == doctest::Approx(16.31 / 0.168));
  CHECK_FALSE(big.capped);
  // ||theta0|| = 5.06 puts the 0.5 ||theta0|| cap at 2.53.
  const Vec anchor = Vec::Constant(4, 2.53);
  const BallCertificate capped = make_certificate(
      anchor, 16.31, 0.168, LipschitzProvenance::FiniteDifferenceEstimate, 5.0, 0.5);
  CHECK(capped.capped);
  CHECK(capped.radius_r == doctest::Approx(2.53));
  CHECK_THROWS_AS(make_certificate(theta0, 0.0, 1.0, LipschitzProvenance::AnalyticBound),
                  NonpositiveMargin);
  auto env = ToyEnvironment::standard(0);
  env.obstacles.push_back({Point(1.0, 1.0), 0.1});
  CHECK_THROWS_AS(make_certificate(env, nominal_parameters(env), 1.0,
                                   LipschitzProvenance::FiniteDifferenceEstimate),
                  NonpositiveMargin);
}

TEST_CASE("verify uses a strict Euclidean ball") {
  const Vec theta0 = Vec::Zero(6);
  const BallCertificate cert =
      make_certificate(theta0, 1.0, 4.0, LipschitzProvenance::AnalyticBound);  // r = 0.25
  CHECK(verify(cert, theta0));
  Vec edge = Vec::Zero(6);
  edge[2] = 0.25;
  CHECK_FALSE(verify(cert, edge));
  Rng rng(3);
  std::normal_distribution<double> n;
  for (int i = 0; i < 100; ++i) {
    Vec u(6);
    for (int j = 0; j < 6; ++j) u[j] = n(rng);
    CHECK(verify(cert, theta0 + 0.99 * 0.25 * u / u.norm()));
    CHECK_FALSE(verify(cert, theta0 + 1.01 * 0.25 * u / u.norm()));
  }
}

TEST_CASE("coverage TPR") {
  for (double r : {0.1, 1.0, 3.0}) {
    CHECK(coverage_tpr(2, r, 0.7) == doctest::Approx(-std::expm1(-r * r / (2 * 0.49))).epsilon(1e-13));
  }
  // chi^2 median is close to d for large d.
  CHECK(std::abs(coverage_tpr(10000, 100.0, 1.0) - 0.5) < 0.01);
}

TEST_CASE("coverage TPR against Monte Carlo Gaussian mutations") {
  for (int d : {4, 84, 240}) {
    const double r = 1.0;
    const double sigma = r / std::sqrt(static_cast<double>(d));
    const double expected = coverage_tpr(d, r, sigma);
    const MonteCarloEstimate mc = monte_carlo_mean(
        100 + d, 100000,
        [&](Rng& rng) {
          std::normal_distribution<double> n(0.0, sigma);
          double s = 0.0;
          for (int i = 0; i < d; ++i) {
            const double x = n(rng);
            s += x * x;
          }
          return s < r * r ? 1.0 : 0.0;
        },
        1);
    CAPTURE(d);
    CHECK(std::abs(mc.mean - expected) < 3 * mc.standard_error);
  }
}

TEST_CASE("sigma star") {
  for (int d : {2, 10, 240, 5000}) {
    for (double target : {0.1, 0.286, 0.5, 0.9}) {
      const double s = sigma_star(d, 0.02, target);
      CHECK(coverage_tpr(d, 0.02, s) == doctest::Approx(target).epsilon(1e-10));
      // Independent inverse from boost.
      const double x = boost::math::gamma_p_inv(0.5 * d, target);
      CHECK(s == doctest::Approx(0.02 / std::sqrt(2 * x)).epsilon(1e-10));
      CHECK(sigma_star(d, 0.04, target) == doctest::Approx(2 * s).epsilon(1e-12));
    }
  }
  CHECK(sigma_star(20000, 1.0, 0.5) == doctest::Approx(1.0 / std::sqrt(20000.0)).epsilon(1e-3));
}

TEST_CASE("soundness trial: no unsafe sample inside the ball") {
  for (int h : {0, 34}) {
    const auto env = ToyEnvironment::standard(h);
    const Vec theta0 = nominal_parameters(env, 1);
    LipschitzOptions o;
    o.n_probes = 24;
    o.seed = 4;
    const double L = estimate_lipschitz(env, theta0, o);
    const BallCertificate cert = make_certificate(
        env, theta0, L, LipschitzProvenance::FiniteDifferenceEstimate, o.safety_factor);
    for (std::uint64_t seed : {1u, 2u}) {
      const SoundnessReport rep = soundness_trial(env, cert, 200, 50, seed);
      CHECK(rep.unsafe_inside == 0);
      CHECK(rep.false_accept_rate() == 0.0);
      CHECK(rep.max_inside_norm < cert.radius_r);
      // Empirical Lipschitz inequality along the sampled radii.
      CHECK(rep.min_inside_margin >= cert.margin_m - cert.lipschitz_L * rep.max_inside_norm);
    }
    const BallCertificate half = make_certificate(
        env, theta0, 2 * L, LipschitzProvenance::FiniteDifferenceEstimate, o.safety_factor);
    CHECK(soundness_trial(env, half, 100, 0, 7).unsafe_inside == 0);
    const SoundnessReport a = soundness_trial(env, cert, 40, 40, 11, 1);
    const SoundnessReport b = soundness_trial(env, cert, 40, 40, 11, 3);
    CHECK(a.min_inside_margin == b.min_inside_margin);
    CHECK(a.unsafe_outside == b.unsafe_outside);
  }
}

TEST_CASE("larger safety factor only shrinks the accepted set") {
  const auto env = ToyEnvironment::standard(0);
  const Vec theta0 = nominal_parameters(env);
  const double m = margin(env, theta0);
  const BallCertificate loose = make_certificate(theta0, m, 1.0, LipschitzProvenance::FiniteDifferenceEstimate);
  const BallCertificate tight = make_certificate(theta0, m, 5.0, LipschitzProvenance::FiniteDifferenceEstimate);
  Rng rng(8);
  std::normal_distribution<double> n;
  for (int i = 0; i < 200; ++i) {
    Vec u(theta0.size());
    for (Eigen::Index j = 0; j < u.size(); ++j) u[j] = n(rng);
    const Vec theta = theta0 + 0.3 * loose.radius_r * u / std::sqrt(double(u.size()));
    if (verify(tight, theta)) CHECK(verify(loose, theta));
  }
}

TEST_CASE("separation: verifier keeps positive TPR at zero risk, classifiers do not") {
  const auto g = DistributionPair::unit_gaussian(1.0);
  double prev = 1.0;
  for (double e = -2; e >= -300; e -= 20) {
    const double tpr = np_tpr(g, std::pow(10.0, e));
    CHECK(tpr < prev);
    prev = tpr;
  }
  CHECK(prev < 1e-250);
  CHECK(coverage_tpr(240, 0.0208, sigma_star(240, 0.0208, 0.286)) ==
        doctest::Approx(0.286).epsilon(1e-10));
}
