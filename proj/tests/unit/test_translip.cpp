#include <doctest.h>

#include <cmath>
#include <vector>

#include "dualgate/errors.hpp"
#include "dualgate/translip.hpp"

using namespace dualgate;

TEST_CASE("reference architecture Lipschitz constants") {
  const auto specs = reference_architectures();
  REQUIRE(specs.size() == 4);
  const double expected[] = {259.7, 165.2, 142.5, 94.0};
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const double l = per_layer_lipschitz(specs[i], 0);
    // Table norms are rounded to three figures, so agreement is to ~0.3%.
    CHECK(l == doctest::Approx(expected[i]).epsilon(3e-3));
    for (int k = 1; k < specs[i].n_layers; ++k) CHECK(per_layer_lipschitz(specs[i], k) == l);
  }
  // Direct evaluation for the toy row.
  CHECK(per_layer_lipschitz(specs[0], 0) ==
        doctest::Approx(1.0 / std::sqrt(1e-5) * 2.32 / std::sqrt(32.0) * 2.0).epsilon(1e-14));
  CHECK_THROWS_AS(per_layer_lipschitz(specs[0], 2), DomainError);
  CHECK_THROWS_AS(per_layer_lipschitz(specs[0], -1), DomainError);
}

TEST_CASE("unit spec gives sqrt(2 n_proj)") {
  ArchitectureSpec s = ArchitectureSpec::uniform("unit", 1, 4, 1, 1.0, 1, 1.0, 1.0);
  CHECK(per_layer_lipschitz(s, 0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  const double base = per_layer_lipschitz(s, 0);
  s.n_proj = 2;
  CHECK(per_layer_lipschitz(s, 0) == doctest::Approx(base * std::sqrt(2.0)).epsilon(1e-15));
}

TEST_CASE("per-layer bound monotonicity") {
  const ArchitectureSpec base = ArchitectureSpec::uniform("b", 1, 64, 32, 2.0);
  const double l0 = per_layer_lipschitz(base, 0);
  ArchitectureSpec s = base;
  s.gamma_norm[0] *= 1.5;
  CHECK(per_layer_lipschitz(s, 0) > l0);
  s = base;
  s.wv_norm[0] *= 1.5;
  CHECK(per_layer_lipschitz(s, 0) > l0);
  s = base;
  s.ln_epsilon *= 4.0;
  CHECK(per_layer_lipschitz(s, 0) == doctest::Approx(l0 / 2.0));
  s = base;
  s.d_k *= 4;
  CHECK(per_layer_lipschitz(s, 0) == doctest::Approx(l0 / 2.0));
  s = base;
  s.n_proj = 4;
  CHECK(per_layer_lipschitz(s, 0) > l0);
}

TEST_CASE("steps in ball follow the table") {
  const auto specs = reference_architectures();
  const double step = backsolve_step_norm(specs[0], 0.3, 11.6);
  CHECK(steps_in_ball(specs[0], step, 0.3) == doctest::Approx(11.6).epsilon(1e-12));
  const double expected[] = {11.6, 6.1, 3.5, 2.3};
  double prev = 1e300;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const double n = steps_in_ball(specs[i], step, 0.3);
    CHECK(n == doctest::Approx(expected[i]).epsilon(0.02));
    CHECK(n >= 2.0);
    CHECK(n < prev);
    prev = n;
    const LipschitzBudget b = allocate_budget(specs[i], 0.3);
    CHECK(b.per_layer_radius[0] ==
          doctest::Approx(0.3 / (specs[i].n_layers * per_layer_lipschitz(specs[i], 0))));
  }
  CHECK(allocate_budget(specs[0], 0.3).per_layer_radius[0] == doctest::Approx(5.8e-4).epsilon(0.01));
  CHECK(allocate_budget(specs[3], 0.3).per_layer_radius[0] == doctest::Approx(1.1e-4).epsilon(0.04));
}

TEST_CASE("compositional check boundary") {
  const ArchitectureSpec s = reference_architectures()[1];
  const std::vector<double> lt = tilde_lipschitz(s);
  const double m = 0.3;
  for (int k = 0; k < s.n_layers; ++k) {
    std::vector<double> d(static_cast<std::size_t>(s.n_layers), 0.0);
    d[static_cast<std::size_t>(k)] = m / lt[static_cast<std::size_t>(k)];
    const CompositionalResult r = compositional_check(s, d, m);
    CHECK(r.accept);
    CHECK(std::abs(r.slack) < 1e-15);
    d[static_cast<std::size_t>(k)] *= 1.01;
    CHECK_FALSE(compositional_check(s, d, m).accept);
  }
  const LipschitzBudget b = allocate_budget(s, m);
  const CompositionalResult eq = compositional_check(s, b.per_layer_radius, m);
  CHECK(eq.accept);
  CHECK(eq.total == doctest::Approx(m).epsilon(1e-13));
  CHECK(compositional_check(s, std::vector<double>(6, 0.0), m).slack == m);
  CHECK_THROWS_AS(compositional_check(s, std::vector<double>(5, 0.0), m), DimensionMismatch);
}

TEST_CASE("frozen tail products scale the budget") {
  ArchitectureSpec s = ArchitectureSpec::uniform("t", 3, 64, 32, 2.0);
  const double before = steps_in_ball(s, 1e-5, 0.3);
  s.frozen_tail_products = {4.0, 2.0, 1.0};
  CHECK(tilde_lipschitz(s)[0] == doctest::Approx(4.0 * per_layer_lipschitz(s, 0)));
  CHECK(steps_in_ball(s, 1e-5, 0.3) == doctest::Approx(before * 3.0 / 7.0));
  s.frozen_tail_products = {0.5, 1.0, 1.0};
  CHECK_THROWS_AS(s.validate(), DomainError);
}

TEST_CASE("executable block respects the per-layer bound") {
  for (double eps : {1.0, 1e-2, 1e-5}) {
    const PreLnAttentionBlock block(8, 2, eps, 11);
    const ConservatismReport r = conservatism_trial(block, 4, 1000, 5);
    CHECK(r.trials == 1000);
    CHECK(r.violations == 0);
    CHECK(r.max_ratio > 0.0);
    CHECK(r.max_ratio <= 1.0);
  }
}

TEST_CASE("block forward basics") {
  const PreLnAttentionBlock block(8, 2, 1.0, 3);
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(4, 8) * 0.1;
  const Eigen::MatrixXd ln = block.layer_norm(x);
  for (Eigen::Index i = 0; i < ln.rows(); ++i) CHECK(std::abs(ln.row(i).mean()) < 1e-14);
  CHECK(ln.norm() <= x.norm() + 1e-12);  // eps = 1 contracts small inputs
  const Eigen::MatrixXd zero_a = Eigen::MatrixXd::Zero(2, 8);
  const Eigen::MatrixXd zero_b = Eigen::MatrixXd::Zero(8, 2);
  CHECK((block.forward(x, zero_a, zero_b) - block.forward(x)).norm() == 0.0);
  CHECK_THROWS_AS(block.forward(Eigen::MatrixXd::Zero(4, 7)), DimensionMismatch);
  CHECK_THROWS_AS(PreLnAttentionBlock(8, 0, 1.0, 0), DomainError);
}
