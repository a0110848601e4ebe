#pragma once

// Analytic ceilings on classifier-gate utility: the per-step Holder bound,
// the counting bound, the mutual-information bound, and the finite-horizon
// ceilings, together with the diagnostics used to judge their tightness.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dualgate/distpair.hpp"

namespace dualgate {

struct HolderConstants {
  double alpha = 0.0;
  double beta = 0.0;     // (alpha - 1) / alpha
  double c_alpha = 1.0;  // exp(beta * D_alpha)
};

enum class BoundName {
  HolderPerStep,
  Counting,
  MIFiniteHorizon,
  ExactCeiling,
  HolderJensenCeiling,
  AsymptoticCeiling,
};

enum class BoundMethod { ClosedForm, Quadrature, MonteCarlo };

std::string to_string(BoundName name);
std::string to_string(BoundMethod method);

struct BoundReport {
  BoundName bound_name = BoundName::HolderPerStep;
  double value = 0.0;
  std::map<std::string, double> inputs;
  BoundMethod method = BoundMethod::ClosedForm;
  double error_estimate = 0.0;
  std::optional<std::uint64_t> seed;  // set for MonteCarlo entries
};

/// One JSON object per line, keys in a fixed order.
std::string to_json_line(const BoundReport& report);

HolderConstants holder_constants(const DistributionPair& pair, RenyiOrder order);

/// alpha* = 1 + 2 / Delta_s^2.
RenyiOrder optimal_alpha(double delta_s);

/// C_alpha * delta^beta, clipped at 1.
double holder_per_step(const HolderConstants& constants, double delta);
double holder_per_step(const DistributionPair& pair, RenyiOrder order, double delta);

/// c^{1/p} * E_{P+}[U(X)^{-1/p}] by adaptive quadrature over the sufficient
/// statistic. The error estimate includes an analytic bound on the
/// truncated Gaussian tail.
BoundReport counting_bound(const DistributionPair& pair, double c, double p);

/// Monte Carlo estimate of the same quantity. Gaussian pairs use importance
/// sampling from N(Delta_s p / (p - 1), p / (p - 1)), which keeps the
/// estimator variance finite for every p > 1.
BoundReport counting_bound_monte_carlo(const DistributionPair& pair, double c, double p,
                                       std::int64_t samples, std::uint64_t seed,
                                       unsigned workers = 0);

/// Sum_n C_alpha (c n^{-p})^beta = C_alpha c^beta zeta(p beta); infinite when
/// p beta <= 1.
double holder_series_bound(const DistributionPair& pair, RenyiOrder order, double c, double p);

enum class TailMethod { None, Holder, IntegralComparison };

struct DirectSumInterval {
  double partial = 0.0;  // sum over n <= horizon
  double tail = 0.0;     // rigorous bound on the n > horizon remainder
  TailMethod tail_method = TailMethod::None;
  double lower() const { return partial; }
  double upper() const { return partial + tail; }
};

/// Sum_n TPR_NP(min(1, c n^{-p})) as [partial, partial + tail].
DirectSumInterval direct_np_sum(const DistributionPair& pair, double c, double p,
                                std::int64_t horizon);

/// Sum delta_n + sqrt(2 N I_0).
double mi_finite_horizon(double delta_sum, std::int64_t horizon, double mi_budget);

/// Mutual information (nats) between the safety label and the gate decision
/// for a binary channel with P(accept | unsafe) = delta,
/// P(accept | safe) = tpr and P(safe) = prior_safe.
double channel_mi(double delta, double tpr, double prior_safe);

/// U*(N, B) = N * TPR_NP(B / N). Throws BudgetExceedsHorizon when B/N >= 1.
double exact_ceiling(const DistributionPair& pair, std::int64_t horizon, double budget);

/// C_alpha * N^{1-beta} * B^beta.
double holder_jensen_ceiling(const DistributionPair& pair, std::int64_t horizon, double budget,
                             RenyiOrder order);

/// Leading-order Mills asymptotic of U*(N, B) for Gaussian pairs:
/// B * z / (z - Delta_s) * exp(Delta_s z - Delta_s^2 / 2) with
/// z = sqrt(2 ln(N/B) - ln(4 pi ln(N/B))). Requires N / B >= 1e3.
double ceiling_asymptotic(double delta_s, double horizon, double budget);

/// log TPR_NP(delta) / log delta for a unit Gaussian pair, evaluated in log
/// space so delta may be far below 1e-300.
double log_exponent_diagnostic(double delta_s, double delta);
double log_exponent_diagnostic_from_log(double delta_s, double log_delta);

/// Log-spaced grid of `points` levels from 1e-12 to 1e-1.
std::vector<double> diagnostic_delta_grid(int points = 100);

}  // namespace dualgate
