#pragma once

// Risk schedules, summability classification, sequential gate simulation,
// and the sample-starvation model.

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "dualgate/distpair.hpp"

namespace dualgate {

/// delta_n = c / n^p.
struct PowerLaw {
  double c = 1.0;
  double p = 2.0;
};

/// delta_n = c / (n ln^2(n + 1)); the shift keeps n = 1 finite.
struct SlowLog {
  double c = 1.0;
};

/// delta_n = B / N for n <= N.
struct UniformBudget {
  double budget = 1.0;
  std::int64_t horizon = 1;
};

struct Explicit {
  std::vector<double> deltas;
};

using RiskSchedule = std::variant<PowerLaw, SlowLog, UniformBudget, Explicit>;

/// Throws DomainError when the schedule parameters are invalid.
void validate(const RiskSchedule& schedule);
std::string describe(const RiskSchedule& schedule);

/// Per-step budget, clipped to (0, 1]. Throws DomainError for n < 1 or n past
/// the end of a finite schedule.
double delta_at(const RiskSchedule& schedule, std::int64_t n);

/// Number of steps a finite schedule defines; empty for infinite ones.
std::optional<std::int64_t> schedule_length(const RiskSchedule& schedule);

struct Summability {
  bool risk_summable = false;
  bool holder_argument_applies = false;
};

Summability classify_summability(const RiskSchedule& schedule, RenyiOrder order);

enum class GateKind { NPClassifier, BallVerifier };

std::string to_string(GateKind kind);

struct GateStep {
  std::int64_t n = 0;
  double delta = 0.0;
  double tpr = 0.0;
};

struct GateTrace {
  std::vector<GateStep> steps;
  double cumulative_risk = 0.0;
  double cumulative_utility = 0.0;
  GateKind gate_kind = GateKind::NPClassifier;
};

/// NPClassifier rows carry (delta_n, TPR_NP(delta_n)); BallVerifier rows carry
/// (0, verifier_tpr). Cumulative fields are the column sums accumulated in
/// row order.
GateTrace simulate_gate_sequence(const DistributionPair& pair, const RiskSchedule& schedule,
                                 std::int64_t horizon, GateKind gate,
                                 double verifier_tpr = 0.0);

struct StarvationStep {
  std::int64_t n = 0;
  double required_samples = 0.0;  // may exceed any integer type
  double available_samples = 0.0;
  double achieved_delta = 0.0;
  bool starved = false;
};

struct StarvationTrace {
  std::vector<StarvationStep> steps;
  std::optional<std::int64_t> n_fail;  // first starved step
  std::int64_t starved_steps = 0;
  double delta_sum = 0.0;
};

/// required(n) = ceil(d_vc n^{2p} / c^2), available(n) = n0 + k n,
/// achieved(n) = min(1, max(c / n^p, sqrt(d_vc / available(n)))).
StarvationTrace starvation_simulation(int d_vc, double k, double n0, double c, double p,
                                      std::int64_t horizon);

/// Least-squares slope of log n_fail against log k. Values of k whose run
/// never starves are skipped; throws DomainError when fewer than two remain.
double starvation_exponent_fit(int d_vc, const std::vector<double>& ks, double n0, double c,
                               double p, std::int64_t horizon);

struct NonstationaryBound {
  double value = 0.0;
  double direct_sum = 0.0;     // C * sum delta_n^beta
  double refined_sum = 0.0;    // C * N^{1-beta} (sum delta_n)^beta
  bool series_converges = false;  // whether sum delta_n^beta stays finite as N grows
};

/// C_bar * min(sum delta_n^beta, N^{1-beta} (sum delta_n)^beta) with
/// C_bar = exp((alpha - 1) divergence_sup).
NonstationaryBound nonstationary_bound(double divergence_sup, RenyiOrder order,
                                       const RiskSchedule& schedule, std::int64_t horizon);

}  // namespace dualgate
