#include "dualgate/schedules.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "dualgate/errors.hpp"

namespace dualgate {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

void validate(const RiskSchedule& schedule) {
  std::visit(Overloaded{
                 [](const PowerLaw& s) {
                   if (!(s.c > 0.0) || !(s.p > 0.0)) {
                     throw DomainError("PowerLaw: c and p must be > 0");
                   }
                 },
                 [](const SlowLog& s) {
                   if (!(s.c > 0.0)) throw DomainError("SlowLog: c must be > 0");
                 },
                 [](const UniformBudget& s) {
                   if (!(s.budget > 0.0) || s.horizon < 1) {
                     throw DomainError("UniformBudget: need B > 0 and N >= 1");
                   }
                 },
                 [](const Explicit& s) {
                   if (s.deltas.empty()) throw DomainError("Explicit: schedule is empty");
                   for (const double d : s.deltas) {
                     if (!(d > 0.0 && d <= 1.0)) {
                       throw DomainError(fmt::format("Explicit: delta {} outside (0, 1]", d));
                     }
                   }
                 },
             },
             schedule);
}

std::string describe(const RiskSchedule& schedule) {
  return std::visit(
      Overloaded{
          [](const PowerLaw& s) { return fmt::format("power_law(c={},p={})", s.c, s.p); },
          [](const SlowLog& s) { return fmt::format("slow_log(c={})", s.c); },
          [](const UniformBudget& s) {
            return fmt::format("uniform_budget(B={},N={})", s.budget, s.horizon);
          },
          [](const Explicit& s) { return fmt::format("explicit(len={})", s.deltas.size()); },
      },
      schedule);
}

std::optional<std::int64_t> schedule_length(const RiskSchedule& schedule) {
  if (const auto* u = std::get_if<UniformBudget>(&schedule)) return u->horizon;
  if (const auto* e = std::get_if<Explicit>(&schedule)) {
    return static_cast<std::int64_t>(e->deltas.size());
  }
  return std::nullopt;
}

double delta_at(const RiskSchedule& schedule, std::int64_t n) {
  if (n < 1) throw DomainError(fmt::format("delta_at: n must be >= 1, got {}", n));
  if (auto len = schedule_length(schedule); len && n > *len) {
    throw DomainError(fmt::format("delta_at: n = {} past the schedule end {}", n, *len));
  }
  const double x = static_cast<double>(n);
  const double d = std::visit(
      Overloaded{
          [&](const PowerLaw& s) { return s.c * std::pow(x, -s.p); },
          [&](const SlowLog& s) {
            const double l = std::log1p(x);
            return s.c / (x * l * l);
          },
          [&](const UniformBudget& s) { return s.budget / static_cast<double>(s.horizon); },
          [&](const Explicit& s) { return s.deltas[static_cast<std::size_t>(n - 1)]; },
      },
      schedule);
  return std::min(1.0, d);
}

Summability classify_summability(const RiskSchedule& schedule, RenyiOrder order) {
  return std::visit(Overloaded{
                        [&](const PowerLaw& s) {
                          return Summability{s.p > 1.0, s.p * order.beta() > 1.0};
                        },
                        [](const SlowLog&) { return Summability{true, false}; },
                        [](const UniformBudget&) { return Summability{true, true}; },
                        [](const Explicit&) { return Summability{true, true}; },
                    },
                    schedule);
}

std::string to_string(GateKind kind) {
  return kind == GateKind::NPClassifier ? "NPClassifier" : "BallVerifier";
}

GateTrace simulate_gate_sequence(const DistributionPair& pair, const RiskSchedule& schedule,
                                 std::int64_t horizon, GateKind gate, double verifier_tpr) {
  validate(schedule);
  if (horizon < 1) throw DomainError("simulate_gate_sequence: horizon must be >= 1");
  if (auto len = schedule_length(schedule); len && horizon > *len) {
    throw DomainError("simulate_gate_sequence: horizon exceeds the schedule length");
  }
  if (gate == GateKind::BallVerifier && !(verifier_tpr >= 0.0 && verifier_tpr <= 1.0)) {
    throw DomainError("simulate_gate_sequence: verifier_tpr must lie in [0, 1]");
  }
  GateTrace trace;
  trace.gate_kind = gate;
  trace.steps.reserve(static_cast<std::size_t>(horizon));
  double last_delta = -1.0;
  double last_tpr = 0.0;
  for (std::int64_t n = 1; n <= horizon; ++n) {
    GateStep step{n, 0.0, verifier_tpr};
    if (gate == GateKind::NPClassifier) {
      step.delta = delta_at(schedule, n);
      if (step.delta != last_delta) {
        last_tpr = step.delta >= 1.0 ? 1.0 : np_tpr(pair, step.delta);
        last_delta = step.delta;
      }
      step.tpr = last_tpr;
    }
    trace.cumulative_risk += step.delta;
    trace.cumulative_utility += step.tpr;
    trace.steps.push_back(step);
  }
  return trace;
}

StarvationTrace starvation_simulation(int d_vc, double k, double n0, double c, double p,
                                      std::int64_t horizon) {
  if (d_vc < 1) throw DomainError("starvation_simulation: d_vc must be >= 1");
  if (!(k > 0.0)) throw DomainError("starvation_simulation: k must be > 0");
  if (!(n0 >= 0.0)) throw DomainError("starvation_simulation: n0 must be >= 0");
  if (!(c > 0.0) || !(p > 0.0)) throw DomainError("starvation_simulation: c, p must be > 0");
  if (horizon < 1) throw DomainError("starvation_simulation: horizon must be >= 1");
  StarvationTrace trace;
  trace.steps.reserve(static_cast<std::size_t>(horizon));
  for (std::int64_t n = 1; n <= horizon; ++n) {
    const double x = static_cast<double>(n);
    StarvationStep s;
    s.n = n;
    s.required_samples = std::ceil(d_vc * std::pow(x, 2.0 * p) / (c * c));
    s.available_samples = n0 + k * x;
    s.starved = s.required_samples > s.available_samples;
    const double target = c * std::pow(x, -p);
    const double floor = s.available_samples > 0.0 ? std::sqrt(d_vc / s.available_samples) : 1.0;
    s.achieved_delta = std::min(1.0, std::max(target, floor));
    if (s.starved) {
      ++trace.starved_steps;
      if (!trace.n_fail) trace.n_fail = n;
    }
    trace.delta_sum += s.achieved_delta;
    trace.steps.push_back(s);
  }
  return trace;
}

double starvation_exponent_fit(int d_vc, const std::vector<double>& ks, double n0, double c,
                               double p, std::int64_t horizon) {
  std::vector<double> lx;
  std::vector<double> ly;
  for (const double k : ks) {
    const StarvationTrace t = starvation_simulation(d_vc, k, n0, c, p, horizon);
    if (!t.n_fail) continue;
    lx.push_back(std::log(k));
    ly.push_back(std::log(static_cast<double>(*t.n_fail)));
  }
  if (lx.size() < 2) throw DomainError("starvation_exponent_fit: need two starving runs");
  const double m = static_cast<double>(lx.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sx += lx[i];
    sy += ly[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * ly[i];
  }
  const double denom = m * sxx - sx * sx;
  if (!(denom > 0.0)) throw DomainError("starvation_exponent_fit: degenerate k grid");
  return (m * sxy - sx * sy) / denom;
}

NonstationaryBound nonstationary_bound(double divergence_sup, RenyiOrder order,
                                       const RiskSchedule& schedule, std::int64_t horizon) {
  validate(schedule);
  if (!std::isfinite(divergence_sup) || divergence_sup < 0.0) {
    throw DomainError("nonstationary_bound: divergence_sup must be finite and >= 0");
  }
  if (horizon < 1) throw DomainError("nonstationary_bound: horizon must be >= 1");
  const double beta = order.beta();
  const double c_bar = std::exp((order.alpha() - 1.0) * divergence_sup);
  double sum_pow = 0.0;
  double sum = 0.0;
  for (std::int64_t n = 1; n <= horizon; ++n) {
    const double d = delta_at(schedule, n);
    sum_pow += std::pow(d, beta);
    sum += d;
  }
  NonstationaryBound out;
  out.direct_sum = c_bar * sum_pow;
  out.refined_sum = c_bar * std::pow(static_cast<double>(horizon), 1.0 - beta) * std::pow(sum, beta);
  out.value = std::min(out.direct_sum, out.refined_sum);
  out.series_converges = schedule_length(schedule).has_value() ||
                         (std::holds_alternative<PowerLaw>(schedule) &&
                          std::get<PowerLaw>(schedule).p * beta > 1.0);
  return out;
}

}  // namespace dualgate
