#include "dualgate/ballverifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>
#include <json.hpp>

#include "dualgate/errors.hpp"
#include "dualgate/montecarlo.hpp"
#include "dualgate/specfun.hpp"

namespace dualgate {
namespace {

constexpr int kFeatures = 4;
constexpr int kOutputs = 2;

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void check_dim(const ToyEnvironment& env, const Vec& theta) {
  if (theta.size() != env.controller_dim()) {
    throw DimensionMismatch(fmt::format("theta has dimension {}, controller expects {}",
                                        theta.size(), env.controller_dim()));
  }
}

Point policy(const ToyEnvironment& env, const Vec& theta, const Point& p, const Point& target,
             Eigen::VectorXd& hidden) {
  Eigen::Matrix<double, kFeatures, 1> f;
  f << (target - p) / env.length_scale, p / env.length_scale;
  const double* data = theta.data();
  if (env.hidden_units == 0) {
    Eigen::Map<const Eigen::Matrix<double, kOutputs, kFeatures, Eigen::RowMajor>> w(data);
    Eigen::Map<const Point> b(data + kOutputs * kFeatures);
    return w * f + b;
  }
  const int h = env.hidden_units;
  Eigen::Map<const RowMajor> w1(data, h, kFeatures);
  Eigen::Map<const Eigen::VectorXd> b1(data + h * kFeatures, h);
  Eigen::Map<const RowMajor> w2(data + h * (kFeatures + 1), kOutputs, h);
  Eigen::Map<const Point> b2(data + h * (kFeatures + 1) + kOutputs * h);
  hidden.noalias() = w1 * f;
  hidden = (hidden + b1).array().tanh().matrix();
  return w2 * hidden + b2;
}

// Uniform direction on the unit sphere in R^d.
Vec random_direction(Rng& rng, Eigen::Index d) {
  std::normal_distribution<double> normal;
  Vec u(d);
  do {
    for (Eigen::Index i = 0; i < d; ++i) u[i] = normal(rng);
  } while (u.norm() == 0.0);
  return u / u.norm();
}

}  // namespace

int ToyEnvironment::controller_dim() const {
  if (hidden_units == 0) return kOutputs * (kFeatures + 1);
  return hidden_units * (kFeatures + 1) + kOutputs * hidden_units + kOutputs;
}

void ToyEnvironment::validate() const {
  if (scenarios.empty()) throw DomainError("ToyEnvironment: scenarios must be nonempty");
  if (horizon_steps < 1) throw DomainError("ToyEnvironment: horizon_steps must be >= 1");
  if (!(dt > 0.0) || !(length_scale > 0.0) || !(max_speed > 0.0)) {
    throw DomainError("ToyEnvironment: dt, length_scale and max_speed must be > 0");
  }
  if (hidden_units < 0 || hidden_units == 1) {
    throw DomainError("ToyEnvironment: hidden_units must be 0 (affine) or >= 2");
  }
  for (const auto& o : obstacles) {
    if (!(o.radius > 0.0)) throw DomainError("ToyEnvironment: obstacle radius must be > 0");
    for (const auto& s : scenarios) {
      if ((s.start - o.center).norm() <= o.radius || (s.target - o.center).norm() <= o.radius) {
        throw DomainError("ToyEnvironment: scenario endpoint inside an obstacle");
      }
    }
  }
}

ToyEnvironment ToyEnvironment::standard(int hidden_units) {
  ToyEnvironment env;
  env.hidden_units = hidden_units;
  env.scenarios = {
      {{0.0, 0.0}, {2.0, 2.0}},
      {{0.0, 2.0}, {2.0, 0.0}},
      {{0.0, 1.0}, {2.0, 1.0}},
      {{1.0, 0.0}, {1.0, 2.0}},
  };
  const Point center(1.0, 1.0);
  for (int k = 0; k < 4; ++k) {
    const double a = (22.5 + 90.0 * k) * kPi / 180.0;
    env.obstacles.push_back({center + 0.8 * Point(std::cos(a), std::sin(a)), 0.15});
  }
  env.validate();
  return env;
}

Trajectory rollout(const ToyEnvironment& env, const Vec& theta, std::size_t scenario_index) {
  check_dim(env, theta);
  if (scenario_index >= env.scenarios.size()) {
    throw DomainError(fmt::format("rollout: scenario {} out of range", scenario_index));
  }
  const Scenario& s = env.scenarios[scenario_index];
  Trajectory traj;
  traj.reserve(static_cast<std::size_t>(env.horizon_steps));
  Eigen::VectorXd hidden(std::max(env.hidden_units, 1));
  Point p = s.start;
  for (int k = 0; k < env.horizon_steps; ++k) {
    Point u = policy(env, theta, p, s.target, hidden);
    const double speed = u.norm();
    if (speed > env.max_speed) u *= env.max_speed / speed;
    p += env.dt * u;
    traj.push_back(p);
  }
  return traj;
}

double margin(const ToyEnvironment& env, const Vec& theta) {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < env.scenarios.size(); ++i) {
    for (const Point& p : rollout(env, theta, i)) {
      for (const auto& o : env.obstacles) m = std::min(m, (p - o.center).norm() - o.radius);
    }
  }
  return m;
}

Vec nominal_parameters(const ToyEnvironment& env, std::uint64_t seed) {
  Vec theta = Vec::Zero(env.controller_dim());
  const double g = env.gain * env.length_scale;
  if (env.hidden_units == 0) {
    theta[0] = g;              // W(0, 0): x-offset to target
    theta[kFeatures + 1] = g;  // W(1, 1): y-offset to target
    return theta;
  }
  const int h = env.hidden_units;
  double* w1 = theta.data();
  double* b1 = w1 + h * kFeatures;
  double* w2 = b1 + h;
  // Units 0 and 1 steer: u_j = g tanh(offset_j / ell).
  w1[0 * kFeatures + 0] = 1.0;
  w1[1 * kFeatures + 1] = 1.0;
  w2[0 * h + 0] = g;
  w2[1 * h + 1] = g;
  Rng rng(derive_seed(seed, 0));
  std::normal_distribution<double> normal;
  for (int j = 2; j < h; ++j) {
    for (int i = 0; i < kFeatures; ++i) w1[j * kFeatures + i] = normal(rng);
    b1[j] = 0.5 * normal(rng);
  }
  return theta;
}

double trajectory_deviation(const ToyEnvironment& env, const Vec& a, const Vec& b) {
  double dev = 0.0;
  for (std::size_t i = 0; i < env.scenarios.size(); ++i) {
    const Trajectory ta = rollout(env, a, i);
    const Trajectory tb = rollout(env, b, i);
    for (std::size_t k = 0; k < ta.size(); ++k) dev = std::max(dev, (ta[k] - tb[k]).norm());
  }
  return dev;
}

double estimate_lipschitz(const ToyEnvironment& env, const Vec& theta0,
                          const LipschitzOptions& options) {
  check_dim(env, theta0);
  if (options.n_probes < 1) throw DomainError("estimate_lipschitz: n_probes must be >= 1");
  if (options.scales.empty()) throw DomainError("estimate_lipschitz: scales must be nonempty");
  for (const double h : options.scales) {
    if (!(h > 0.0)) throw DomainError("estimate_lipschitz: scales must be > 0");
  }
  if (!(options.safety_factor >= 1.0)) {
    throw DomainError("estimate_lipschitz: safety_factor must be >= 1");
  }
  std::vector<Trajectory> base;
  for (std::size_t i = 0; i < env.scenarios.size(); ++i) base.push_back(rollout(env, theta0, i));
  std::vector<double> best(static_cast<std::size_t>(options.n_probes), 0.0);
  parallel_blocks(options.n_probes, options.workers, [&](std::int64_t probe) {
    Rng rng(derive_seed(options.seed, static_cast<std::uint64_t>(probe)));
    const Vec u = random_direction(rng, theta0.size());
    double ratio = 0.0;
    for (const double h : options.scales) {
      const Vec theta = theta0 + h * u;
      double dev = 0.0;
      for (std::size_t i = 0; i < env.scenarios.size(); ++i) {
        const Trajectory t = rollout(env, theta, i);
        for (std::size_t k = 0; k < t.size(); ++k) dev = std::max(dev, (t[k] - base[i][k]).norm());
      }
      ratio = std::max(ratio, dev / h);
    }
    best[static_cast<std::size_t>(probe)] = ratio;
  });
  return options.safety_factor * *std::max_element(best.begin(), best.end());
}

BallCertificate make_certificate(const Vec& theta0, double margin_m, double lipschitz_L,
                                 LipschitzProvenance provenance, double safety_factor,
                                 std::optional<double> cap_fraction) {
  if (!(margin_m > 0.0)) {
    throw NonpositiveMargin(fmt::format("anchor margin {} is not positive", margin_m));
  }
  if (!(lipschitz_L > 0.0)) throw DomainError("make_certificate: L must be > 0");
  BallCertificate cert;
  cert.theta0 = theta0;
  cert.margin_m = margin_m;
  cert.lipschitz_L = lipschitz_L;
  cert.radius_r = margin_m / lipschitz_L;
  cert.provenance = provenance;
  cert.safety_factor = safety_factor;
  if (cap_fraction) {
    const double cap = *cap_fraction * theta0.norm();
    if (cap < cert.radius_r) {
      cert.radius_r = cap;
      cert.capped = true;
    }
  }
  return cert;
}

BallCertificate make_certificate(const ToyEnvironment& env, const Vec& theta0,
                                 double lipschitz_L, LipschitzProvenance provenance,
                                 double safety_factor, std::optional<double> cap_fraction) {
  return make_certificate(theta0, margin(env, theta0), lipschitz_L, provenance, safety_factor,
                          cap_fraction);
}

bool verify(const BallCertificate& cert, const Vec& theta) {
  if (theta.size() != cert.theta0.size()) {
    throw DimensionMismatch(fmt::format("theta has dimension {}, certificate has {}",
                                        theta.size(), cert.theta0.size()));
  }
  return (theta - cert.theta0).norm() < cert.radius_r;
}

double coverage_tpr(int d, double r, double sigma) {
  if (d < 1) throw DomainError("coverage_tpr: d must be >= 1");
  if (!(sigma > 0.0)) throw DomainError("coverage_tpr: sigma must be > 0");
  if (!(r >= 0.0)) throw DomainError("coverage_tpr: r must be >= 0");
  return regularized_lower_gamma(0.5 * d, r * r / (2.0 * sigma * sigma));
}

double sigma_star(int d, double r, double target_tpr) {
  if (d < 1) throw DomainError("sigma_star: d must be >= 1");
  if (!(r > 0.0)) throw DomainError("sigma_star: r must be > 0");
  if (!(target_tpr > 0.0 && target_tpr < 1.0)) {
    throw DomainError("sigma_star: target_tpr must lie in (0, 1)");
  }
  // Solve P(d/2, x) = target for x = r^2 / (2 sigma^2), increasing in x.
  const double s = 0.5 * d;
  double lo = 0.0;
  double hi = std::max(1.0, s);
  while (regularized_lower_gamma(s, hi) < target_tpr) {
    lo = hi;
    hi *= 2.0;
  }
  for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (regularized_lower_gamma(s, mid) < target_tpr) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return r / std::sqrt(2.0 * 0.5 * (lo + hi));
}

SoundnessReport soundness_trial(const ToyEnvironment& env, const BallCertificate& cert,
                                std::int64_t n_inside, std::int64_t n_outside,
                                std::uint64_t seed, unsigned workers) {
  check_dim(env, cert.theta0);
  const auto d = cert.theta0.size();
  const double r = cert.radius_r;
  struct Sample {
    double margin = 0.0;
    double norm = 0.0;
  };
  const std::int64_t total = n_inside + n_outside;
  std::vector<Sample> out(static_cast<std::size_t>(total));
  parallel_blocks(total, workers, [&](std::int64_t i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    const Vec u = random_direction(rng, d);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double norm;
    if (i < n_inside) {
      // Radius r U^{1/d}; U in [0, 1) keeps the sample strictly inside.
      norm = r * std::pow(unif(rng), 1.0 / static_cast<double>(d));
    } else {
      // (r, 3r]: 3r - 2r U with U in [0, 1).
      norm = 3.0 * r - 2.0 * r * unif(rng);
    }
    const Vec theta = cert.theta0 + norm * u;
    out[static_cast<std::size_t>(i)] = {margin(env, theta), norm};
  });
  SoundnessReport rep;
  rep.samples_inside = n_inside;
  rep.samples_outside = n_outside;
  rep.min_inside_margin = std::numeric_limits<double>::infinity();
  for (std::int64_t i = 0; i < total; ++i) {
    const Sample& s = out[static_cast<std::size_t>(i)];
    const bool unsafe = !(s.margin > 0.0);
    if (i < n_inside) {
      rep.unsafe_inside += unsafe;
      rep.min_inside_margin = std::min(rep.min_inside_margin, s.margin);
      rep.max_inside_norm = std::max(rep.max_inside_norm, s.norm);
    } else {
      rep.unsafe_outside += unsafe;
    }
  }
  if (n_inside == 0) rep.min_inside_margin = 0.0;
  return rep;
}

std::string to_json(const ToyEnvironment& env) {
  nlohmann::ordered_json j;
  j["obstacles"] = nlohmann::json::array();
  for (const auto& o : env.obstacles) {
    j["obstacles"].push_back({{"center", {o.center.x(), o.center.y()}}, {"radius", o.radius}});
  }
  j["scenarios"] = nlohmann::json::array();
  for (const auto& s : env.scenarios) {
    j["scenarios"].push_back(
        {{"start", {s.start.x(), s.start.y()}}, {"target", {s.target.x(), s.target.y()}}});
  }
  j["horizon_steps"] = env.horizon_steps;
  j["dt"] = env.dt;
  j["hidden_units"] = env.hidden_units;
  j["controller_dim"] = env.controller_dim();
  j["length_scale"] = env.length_scale;
  j["max_speed"] = env.max_speed;
  j["gain"] = env.gain;
  return j.dump();
}

std::string to_json(const BallCertificate& cert) {
  nlohmann::ordered_json j;
  j["dimension"] = cert.theta0.size();
  j["theta0_norm"] = cert.theta0.norm();
  j["margin_m"] = cert.margin_m;
  j["lipschitz_L"] = cert.lipschitz_L;
  j["radius_r"] = cert.radius_r;
  j["l_provenance"] = cert.provenance == LipschitzProvenance::AnalyticBound
                          ? "AnalyticBound"
                          : fmt::format("FiniteDifferenceEstimate({})", cert.safety_factor);
  j["capped"] = cert.capped;
  j["theta0"] = std::vector<double>(cert.theta0.data(), cert.theta0.data() + cert.theta0.size());
  return j.dump();
}

std::string to_json(const SoundnessReport& report) {
  nlohmann::ordered_json j;
  j["samples_inside"] = report.samples_inside;
  j["unsafe_inside"] = report.unsafe_inside;
  j["false_accept_rate"] = report.false_accept_rate();
  j["min_inside_margin"] = report.min_inside_margin;
  j["max_inside_norm"] = report.max_inside_norm;
  j["samples_outside"] = report.samples_outside;
  j["unsafe_outside"] = report.unsafe_outside;
  return j.dump();
}

}  // namespace dualgate
