#pragma once

// Parameter-space ball verifier on a toy closed-loop navigation task: a
// point mass steered by a parametric policy toward a target while avoiding
// circular obstacles. A parameter vector is accepted iff it lies strictly
// inside a ball of radius m / L around a verified-safe anchor.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace dualgate {

using Vec = Eigen::VectorXd;
using Point = Eigen::Vector2d;

struct Obstacle {
  Point center = Point::Zero();
  double radius = 0.1;
};

struct Scenario {
  Point start = Point::Zero();
  Point target = Point::Zero();
};

/// Policy u = pi_theta(f) on the features f = ((target - p) / ell, p / ell).
/// hidden_units == 0 selects an affine layer (d = 10); otherwise a
/// one-hidden-layer tanh network (d = 7 H + 2).
struct ToyEnvironment {
  std::vector<Obstacle> obstacles;
  std::vector<Scenario> scenarios;
  int horizon_steps = 100;
  double dt = 0.1;
  int hidden_units = 0;
  double length_scale = 2.0;  // ell
  double max_speed = 1.5;
  double gain = 0.5;  // nominal feedback gain toward the target

  int controller_dim() const;
  /// Throws DomainError on an invalid layout.
  void validate() const;

  /// Four crossing scenarios on [0, 2]^2 with obstacles in the gaps between
  /// their straight-line paths.
  static ToyEnvironment standard(int hidden_units = 0);
};

using Trajectory = std::vector<Point>;

/// horizon_steps positions, one after each update. Throws DimensionMismatch.
Trajectory rollout(const ToyEnvironment& env, const Vec& theta, std::size_t scenario_index);

/// Min over scenarios, trajectory points and obstacles of
/// (distance to center - radius). Negative on collision.
double margin(const ToyEnvironment& env, const Vec& theta);

/// Anchor parameters that drive each scenario straight to its target.
/// Hidden units beyond the two steering units get random input weights
/// (seeded) and zero output weights.
Vec nominal_parameters(const ToyEnvironment& env, std::uint64_t seed = 0);

/// max over scenarios and steps of the Euclidean deviation between two
/// rollouts.
double trajectory_deviation(const ToyEnvironment& env, const Vec& a, const Vec& b);

struct LipschitzOptions {
  int n_probes = 32;
  std::vector<double> scales{1e-4, 1e-3, 1e-2};
  double safety_factor = 5.0;
  std::uint64_t seed = 0;
  unsigned workers = 0;
};

/// safety_factor * max over probes and scales of
/// ||rollout(theta0 + h u) - rollout(theta0)||_inf / h, u uniform on the
/// sphere. Probe i uses its own sub-seed, so a larger probe count only adds
/// directions.
double estimate_lipschitz(const ToyEnvironment& env, const Vec& theta0,
                          const LipschitzOptions& options);

enum class LipschitzProvenance { FiniteDifferenceEstimate, AnalyticBound };

struct BallCertificate {
  Vec theta0;
  double margin_m = 0.0;
  double lipschitz_L = 0.0;
  double radius_r = 0.0;
  LipschitzProvenance provenance = LipschitzProvenance::FiniteDifferenceEstimate;
  double safety_factor = 1.0;
  bool capped = false;
};

/// r = m / L, optionally capped at cap_fraction * ||theta0||. Throws
/// NonpositiveMargin when m <= 0 and DomainError when L <= 0.
BallCertificate make_certificate(const Vec& theta0, double margin_m, double lipschitz_L,
                                 LipschitzProvenance provenance, double safety_factor = 1.0,
                                 std::optional<double> cap_fraction = std::nullopt);
BallCertificate make_certificate(const ToyEnvironment& env, const Vec& theta0,
                                 double lipschitz_L, LipschitzProvenance provenance,
                                 double safety_factor = 1.0,
                                 std::optional<double> cap_fraction = std::nullopt);

/// Accept iff ||theta - theta0|| < r.
bool verify(const BallCertificate& cert, const Vec& theta);

/// P(chi^2_d < r^2 / sigma^2).
double coverage_tpr(int d, double r, double sigma);

/// sigma with coverage_tpr(d, r, sigma) = target_tpr.
double sigma_star(int d, double r, double target_tpr);

struct SoundnessReport {
  std::int64_t samples_inside = 0;
  std::int64_t unsafe_inside = 0;
  double min_inside_margin = 0.0;
  double max_inside_norm = 0.0;
  std::int64_t samples_outside = 0;
  std::int64_t unsafe_outside = 0;

  double false_accept_rate() const {
    return samples_inside == 0 ? 0.0 : static_cast<double>(unsafe_inside) / samples_inside;
  }
};

/// Inside samples uniform in the open ball, outside samples at norms uniform
/// in (r, 3r]; safety is margin > 0. Sample i uses sub-seed i.
SoundnessReport soundness_trial(const ToyEnvironment& env, const BallCertificate& cert,
                                std::int64_t n_inside, std::int64_t n_outside,
                                std::uint64_t seed, unsigned workers = 0);

std::string to_json(const ToyEnvironment& env);
std::string to_json(const BallCertificate& cert);
std::string to_json(const SoundnessReport& report);

}  // namespace dualgate
