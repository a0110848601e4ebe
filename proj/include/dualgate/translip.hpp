#pragma once

// Closed-form per-layer Lipschitz bounds for pre-LayerNorm transformers under
// LoRA perturbation, and the additive compositional ball check built on them.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace dualgate {

struct ArchitectureSpec {
  std::string name;
  int n_layers = 1;
  int d_model = 1;
  int d_k = 1;
  int n_proj = 1;
  int lora_rank = 8;
  std::vector<double> gamma_norm;  // ||gamma_k||_inf per layer
  double ln_epsilon = 1e-5;
  std::vector<double> wv_norm;  // max_p ||W_{v,p}|| per layer
  std::vector<double> frozen_tail_products;  // prod_{j>k} L_j^{full,frozen}, >= 1

  /// Throws DomainError on inconsistent sizes or nonpositive norms.
  void validate() const;

  /// Same gamma, ||W_v|| and unit frozen tail for every layer.
  static ArchitectureSpec uniform(std::string name, int n_layers, int d_model, int d_k,
                                  double wv_norm, int n_proj = 2, double gamma = 1.0,
                                  double ln_epsilon = 1e-5);
};

/// Toy (2L), Small (6L), GPT-2 (12L), Qwen-7B (28L) with gamma = 1,
/// epsilon = 1e-5 and two adapted projections per layer.
std::vector<ArchitectureSpec> reference_architectures();

/// (||gamma_k|| / sqrt(eps)) (||W_v|| / sqrt(d_k)) sqrt(2 n_proj).
double per_layer_lipschitz(const ArchitectureSpec& spec, int k);

/// L~_k = per_layer_lipschitz(k) * frozen_tail_products[k].
std::vector<double> tilde_lipschitz(const ArchitectureSpec& spec);

struct LipschitzBudget {
  std::vector<double> per_layer_tilde_L;
  double margin_m = 0.0;
  std::vector<double> per_layer_radius;  // equal share: m / (K L~_k)
};

LipschitzBudget allocate_budget(const ArchitectureSpec& spec, double margin_m);

struct CompositionalResult {
  bool accept = false;
  double total = 0.0;  // sum_k L~_k ||dtheta_k||
  double slack = 0.0;  // m - total
};

/// Accept iff sum_k L~_k ||dtheta_k|| <= m. The comparison allows a few ulps
/// so that a delta placed exactly on the boundary is accepted.
CompositionalResult compositional_check(const ArchitectureSpec& spec,
                                        const std::vector<double>& delta_norms, double margin_m);

/// m / (sum_k L~_k * per_step_norm): LoRA steps of equal per-layer norm that
/// fit in the ball.
double steps_in_ball(const ArchitectureSpec& spec, double per_step_norm, double margin_m);

/// Per-layer step norm for which steps_in_ball equals target_steps.
double backsolve_step_norm(const ArchitectureSpec& spec, double margin_m, double target_steps);

/// One pre-LN single-head attention sublayer y = x + softmax(Q K^T / sqrt(d_k)) V
/// with Q = LN(X)(W_q + B A), K = LN(X) W_k, V = LN(X) W_v, and LoRA factors
/// B (d_model x r), A (r x d_k). Rows of X are tokens.
class PreLnAttentionBlock {
 public:
  PreLnAttentionBlock(int d_model, int rank, double ln_epsilon, std::uint64_t seed);

  int d_model() const { return d_model_; }
  int rank() const { return rank_; }
  double ln_epsilon() const { return eps_; }

  Eigen::MatrixXd layer_norm(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, const Eigen::MatrixXd& d_a,
                          const Eigen::MatrixXd& d_b) const;
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;

  /// Spec for this block: gamma = 1, d_k = d_model, n_proj = 1, ||W_v|| spectral.
  ArchitectureSpec spec() const;

  /// ||W_k|| * ||LN(X)||_F^2 * max(||A||, ||B||), the data-dependent factor
  /// multiplying L_k * ||dtheta|| in the single-layer bound.
  double input_norm_factor(const Eigen::MatrixXd& x) const;

  const Eigen::MatrixXd& lora_a() const { return a_; }
  const Eigen::MatrixXd& lora_b() const { return b_; }

 private:
  int d_model_;
  int rank_;
  double eps_;
  Eigen::MatrixXd wq_, wk_, wv_, a_, b_;
};

struct ConservatismReport {
  int trials = 0;
  int violations = 0;
  double max_ratio = 0.0;  // measured change / bound
};

/// Random unit-ball inputs and LoRA perturbations with ||dB|| <= ||B|| / 2.
ConservatismReport conservatism_trial(const PreLnAttentionBlock& block, int tokens, int trials,
                                      std::uint64_t seed);

}  // namespace dualgate
