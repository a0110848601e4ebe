#include "dualgate/translip.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/SVD>
#include <fmt/format.h>

#include "dualgate/errors.hpp"
#include "dualgate/montecarlo.hpp"

namespace dualgate {
namespace {

double spectral_norm(const Eigen::MatrixXd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
}

Eigen::MatrixXd gaussian_matrix(Rng& rng, int rows, int cols, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = n(rng);
  return m;
}

void softmax_rows(Eigen::MatrixXd& s) {
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const double mx = s.row(i).maxCoeff();
    s.row(i) = (s.row(i).array() - mx).exp().matrix();
    s.row(i) /= s.row(i).sum();
  }
}

}  // namespace

void ArchitectureSpec::validate() const {
  const auto k = static_cast<std::size_t>(n_layers);
  if (n_layers < 1 || d_model < 1 || d_k < 1 || n_proj < 1 || lora_rank < 1) {
    throw DomainError(fmt::format("{}: sizes must be positive", name));
  }
  if (!(ln_epsilon > 0.0)) throw DomainError(fmt::format("{}: ln_epsilon must be > 0", name));
  if (gamma_norm.size() != k || wv_norm.size() != k || frozen_tail_products.size() != k) {
    throw DomainError(fmt::format("{}: per-layer lists must have {} entries", name, n_layers));
  }
  for (std::size_t i = 0; i < k; ++i) {
    if (!(gamma_norm[i] > 0.0) || !(wv_norm[i] > 0.0)) {
      throw DomainError(fmt::format("{}: norms must be > 0", name));
    }
    if (!(frozen_tail_products[i] >= 1.0)) {
      throw DomainError(fmt::format("{}: frozen tail products must be >= 1", name));
    }
  }
}

ArchitectureSpec ArchitectureSpec::uniform(std::string name, int n_layers, int d_model, int d_k,
                                           double wv_norm, int n_proj, double gamma,
                                           double ln_epsilon) {
  ArchitectureSpec s;
  s.name = std::move(name);
  s.n_layers = n_layers;
  s.d_model = d_model;
  s.d_k = d_k;
  s.n_proj = n_proj;
  s.ln_epsilon = ln_epsilon;
  const auto k = static_cast<std::size_t>(std::max(n_layers, 0));
  s.gamma_norm.assign(k, gamma);
  s.wv_norm.assign(k, wv_norm);
  s.frozen_tail_products.assign(k, 1.0);
  s.validate();
  return s;
}

std::vector<ArchitectureSpec> reference_architectures() {
  return {
      ArchitectureSpec::uniform("Toy (2L)", 2, 64, 32, 2.32),
      ArchitectureSpec::uniform("Small (6L)", 6, 256, 64, 2.09),
      ArchitectureSpec::uniform("GPT-2 (12L)", 12, 768, 64, 1.80),
      ArchitectureSpec::uniform("Qwen-7B (28L)", 28, 3584, 128, 1.68),
  };
}

double per_layer_lipschitz(const ArchitectureSpec& spec, int k) {
  if (k < 0 || k >= spec.n_layers) {
    throw DomainError(fmt::format("layer index {} out of range for {} layers", k, spec.n_layers));
  }
  const auto i = static_cast<std::size_t>(k);
  return spec.gamma_norm.at(i) / std::sqrt(spec.ln_epsilon) * spec.wv_norm.at(i) /
         std::sqrt(static_cast<double>(spec.d_k)) * std::sqrt(2.0 * spec.n_proj);
}

std::vector<double> tilde_lipschitz(const ArchitectureSpec& spec) {
  spec.validate();
  std::vector<double> out(static_cast<std::size_t>(spec.n_layers));
  for (int k = 0; k < spec.n_layers; ++k) {
    out[static_cast<std::size_t>(k)] =
        per_layer_lipschitz(spec, k) * spec.frozen_tail_products[static_cast<std::size_t>(k)];
  }
  return out;
}

LipschitzBudget allocate_budget(const ArchitectureSpec& spec, double margin_m) {
  if (!(margin_m > 0.0)) throw NonpositiveMargin("allocate_budget: margin must be > 0");
  LipschitzBudget b;
  b.per_layer_tilde_L = tilde_lipschitz(spec);
  b.margin_m = margin_m;
  const double k = static_cast<double>(spec.n_layers);
  for (const double l : b.per_layer_tilde_L) b.per_layer_radius.push_back(margin_m / (k * l));
  return b;
}

CompositionalResult compositional_check(const ArchitectureSpec& spec,
                                        const std::vector<double>& delta_norms,
                                        double margin_m) {
  if (delta_norms.size() != static_cast<std::size_t>(spec.n_layers)) {
    throw DimensionMismatch(fmt::format("compositional_check: {} deltas for {} layers",
                                        delta_norms.size(), spec.n_layers));
  }
  const std::vector<double> lt = tilde_lipschitz(spec);
  CompositionalResult r;
  for (std::size_t k = 0; k < lt.size(); ++k) {
    if (!(delta_norms[k] >= 0.0)) throw DomainError("compositional_check: norms must be >= 0");
    r.total += lt[k] * delta_norms[k];
  }
  r.slack = margin_m - r.total;
  const double tol = 4.0 * std::numeric_limits<double>::epsilon() * static_cast<double>(lt.size());
  r.accept = r.total <= margin_m * (1.0 + tol);
  return r;
}

double steps_in_ball(const ArchitectureSpec& spec, double per_step_norm, double margin_m) {
  if (!(per_step_norm > 0.0)) throw DomainError("steps_in_ball: per_step_norm must be > 0");
  const std::vector<double> lt = tilde_lipschitz(spec);
  return margin_m / (std::accumulate(lt.begin(), lt.end(), 0.0) * per_step_norm);
}

double backsolve_step_norm(const ArchitectureSpec& spec, double margin_m, double target_steps) {
  if (!(target_steps > 0.0)) throw DomainError("backsolve_step_norm: target must be > 0");
  const std::vector<double> lt = tilde_lipschitz(spec);
  return margin_m / (std::accumulate(lt.begin(), lt.end(), 0.0) * target_steps);
}

PreLnAttentionBlock::PreLnAttentionBlock(int d_model, int rank, double ln_epsilon,
                                         std::uint64_t seed)
    : d_model_(d_model), rank_(rank), eps_(ln_epsilon) {
  if (d_model < 2 || rank < 1 || !(ln_epsilon > 0.0)) {
    throw DomainError("PreLnAttentionBlock: need d_model >= 2, rank >= 1, eps > 0");
  }
  Rng rng(derive_seed(seed, 0));
  const double s = 1.0 / std::sqrt(static_cast<double>(d_model));
  wq_ = gaussian_matrix(rng, d_model, d_model, s);
  wk_ = gaussian_matrix(rng, d_model, d_model, s);
  wv_ = gaussian_matrix(rng, d_model, d_model, s);
  b_ = gaussian_matrix(rng, d_model, rank, s);
  a_ = gaussian_matrix(rng, rank, d_model, s);
}

Eigen::MatrixXd PreLnAttentionBlock::layer_norm(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd y(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double mu = x.row(i).mean();
    const double var = (x.row(i).array() - mu).square().mean();
    y.row(i) = (x.row(i).array() - mu) / std::sqrt(var + eps_);
  }
  return y;
}

Eigen::MatrixXd PreLnAttentionBlock::forward(const Eigen::MatrixXd& x, const Eigen::MatrixXd& d_a,
                                             const Eigen::MatrixXd& d_b) const {
  if (x.cols() != d_model_) throw DimensionMismatch("PreLnAttentionBlock: bad input width");
  const Eigen::MatrixXd ln = layer_norm(x);
  const Eigen::MatrixXd wq = wq_ + (b_ + d_b) * (a_ + d_a);
  const Eigen::MatrixXd q = ln * wq;
  const Eigen::MatrixXd k = ln * wk_;
  const Eigen::MatrixXd v = ln * wv_;
  Eigen::MatrixXd scores = q * k.transpose() / std::sqrt(static_cast<double>(d_model_));
  softmax_rows(scores);
  return x + scores * v;
}

Eigen::MatrixXd PreLnAttentionBlock::forward(const Eigen::MatrixXd& x) const {
  return forward(x, Eigen::MatrixXd::Zero(rank_, d_model_),
                 Eigen::MatrixXd::Zero(d_model_, rank_));
}

ArchitectureSpec PreLnAttentionBlock::spec() const {
  return ArchitectureSpec::uniform("pre-LN block", 1, d_model_, d_model_, spectral_norm(wv_), 1,
                                   1.0, eps_);
}

double PreLnAttentionBlock::input_norm_factor(const Eigen::MatrixXd& x) const {
  const double ln = layer_norm(x).norm();
  return spectral_norm(wk_) * ln * ln * std::max(spectral_norm(a_), spectral_norm(b_));
}

ConservatismReport conservatism_trial(const PreLnAttentionBlock& block, int tokens, int trials,
                                      std::uint64_t seed) {
  const double lk = per_layer_lipschitz(block.spec(), 0);
  const double b_norm = spectral_norm(block.lora_b());
  ConservatismReport rep;
  rep.trials = trials;
  for (int t = 0; t < trials; ++t) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    // Input uniform in direction, Frobenius norm <= 1.
    Eigen::MatrixXd x = gaussian_matrix(rng, tokens, block.d_model(), 1.0);
    x *= unif(rng) / x.norm();
    Eigen::MatrixXd d_a = gaussian_matrix(rng, block.rank(), block.d_model(), 1.0);
    Eigen::MatrixXd d_b = gaussian_matrix(rng, block.d_model(), block.rank(), 1.0);
    const double scale = 0.5 * b_norm * unif(rng) / std::sqrt(d_a.squaredNorm() + d_b.squaredNorm());
    d_a *= scale;
    d_b *= scale;
    const double dtheta = std::sqrt(d_a.squaredNorm() + d_b.squaredNorm());
    const double change = (block.forward(x, d_a, d_b) - block.forward(x)).norm();
    const double bound = lk * dtheta * block.input_norm_factor(x);
    if (change > bound) ++rep.violations;
    if (bound > 0.0) rep.max_ratio = std::max(rep.max_ratio, change / bound);
  }
  return rep;
}

}  // namespace dualgate
