#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "bvcqr/design.hpp"

namespace bvcqr {

struct Hyperparameters {
  double alpha0 = 1.0;  // inverse-gamma shape for phi_l^2
  double gamma0 = 1.0;  // inverse-gamma rate for phi_l^2
  double alpha = 1.0;   // inverse-gamma shape for sigma^2
  double gamma = 1.0;   // inverse-gamma rate for sigma^2
  double nu0 = 3.0;     // Wishart degrees of freedom for D^-1
  Eigen::Matrix2d C0 = Eigen::Matrix2d::Identity();  // Wishart scale for D^-1
  double df_lambda = 1.0;
  double df_tau = 1.0;
  double a0 = 1.0;          // tau_l ~ half-t(df_tau, 0, a0 * phi_l^2)
  double tau_power = 2.0;   // theta ~ N(0, lambda^2 tau^tau_power)
  bool horseshoe = true;    // false: theta ~ N(0, ablation_theta_sd^2), no lambda/tau
  double ablation_theta_sd = 10.0;

  /// Throws a usage error on any violated positivity / PD constraint.
  void validate() const;
};

/// Which latent blocks are stored as standardized (non-centered) deviates
/// in the unconstrained vector instead of their natural values.
struct Parameterization {
  bool noncentered_theta = true;  // theta = sd * z
  bool noncentered_h = true;      // h = q theta + phi * z
  bool noncentered_b = true;      // b_i = sigma * L * z_i

  static Parameterization centered() { return {false, false, false}; }
  static Parameterization noncentered() { return {true, true, true}; }
  bool operator==(const Parameterization&) const = default;
};

/// Constrained view of one posterior point.
struct ParameterState {
  Eigen::VectorXd beta;  // p+2; beta[0], beta[1] are the global trend
  Eigen::VectorXd theta1, theta2;
  double phi1_sq = 1.0, phi2_sq = 1.0;
  Eigen::VectorXd lambda1, lambda2;  // empty without horseshoe
  double tau1 = 1.0, tau2 = 1.0;
  double sigma_sq = 1.0;
  Eigen::Matrix2d D = Eigen::Matrix2d::Identity();
  Eigen::VectorXd h;  // (h_{1,1..n}, h_{2,1..n})
  Eigen::VectorXd b;  // (b_{1,1}, b_{2,1}, ..., b_{1,n}, b_{2,n})

  /// Flat constrained vector in manifest order (D as D11, D21, D22).
  Eigen::VectorXd flatten() const;
};

/// Packing order of the unconstrained vector (and of the flat constrained
/// view, slot for slot):
///   beta[p+2], theta1[M], theta2[M], phi_sq[2], lambda1[M], lambda2[M],
///   tau[2], sigma_sq, chol(D)[3], h[2n], b[2n]
/// lambda and tau are absent when the horseshoe is disabled.
class ParameterLayout {
 public:
  ParameterLayout() = default;
  ParameterLayout(std::size_t num_fixed, std::size_t num_exposures, std::size_t n,
                  bool horseshoe);

  Eigen::Index beta() const { return 0; }
  Eigen::Index theta1() const { return beta_end_; }
  Eigen::Index theta2() const { return theta1() + M_; }
  Eigen::Index phi_sq() const { return theta2() + M_; }
  Eigen::Index lambda1() const { return phi_sq() + 2; }
  Eigen::Index lambda2() const { return lambda1() + M_; }
  Eigen::Index tau() const { return lambda1() + (horseshoe_ ? 2 * M_ : 0); }
  Eigen::Index sigma_sq() const { return tau() + (horseshoe_ ? 2 : 0); }
  Eigen::Index chol() const { return sigma_sq() + 1; }
  Eigen::Index h() const { return chol() + 3; }
  Eigen::Index b() const { return h() + 2 * n_; }
  Eigen::Index dim() const { return b() + 2 * n_; }

  Eigen::Index num_fixed() const { return beta_end_; }
  Eigen::Index num_exposures() const { return M_; }
  Eigen::Index n() const { return n_; }
  bool horseshoe() const { return horseshoe_; }

  /// Constrained-view coordinate names, e.g. "theta1[3]", "D21", "b2[7]".
  std::vector<std::string> names() const;

 private:
  Eigen::Index beta_end_ = 0;
  Eigen::Index M_ = 0;
  Eigen::Index n_ = 0;
  bool horseshoe_ = true;
};

/// Log-density contributions, all on the natural log scale.
struct LogJointTerms {
  double likelihood = 0.0;
  double h_prior = 0.0;
  double phi_prior = 0.0;
  double sigma_prior = 0.0;
  double b_prior = 0.0;
  double D_prior = 0.0;
  double beta_prior = 0.0;  // flat
  double theta_prior = 0.0;
  double lambda_prior = 0.0;
  double tau_prior = 0.0;
  double jacobian = 0.0;  // zero for constrained-space evaluation

  double total() const;
  std::vector<std::pair<std::string, double>> named() const;
};

/// Partial derivatives of the constrained-space log density (no Jacobian).
struct ConstrainedGradient {
  Eigen::VectorXd beta, theta1, theta2, lambda1, lambda2, h, b;
  double phi1_sq = 0, phi2_sq = 0, tau1 = 0, tau2 = 0, sigma_sq = 0;
  Eigen::Matrix2d D;  // symmetric: d log p = tr(D_grad * dD)
};

/// The hierarchical varying-coefficient mixture model over one design.
class Model {
 public:
  Model(const QuantizedDesign& design, Hyperparameters hyper,
        Parameterization parameterization = {});

  const ParameterLayout& layout() const { return layout_; }
  const Hyperparameters& hyper() const { return hyper_; }
  const QuantizedDesign& design() const { return *design_; }
  Parameterization parameterization() const { return parameterization_; }
  Eigen::Index dim() const { return layout_.dim(); }

  ParameterState constrain(const Eigen::VectorXd& u) const;
  Eigen::VectorXd unconstrain(const ParameterState& state) const;
  /// Inverse of ParameterState::flatten for this model's dimensions.
  ParameterState unflatten(const Eigen::VectorXd& flat) const;

  /// Log joint density of the unconstrained vector, Jacobian included.
  /// Throws a numerical error naming the offending term when non-finite.
  double log_joint(const Eigen::VectorXd& u) const;
  LogJointTerms log_joint_terms(const Eigen::VectorXd& u) const;

  /// Gradient of log_joint in packing order; throws on non-finite entries.
  Eigen::VectorXd grad_log_joint(const Eigen::VectorXd& u) const;

  /// Unchecked value-and-gradient used inside the sampler; returns -inf
  /// (or NaN) instead of throwing.
  double log_density_gradient(const Eigen::VectorXd& u, Eigen::VectorXd& grad) const;

  /// Constrained-space density (no Jacobian) and its partial derivatives.
  LogJointTerms log_density_terms(const ParameterState& state) const;
  ConstrainedGradient constrained_gradient(const ParameterState& state) const;

 private:
  struct Work;
  double evaluate(const Eigen::VectorXd& u, Eigen::VectorXd* grad, LogJointTerms* terms) const;
  void fill_state(const Eigen::VectorXd& u, Work& w) const;
  void constrained_pass(Work& w, bool need_grad) const;

  const QuantizedDesign* design_;
  Hyperparameters hyper_;
  Parameterization parameterization_;
  ParameterLayout layout_;
  Eigen::Matrix2d psi_;  // C0^-1
  double iw_log_norm_ = 0.0;
  double lambda_log_norm_ = 0.0;
  double tau_log_norm_ = 0.0;
};

/// log density of a half-t with `df` degrees of freedom and scale `s`.
double half_t_log_density(double x, double df, double s);
/// log density of an inverse-gamma with shape `shape` and rate `rate`.
double inverse_gamma_log_density(double x, double shape, double rate);

}  // namespace bvcqr
