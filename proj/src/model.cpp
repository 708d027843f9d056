#include "bvcqr/model.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "bvcqr/error.hpp"

namespace bvcqr {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

double log_multigamma2(double x) {
  // log Gamma_2(x) = (1/2) log pi + lgamma(x) + lgamma(x - 1/2)
  return 0.5 * std::log(std::numbers::pi) + std::lgamma(x) + std::lgamma(x - 0.5);
}

double half_t_log_norm(double df) {
  return std::log(2.0) + std::lgamma(0.5 * (df + 1.0)) - std::lgamma(0.5 * df) -
         0.5 * std::log(df * std::numbers::pi);
}

bool is_spd(const Eigen::Matrix2d& m) {
  return m(0, 0) > 0.0 && m.determinant() > 0.0 && std::abs(m(0, 1) - m(1, 0)) < 1e-12;
}

}  // namespace

double half_t_log_density(double x, double df, double s) {
  return half_t_log_norm(df) - std::log(s) -
         0.5 * (df + 1.0) * std::log1p(x * x / (df * s * s));
}

double inverse_gamma_log_density(double x, double shape, double rate) {
  return shape * std::log(rate) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - rate / x;
}

void Hyperparameters::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v))
      throw_usage(std::string("hyperparameter ") + name + " must be positive");
  };
  positive(alpha0, "alpha0");
  positive(gamma0, "gamma0");
  positive(alpha, "alpha");
  positive(gamma, "gamma");
  positive(df_lambda, "df_lambda");
  positive(df_tau, "df_tau");
  positive(a0, "a0");
  positive(tau_power, "tau_power");
  positive(ablation_theta_sd, "ablation_theta_sd");
  if (!(nu0 >= 2.0)) throw_usage("hyperparameter nu0 must be >= 2");
  if (!is_spd(C0)) throw_usage("hyperparameter C0 must be symmetric positive definite");
}

Eigen::VectorXd ParameterState::flatten() const {
  const Eigen::Index len = beta.size() + theta1.size() + theta2.size() + 2 + lambda1.size() +
                           lambda2.size() + (lambda1.size() > 0 ? 2 : 0) + 1 + 3 + h.size() +
                           b.size();
  Eigen::VectorXd out(len);
  Eigen::Index k = 0;
  auto put = [&](const Eigen::VectorXd& v) {
    out.segment(k, v.size()) = v;
    k += v.size();
  };
  put(beta);
  put(theta1);
  put(theta2);
  out[k++] = phi1_sq;
  out[k++] = phi2_sq;
  if (lambda1.size() > 0) {
    put(lambda1);
    put(lambda2);
    out[k++] = tau1;
    out[k++] = tau2;
  }
  out[k++] = sigma_sq;
  out[k++] = D(0, 0);
  out[k++] = D(1, 0);
  out[k++] = D(1, 1);
  put(h);
  put(b);
  return out;
}

ParameterLayout::ParameterLayout(std::size_t num_fixed, std::size_t num_exposures,
                                 std::size_t n, bool horseshoe)
    : beta_end_(static_cast<Eigen::Index>(num_fixed)),
      M_(static_cast<Eigen::Index>(num_exposures)),
      n_(static_cast<Eigen::Index>(n)),
      horseshoe_(horseshoe) {}

std::vector<std::string> ParameterLayout::names() const {
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(dim()));
  auto idx = [](const char* base, Eigen::Index i) {
    return std::string(base) + "[" + std::to_string(i + 1) + "]";
  };
  for (Eigen::Index k = 0; k < beta_end_; ++k) out.push_back(idx("beta", k));
  for (Eigen::Index m = 0; m < M_; ++m) out.push_back(idx("theta1", m));
  for (Eigen::Index m = 0; m < M_; ++m) out.push_back(idx("theta2", m));
  out.push_back("phi1_sq");
  out.push_back("phi2_sq");
  if (horseshoe_) {
    for (Eigen::Index m = 0; m < M_; ++m) out.push_back(idx("lambda1", m));
    for (Eigen::Index m = 0; m < M_; ++m) out.push_back(idx("lambda2", m));
    out.push_back("tau1");
    out.push_back("tau2");
  }
  out.push_back("sigma_sq");
  out.push_back("D11");
  out.push_back("D21");
  out.push_back("D22");
  for (Eigen::Index i = 0; i < n_; ++i) out.push_back(idx("h1", i));
  for (Eigen::Index i = 0; i < n_; ++i) out.push_back(idx("h2", i));
  for (Eigen::Index i = 0; i < n_; ++i) {
    out.push_back(idx("b1", i));
    out.push_back(idx("b2", i));
  }
  return out;
}

double LogJointTerms::total() const {
  return likelihood + h_prior + phi_prior + sigma_prior + b_prior + D_prior + beta_prior +
         theta_prior + lambda_prior + tau_prior + jacobian;
}

std::vector<std::pair<std::string, double>> LogJointTerms::named() const {
  return {{"likelihood", likelihood}, {"h_prior", h_prior},       {"phi_prior", phi_prior},
          {"sigma_prior", sigma_prior}, {"b_prior", b_prior},     {"D_prior", D_prior},
          {"beta_prior", beta_prior},   {"theta_prior", theta_prior},
          {"lambda_prior", lambda_prior}, {"tau_prior", tau_prior}, {"jacobian", jacobian}};
}

struct Model::Work {
  ParameterState s;
  Eigen::VectorXd sd1, sd2;  // prior SD of theta_l
  Eigen::VectorXd hdev;      // h - q theta
  Eigen::VectorXd zb;        // standardized b (non-centered only)
  Eigen::Matrix2d L;         // Cholesky factor of D
  double phi1 = 1.0, phi2 = 1.0;
  LogJointTerms terms;
  ConstrainedGradient g;
};

Model::Model(const QuantizedDesign& design, Hyperparameters hyper,
             Parameterization parameterization)
    : design_(&design),
      hyper_(std::move(hyper)),
      parameterization_(parameterization),
      layout_(design.num_fixed(), design.num_exposures(), design.n(), hyper_.horseshoe) {
  hyper_.validate();
  psi_ = hyper_.C0.inverse();
  const double nu = hyper_.nu0;
  iw_log_norm_ = 0.5 * nu * std::log(psi_.determinant()) - nu * std::log(2.0) -
                 log_multigamma2(0.5 * nu);
  lambda_log_norm_ = half_t_log_norm(hyper_.df_lambda);
  tau_log_norm_ = half_t_log_norm(hyper_.df_tau);
}

void Model::fill_state(const Eigen::VectorXd& u, Work& w) const {
  const auto& Ly = layout_;
  const Eigen::Index n = Ly.n(), M = Ly.num_exposures();
  const bool nc_theta = parameterization_.noncentered_theta;
  const bool nc_h = parameterization_.noncentered_h;
  const bool nc_b = parameterization_.noncentered_b;
  auto& s = w.s;

  s.beta = u.segment(Ly.beta(), Ly.num_fixed());
  s.phi1_sq = std::exp(u[Ly.phi_sq()]);
  s.phi2_sq = std::exp(u[Ly.phi_sq() + 1]);
  w.phi1 = std::exp(0.5 * u[Ly.phi_sq()]);
  w.phi2 = std::exp(0.5 * u[Ly.phi_sq() + 1]);
  if (Ly.horseshoe()) {
    s.lambda1 = u.segment(Ly.lambda1(), M).array().exp();
    s.lambda2 = u.segment(Ly.lambda2(), M).array().exp();
    s.tau1 = std::exp(u[Ly.tau()]);
    s.tau2 = std::exp(u[Ly.tau() + 1]);
    const double half = 0.5 * hyper_.tau_power;
    w.sd1 = s.lambda1 * std::exp(half * u[Ly.tau()]);
    w.sd2 = s.lambda2 * std::exp(half * u[Ly.tau() + 1]);
  } else {
    s.lambda1.resize(0);
    s.lambda2.resize(0);
    w.sd1 = Eigen::VectorXd::Constant(M, hyper_.ablation_theta_sd);
    w.sd2 = w.sd1;
  }
  s.sigma_sq = std::exp(u[Ly.sigma_sq()]);
  const double a = u[Ly.chol()], c = u[Ly.chol() + 1], d = u[Ly.chol() + 2];
  w.L << std::exp(a), 0.0, c, std::exp(d);
  s.D = w.L * w.L.transpose();

  if (nc_theta) {
    s.theta1 = w.sd1.cwiseProduct(u.segment(Ly.theta1(), M));
    s.theta2 = w.sd2.cwiseProduct(u.segment(Ly.theta2(), M));
  } else {
    s.theta1 = u.segment(Ly.theta1(), M);
    s.theta2 = u.segment(Ly.theta2(), M);
  }
  const Eigen::VectorXd mu = mixture_mean(design_->q, s.theta1, s.theta2);
  if (nc_h) {
    w.hdev.resize(2 * n);
    w.hdev.head(n) = w.phi1 * u.segment(Ly.h(), n);
    w.hdev.tail(n) = w.phi2 * u.segment(Ly.h() + n, n);
    s.h = mu + w.hdev;
  } else {
    s.h = u.segment(Ly.h(), 2 * n);
    w.hdev = s.h - mu;
  }
  if (nc_b) {
    w.zb = u.segment(Ly.b(), 2 * n);
    s.b.resize(2 * n);
    const double sigma = std::sqrt(s.sigma_sq);
    for (Eigen::Index i = 0; i < n; ++i)
      s.b.segment<2>(2 * i) = sigma * (w.L * w.zb.segment<2>(2 * i));
  } else {
    s.b = u.segment(Ly.b(), 2 * n);
  }
}

void Model::constrained_pass(Work& w, bool need_grad) const {
  const auto& des = *design_;
  const auto& s = w.s;
  const Eigen::Index n = layout_.n();
  const double N = static_cast<double>(des.num_observations());
  const double nn = static_cast<double>(n);
  auto& t = w.terms;
  t = LogJointTerms{};

  const Eigen::VectorXd R = des.Y - des.X * s.beta - des.W.apply(s.h) - des.U.apply(s.b);
  const double rss = R.squaredNorm();
  const double sig2 = s.sigma_sq;
  t.likelihood = -0.5 * N * (kLog2Pi + std::log(sig2)) - 0.5 * rss / sig2;

  const double ss1 = w.hdev.head(n).squaredNorm();
  const double ss2 = w.hdev.tail(n).squaredNorm();
  t.h_prior = -0.5 * nn * (2 * kLog2Pi + std::log(s.phi1_sq) + std::log(s.phi2_sq)) -
              0.5 * ss1 / s.phi1_sq - 0.5 * ss2 / s.phi2_sq;

  t.phi_prior = inverse_gamma_log_density(s.phi1_sq, hyper_.alpha0, hyper_.gamma0) +
                inverse_gamma_log_density(s.phi2_sq, hyper_.alpha0, hyper_.gamma0);
  t.sigma_prior = inverse_gamma_log_density(sig2, hyper_.alpha, hyper_.gamma);

  const Eigen::Matrix2d Dinv = s.D.inverse();
  const double logdetD = std::log(s.D.determinant());
  Eigen::Matrix2d S = Eigen::Matrix2d::Zero();
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Vector2d bi = s.b.segment<2>(2 * i);
    S.noalias() += bi * bi.transpose();
  }
  const double Q = (Dinv * S).trace();
  t.b_prior = -nn * (kLog2Pi + std::log(sig2) + 0.5 * logdetD) - 0.5 * Q / sig2;
  t.D_prior = iw_log_norm_ - 0.5 * (hyper_.nu0 + 3.0) * logdetD - 0.5 * (psi_ * Dinv).trace();

  const double theta_ss = s.theta1.cwiseQuotient(w.sd1).squaredNorm() +
                          s.theta2.cwiseQuotient(w.sd2).squaredNorm();
  t.theta_prior = -0.5 * static_cast<double>(s.theta1.size() + s.theta2.size()) * kLog2Pi -
                  w.sd1.array().log().sum() - w.sd2.array().log().sum() - 0.5 * theta_ss;

  if (layout_.horseshoe()) {
    const double dfl = hyper_.df_lambda;
    auto lam_term = [&](const Eigen::VectorXd& lam) {
      return (lambda_log_norm_ - 0.5 * (dfl + 1.0) * (lam.array().square() / dfl).log1p()).sum();
    };
    t.lambda_prior = lam_term(s.lambda1) + lam_term(s.lambda2);
    const double scale1 = hyper_.a0 * s.phi1_sq, scale2 = hyper_.a0 * s.phi2_sq;
    t.tau_prior = half_t_log_density(s.tau1, hyper_.df_tau, scale1) +
                  half_t_log_density(s.tau2, hyper_.df_tau, scale2);
  }

  if (!need_grad) return;
  auto& g = w.g;

  g.beta = des.X.transpose() * R / sig2;

  // d/dh of likelihood + h prior
  g.h = des.W.apply_transpose(R) / sig2;
  g.h.head(n) -= w.hdev.head(n) / s.phi1_sq;
  g.h.tail(n) -= w.hdev.tail(n) / s.phi2_sq;

  // theta via the h prior mean and its own prior
  g.theta1 = des.q.transpose() * (w.hdev.head(n) / s.phi1_sq) -
             s.theta1.cwiseQuotient(w.sd1.cwiseAbs2());
  g.theta2 = des.q.transpose() * (w.hdev.tail(n) / s.phi2_sq) -
             s.theta2.cwiseQuotient(w.sd2.cwiseAbs2());

  g.b = des.U.apply_transpose(R) / sig2;
  for (Eigen::Index i = 0; i < n; ++i)
    g.b.segment<2>(2 * i) -= Dinv * s.b.segment<2>(2 * i) / sig2;

  g.sigma_sq = -0.5 * N / sig2 + 0.5 * rss / (sig2 * sig2) - nn / sig2 +
               0.5 * Q / (sig2 * sig2) - (hyper_.alpha + 1.0) / sig2 +
               hyper_.gamma / (sig2 * sig2);

  g.D = -0.5 * (nn + hyper_.nu0 + 3.0) * Dinv + 0.5 * Dinv * (S / sig2 + psi_) * Dinv;

  auto phi_grad = [&](double phi_sq, double ss) {
    return -0.5 * nn / phi_sq + 0.5 * ss / (phi_sq * phi_sq) - (hyper_.alpha0 + 1.0) / phi_sq +
           hyper_.gamma0 / (phi_sq * phi_sq);
  };
  g.phi1_sq = phi_grad(s.phi1_sq, ss1);
  g.phi2_sq = phi_grad(s.phi2_sq, ss2);

  if (layout_.horseshoe()) {
    // theta prior through sd = lambda * tau^(tau_power/2)
    const double half = 0.5 * hyper_.tau_power;
    const Eigen::ArrayXd gsd1 = (-1.0 + s.theta1.cwiseQuotient(w.sd1).array().square()) /
                                w.sd1.array();  // d/dsd
    const Eigen::ArrayXd gsd2 = (-1.0 + s.theta2.cwiseQuotient(w.sd2).array().square()) /
                                w.sd2.array();
    const double dfl = hyper_.df_lambda;
    auto lam_grad = [&](const Eigen::VectorXd& lam) {
      return Eigen::ArrayXd(-(dfl + 1.0) * lam.array() / (dfl + lam.array().square()));
    };
    g.lambda1 = (gsd1 * w.sd1.array() / s.lambda1.array() + lam_grad(s.lambda1)).matrix();
    g.lambda2 = (gsd2 * w.sd2.array() / s.lambda2.array() + lam_grad(s.lambda2)).matrix();

    const double dft = hyper_.df_tau;
    // d/dx and d/ds of log half-t(x; dft, s)
    auto tau_dx = [&](double x, double sc) { return -(dft + 1.0) * x / (dft * sc * sc + x * x); };
    auto tau_ds = [&](double x, double sc) {
      return (-1.0 + (dft + 1.0) * x * x / (dft * sc * sc + x * x)) / sc;
    };
    const double scale1 = hyper_.a0 * s.phi1_sq, scale2 = hyper_.a0 * s.phi2_sq;
    g.tau1 = (gsd1 * w.sd1.array()).sum() * half / s.tau1 + tau_dx(s.tau1, scale1);
    g.tau2 = (gsd2 * w.sd2.array()).sum() * half / s.tau2 + tau_dx(s.tau2, scale2);
    g.phi1_sq += tau_ds(s.tau1, scale1) * hyper_.a0;
    g.phi2_sq += tau_ds(s.tau2, scale2) * hyper_.a0;
  } else {
    g.lambda1.resize(0);
    g.lambda2.resize(0);
    g.tau1 = g.tau2 = 0.0;
  }
}

double Model::evaluate(const Eigen::VectorXd& u, Eigen::VectorXd* grad,
                       LogJointTerms* terms) const {
  if (u.size() != layout_.dim())
    throw_usage("parameter vector has length " + std::to_string(u.size()) + ", expected " +
                std::to_string(layout_.dim()));
  const auto& Ly = layout_;
  const Eigen::Index n = Ly.n(), M = Ly.num_exposures();
  const bool nc_theta = parameterization_.noncentered_theta;
  const bool nc_h = parameterization_.noncentered_h;
  const bool nc_b = parameterization_.noncentered_b;
  const double half = 0.5 * hyper_.tau_power;

  Work w;
  fill_state(u, w);
  constrained_pass(w, grad != nullptr);
  const auto& s = w.s;

  // log|Jacobian| of the unconstrained -> constrained map
  double jac = u[Ly.phi_sq()] + u[Ly.phi_sq() + 1] + u[Ly.sigma_sq()] +
               2.0 * std::log(2.0) + 3.0 * u[Ly.chol()] + 2.0 * u[Ly.chol() + 2];
  if (Ly.horseshoe())
    jac += u.segment(Ly.lambda1(), 2 * M).sum() + u[Ly.tau()] + u[Ly.tau() + 1];
  if (nc_theta) jac += w.sd1.array().log().sum() + w.sd2.array().log().sum();
  if (nc_h) jac += 0.5 * static_cast<double>(n) * (u[Ly.phi_sq()] + u[Ly.phi_sq() + 1]);
  if (nc_b) jac += static_cast<double>(n) * (u[Ly.sigma_sq()] + u[Ly.chol()] + u[Ly.chol() + 2]);
  w.terms.jacobian = jac;
  if (terms) *terms = w.terms;
  const double total = w.terms.total();
  if (!grad) return total;

  auto g = w.g;  // copy; accumulates chain-rule contributions below
  Eigen::VectorXd& out = *grad;
  out.resize(Ly.dim());
  Eigen::Matrix2d gL = 2.0 * g.D * w.L;
  double g_log_phi1 = 0.0, g_log_phi2 = 0.0;

  if (nc_b) {
    // b_i = sigma L z_i
    const double sigma = std::sqrt(s.sigma_sq);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Vector2d gb = g.b.segment<2>(2 * i);
      const Eigen::Vector2d z = w.zb.segment<2>(2 * i);
      out.segment<2>(Ly.b() + 2 * i) = sigma * (w.L.transpose() * gb);
      gL.noalias() += sigma * gb * z.transpose();
      g.sigma_sq += gb.dot(s.b.segment<2>(2 * i)) / (2.0 * s.sigma_sq);
    }
  } else {
    out.segment(Ly.b(), 2 * n) = g.b;
  }
  if (nc_h) {
    // h = q theta + phi z
    out.segment(Ly.h(), n) = w.phi1 * g.h.head(n);
    out.segment(Ly.h() + n, n) = w.phi2 * g.h.tail(n);
    g.theta1.noalias() += design_->q.transpose() * g.h.head(n);
    g.theta2.noalias() += design_->q.transpose() * g.h.tail(n);
    g_log_phi1 += 0.5 * g.h.head(n).dot(w.hdev.head(n));
    g_log_phi2 += 0.5 * g.h.tail(n).dot(w.hdev.tail(n));
  } else {
    out.segment(Ly.h(), 2 * n) = g.h;
  }
  if (nc_theta) {
    // theta = sd z
    out.segment(Ly.theta1(), M) = w.sd1.cwiseProduct(g.theta1);
    out.segment(Ly.theta2(), M) = w.sd2.cwiseProduct(g.theta2);
    if (Ly.horseshoe()) {
      const Eigen::VectorXd gt1 = g.theta1.cwiseProduct(s.theta1);
      const Eigen::VectorXd gt2 = g.theta2.cwiseProduct(s.theta2);
      g.lambda1 += gt1.cwiseQuotient(s.lambda1);
      g.lambda2 += gt2.cwiseQuotient(s.lambda2);
      g.tau1 += half * gt1.sum() / s.tau1;
      g.tau2 += half * gt2.sum() / s.tau2;
    }
  } else {
    out.segment(Ly.theta1(), M) = g.theta1;
    out.segment(Ly.theta2(), M) = g.theta2;
  }

  out.segment(Ly.beta(), Ly.num_fixed()) = g.beta;
  out[Ly.phi_sq()] = g.phi1_sq * s.phi1_sq + g_log_phi1 + 1.0;
  out[Ly.phi_sq() + 1] = g.phi2_sq * s.phi2_sq + g_log_phi2 + 1.0;
  if (Ly.horseshoe()) {
    out.segment(Ly.lambda1(), M) = g.lambda1.cwiseProduct(s.lambda1).array() + 1.0;
    out.segment(Ly.lambda2(), M) = g.lambda2.cwiseProduct(s.lambda2).array() + 1.0;
    out[Ly.tau()] = g.tau1 * s.tau1 + 1.0;
    out[Ly.tau() + 1] = g.tau2 * s.tau2 + 1.0;
  }
  out[Ly.sigma_sq()] = g.sigma_sq * s.sigma_sq + 1.0;
  out[Ly.chol()] = gL(0, 0) * w.L(0, 0) + 3.0;
  out[Ly.chol() + 1] = gL(1, 0);
  out[Ly.chol() + 2] = gL(1, 1) * w.L(1, 1) + 2.0;

  const double nn = static_cast<double>(n);
  if (nc_theta && Ly.horseshoe()) {
    out.segment(Ly.lambda1(), 2 * M).array() += 1.0;
    out[Ly.tau()] += half * static_cast<double>(M);
    out[Ly.tau() + 1] += half * static_cast<double>(M);
  }
  if (nc_h) {
    out[Ly.phi_sq()] += 0.5 * nn;
    out[Ly.phi_sq() + 1] += 0.5 * nn;
  }
  if (nc_b) {
    out[Ly.sigma_sq()] += nn;
    out[Ly.chol()] += nn;
    out[Ly.chol() + 2] += nn;
  }
  return total;
}

ParameterState Model::constrain(const Eigen::VectorXd& u) const {
  if (u.size() != layout_.dim()) throw_usage("parameter vector has the wrong length");
  if (!u.allFinite()) throw_numerical("cannot constrain a non-finite parameter vector");
  Work w;
  fill_state(u, w);
  return w.s;
}

ParameterState Model::unflatten(const Eigen::VectorXd& flat) const {
  if (flat.size() != dim()) throw_usage("flat parameter vector has the wrong length");
  const Eigen::Index k = design_->X.cols();
  const Eigen::Index M = design_->q.cols();
  const Eigen::Index n = static_cast<Eigen::Index>(design_->subject_ids.size());
  ParameterState s;
  Eigen::Index at = 0;
  auto take = [&](Eigen::Index len) {
    Eigen::VectorXd v = flat.segment(at, len);
    at += len;
    return v;
  };
  s.beta = take(k);
  s.theta1 = take(M);
  s.theta2 = take(M);
  s.phi1_sq = flat[at++];
  s.phi2_sq = flat[at++];
  if (hyper_.horseshoe) {
    s.lambda1 = take(M);
    s.lambda2 = take(M);
    s.tau1 = flat[at++];
    s.tau2 = flat[at++];
  }
  s.sigma_sq = flat[at++];
  s.D(0, 0) = flat[at++];
  s.D(1, 0) = s.D(0, 1) = flat[at++];
  s.D(1, 1) = flat[at++];
  s.h = take(2 * n);
  s.b = take(2 * n);
  return s;
}

Eigen::VectorXd Model::unconstrain(const ParameterState& s) const {
  const auto& Ly = layout_;
  const Eigen::Index n = Ly.n(), M = Ly.num_exposures();
  const bool nc_theta = parameterization_.noncentered_theta;
  const bool nc_h = parameterization_.noncentered_h;
  const bool nc_b = parameterization_.noncentered_b;
  const double half = 0.5 * hyper_.tau_power;
  if (s.beta.size() != Ly.num_fixed() || s.theta1.size() != M || s.theta2.size() != M ||
      s.h.size() != 2 * n || s.b.size() != 2 * n)
    throw_usage("parameter state is not conformable with the model");
  if (Ly.horseshoe() && (s.lambda1.size() != M || s.lambda2.size() != M))
    throw_usage("parameter state lacks horseshoe local scales");
  if (!(s.phi1_sq > 0 && s.phi2_sq > 0 && s.sigma_sq > 0 && s.tau1 > 0 && s.tau2 > 0))
    throw_usage("parameter state violates positivity constraints");

  Eigen::LLT<Eigen::Matrix2d> llt(s.D);
  if (llt.info() != Eigen::Success) throw_usage("D is not positive definite");
  const Eigen::Matrix2d L = llt.matrixL();

  Eigen::VectorXd u(Ly.dim());
  u.segment(Ly.beta(), Ly.num_fixed()) = s.beta;
  u[Ly.phi_sq()] = std::log(s.phi1_sq);
  u[Ly.phi_sq() + 1] = std::log(s.phi2_sq);
  Eigen::VectorXd sd1, sd2;
  if (Ly.horseshoe()) {
    u.segment(Ly.lambda1(), M) = s.lambda1.array().log();
    u.segment(Ly.lambda2(), M) = s.lambda2.array().log();
    u[Ly.tau()] = std::log(s.tau1);
    u[Ly.tau() + 1] = std::log(s.tau2);
    sd1 = s.lambda1 * std::exp(half * u[Ly.tau()]);
    sd2 = s.lambda2 * std::exp(half * u[Ly.tau() + 1]);
  } else {
    sd1 = Eigen::VectorXd::Constant(M, hyper_.ablation_theta_sd);
    sd2 = sd1;
  }
  u[Ly.sigma_sq()] = std::log(s.sigma_sq);
  u[Ly.chol()] = std::log(L(0, 0));
  u[Ly.chol() + 1] = L(1, 0);
  u[Ly.chol() + 2] = std::log(L(1, 1));
  if (nc_theta) {
    u.segment(Ly.theta1(), M) = s.theta1.cwiseQuotient(sd1);
    u.segment(Ly.theta2(), M) = s.theta2.cwiseQuotient(sd2);
  } else {
    u.segment(Ly.theta1(), M) = s.theta1;
    u.segment(Ly.theta2(), M) = s.theta2;
  }
  if (nc_h) {
    const Eigen::VectorXd mu = mixture_mean(design_->q, s.theta1, s.theta2);
    u.segment(Ly.h(), n) = (s.h.head(n) - mu.head(n)) / std::sqrt(s.phi1_sq);
    u.segment(Ly.h() + n, n) = (s.h.tail(n) - mu.tail(n)) / std::sqrt(s.phi2_sq);
  } else {
    u.segment(Ly.h(), 2 * n) = s.h;
  }
  if (nc_b) {
    const double sigma = std::sqrt(s.sigma_sq);
    for (Eigen::Index i = 0; i < n; ++i)
      u.segment<2>(Ly.b() + 2 * i) =
          L.triangularView<Eigen::Lower>().solve(Eigen::Vector2d(s.b.segment<2>(2 * i))) / sigma;
  } else {
    u.segment(Ly.b(), 2 * n) = s.b;
  }
  return u;
}

LogJointTerms Model::log_joint_terms(const Eigen::VectorXd& u) const {
  LogJointTerms t;
  evaluate(u, nullptr, &t);
  return t;
}

double Model::log_joint(const Eigen::VectorXd& u) const {
  if (!u.allFinite()) throw_numerical("log_joint called with a non-finite parameter vector");
  const LogJointTerms t = log_joint_terms(u);
  for (const auto& [name, value] : t.named())
    if (!std::isfinite(value)) throw_numerical("log density term '" + name + "' is not finite");
  return t.total();
}

Eigen::VectorXd Model::grad_log_joint(const Eigen::VectorXd& u) const {
  if (!u.allFinite()) throw_numerical("gradient requested at a non-finite parameter vector");
  Eigen::VectorXd g;
  evaluate(u, &g, nullptr);
  for (Eigen::Index k = 0; k < g.size(); ++k)
    if (!std::isfinite(g[k]))
      throw_numerical("gradient coordinate " + std::to_string(k) + " (" +
                      layout_.names()[static_cast<std::size_t>(k)] + ") is not finite");
  return g;
}

double Model::log_density_gradient(const Eigen::VectorXd& u, Eigen::VectorXd& grad) const {
  const double value = evaluate(u, &grad, nullptr);
  if (!std::isfinite(value) || !grad.allFinite())
    return -std::numeric_limits<double>::infinity();
  return value;
}

namespace {

void state_to_work(const ParameterState& s, const QuantizedDesign& des, const ParameterLayout& Ly,
                   const Hyperparameters& hyper, ParameterState& out_s, Eigen::VectorXd& sd1,
                   Eigen::VectorXd& sd2, Eigen::VectorXd& hdev, Eigen::Matrix2d& L) {
  out_s = s;
  const Eigen::Index M = Ly.num_exposures();
  if (Ly.horseshoe()) {
    sd1 = s.lambda1 * std::pow(s.tau1, 0.5 * hyper.tau_power);
    sd2 = s.lambda2 * std::pow(s.tau2, 0.5 * hyper.tau_power);
  } else {
    sd1 = Eigen::VectorXd::Constant(M, hyper.ablation_theta_sd);
    sd2 = sd1;
  }
  hdev = s.h - mixture_mean(des.q, s.theta1, s.theta2);
  Eigen::LLT<Eigen::Matrix2d> llt(s.D);
  if (llt.info() != Eigen::Success) throw_usage("D is not positive definite");
  L = llt.matrixL();
}

}  // namespace

LogJointTerms Model::log_density_terms(const ParameterState& state) const {
  Work w;
  state_to_work(state, *design_, layout_, hyper_, w.s, w.sd1, w.sd2, w.hdev, w.L);
  constrained_pass(w, false);
  return w.terms;
}

ConstrainedGradient Model::constrained_gradient(const ParameterState& state) const {
  Work w;
  state_to_work(state, *design_, layout_, hyper_, w.s, w.sd1, w.sd2, w.hdev, w.L);
  constrained_pass(w, true);
  return w.g;
}

}  // namespace bvcqr
