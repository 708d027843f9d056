#include "bvcqr/simulate.hpp"

#include <cmath>
#include <cstdio>
#include <random>

#include "bvcqr/error.hpp"

namespace bvcqr {

Eigen::MatrixXd ar1_correlation(std::size_t M, double rho) {
  const auto m = static_cast<Eigen::Index>(M);
  Eigen::MatrixXd C(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      C(i, j) = std::pow(rho, static_cast<double>(std::abs(i - j)));
  return C;
}

void Scenario::validate() const {
  const auto m = static_cast<Eigen::Index>(M);
  if (n < 4) throw_usage("scenario needs at least 4 subjects");
  if (C.rows() != m || C.cols() != m) throw_usage("exposure covariance must be M x M");
  if (theta1_true.size() != m || theta2_true.size() != m)
    throw_usage("true theta vectors must have length M");
  if (ages.empty()) throw_usage("scenario needs at least one visit age");
  for (std::size_t j = 1; j < ages.size(); ++j)
    if (!(ages[j] > ages[j - 1])) throw_usage("scenario ages must be strictly increasing");
  if (beta_true.size() != static_cast<Eigen::Index>(covariates.size()))
    throw_usage("beta_true length must match the covariate specification");
  if (!(age_divisor > 0.0)) throw_usage("age_divisor must be positive");
  if (!(noise_sd >= 0.0)) throw_usage("noise_sd must be non-negative");
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(D_true);
  if ((D_true - D_true.transpose()).norm() > 1e-12 || es.eigenvalues().minCoeff() < -1e-12)
    throw_usage("D_true must be symmetric positive semi-definite");
}

Scenario builtin_scenario(int id) {
  if (id != 1 && id != 2)
    throw_usage("unknown scenario " + std::to_string(id) + "; valid ids are 1, 2");
  Scenario s;
  s.id = id;
  s.n = 100;
  s.M = 36;
  s.rho = 0.4;
  s.C = ar1_correlation(s.M, s.rho);
  s.scale1 = 5.0;
  s.scale2 = 3.0;
  Eigen::VectorXd w1 = Eigen::VectorXd::Zero(36), w2 = Eigen::VectorXd::Zero(36);
  // 1-based chemical indices
  w1[1 - 1] = 0.1;
  w1[12 - 1] = 0.3;
  w1[24 - 1] = 0.4;
  w1[35 - 1] = 0.2;
  w2[9 - 1] = 0.1;
  w2[23 - 1] = 0.5;
  w2[27 - 1] = 0.2;
  w2[33 - 1] = 0.2;
  if (id == 2) {
    w1[23 - 1] = -0.3;
    w2[6 - 1] = -0.2;
  }
  s.theta1_true = s.scale1 * w1;
  s.theta2_true = s.scale2 * w2;
  s.beta_true = Eigen::Vector2d(1.0, 0.5);
  s.covariates = {{CovariateKind::StandardNormal, 0.5}, {CovariateKind::Bernoulli, 0.5}};
  s.D_true << 0.25, 0.0, 0.0, 0.04;
  s.noise_sd = 1.0;
  s.seed = 1;
  return s;
}

namespace {

Eigen::Matrix2d psd_sqrt(const Eigen::Matrix2d& D) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(D);
  const Eigen::Vector2d ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

std::string subject_label(std::size_t i, std::size_t n) {
  const int width = static_cast<int>(std::to_string(n).size());
  char buf[32];
  std::snprintf(buf, sizeof(buf), "s%0*zu", width, i + 1);
  return buf;
}

}  // namespace

SimulatedData generate(const Scenario& s) {
  s.validate();
  Eigen::LLT<Eigen::MatrixXd> llt(s.C);
  if (llt.info() != Eigen::Success)
    throw_usage("exposure covariance is not positive definite (Cholesky failed)");
  const Eigen::MatrixXd LC = llt.matrixL();
  const Eigen::Matrix2d LD = psd_sqrt(s.D_true);

  const auto n = static_cast<Eigen::Index>(s.n);
  const auto M = static_cast<Eigen::Index>(s.M);
  const auto p = static_cast<Eigen::Index>(s.covariates.size());
  std::mt19937_64 rng(s.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  Eigen::MatrixXd Z(n, M);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd e(M);
    for (Eigen::Index m = 0; m < M; ++m) e[m] = normal(rng);
    Z.row(i) = (LC * e).transpose();
  }
  const QuantizedExposures quantized = quantize(Z);
  const Eigen::MatrixXd qd = quantized.q.cast<double>();

  SimulatedData out;
  auto& truth = out.truth;
  truth.theta1 = s.theta1_true;
  truth.theta2 = s.theta2_true;
  truth.beta = s.beta_true;
  truth.q = quantized.q;
  truth.seed = s.seed;
  truth.h.resize(2 * n);
  truth.h.head(n) = qd * s.theta1_true;
  truth.h.tail(n) = qd * s.theta2_true;
  truth.b.resize(2 * n);

  auto& panel = out.panel;
  for (Eigen::Index k = 0; k < p; ++k) panel.covariate_names.push_back("x_" + std::to_string(k + 1));
  for (Eigen::Index m = 0; m < M; ++m) panel.exposure_names.push_back("z_" + std::to_string(m + 1));

  for (Eigen::Index i = 0; i < n; ++i) {
    Subject subj;
    subj.id = subject_label(static_cast<std::size_t>(i), s.n);
    subj.exposures = Z.row(i).transpose();
    subj.covariates.resize(p);
    for (Eigen::Index k = 0; k < p; ++k) {
      const auto& spec = s.covariates[static_cast<std::size_t>(k)];
      subj.covariates[k] = spec.kind == CovariateKind::StandardNormal
                               ? normal(rng)
                               : (unif(rng) < spec.probability ? 1.0 : 0.0);
    }
    const Eigen::Vector2d e(normal(rng), normal(rng));
    const Eigen::Vector2d bi = LD * e;
    truth.b.segment<2>(2 * i) = bi;
    const double fixed = subj.covariates.dot(s.beta_true);
    for (double age_months : s.ages) {
      const double a = (age_months - s.baseline_age) / s.age_divisor;
      const double eps = normal(rng);
      const double y = truth.h[i] + truth.h[n + i] * a + fixed + bi[0] + bi[1] * a +
                       s.noise_sd * eps;
      subj.observations.push_back({age_months, y});
    }
    truth.subject_ids.push_back(subj.id);
    panel.subjects.push_back(std::move(subj));
  }
  panel.detect_flags = std::vector<std::vector<bool>>(s.M, std::vector<bool>(s.n, true));
  panel.validate();
  return out;
}

}  // namespace bvcqr
