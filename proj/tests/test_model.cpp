#include <doctest.h>

#include <boost/math/distributions/inverse_gamma.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <random>

#include "bvcqr/error.hpp"
#include "bvcqr/model.hpp"
#include "conjugate.hpp"
#include "support.hpp"

using namespace bvcqr;

namespace {

const Parameterization kAllParameterizations[] = {
    Parameterization::centered(),
    Parameterization::noncentered(),
    {true, false, true},
    {false, true, false},
};

double normal_lpdf(double x, double mu, double sd) {
  const double z = (x - mu) / sd;
  return -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * M_PI);
}

double half_t_lpdf(double x, double df, double scale) {
  return std::log(2.0 * boost::math::pdf(boost::math::students_t_distribution<>(df), x / scale) /
                  scale);
}

double inv_gamma_lpdf(double x, double shape, double rate) {
  return std::log(boost::math::pdf(boost::math::inverse_gamma_distribution<>(shape, rate), x));
}

double mvn_lpdf(const Eigen::VectorXd& x, const Eigen::MatrixXd& cov) {
  const Eigen::LLT<Eigen::MatrixXd> llt(cov);
  const Eigen::VectorXd z = llt.matrixL().solve(x);
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return -0.5 * (static_cast<double>(x.size()) * std::log(2.0 * M_PI) + logdet + z.squaredNorm());
}

// Inverse-Wishart(nu, Psi) density of a 2 x 2 matrix.
double inv_wishart_lpdf(const Eigen::Matrix2d& X, double nu, const Eigen::Matrix2d& psi) {
  const double p = 2.0;
  const double log_gamma_p = 0.5 * std::log(M_PI) + std::lgamma(nu / 2.0) + std::lgamma((nu - 1.0) / 2.0);
  return 0.5 * nu * std::log(psi.determinant()) - 0.5 * nu * p * std::log(2.0) - log_gamma_p -
         0.5 * (nu + p + 1.0) * std::log(X.determinant()) - 0.5 * (psi * X.inverse()).trace();
}

// Term-by-term log density written directly from the model definition with
// dense matrices.
LogJointTerms oracle_terms(const QuantizedDesign& d, const Hyperparameters& hp,
                           const ParameterState& s) {
  LogJointTerms t;
  const auto n = static_cast<Eigen::Index>(d.n());
  const Eigen::VectorXd mean =
      d.X * s.beta + d.W.to_dense() * s.h + d.U.to_dense() * s.b;
  for (Eigen::Index r = 0; r < d.Y.size(); ++r)
    t.likelihood += normal_lpdf(d.Y[r], mean[r], std::sqrt(s.sigma_sq));

  const Eigen::VectorXd h1_mean = d.q * s.theta1, h2_mean = d.q * s.theta2;
  for (Eigen::Index i = 0; i < n; ++i) {
    t.h_prior += normal_lpdf(s.h[i], h1_mean[i], std::sqrt(s.phi1_sq));
    t.h_prior += normal_lpdf(s.h[n + i], h2_mean[i], std::sqrt(s.phi2_sq));
    t.b_prior += mvn_lpdf(s.b.segment<2>(2 * i), s.sigma_sq * s.D);
  }
  t.phi_prior = inv_gamma_lpdf(s.phi1_sq, hp.alpha0, hp.gamma0) +
                inv_gamma_lpdf(s.phi2_sq, hp.alpha0, hp.gamma0);
  t.sigma_prior = inv_gamma_lpdf(s.sigma_sq, hp.alpha, hp.gamma);
  // D^{-1} ~ Wishart(nu0, C0)  <=>  D ~ inverse-Wishart(nu0, C0^{-1})
  t.D_prior = inv_wishart_lpdf(s.D, hp.nu0, hp.C0.inverse());

  for (Eigen::Index m = 0; m < s.theta1.size(); ++m) {
    if (hp.horseshoe) {
      const double v1 = s.lambda1[m] * s.lambda1[m] * std::pow(s.tau1, hp.tau_power);
      const double v2 = s.lambda2[m] * s.lambda2[m] * std::pow(s.tau2, hp.tau_power);
      t.theta_prior += normal_lpdf(s.theta1[m], 0.0, std::sqrt(v1)) +
                       normal_lpdf(s.theta2[m], 0.0, std::sqrt(v2));
      t.lambda_prior += half_t_lpdf(s.lambda1[m], hp.df_lambda, 1.0) +
                        half_t_lpdf(s.lambda2[m], hp.df_lambda, 1.0);
    } else {
      t.theta_prior += normal_lpdf(s.theta1[m], 0.0, hp.ablation_theta_sd) +
                       normal_lpdf(s.theta2[m], 0.0, hp.ablation_theta_sd);
    }
  }
  if (hp.horseshoe)
    t.tau_prior = half_t_lpdf(s.tau1, hp.df_tau, hp.a0 * s.phi1_sq) +
                  half_t_lpdf(s.tau2, hp.df_tau, hp.a0 * s.phi2_sq);
  return t;
}

void check_terms(const LogJointTerms& got, const LogJointTerms& want) {
  const auto g = got.named(), w = want.named();
  REQUIRE(g.size() == w.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (g[k].first == "jacobian") continue;
    INFO(g[k].first);
    CHECK(g[k].second == doctest::Approx(w[k].second).epsilon(1e-10).scale(1.0));
  }
}

Eigen::VectorXd central_difference(const Model& m, const Eigen::VectorXd& u, double h) {
  Eigen::VectorXd g(u.size());
  for (Eigen::Index k = 0; k < u.size(); ++k) {
    Eigen::VectorXd a = u, b = u;
    a[k] += h;
    b[k] -= h;
    g[k] = (m.log_joint(a) - m.log_joint(b)) / (2.0 * h);
  }
  return g;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("log density terms match an independent dense oracle") {
  const auto d = testing::small_design(6, 4, 21);
  std::mt19937_64 rng(1);
  for (bool horseshoe : {true, false}) {
    Hyperparameters hp;
    hp.horseshoe = horseshoe;
    hp.alpha0 = 1.5;
    hp.gamma0 = 0.7;
    hp.alpha = 2.0;
    hp.gamma = 1.3;
    hp.nu0 = 4.0;
    hp.C0 << 2.0, 0.3, 0.3, 0.5;
    hp.df_lambda = 3.0;
    hp.df_tau = 1.0;
    hp.a0 = 0.8;
    for (const auto& par : kAllParameterizations) {
      const Model model(d, hp, par);
      for (int rep = 0; rep < 5; ++rep) {
        const ParameterState s = model.constrain(testing::random_vector(model.dim(), rng));
        const LogJointTerms want = oracle_terms(d, hp, s);
        check_terms(model.log_density_terms(s), want);
        check_terms(model.log_joint_terms(model.unconstrain(s)), want);
      }
    }
  }
}

TEST_CASE("tau_power = 1 uses lambda^2 tau as the prior variance") {
  const auto d = testing::small_design(5, 3, 22);
  Hyperparameters hp;
  hp.tau_power = 1.0;
  const Model model(d, hp);
  std::mt19937_64 rng(2);
  const ParameterState s = model.constrain(testing::random_vector(model.dim(), rng));
  check_terms(model.log_density_terms(s), oracle_terms(d, hp, s));
}

TEST_CASE("constrain and unconstrain are inverse maps") {
  const auto d = testing::small_design(5, 3, 23);
  std::mt19937_64 rng(3);
  for (bool horseshoe : {true, false})
    for (const auto& par : kAllParameterizations) {
      Hyperparameters hp;
      hp.horseshoe = horseshoe;
      const Model model(d, hp, par);
      for (int rep = 0; rep < 10; ++rep) {
        const Eigen::VectorXd u = testing::random_vector(model.dim(), rng, 1.0);
        const ParameterState s = model.constrain(u);
        CHECK((model.unconstrain(s) - u).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((model.unflatten(s.flatten()).flatten() - s.flatten()).cwiseAbs().maxCoeff() == 0.0);
        CHECK(s.D.llt().info() == Eigen::Success);
        CHECK(s.sigma_sq > 0.0);
      }
    }
}

TEST_CASE("Jacobian term equals the log-determinant of the numeric Jacobian") {
  const auto d = testing::small_design(4, 2, 24);
  std::mt19937_64 rng(4);
  for (bool horseshoe : {true, false})
    for (const auto& par : kAllParameterizations) {
      Hyperparameters hp;
      hp.horseshoe = horseshoe;
      const Model model(d, hp, par);
      const Eigen::VectorXd u = testing::random_vector(model.dim(), rng, 0.4);
      const Eigen::Index dim = model.dim();
      Eigen::MatrixXd J(dim, dim);
      const double h = 1e-6;
      for (Eigen::Index k = 0; k < dim; ++k) {
        Eigen::VectorXd a = u, b = u;
        a[k] += h;
        b[k] -= h;
        J.col(k) = (model.constrain(a).flatten() - model.constrain(b).flatten()) / (2.0 * h);
      }
      const double logdet = J.fullPivLu().matrixLU().diagonal().cwiseAbs().array().log().sum();
      CHECK(model.log_joint_terms(u).jacobian == doctest::Approx(logdet).epsilon(1e-6));
    }
}

TEST_CASE("gradient matches central differences") {
  const auto d = testing::small_design(5, 3, 25);
  std::mt19937_64 rng(5);
  for (bool horseshoe : {true, false})
    for (const auto& par : kAllParameterizations) {
      Hyperparameters hp;
      hp.horseshoe = horseshoe;
      const Model model(d, hp, par);
      for (int rep = 0; rep < 3; ++rep) {
        const Eigen::VectorXd u = testing::random_vector(model.dim(), rng);
        const Eigen::VectorXd g = model.grad_log_joint(u);
        const Eigen::VectorXd fd = central_difference(model, u, 1e-5);
        for (Eigen::Index k = 0; k < u.size(); ++k) {
          INFO(model.layout().names()[static_cast<std::size_t>(k)]);
          CHECK(std::abs(g[k] - fd[k]) <= 1e-5 * std::max(1.0, std::abs(fd[k])));
        }
        Eigen::VectorXd g2;
        CHECK(model.log_density_gradient(u, g2) == doctest::Approx(model.log_joint(u)));
        CHECK((g2 - g).cwiseAbs().maxCoeff() == 0.0);
      }
    }
}

TEST_CASE("constrained gradient matches differences in the constrained space") {
  const auto d = testing::small_design(5, 2, 26);
  Hyperparameters hp;
  const Model model(d, hp);
  std::mt19937_64 rng(6);
  const ParameterState s = model.constrain(testing::random_vector(model.dim(), rng));
  const ConstrainedGradient g = model.constrained_gradient(s);
  auto total = [&](const ParameterState& x) { return model.log_density_terms(x).total(); };
  const double h = 1e-6;
  auto fd = [&](auto mutate) {
    ParameterState a = s, b = s;
    mutate(a, h);
    mutate(b, -h);
    return (total(a) - total(b)) / (2.0 * h);
  };
  CHECK(g.sigma_sq == doctest::Approx(fd([](ParameterState& x, double e) { x.sigma_sq += e; })).epsilon(1e-5));
  CHECK(g.phi2_sq == doctest::Approx(fd([](ParameterState& x, double e) { x.phi2_sq += e; })).epsilon(1e-5));
  CHECK(g.tau1 == doctest::Approx(fd([](ParameterState& x, double e) { x.tau1 += e; })).epsilon(1e-5));
  CHECK(g.beta[1] == doctest::Approx(fd([](ParameterState& x, double e) { x.beta[1] += e; })).epsilon(1e-5));
  CHECK(g.theta1[0] == doctest::Approx(fd([](ParameterState& x, double e) { x.theta1[0] += e; })).epsilon(1e-5));
  CHECK(g.h[3] == doctest::Approx(fd([](ParameterState& x, double e) { x.h[3] += e; })).epsilon(1e-5));
  CHECK(g.b[2] == doctest::Approx(fd([](ParameterState& x, double e) { x.b[2] += e; })).epsilon(1e-5));
  // symmetric perturbation of the off-diagonal element
  const double dD21 = fd([](ParameterState& x, double e) {
    x.D(1, 0) += e;
    x.D(0, 1) += e;
  });
  CHECK(2.0 * g.D(1, 0) == doctest::Approx(dD21).epsilon(1e-5));
}

TEST_CASE("packing order names") {
  const auto d = testing::small_design(4, 2, 27);
  const Model model(d, Hyperparameters{});
  const auto names = model.layout().names();
  REQUIRE(static_cast<Eigen::Index>(names.size()) == model.dim());
  CHECK(names.front() == "beta[1]");
  CHECK(names[3] == "theta1[1]");
  CHECK(names[5] == "theta2[1]");
  CHECK(names[7] == "phi1_sq");
  CHECK(names[9] == "lambda1[1]");
  CHECK(names[13] == "tau1");
  CHECK(names[15] == "sigma_sq");
  CHECK(names[16] == "D11");
  CHECK(names[19] == "h1[1]");
  CHECK(names[23] == "h2[1]");
  CHECK(names[27] == "b1[1]");
  CHECK(names[28] == "b2[1]");
  CHECK(names.back() == "b2[4]");

  Hyperparameters flat;
  flat.horseshoe = false;
  const Model ablation(d, flat);
  CHECK(ablation.dim() == model.dim() - 6);
}

TEST_CASE("non-finite log density names the offending term") {
  const auto d = testing::small_design(4, 2, 28);
  const Model model(d, Hyperparameters{}, Parameterization::centered());
  Eigen::VectorXd u = Eigen::VectorXd::Zero(model.dim());
  u[model.layout().sigma_sq()] = -800.0;  // sigma^2 underflows to zero
  try {
    model.log_joint(u);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Numerical);
  }
  Eigen::VectorXd g;
  CHECK_FALSE(std::isfinite(model.log_density_gradient(u, g)));
}

TEST_CASE("hyperparameter validation") {
  Hyperparameters hp;
  hp.alpha0 = 0.0;
  CHECK_THROWS_AS(hp.validate(), Error);
  hp = Hyperparameters{};
  hp.C0 << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(hp.validate(), Error);
  hp = Hyperparameters{};
  hp.nu0 = 0.5;
  CHECK_THROWS_AS(hp.validate(), Error);
}

TEST_CASE("conditional of (beta, sigma^2) matches the normal-inverse-gamma kernel") {
  const auto d = testing::small_design(9, 3, 31);
  Hyperparameters hp;
  hp.alpha = 2.5;
  hp.gamma = 0.7;
  const Model model(d, hp);
  std::mt19937_64 rng(13);
  const ParameterState fixed = model.constrain(testing::random_vector(model.dim(), rng));
  const auto post = testing::nig_posterior(d, fixed, hp);
  std::vector<double> offsets;
  for (int rep = 0; rep < 10; ++rep) {
    ParameterState s = fixed;
    s.beta = testing::random_vector(s.beta.size(), rng, 1.0);
    s.sigma_sq = std::exp(testing::random_vector(1, rng, 0.7)[0]);
    offsets.push_back(model.log_density_terms(s).total() - post.log_kernel(s.beta, s.sigma_sq));
  }
  for (double o : offsets) CHECK(std::abs(o - offsets.front()) < 1e-8);
}

TEST_CASE("half-t and inverse-gamma helpers") {
  CHECK(half_t_log_density(0.7, 1.0, 1.3) == doctest::Approx(half_t_lpdf(0.7, 1.0, 1.3)));
  CHECK(half_t_log_density(2.5, 4.0, 0.5) == doctest::Approx(half_t_lpdf(2.5, 4.0, 0.5)));
  CHECK(inverse_gamma_log_density(0.4, 2.0, 3.0) == doctest::Approx(inv_gamma_lpdf(0.4, 2.0, 3.0)));
}

}  // TEST_SUITE
