#include <doctest.h>

#include <random>

#include "bvcqr/error.hpp"
#include "bvcqr/posterior.hpp"

using namespace bvcqr;

namespace {

// Draws over theta1[1..M], theta2[1..M], beta[1..2] and h for n subjects.
PosteriorDraws fake_draws(std::size_t M, std::size_t n, int chains, int len, std::uint64_t seed,
                          const Eigen::VectorXd& centers) {
  PosteriorDraws d;
  for (int l = 1; l <= 2; ++l)
    for (std::size_t m = 0; m < M; ++m)
      d.names.push_back("theta" + std::to_string(l) + "[" + std::to_string(m + 1) + "]");
  d.names.push_back("beta[1]");
  d.names.push_back("beta[2]");
  for (int l = 1; l <= 2; ++l)
    for (std::size_t i = 0; i < n; ++i)
      d.names.push_back("h" + std::to_string(l) + "[" + std::to_string(i + 1) + "]");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> norm(0.0, 0.1);
  const auto dim = static_cast<Eigen::Index>(d.names.size());
  for (int c = 0; c < chains; ++c) {
    Eigen::MatrixXd m(len, dim);
    for (Eigen::Index t = 0; t < len; ++t)
      for (Eigen::Index k = 0; k < dim; ++k) m(t, k) = centers[k] + norm(rng);
    d.chains.push_back(m);
    d.stats.emplace_back(static_cast<std::size_t>(len));
  }
  return d;
}

}  // namespace

TEST_SUITE("posterior") {

TEST_CASE("summaries of degenerate and symmetric draws") {
  const std::vector<double> constant(200, 2.5);
  const auto s = summarize(constant);
  CHECK(s.mean == 2.5);
  CHECK(s.sd == 0.0);
  CHECK(s.significant);
  std::vector<double> sym;
  for (int k = -100; k <= 100; ++k) sym.push_back(0.01 * k);
  const auto t = summarize(sym);
  CHECK(t.mean == doctest::Approx(0.0).scale(1.0));
  CHECK_FALSE(t.significant);
  CHECK(t.q025 <= t.q50);
  CHECK(t.q50 <= t.q975);
  CHECK(t.q025 == doctest::Approx(-0.95));
}

TEST_CASE("significance iff the interval excludes zero") {
  std::mt19937_64 rng(1);
  for (int rep = 0; rep < 50; ++rep) {
    std::normal_distribution<double> norm(0.05 * rep - 1.25, 0.5);
    std::vector<double> x(300);
    for (auto& v : x) v = norm(rng);
    const auto s = summarize(x);
    CHECK(s.significant == (s.q025 > 0.0 || s.q975 < 0.0));
  }
}

TEST_CASE("effect summary layout and pooling invariance") {
  const std::size_t M = 4, n = 3;
  Eigen::VectorXd centers = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(2 * M + 2 + 2 * n));
  centers[1] = 1.0;
  centers[M + 2] = -0.7;
  auto draws = fake_draws(M, n, 3, 100, 2, centers);
  const auto e = summarize_effects(draws, {"a", "b", "c", "d"});
  REQUIRE(e.rows.size() == 2 * M);
  CHECK(e.rows[0].level == EffectLevel::Baseline);
  CHECK(e.rows[M].level == EffectLevel::Trajectory);
  CHECK(e.find("b", EffectLevel::Baseline).summary.significant);
  CHECK(e.find("c", EffectLevel::Trajectory).summary.significant);
  CHECK_FALSE(e.find("a", EffectLevel::Baseline).summary.significant);

  auto reordered = draws;
  std::swap(reordered.chains[0], reordered.chains[2]);
  const auto e2 = summarize_effects(reordered, {"a", "b", "c", "d"});
  for (std::size_t k = 0; k < e.rows.size(); ++k) {
    CHECK(e.rows[k].summary.q025 == e2.rows[k].summary.q025);
    CHECK(e.rows[k].summary.q975 == e2.rows[k].summary.q975);
    CHECK(e.rows[k].summary.mean == doctest::Approx(e2.rows[k].summary.mean).epsilon(1e-14));
  }
  // concatenated into one chain
  auto single = draws;
  Eigen::MatrixXd all(300, draws.chains[0].cols());
  all << draws.chains[0], draws.chains[1], draws.chains[2];
  single.chains = {all};
  const auto e3 = summarize_effects(single, {"a", "b", "c", "d"});
  CHECK(e3.rows[5].summary.q50 == e.rows[5].summary.q50);

  CHECK_THROWS_AS(summarize_effects(draws, {"a"}), Error);
  auto few = fake_draws(M, n, 1, 99, 3, centers);
  CHECK_THROWS_AS(summarize_effects(few), Error);
  CHECK(summarize_effects(draws).rows[2].chemical == "3");
}

TEST_CASE("shrinkage ratio") {
  const std::size_t M = 2;
  const Eigen::VectorXd centers = Eigen::VectorXd::Zero(2 * M + 2 + 2);
  auto narrow = summarize_effects(fake_draws(M, 1, 2, 100, 4, centers));
  auto wide_draws = fake_draws(M, 1, 2, 100, 5, centers);
  for (auto& c : wide_draws.chains) c *= 3.0;
  const auto wide = summarize_effects(wide_draws);
  attach_shrinkage_ratio(narrow, wide);
  for (const auto& r : narrow.rows) {
    REQUIRE(r.shrinkage_ratio.has_value());
    CHECK(*r.shrinkage_ratio == doctest::Approx(1.0 / 3.0).epsilon(0.2));
  }
}

TEST_CASE("h evaluation: identity, shift, scale") {
  Eigen::VectorXd h(8);
  h << 0.0, 1.0, 3.0, -2.0, 0.5, 0.1, -0.4, 2.0;
  const auto id = evaluate_h(h, h);
  for (const auto* e : {&id.h1, &id.h2}) {
    CHECK(e->intercept == doctest::Approx(0.0).scale(1.0));
    CHECK(e->slope == doctest::Approx(1.0));
    CHECK(e->r_squared == doctest::Approx(1.0));
    CHECK(e->rmse == 0.0);
  }
  const auto shifted = evaluate_h(Eigen::VectorXd(h.array() + 0.5), h);
  CHECK(shifted.h1.intercept == doctest::Approx(0.5));
  CHECK(shifted.h1.slope == doctest::Approx(1.0));
  CHECK(shifted.h1.rmse == doctest::Approx(0.5));
  const auto scaled = evaluate_h(Eigen::VectorXd(2.0 * h), h);
  CHECK(scaled.h2.slope == doctest::Approx(2.0));
  CHECK(scaled.h2.intercept == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("regression against an independent least-squares oracle") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> norm;
  std::vector<double> est(50), tru(50);
  for (std::size_t i = 0; i < 50; ++i) {
    tru[i] = norm(rng);
    est[i] = 0.3 + 0.9 * tru[i] + 0.2 * norm(rng);
  }
  Eigen::MatrixXd A(50, 2);
  Eigen::VectorXd y(50);
  for (Eigen::Index i = 0; i < 50; ++i) {
    A(i, 0) = 1.0;
    A(i, 1) = tru[static_cast<std::size_t>(i)];
    y[i] = est[static_cast<std::size_t>(i)];
  }
  const Eigen::Vector2d coef = A.colPivHouseholderQr().solve(y);
  const Eigen::VectorXd resid = y - A * coef;
  const double r2 = 1.0 - resid.squaredNorm() / (y.array() - y.mean()).square().sum();
  double mse = 0.0;
  for (std::size_t i = 0; i < 50; ++i) mse += (est[i] - tru[i]) * (est[i] - tru[i]);
  const auto e = regress_estimate_on_truth(est, tru);
  CHECK(e.intercept == doctest::Approx(coef[0]));
  CHECK(e.slope == doctest::Approx(coef[1]));
  CHECK(e.r_squared == doctest::Approx(r2));
  CHECK(e.rmse == doctest::Approx(std::sqrt(mse / 50.0)));
}

TEST_CASE("zero-variance truth leaves the slope undefined") {
  const std::vector<double> est{1.0, 2.0, 3.0}, tru{0.0, 0.0, 0.0};
  const auto e = regress_estimate_on_truth(est, tru);
  CHECK_FALSE(e.slope_defined);
  CHECK(e.rmse == doctest::Approx(std::sqrt(14.0 / 3.0)));
}

TEST_CASE("evaluate_h on truth-injected draws is the identity report") {
  const std::size_t M = 2, n = 5;
  GroundTruth truth;
  truth.h.resize(2 * n);
  truth.h << 0.1, 0.9, -0.5, 2.0, 1.2, 0.0, 0.3, 0.6, -0.2, 1.1;
  Eigen::VectorXd centers = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(2 * M + 2 + 2 * n));
  auto draws = fake_draws(M, n, 2, 100, 7, centers);
  for (auto& c : draws.chains) c.rightCols(2 * n).rowwise() = truth.h.transpose();
  const auto r = evaluate_h(draws, truth);
  CHECK(r.h1.rmse == doctest::Approx(0.0).scale(1.0));
  CHECK(r.h2.slope == doctest::Approx(1.0));
  CHECK(r.h1.r_squared == doctest::Approx(1.0));
}

TEST_CASE("global trend and selection counts") {
  const std::size_t M = 3;
  Eigen::VectorXd centers = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(2 * M + 2 + 2));
  centers[0] = 1.0;       // theta1[1] planted and found
  centers[M + 1] = 0.02;  // theta2[2] planted, missed
  centers[2] = -0.8;      // theta1[3] null, false positive
  centers[2 * M] = 1.86;
  centers[2 * M + 1] = 0.33;
  const auto draws = fake_draws(M, 1, 2, 200, 8, centers);
  const auto [g1, g2] = global_trend(draws);
  CHECK(g1.mean == doctest::Approx(1.86).epsilon(0.01));
  CHECK(g2.mean == doctest::Approx(0.33).epsilon(0.05));
  const auto e = summarize_effects(draws);
  const auto s = selection_counts(e, Eigen::Vector3d(1.0, 0.0, 0.0), Eigen::Vector3d(0.0, 0.5, 0.0));
  CHECK(s.planted == 2);
  CHECK(s.planted_significant == 1);
  CHECK(s.nulls == 4);
  CHECK(s.null_significant == 1);
  CHECK(s.mean_null_width > 0.0);
  CHECK_THROWS_AS(selection_counts(e, Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero()), Error);
}

}  // TEST_SUITE
