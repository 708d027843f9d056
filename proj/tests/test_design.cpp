#include <doctest.h>

#include <random>
#include <sstream>

#include "bvcqr/design.hpp"
#include "bvcqr/error.hpp"
#include "support.hpp"

using namespace bvcqr;

namespace {

ExposurePanel panel_with_visits(const std::vector<std::vector<double>>& ages) {
  ExposurePanel p;
  p.covariate_names = {"x_1", "x_2"};
  p.exposure_names = {"z_1"};
  for (std::size_t i = 0; i < ages.size(); ++i) {
    Subject s;
    s.id = "s" + std::to_string(i);
    s.covariates = Eigen::Vector2d(0.5 + static_cast<double>(i), -1.0);
    s.exposures = Eigen::VectorXd::Constant(1, static_cast<double>(i));
    for (double a : ages[i]) s.observations.push_back({a, 10.0 * static_cast<double>(i) + a});
    p.subjects.push_back(s);
  }
  return p;
}

QuantizedExposures codes(const Eigen::MatrixXi& q) {
  QuantizedExposures out;
  out.q = q;
  out.breakpoints = Eigen::MatrixXd::Zero(q.cols(), 3);
  return out;
}

}  // namespace

TEST_SUITE("design") {

TEST_CASE("single observation at the baseline age") {
  const auto p = panel_with_visits({{24.0}});
  const auto d = build_design(p, codes(Eigen::MatrixXi::Zero(1, 1)));
  CHECK(d.W.to_dense() == Eigen::RowVector2d(1.0, 0.0));
  CHECK(d.U.to_dense() == Eigen::RowVector2d(1.0, 0.0));
  Eigen::RowVectorXd x(4);
  x << 1.0, 0.0, 0.5, -1.0;
  CHECK(Eigen::RowVectorXd(d.X.row(0)) == x);
}

TEST_CASE("two subjects with J = (2, 1)") {
  const auto p = panel_with_visits({{12.0, 36.0}, {30.0}});
  const auto d = build_design(p, codes(Eigen::MatrixXi::Zero(2, 1)));
  const double a11 = (12.0 - 24.0) / 12.0, a12 = (36.0 - 24.0) / 12.0, a21 = (30.0 - 24.0) / 12.0;
  Eigen::MatrixXd W(3, 4);
  W << 1, 0, a11, 0,
       1, 0, a12, 0,
       0, 1, 0, a21;
  Eigen::MatrixXd U(3, 4);
  U << 1, a11, 0, 0,
       1, a12, 0, 0,
       0, 0, 1, a21;
  CHECK(d.W.to_dense() == W);
  CHECK(d.U.to_dense() == U);
  CHECK(d.Y == Eigen::Vector3d(12.0, 36.0, 40.0));
  CHECK(d.row_subject == std::vector<std::size_t>{0, 0, 1});
  CHECK(d.row_visit == std::vector<std::size_t>{0, 1, 0});
  CHECK(d.X.col(0) == Eigen::Vector3d::Ones());
  CHECK(d.X.col(1) == Eigen::Vector3d(a11, a12, a21));
}

TEST_CASE("structural invariants on a random design") {
  const auto p = testing::random_panel(23, 4, 3, 3);
  const auto d = build_design(p, quantize(p));
  const auto N = static_cast<Eigen::Index>(p.num_observations());
  const auto n = static_cast<Eigen::Index>(p.n());
  CHECK(d.Y.size() == N);
  CHECK(d.X.rows() == N);
  CHECK(d.X.cols() == 3);
  const Eigen::MatrixXd W = d.W.to_dense(), U = d.U.to_dense();
  CHECK(W.rows() == N);
  CHECK(U.cols() == 2 * n);
  for (Eigen::Index r = 0; r < N; ++r) {
    const auto i = static_cast<Eigen::Index>(d.row_subject[static_cast<std::size_t>(r)]);
    CHECK(W(r, i) == 1.0);
    CHECK(W(r, n + i) == d.ages[r]);
    CHECK(U(r, 2 * i) == 1.0);
    CHECK(U(r, 2 * i + 1) == d.ages[r]);
    // any other entry is zero
    CHECK((W.row(r).array() != 0.0).count() <= 2);
    CHECK((U.row(r).array() != 0.0).count() <= 2);
  }
}

TEST_CASE("baseline-age visits have zero age entries") {
  const auto p = panel_with_visits({{24.0, 36.0}, {24.0}, {12.0, 24.0}, {24.0}});
  DesignOptions opt;
  const auto d = build_design(p, codes(Eigen::MatrixXi::Zero(4, 1)), opt);
  for (Eigen::Index r = 0; r < d.Y.size(); ++r) {
    const auto i = d.row_subject[static_cast<std::size_t>(r)];
    const double raw = p.subjects[i].observations[d.row_visit[static_cast<std::size_t>(r)]].age;
    if (raw == 24.0) {
      CHECK(d.W.to_dense()(r, 4 + static_cast<Eigen::Index>(i)) == 0.0);
      CHECK(d.U.to_dense()(r, 2 * static_cast<Eigen::Index>(i) + 1) == 0.0);
    }
  }
  opt.baseline_age = 12.0;
  opt.age_divisor = 1.0;
  const auto d2 = build_design(p, codes(Eigen::MatrixXi::Zero(4, 1)), opt);
  CHECK(d2.ages[0] == 12.0);
}

TEST_CASE("W h reproduces h1 + h2 * age per row") {
  const auto p = testing::random_panel(17, 2, 4, 4);
  const auto d = build_design(p, quantize(p));
  std::mt19937_64 rng(5);
  std::normal_distribution<double> norm;
  Eigen::VectorXd h(34);
  for (auto& v : h) v = norm(rng);
  const Eigen::VectorXd wh = d.W.apply(h);
  for (Eigen::Index r = 0; r < wh.size(); ++r) {
    const auto i = static_cast<Eigen::Index>(d.row_subject[static_cast<std::size_t>(r)]);
    CHECK(wh[r] == doctest::Approx(h[i] + h[17 + i] * d.ages[r]).epsilon(1e-14));
  }
  CHECK((wh - d.W.to_dense() * h).cwiseAbs().maxCoeff() < 1e-13);
  Eigen::VectorXd r(wh.size());
  for (auto& v : r) v = norm(rng);
  CHECK((d.W.apply_transpose(r) - d.W.to_dense().transpose() * r).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((d.U.apply_transpose(r) - d.U.to_dense().transpose() * r).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((d.U.apply(h) - d.U.to_dense() * h).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("mixture mean") {
  SUBCASE("zero effects") {
    Eigen::MatrixXd q = Eigen::MatrixXd::Constant(5, 3, 2.0);
    CHECK(mixture_mean(q, Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero()).isZero());
  }
  SUBCASE("single chemical") {
    Eigen::MatrixXd q(4, 1);
    q << 0, 1, 2, 3;
    const auto mu = mixture_mean(q, Eigen::VectorXd::Constant(1, 2.0), Eigen::VectorXd::Zero(1));
    REQUIRE(mu.size() == 8);
    CHECK(mu.head(4) == Eigen::Vector4d(0, 2, 4, 6));
    CHECK(mu.tail(4).isZero());
  }
  SUBCASE("loop oracle") {
    std::mt19937_64 rng(6);
    std::uniform_int_distribution<int> level(0, 3);
    std::normal_distribution<double> norm;
    Eigen::MatrixXi qi(9, 5);
    for (Eigen::Index i = 0; i < 9; ++i)
      for (Eigen::Index m = 0; m < 5; ++m) qi(i, m) = level(rng);
    Eigen::VectorXd t1(5), t2(5);
    for (Eigen::Index m = 0; m < 5; ++m) {
      t1[m] = norm(rng);
      t2[m] = norm(rng);
    }
    const auto mu = mixture_mean(codes(qi), t1, t2);
    for (Eigen::Index i = 0; i < 9; ++i) {
      double a = 0.0, b = 0.0;
      for (Eigen::Index m = 0; m < 5; ++m) {
        a += qi(i, m) * t1[m];
        b += qi(i, m) * t2[m];
      }
      CHECK(mu[i] == doctest::Approx(a).epsilon(1e-14));
      CHECK(mu[9 + i] == doctest::Approx(b).epsilon(1e-14));
    }
  }
}

TEST_CASE("mixture mean ordering matches W") {
  // planted h = q theta exactly; W then reproduces the per-row contributions
  const auto p = testing::random_panel(12, 3, 8);
  const auto q = quantize(p);
  const auto d = build_design(p, q);
  const Eigen::Vector3d t1(0.4, 0.0, -0.2), t2(0.0, 0.1, 0.3);
  const Eigen::VectorXd h = mixture_mean(q, t1, t2);
  const Eigen::VectorXd wh = d.W.apply(h);
  for (Eigen::Index r = 0; r < wh.size(); ++r) {
    const auto i = static_cast<Eigen::Index>(d.row_subject[static_cast<std::size_t>(r)]);
    const Eigen::RowVectorXd qi = q.q.row(i).cast<double>();
    CHECK(wh[r] == doctest::Approx(qi.dot(t1) + qi.dot(t2) * d.ages[r]));
  }
}

TEST_CASE("triplet dump lists every nonzero") {
  const auto p = panel_with_visits({{12.0, 36.0}, {30.0}});
  const auto d = build_design(p, codes(Eigen::MatrixXi::Zero(2, 1)));
  std::ostringstream os;
  d.W.write_triplets(os);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "row,col,value");
  Eigen::MatrixXd rebuilt = Eigen::MatrixXd::Zero(3, 4);
  while (std::getline(in, line)) {
    int r = 0, c = 0;
    double v = 0.0;
    REQUIRE(std::sscanf(line.c_str(), "%d,%d,%lf", &r, &c, &v) == 3);
    rebuilt(r, c) = v;
  }
  CHECK(rebuilt == d.W.to_dense());
}

TEST_CASE("subject without observations is a data error") {
  auto p = panel_with_visits({{12.0}, {}});
  try {
    build_design(p, codes(Eigen::MatrixXi::Zero(2, 1)));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Data);
  }
}

TEST_CASE("non-conformable codes are a data error") {
  const auto p = panel_with_visits({{12.0}, {24.0}});
  CHECK_THROWS_AS(build_design(p, codes(Eigen::MatrixXi::Zero(3, 1))), Error);
}

TEST_CASE("rank of X") {
  auto p = testing::random_panel(10, 2, 9);
  auto d = build_design(p, quantize(p));
  CHECK(design_rank(d.X) == 3);
  d.X.col(2) = 2.0 * d.X.col(0);
  CHECK(design_rank(d.X) == 2);
}

}  // TEST_SUITE
