#pragma once

#include <random>
#include <string>

#include "bvcqr/design.hpp"
#include "bvcqr/preprocess.hpp"

namespace testing {

// Panel with n subjects, one covariate, M chemicals, and `visits` visits each.
inline bvcqr::ExposurePanel random_panel(std::size_t n, std::size_t M, std::uint64_t seed,
                                         std::size_t visits = 3) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> norm(0.0, 1.0);
  std::lognormal_distribution<double> conc(0.0, 1.0);
  bvcqr::ExposurePanel p;
  p.covariate_names = {"x_1"};
  for (std::size_t m = 0; m < M; ++m) p.exposure_names.push_back("z_" + std::to_string(m + 1));
  for (std::size_t i = 0; i < n; ++i) {
    bvcqr::Subject s;
    s.id = "s" + std::to_string(i + 1);
    s.covariates = Eigen::VectorXd::Constant(1, norm(rng));
    s.exposures.resize(static_cast<Eigen::Index>(M));
    for (std::size_t m = 0; m < M; ++m) s.exposures[static_cast<Eigen::Index>(m)] = conc(rng);
    for (std::size_t j = 0; j < visits; ++j)
      s.observations.push_back({12.0 + 12.0 * static_cast<double>(j), norm(rng)});
    p.subjects.push_back(std::move(s));
  }
  p.detect_flags = std::vector<std::vector<bool>>(M, std::vector<bool>(n, true));
  return p;
}

// Small fitting problem: n subjects, M chemicals, one covariate, 3 visits.
inline bvcqr::QuantizedDesign small_design(std::size_t n, std::size_t M, std::uint64_t seed) {
  const auto p = random_panel(n, M, seed);
  return bvcqr::build_design(p, bvcqr::quantize(p));
}

inline Eigen::VectorXd random_vector(Eigen::Index dim, std::mt19937_64& rng, double sd = 0.5) {
  std::normal_distribution<double> norm(0.0, sd);
  Eigen::VectorXd u(dim);
  for (auto& v : u) v = norm(rng);
  return u;
}

}  // namespace testing
