#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "bvcqr/preprocess.hpp"

namespace bvcqr {

enum class CovariateKind { StandardNormal, Bernoulli };

struct CovariateSpec {
  CovariateKind kind = CovariateKind::StandardNormal;
  double probability = 0.5;  // Bernoulli success probability
};

/// A synthetic longitudinal mixture study.
struct Scenario {
  int id = 0;  // 1 or 2 for the built-ins, 0 for user scenarios
  std::size_t n = 100;
  std::size_t M = 36;
  Eigen::MatrixXd C;  // exposure covariance, M x M
  double rho = 0.4;   // AR(1) correlation used when C is generated
  Eigen::VectorXd theta1_true, theta2_true;  // already multiplied by scale1 / scale2
  double scale1 = 1.0, scale2 = 1.0;
  std::vector<double> ages = {12.0, 24.0, 36.0};  // months, shared by all subjects
  double baseline_age = 24.0;
  double age_divisor = 12.0;
  Eigen::VectorXd beta_true;  // covariate effects, length p
  std::vector<CovariateSpec> covariates;
  Eigen::Matrix2d D_true;
  double noise_sd = 1.0;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Correlation matrix with entries rho^|i-j|.
Eigen::MatrixXd ar1_correlation(std::size_t M, double rho);

/// Built-in scenarios 1 and 2; other ids are a usage error.
Scenario builtin_scenario(int id);

struct GroundTruth {
  Eigen::VectorXd theta1, theta2;
  Eigen::VectorXd h;  // (h_1 over subjects, h_2 over subjects)
  Eigen::VectorXd b;  // interleaved per subject
  Eigen::VectorXd beta;  // covariate effects
  Eigen::MatrixXi q;
  std::vector<std::string> subject_ids;
  std::uint64_t seed = 0;
};

struct SimulatedData {
  ExposurePanel panel;
  GroundTruth truth;
};

SimulatedData generate(const Scenario& scenario);

}  // namespace bvcqr
