#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace bvcqr {

struct Observation {
  double age = 0.0;  // months
  double y = 0.0;
};

struct Subject {
  std::string id;
  Eigen::VectorXd covariates;  // length p
  std::vector<Observation> observations;
  Eigen::VectorXd exposures;  // length M; NaN where below LOD and not yet imputed
};

/// Wide exposure panel: one record per subject, exposures measured once,
/// outcomes repeated over visits.
struct ExposurePanel {
  std::vector<Subject> subjects;
  std::vector<std::string> covariate_names;
  std::vector<std::string> exposure_names;
  std::optional<std::vector<double>> lod;  // per chemical
  // detect_flags[m][i]: true when chemical m was detected for subject i.
  std::optional<std::vector<std::vector<bool>>> detect_flags;
  // 2*SD divisors applied by scale_by_2sd, per chemical.
  std::optional<std::vector<double>> scale_constants;

  std::size_t n() const { return subjects.size(); }
  std::size_t num_exposures() const { return exposure_names.size(); }
  std::size_t num_covariates() const { return covariate_names.size(); }
  std::size_t num_observations() const;

  /// Column m of the exposure matrix.
  std::vector<double> exposure_column(std::size_t m) const;

  /// Checks the structural invariants; throws a data error on violation.
  void validate() const;
};

struct QuantizedExposures {
  Eigen::MatrixXi q;            // n x M, entries in {0,1,2,3}
  Eigen::MatrixXd breakpoints;  // M x 3 quartile cut points

  std::size_t n() const { return static_cast<std::size_t>(q.rows()); }
  std::size_t num_exposures() const { return static_cast<std::size_t>(q.cols()); }
};

/// Quartile index of a value given its three cut points; ties go low.
int quartile_index(double value, double q1, double q2, double q3);

ExposurePanel filter_by_detection(const ExposurePanel& panel,
                                  double min_detect_frac = 0.20);

/// Replaces every below-LOD entry with LOD/sqrt(2).
ExposurePanel impute_below_lod(const ExposurePanel& panel);

/// Divides each exposure column by twice its sample SD (n-1 denominator).
ExposurePanel scale_by_2sd(const ExposurePanel& panel);

QuantizedExposures quantize(const ExposurePanel& panel);

/// Quartile-codes a single n x M matrix of raw values.
QuantizedExposures quantize(const Eigen::MatrixXd& values);

struct ChemicalReport {
  std::string name;
  double detection_fraction = 1.0;
  bool retained = true;
  std::size_t imputed = 0;
  double scale_constant = 1.0;
  double breakpoints[3] = {0.0, 0.0, 0.0};
};

struct PreprocessOptions {
  bool detect_filter = true;
  double min_detect_frac = 0.20;
  bool lod_impute = true;
  bool scale = true;
};

struct PreprocessResult {
  ExposurePanel panel;  // after filtering/imputation/scaling
  QuantizedExposures quantized;
  std::vector<ChemicalReport> report;  // one entry per input chemical
};

/// Runs filter -> impute -> scale -> quantize as enabled by `options`.
PreprocessResult preprocess(const ExposurePanel& panel,
                            const PreprocessOptions& options);

}  // namespace bvcqr
