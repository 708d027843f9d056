#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <vector>

#include "bvcqr/preprocess.hpp"

namespace bvcqr {

/// A per-subject (1, age) block matrix with 2n columns.
///
/// Row r touches exactly two columns. The column pair depends on the
/// layout: `Split` places subject i's intercept in column i and its age
/// term in column n+i (the W / h ordering), `Interleaved` places them in
/// columns 2i and 2i+1 (the U / b ordering).
class SubjectBlockMatrix {
 public:
  enum class Layout { Split, Interleaved };

  SubjectBlockMatrix() = default;
  SubjectBlockMatrix(Layout layout, std::size_t num_subjects,
                     std::vector<std::size_t> row_subject, Eigen::VectorXd row_age);

  Eigen::Index rows() const { return static_cast<Eigen::Index>(row_subject_.size()); }
  Eigen::Index cols() const { return static_cast<Eigen::Index>(2 * num_subjects_); }
  Layout layout() const { return layout_; }

  Eigen::Index intercept_col(std::size_t subject) const;
  Eigen::Index age_col(std::size_t subject) const;

  /// y = A x
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
  /// y = A^T r
  Eigen::VectorXd apply_transpose(const Eigen::VectorXd& r) const;

  Eigen::MatrixXd to_dense() const;

  /// Writes `row,col,value` triplets (0-based) with a header line.
  void write_triplets(std::ostream& out) const;

 private:
  Layout layout_ = Layout::Split;
  std::size_t num_subjects_ = 0;
  std::vector<std::size_t> row_subject_;
  Eigen::VectorXd row_age_;
};

struct DesignOptions {
  double baseline_age = 24.0;  // months
  double age_divisor = 12.0;   // months per model age unit
};

/// Stacked outcome vector and design matrices for one fit.
struct QuantizedDesign {
  Eigen::VectorXd Y;
  Eigen::MatrixXd X;  // N_obs x (p+2): intercept, age, covariates
  SubjectBlockMatrix U;
  SubjectBlockMatrix W;
  Eigen::MatrixXd q;        // n x M quartile indices stored as reals
  Eigen::VectorXd ages;     // centered, scaled ages per observation
  std::vector<std::size_t> row_subject;
  std::vector<std::size_t> row_visit;
  std::vector<std::string> subject_ids;
  std::vector<std::string> covariate_names;
  std::vector<std::string> exposure_names;
  DesignOptions options;

  std::size_t n() const { return subject_ids.size(); }
  std::size_t num_exposures() const { return static_cast<std::size_t>(q.cols()); }
  std::size_t num_fixed() const { return static_cast<std::size_t>(X.cols()); }
  std::size_t num_observations() const { return static_cast<std::size_t>(Y.size()); }
};

QuantizedDesign build_design(const ExposurePanel& panel, const QuantizedExposures& q,
                             const DesignOptions& options = {});

/// Prior mean of h: (q theta1 ; q theta2), matching W's column order.
Eigen::VectorXd mixture_mean(const Eigen::MatrixXd& q, const Eigen::VectorXd& theta1,
                             const Eigen::VectorXd& theta2);
Eigen::VectorXd mixture_mean(const QuantizedExposures& q, const Eigen::VectorXd& theta1,
                             const Eigen::VectorXd& theta2);

/// Numerical rank of X (column-pivoted QR).
Eigen::Index design_rank(const Eigen::MatrixXd& X);

}  // namespace bvcqr
