#include "bvcqr/design.hpp"

#include <ostream>

#include "bvcqr/error.hpp"
#include "bvcqr/panel_io.hpp"

namespace bvcqr {

SubjectBlockMatrix::SubjectBlockMatrix(Layout layout, std::size_t num_subjects,
                                       std::vector<std::size_t> row_subject,
                                       Eigen::VectorXd row_age)
    : layout_(layout),
      num_subjects_(num_subjects),
      row_subject_(std::move(row_subject)),
      row_age_(std::move(row_age)) {}

Eigen::Index SubjectBlockMatrix::intercept_col(std::size_t subject) const {
  return static_cast<Eigen::Index>(layout_ == Layout::Split ? subject : 2 * subject);
}

Eigen::Index SubjectBlockMatrix::age_col(std::size_t subject) const {
  return static_cast<Eigen::Index>(layout_ == Layout::Split ? num_subjects_ + subject
                                                            : 2 * subject + 1);
}

Eigen::VectorXd SubjectBlockMatrix::apply(const Eigen::VectorXd& x) const {
  Eigen::VectorXd y(rows());
  for (Eigen::Index r = 0; r < rows(); ++r) {
    const auto s = row_subject_[static_cast<std::size_t>(r)];
    y[r] = x[intercept_col(s)] + row_age_[r] * x[age_col(s)];
  }
  return y;
}

Eigen::VectorXd SubjectBlockMatrix::apply_transpose(const Eigen::VectorXd& r) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(cols());
  for (Eigen::Index k = 0; k < rows(); ++k) {
    const auto s = row_subject_[static_cast<std::size_t>(k)];
    out[intercept_col(s)] += r[k];
    out[age_col(s)] += row_age_[k] * r[k];
  }
  return out;
}

Eigen::MatrixXd SubjectBlockMatrix::to_dense() const {
  Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(rows(), cols());
  for (Eigen::Index r = 0; r < rows(); ++r) {
    const auto s = row_subject_[static_cast<std::size_t>(r)];
    dense(r, intercept_col(s)) = 1.0;
    dense(r, age_col(s)) = row_age_[r];
  }
  return dense;
}

void SubjectBlockMatrix::write_triplets(std::ostream& out) const {
  out << "row,col,value\n";
  for (Eigen::Index r = 0; r < rows(); ++r) {
    const auto s = row_subject_[static_cast<std::size_t>(r)];
    out << r << ',' << intercept_col(s) << ",1\n";
    out << r << ',' << age_col(s) << ',' << format_double(row_age_[r]) << '\n';
  }
}

QuantizedDesign build_design(const ExposurePanel& panel, const QuantizedExposures& q,
                             const DesignOptions& options) {
  if (q.n() != panel.n() || q.num_exposures() != panel.num_exposures())
    throw_data("quantized exposures are not conformable with the panel");
  if (!(options.age_divisor > 0.0)) throw_usage("age_divisor must be positive");

  const std::size_t n = panel.n();
  const auto p = static_cast<Eigen::Index>(panel.num_covariates());
  std::size_t total = 0;
  for (const auto& s : panel.subjects) {
    if (s.observations.empty()) throw_data("subject '" + s.id + "' has no observations");
    total += s.observations.size();
  }
  const auto N = static_cast<Eigen::Index>(total);

  QuantizedDesign d;
  d.options = options;
  d.Y.resize(N);
  d.X.resize(N, p + 2);
  d.ages.resize(N);
  d.row_subject.reserve(total);
  d.row_visit.reserve(total);
  d.covariate_names = panel.covariate_names;
  d.exposure_names = panel.exposure_names;

  Eigen::Index r = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = panel.subjects[i];
    d.subject_ids.push_back(s.id);
    for (std::size_t j = 0; j < s.observations.size(); ++j, ++r) {
      const double age = (s.observations[j].age - options.baseline_age) / options.age_divisor;
      d.Y[r] = s.observations[j].y;
      d.ages[r] = age;
      d.X(r, 0) = 1.0;
      d.X(r, 1) = age;
      d.X.row(r).tail(p) = s.covariates.transpose();
      d.row_subject.push_back(i);
      d.row_visit.push_back(j);
    }
  }
  d.U = SubjectBlockMatrix(SubjectBlockMatrix::Layout::Interleaved, n, d.row_subject, d.ages);
  d.W = SubjectBlockMatrix(SubjectBlockMatrix::Layout::Split, n, d.row_subject, d.ages);
  d.q = q.q.cast<double>();
  return d;
}

Eigen::VectorXd mixture_mean(const Eigen::MatrixXd& q, const Eigen::VectorXd& theta1,
                             const Eigen::VectorXd& theta2) {
  if (theta1.size() != q.cols() || theta2.size() != q.cols())
    throw_usage("theta length must equal the number of exposures");
  const auto n = q.rows();
  Eigen::VectorXd mu(2 * n);
  mu.head(n).noalias() = q * theta1;
  mu.tail(n).noalias() = q * theta2;
  return mu;
}

Eigen::VectorXd mixture_mean(const QuantizedExposures& q, const Eigen::VectorXd& theta1,
                             const Eigen::VectorXd& theta2) {
  return mixture_mean(Eigen::MatrixXd(q.q.cast<double>()), theta1, theta2);
}

Eigen::Index design_rank(const Eigen::MatrixXd& X) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  return qr.rank();
}

}  // namespace bvcqr
