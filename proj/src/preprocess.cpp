#include "bvcqr/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bvcqr/error.hpp"
#include "bvcqr/stats.hpp"

namespace bvcqr {

std::size_t ExposurePanel::num_observations() const {
  std::size_t total = 0;
  for (const auto& s : subjects) total += s.observations.size();
  return total;
}

std::vector<double> ExposurePanel::exposure_column(std::size_t m) const {
  std::vector<double> column;
  column.reserve(subjects.size());
  for (const auto& s : subjects) column.push_back(s.exposures[static_cast<Eigen::Index>(m)]);
  return column;
}

void ExposurePanel::validate() const {
  const auto M = static_cast<Eigen::Index>(num_exposures());
  const auto p = static_cast<Eigen::Index>(num_covariates());
  for (const auto& s : subjects) {
    if (s.observations.empty())
      throw_data("subject '" + s.id + "' has no observations");
    for (std::size_t j = 1; j < s.observations.size(); ++j) {
      if (!(s.observations[j].age > s.observations[j - 1].age))
        throw_data("subject '" + s.id + "': ages must be strictly increasing");
    }
    if (s.exposures.size() != M)
      throw_data("subject '" + s.id + "': expected " + std::to_string(M) +
                 " exposures, found " + std::to_string(s.exposures.size()));
    if (s.covariates.size() != p)
      throw_data("subject '" + s.id + "': expected " + std::to_string(p) +
                 " covariates, found " + std::to_string(s.covariates.size()));
  }
  if (lod && lod->size() != num_exposures())
    throw_data("LOD vector length does not match the number of exposures");
  if (detect_flags) {
    if (detect_flags->size() != num_exposures())
      throw_data("detection flags do not match the number of exposures");
    for (const auto& row : *detect_flags)
      if (row.size() != n()) throw_data("detection flags do not match the number of subjects");
  }
}

int quartile_index(double value, double q1, double q2, double q3) {
  if (value <= q1) return 0;
  if (value <= q2) return 1;
  if (value <= q3) return 2;
  return 3;
}

ExposurePanel filter_by_detection(const ExposurePanel& panel, double min_detect_frac) {
  if (!panel.detect_flags)
    throw_usage("detection filtering requested without flags");
  if (!(min_detect_frac >= 0.0 && min_detect_frac <= 1.0))
    throw_usage("min_detect_frac must lie in [0, 1]");

  const auto& flags = *panel.detect_flags;
  std::vector<std::size_t> keep;
  for (std::size_t m = 0; m < panel.num_exposures(); ++m) {
    const auto detected = std::count(flags[m].begin(), flags[m].end(), true);
    const double frac = panel.n() == 0 ? 1.0
                                       : static_cast<double>(detected) /
                                             static_cast<double>(panel.n());
    if (frac >= min_detect_frac) keep.push_back(m);
  }
  if (keep.size() == panel.num_exposures()) return panel;

  ExposurePanel out = panel;
  out.exposure_names.clear();
  std::vector<std::vector<bool>> kept_flags;
  std::vector<double> kept_lod, kept_scale;
  for (std::size_t m : keep) {
    out.exposure_names.push_back(panel.exposure_names[m]);
    kept_flags.push_back(flags[m]);
    if (panel.lod) kept_lod.push_back((*panel.lod)[m]);
    if (panel.scale_constants) kept_scale.push_back((*panel.scale_constants)[m]);
  }
  out.detect_flags = std::move(kept_flags);
  if (panel.lod) out.lod = std::move(kept_lod);
  if (panel.scale_constants) out.scale_constants = std::move(kept_scale);
  for (std::size_t i = 0; i < panel.n(); ++i) {
    Eigen::VectorXd z(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k)
      z[static_cast<Eigen::Index>(k)] =
          panel.subjects[i].exposures[static_cast<Eigen::Index>(keep[k])];
    out.subjects[i].exposures = std::move(z);
  }
  return out;
}

ExposurePanel impute_below_lod(const ExposurePanel& panel) {
  ExposurePanel out = panel;
  if (!panel.detect_flags) return out;
  const auto& flags = *panel.detect_flags;
  for (std::size_t m = 0; m < panel.num_exposures(); ++m) {
    for (std::size_t i = 0; i < panel.n(); ++i) {
      if (flags[m][i]) continue;
      const double lod = panel.lod ? (*panel.lod)[m] : std::nan("");
      if (!std::isfinite(lod) || lod <= 0.0)
        throw_data("chemical '" + panel.exposure_names[m] +
                   "' has below-LOD values but no limit of detection");
      out.subjects[i].exposures[static_cast<Eigen::Index>(m)] = lod / std::sqrt(2.0);
    }
  }
  return out;
}

ExposurePanel scale_by_2sd(const ExposurePanel& panel) {
  ExposurePanel out = panel;
  std::vector<double> constants(panel.num_exposures(), 1.0);
  for (std::size_t m = 0; m < panel.num_exposures(); ++m) {
    const auto column = panel.exposure_column(m);
    for (double v : column)
      if (!std::isfinite(v))
        throw_data("chemical '" + panel.exposure_names[m] + "' has missing values");
    const double sd = stats::sample_sd(column);
    if (!(sd > 0.0))
      throw_data("chemical '" + panel.exposure_names[m] + "' has zero variance");
    constants[m] = 2.0 * sd;
    for (auto& s : out.subjects) s.exposures[static_cast<Eigen::Index>(m)] /= constants[m];
  }
  if (panel.scale_constants) {
    for (std::size_t m = 0; m < constants.size(); ++m)
      constants[m] *= (*panel.scale_constants)[m];
  }
  out.scale_constants = std::move(constants);
  return out;
}

QuantizedExposures quantize(const Eigen::MatrixXd& values) {
  const auto n = values.rows();
  const auto M = values.cols();
  if (n < 4) throw_data("quantization needs at least 4 subjects");
  QuantizedExposures out;
  out.q.resize(n, M);
  out.breakpoints.resize(M, 3);
  std::vector<double> sorted(static_cast<std::size_t>(n));
  for (Eigen::Index m = 0; m < M; ++m) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double v = values(i, m);
      if (!std::isfinite(v))
        throw_data("exposure column " + std::to_string(m + 1) + " has missing values");
      sorted[static_cast<std::size_t>(i)] = v;
    }
    std::sort(sorted.begin(), sorted.end());
    const double q1 = stats::quantile_sorted(sorted, 0.25);
    const double q2 = stats::quantile_sorted(sorted, 0.50);
    const double q3 = stats::quantile_sorted(sorted, 0.75);
    out.breakpoints.row(m) << q1, q2, q3;
    for (Eigen::Index i = 0; i < n; ++i)
      out.q(i, m) = quartile_index(values(i, m), q1, q2, q3);
  }
  return out;
}

QuantizedExposures quantize(const ExposurePanel& panel) {
  const auto n = static_cast<Eigen::Index>(panel.n());
  const auto M = static_cast<Eigen::Index>(panel.num_exposures());
  Eigen::MatrixXd values(n, M);
  for (Eigen::Index i = 0; i < n; ++i)
    values.row(i) = panel.subjects[static_cast<std::size_t>(i)].exposures.transpose();
  try {
    return quantize(values);
  } catch (const Error& e) {
    // Rename the offending column for the caller.
    for (Eigen::Index m = 0; m < M; ++m)
      if (!values.col(m).allFinite())
        throw_data("chemical '" + panel.exposure_names[static_cast<std::size_t>(m)] +
                   "' has missing values");
    throw;
  }
}

PreprocessResult preprocess(const ExposurePanel& input, const PreprocessOptions& options) {
  input.validate();
  std::vector<ChemicalReport> report(input.num_exposures());
  for (std::size_t m = 0; m < input.num_exposures(); ++m) {
    report[m].name = input.exposure_names[m];
    if (input.detect_flags && input.n() > 0) {
      const auto& f = (*input.detect_flags)[m];
      report[m].detection_fraction =
          static_cast<double>(std::count(f.begin(), f.end(), true)) /
          static_cast<double>(input.n());
      report[m].imputed = static_cast<std::size_t>(std::count(f.begin(), f.end(), false));
    }
  }

  ExposurePanel panel = input;
  if (options.detect_filter) panel = filter_by_detection(panel, options.min_detect_frac);
  if (options.lod_impute) panel = impute_below_lod(panel);
  if (options.scale) panel = scale_by_2sd(panel);
  QuantizedExposures quantized = quantize(panel);

  std::size_t k = 0;
  for (auto& entry : report) {
    if (k < panel.num_exposures() && panel.exposure_names[k] == entry.name) {
      entry.retained = true;
      if (!options.lod_impute) entry.imputed = 0;
      if (panel.scale_constants) entry.scale_constant = (*panel.scale_constants)[k];
      for (int c = 0; c < 3; ++c)
        entry.breakpoints[c] = quantized.breakpoints(static_cast<Eigen::Index>(k), c);
      ++k;
    } else {
      entry.retained = false;
      entry.imputed = 0;
    }
  }
  return {std::move(panel), std::move(quantized), std::move(report)};
}

}  // namespace bvcqr
