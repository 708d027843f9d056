#include "bvcqr/posterior.hpp"

#include <algorithm>
#include <cmath>

#include "bvcqr/error.hpp"
#include "bvcqr/stats.hpp"

namespace bvcqr {

ParameterSummary summarize(std::span<const double> draws) {
  if (draws.empty()) throw_usage("cannot summarize an empty set of draws");
  std::vector<double> sorted(draws.begin(), draws.end());
  std::sort(sorted.begin(), sorted.end());
  ParameterSummary s;
  s.mean = stats::mean(draws);
  s.sd = stats::sample_sd(draws);
  s.q025 = stats::quantile_sorted(sorted, 0.025);
  s.q50 = stats::quantile_sorted(sorted, 0.5);
  s.q975 = stats::quantile_sorted(sorted, 0.975);
  s.significant = s.q025 > 0.0 || s.q975 < 0.0;
  return s;
}

const char* to_string(EffectLevel level) {
  return level == EffectLevel::Baseline ? "baseline" : "trajectory";
}

const EffectRow& EffectSummary::find(const std::string& chemical, EffectLevel level) const {
  for (const auto& r : rows)
    if (r.chemical == chemical && r.level == level) return r;
  throw_usage("no effect row for '" + chemical + "' (" + to_string(level) + ")");
}

EffectSummary summarize_effects(const PosteriorDraws& draws,
                                std::vector<std::string> chemical_names) {
  std::size_t total = 0;
  for (const auto& c : draws.chains) total += static_cast<std::size_t>(c.rows());
  if (total < 100) throw_usage("effect summaries need at least 100 retained draws");

  std::size_t M = 0;
  while (true) {
    const std::string name = "theta1[" + std::to_string(M + 1) + "]";
    if (std::find(draws.names.begin(), draws.names.end(), name) == draws.names.end()) break;
    ++M;
  }
  if (chemical_names.empty())
    for (std::size_t m = 0; m < M; ++m) chemical_names.push_back(std::to_string(m + 1));
  if (chemical_names.size() != M) throw_usage("chemical name count does not match the draws");

  EffectSummary out;
  for (int level = 1; level <= 2; ++level) {
    for (std::size_t m = 0; m < M; ++m) {
      const auto k = draws.index_of("theta" + std::to_string(level) + "[" + std::to_string(m + 1) + "]");
      const auto column = draws.pooled_column(k);
      out.rows.push_back({chemical_names[m],
                          level == 1 ? EffectLevel::Baseline : EffectLevel::Trajectory,
                          summarize(column), std::nullopt});
    }
  }
  return out;
}

void attach_shrinkage_ratio(EffectSummary& summary, const EffectSummary& ablation) {
  if (ablation.rows.size() != summary.rows.size())
    throw_usage("ablation summary is not conformable");
  for (std::size_t k = 0; k < summary.rows.size(); ++k) {
    const double denom = ablation.rows[k].summary.sd;
    if (denom > 0.0) summary.rows[k].shrinkage_ratio = summary.rows[k].summary.sd / denom;
  }
}

LevelEval regress_estimate_on_truth(std::span<const double> estimate, std::span<const double> truth) {
  if (estimate.size() != truth.size() || truth.empty())
    throw_data("estimated and true mixture effects are not conformable");
  const double n = static_cast<double>(truth.size());
  const double mx = stats::mean(truth), my = stats::mean(estimate);
  double sxx = 0.0, sxy = 0.0, syy = 0.0, se = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double dx = truth[i] - mx, dy = estimate[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
    se += (estimate[i] - truth[i]) * (estimate[i] - truth[i]);
  }
  LevelEval out;
  out.rmse = std::sqrt(se / n);
  if (!(sxx > 0.0)) {
    out.slope_defined = false;
    out.slope = std::nan("");
    out.intercept = my;
    out.r_squared = 0.0;
    return out;
  }
  out.slope = sxy / sxx;
  out.intercept = my - out.slope * mx;
  out.r_squared = syy > 0.0 ? std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0) : 1.0;
  return out;
}

HEvalReport evaluate_h(const Eigen::VectorXd& h_hat, const Eigen::VectorXd& h_true) {
  if (h_hat.size() != h_true.size() || h_true.size() % 2 != 0)
    throw_data("estimated h (" + std::to_string(h_hat.size()) + ") and true h (" +
               std::to_string(h_true.size()) + ") are not conformable");
  const auto n = static_cast<std::size_t>(h_true.size() / 2);
  std::span<const double> est(h_hat.data(), h_hat.size()), tru(h_true.data(), h_true.size());
  HEvalReport report;
  report.h1 = regress_estimate_on_truth(est.subspan(0, n), tru.subspan(0, n));
  report.h2 = regress_estimate_on_truth(est.subspan(n, n), tru.subspan(n, n));
  return report;
}

Eigen::VectorXd posterior_mean_h(const PosteriorDraws& draws) {
  std::vector<Eigen::Index> cols;
  for (int level = 1; level <= 2; ++level) {
    for (std::size_t i = 0;; ++i) {
      const std::string name = "h" + std::to_string(level) + "[" + std::to_string(i + 1) + "]";
      auto it = std::find(draws.names.begin(), draws.names.end(), name);
      if (it == draws.names.end()) break;
      cols.push_back(static_cast<Eigen::Index>(it - draws.names.begin()));
    }
  }
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cols.size()));
  double count = 0.0;
  for (const auto& c : draws.chains) {
    for (Eigen::Index r = 0; r < c.rows(); ++r)
      for (std::size_t k = 0; k < cols.size(); ++k) mean[static_cast<Eigen::Index>(k)] += c(r, cols[k]);
    count += static_cast<double>(c.rows());
  }
  if (count > 0) mean /= count;
  return mean;
}

HEvalReport evaluate_h(const PosteriorDraws& draws, const GroundTruth& truth) {
  return evaluate_h(posterior_mean_h(draws), truth.h);
}

std::pair<ParameterSummary, ParameterSummary> global_trend(const PosteriorDraws& draws) {
  const auto g1 = draws.pooled_column(draws.index_of("beta[1]"));
  const auto g2 = draws.pooled_column(draws.index_of("beta[2]"));
  return {summarize(g1), summarize(g2)};
}

SelectionCounts selection_counts(const EffectSummary& summary, const Eigen::VectorXd& theta1_true,
                                 const Eigen::VectorXd& theta2_true) {
  const auto M = static_cast<std::size_t>(theta1_true.size());
  if (summary.rows.size() != 2 * M || theta2_true.size() != theta1_true.size())
    throw_data("true effects are not conformable with the effect summary");
  SelectionCounts out;
  double null_width = 0.0, width = 0.0;
  for (std::size_t k = 0; k < summary.rows.size(); ++k) {
    const double truth = k < M ? theta1_true[static_cast<Eigen::Index>(k)]
                               : theta2_true[static_cast<Eigen::Index>(k - M)];
    const auto& s = summary.rows[k].summary;
    width += s.width();
    if (truth != 0.0) {
      ++out.planted;
      out.planted_significant += s.significant ? 1 : 0;
    } else {
      ++out.nulls;
      out.null_significant += s.significant ? 1 : 0;
      null_width += s.width();
    }
  }
  out.mean_width = width / static_cast<double>(summary.rows.size());
  out.mean_null_width = out.nulls ? null_width / static_cast<double>(out.nulls) : 0.0;
  return out;
}

}  // namespace bvcqr
