#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bvcqr/sampler.hpp"
#include "bvcqr/simulate.hpp"

namespace bvcqr {

struct ParameterSummary {
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double q50 = 0.0;
  double q975 = 0.0;
  bool significant = false;  // 95% equal-tailed interval excludes zero

  double width() const { return q975 - q025; }
};

ParameterSummary summarize(std::span<const double> draws);

enum class EffectLevel { Baseline, Trajectory };
const char* to_string(EffectLevel level);

struct EffectRow {
  std::string chemical;
  EffectLevel level = EffectLevel::Baseline;
  ParameterSummary summary;
  std::optional<double> shrinkage_ratio;  // sd / sd under the ablation prior
};

/// Rows ordered: all baseline (theta1) effects, then all trajectory (theta2).
struct EffectSummary {
  std::vector<EffectRow> rows;

  const EffectRow& find(const std::string& chemical, EffectLevel level) const;
};

/// Summaries of theta1/theta2 pooled across chains. `chemical_names`
/// defaults to 1-based indices.
EffectSummary summarize_effects(const PosteriorDraws& draws,
                                std::vector<std::string> chemical_names = {});

/// Fills shrinkage_ratio from an ablation fit of the same data.
void attach_shrinkage_ratio(EffectSummary& summary, const EffectSummary& ablation);

struct LevelEval {
  double intercept = 0.0;
  double slope = 0.0;
  double r_squared = 0.0;
  double rmse = 0.0;
  bool slope_defined = true;
};

/// Regression of estimated on true mixture effects, per level.
struct HEvalReport {
  LevelEval h1;
  LevelEval h2;
};

LevelEval regress_estimate_on_truth(std::span<const double> estimate, std::span<const double> truth);

/// `h_hat` and `h_true` use the (h_1 block, h_2 block) ordering.
HEvalReport evaluate_h(const Eigen::VectorXd& h_hat, const Eigen::VectorXd& h_true);
HEvalReport evaluate_h(const PosteriorDraws& draws, const GroundTruth& truth);

/// Posterior mean of the h coordinates.
Eigen::VectorXd posterior_mean_h(const PosteriorDraws& draws);

/// Summaries of the global trend (gamma1 = beta[1], gamma2 = beta[2]).
std::pair<ParameterSummary, ParameterSummary> global_trend(const PosteriorDraws& draws);

struct SelectionCounts {
  std::size_t planted = 0;
  std::size_t planted_significant = 0;
  std::size_t nulls = 0;
  std::size_t null_significant = 0;
  double mean_null_width = 0.0;
  double mean_width = 0.0;
};

/// Compares significance flags with the true sparsity pattern.
SelectionCounts selection_counts(const EffectSummary& summary, const Eigen::VectorXd& theta1_true,
                                 const Eigen::VectorXd& theta2_true);

}  // namespace bvcqr
