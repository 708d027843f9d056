#include "bvcqr/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "bvcqr/error.hpp"

namespace bvcqr {

std::vector<std::string> gated_parameters(const PosteriorDraws& draws) {
  std::vector<std::string> out;
  for (const auto& name : draws.names) {
    if (name.rfind("theta", 0) == 0 || name == "phi1_sq" || name == "phi2_sq" ||
        name == "sigma_sq" || name == "beta[1]" || name == "beta[2]")
      out.push_back(name);
  }
  return out;
}

std::vector<std::string> reliability_failures(const PosteriorDraws& draws,
                                              const DiagnosticsReport& diagnostics) {
  std::vector<std::string> failures;
  if (draws.unreliable())
    failures.push_back("divergent transitions " + std::to_string(draws.divergent_count()) +
                       " exceed " +
                       std::to_string(static_cast<int>(100 * draws.config.divergence_tolerance)) +
                       "% of post-warmup draws");
  for (const auto& name : gated_parameters(draws)) {
    const auto& d = diagnostics.at(name);
    if (!d.rhat) continue;
    const double split = split_rhat(extract_series(draws, draws.index_of(name)));
    const double worst = std::max(*d.rhat, split);
    if (!(worst <= kRhatGate))
      failures.push_back("R-hat " + std::to_string(worst) + " for " + name);
  }
  return failures;
}

FitResult fit_panel(const ExposurePanel& panel, const FitConfig& config) {
  config.validate();
  FitResult r;
  r.preprocessed = preprocess(panel, config.preprocess);
  r.design = std::make_unique<QuantizedDesign>(
      build_design(r.preprocessed.panel, r.preprocessed.quantized, config.design));
  r.x_rank = design_rank(r.design->X);
  if (r.x_rank < r.design->X.cols())
    r.warnings.push_back("fixed-effect design is rank deficient (rank " +
                         std::to_string(r.x_rank) + " of " +
                         std::to_string(r.design->X.cols()) + "); beta posterior may be improper");

  const Model model(*r.design, config.hyper, config.parameterization);
  r.draws = sample(model, config.sampler);
  r.diagnostics = diagnose(r.draws);
  for (const auto& w : r.diagnostics.warnings) r.warnings.push_back(w);
  r.effects = summarize_effects(r.draws, r.design->exposure_names);
  r.reliability_notes = reliability_failures(r.draws, r.diagnostics);
  r.unreliable = !r.reliability_notes.empty();
  return r;
}

ScenarioRun run_scenario(const Scenario& scenario, FitConfig config) {
  config.preprocess.detect_filter = false;
  config.preprocess.lod_impute = false;
  config.preprocess.scale = false;
  config.design.baseline_age = scenario.baseline_age;
  config.design.age_divisor = scenario.age_divisor;
  ScenarioRun run;
  run.data = generate(scenario);
  run.fit = fit_panel(run.data.panel, config);
  run.heval = evaluate_h(run.fit.draws, run.data.truth);
  run.selection = selection_counts(run.fit.effects, run.data.truth.theta1, run.data.truth.theta2);
  return run;
}

RecoveryBands RecoveryBands::widened(double factor) const {
  RecoveryBands b = *this;
  b.max_abs_intercept *= factor;
  b.slope_low = 1.0 - (1.0 - slope_low) * factor;
  b.slope_high = 1.0 + (slope_high - 1.0) * factor;
  b.min_r_squared = 1.0 - (1.0 - min_r_squared) * factor;
  b.max_rmse *= factor;
  return b;
}

bool RecoveryBands::pass(const LevelEval& e) const {
  return e.slope_defined && std::abs(e.intercept) <= max_abs_intercept && e.slope >= slope_low &&
         e.slope <= slope_high && e.r_squared >= min_r_squared && e.rmse <= max_rmse;
}

}  // namespace bvcqr
