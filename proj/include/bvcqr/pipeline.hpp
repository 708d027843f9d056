#pragma once

#include <memory>
#include <string>
#include <vector>

#include "bvcqr/config.hpp"
#include "bvcqr/diagnostics.hpp"
#include "bvcqr/posterior.hpp"

namespace bvcqr {

/// R-hat ceiling applied to theta, phi, sigma^2 and the global trend.
inline constexpr double kRhatGate = 1.05;

struct FitResult {
  PreprocessResult preprocessed;
  std::unique_ptr<QuantizedDesign> design;  // stable address for the model
  Eigen::Index x_rank = 0;
  PosteriorDraws draws;
  DiagnosticsReport diagnostics;
  EffectSummary effects;
  bool unreliable = false;
  std::vector<std::string> reliability_notes;
  std::vector<std::string> warnings;
};

/// Coordinates covered by the reliability gate.
std::vector<std::string> gated_parameters(const PosteriorDraws& draws);

/// Applies the divergence and R-hat gates; returns the failures.
std::vector<std::string> reliability_failures(const PosteriorDraws& draws,
                                              const DiagnosticsReport& diagnostics);

/// preprocess -> design -> sample -> summarize.
FitResult fit_panel(const ExposurePanel& panel, const FitConfig& config);

struct ScenarioRun {
  SimulatedData data;
  FitResult fit;
  HEvalReport heval;
  SelectionCounts selection;
};

/// Generates the scenario and fits it with the simulated-data pipeline
/// (no detection filter, imputation or scaling).
ScenarioRun run_scenario(const Scenario& scenario, FitConfig config);

/// Acceptance bands for h recovery.
struct RecoveryBands {
  double max_abs_intercept = 0.35;
  double slope_low = 0.90;
  double slope_high = 1.10;
  double min_r_squared = 0.95;
  double max_rmse = 0.50;

  /// Widens every tolerance by `factor` around its ideal value.
  RecoveryBands widened(double factor) const;
  bool pass(const LevelEval& e) const;
};

}  // namespace bvcqr
