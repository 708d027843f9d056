#pragma once

#include <filesystem>
#include <json.hpp>
#include <string>

#include "bvcqr/design.hpp"
#include "bvcqr/model.hpp"
#include "bvcqr/preprocess.hpp"
#include "bvcqr/sampler.hpp"
#include "bvcqr/simulate.hpp"

namespace bvcqr {

using Json = nlohmann::ordered_json;

/// Everything that controls one fit. Loaded from a JSON config file with
/// the sections `hyper`, `sampler`, `design`, `preprocess` and
/// `parameterization`; unknown keys are rejected.
struct FitConfig {
  Hyperparameters hyper;
  SamplerConfig sampler;
  DesignOptions design;
  PreprocessOptions preprocess;
  Parameterization parameterization;
  bool seed_given = false;

  void validate() const;
};

FitConfig fit_config_from_json(const Json& j);
FitConfig load_fit_config(const std::filesystem::path& path);
Json to_json(const FitConfig& config);
Json to_json(const Hyperparameters& hyper);
Json to_json(const SamplerConfig& sampler);

/// Scenario files use the keys of `to_json(Scenario)`; `base` (1 or 2)
/// starts from a built-in scenario, `theta1`/`theta2` accept either a
/// dense array or an object mapping 1-based chemical index to value.
Scenario scenario_from_json(const Json& j);
Scenario load_scenario(const std::filesystem::path& path);
Json to_json(const Scenario& scenario);

Json to_json(const GroundTruth& truth);
GroundTruth ground_truth_from_json(const Json& j);

Json parse_json_file(const std::filesystem::path& path);

}  // namespace bvcqr
