#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bvcqr/config.hpp"
#include "bvcqr/pipeline.hpp"

namespace bvcqr {

namespace fs = std::filesystem;

inline constexpr const char* kManifestFile = "manifest.json";

struct SimulateOptions {
  std::optional<int> scenario;
  std::optional<fs::path> scenario_file;
  std::optional<std::uint64_t> seed;
  fs::path out_dir;
};

struct FitOptions {
  fs::path data;
  std::optional<fs::path> lod;
  std::optional<fs::path> config_file;
  std::optional<Json> config;  // full config (replay); takes precedence over config_file
  std::optional<std::uint64_t> seed;
  std::optional<int> iterations;
  std::optional<int> warmup;
  std::optional<int> chains;
  bool no_detect_filter = false;
  bool no_lod_impute = false;
  bool no_scale = false;
  bool no_horseshoe = false;
  bool dump_design = false;
  bool dump_terms = false;
  fs::path out_dir;
};

struct ReproduceOptions {
  bool quick = false;
  std::uint64_t seed = 7;
  std::optional<int> chains;
  fs::path out_dir;
};

/// One row of the recovery table.
struct TableRow {
  int scenario = 0;
  bool horseshoe = true;
  EffectLevel level = EffectLevel::Baseline;
  std::optional<LevelEval> eval;  // empty when the run failed
  bool pass = false;
};

struct ReproduceReport {
  std::vector<TableRow> rows;
  std::vector<std::string> failures;
  bool all_pass = false;
};

/// Resolves config file, replay echo and flag overrides (flags win).
FitConfig resolve_fit_config(const FitOptions& options);

void cmd_simulate(const SimulateOptions& options, std::ostream& log);
/// Returns 0, or 3 when the fit is flagged unreliable (outputs are still written).
int cmd_fit(const FitOptions& options, std::ostream& log);
void cmd_summarize(const fs::path& fit_dir, std::ostream& out);
HEvalReport cmd_eval(const fs::path& fit_dir, const fs::path& truth_path, std::ostream& log);
ReproduceReport cmd_reproduce(const ReproduceOptions& options, std::ostream& log);
/// Re-runs the command recorded in a manifest into `out_dir`.
int cmd_replay(const fs::path& manifest_path, const fs::path& out_dir, std::ostream& log);

/// Fixed-width results table, one row per scenario, prior and level.
std::string format_table(const ReproduceReport& report);

/// Parses arguments, dispatches, and maps errors to the exit-code contract.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

std::string version();

}  // namespace bvcqr
