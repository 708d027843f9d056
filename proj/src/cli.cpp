#include "bvcqr/cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "bvcqr/error.hpp"
#include "bvcqr/outputs.hpp"
#include "bvcqr/panel_io.hpp"
#include "bvcqr/stats.hpp"

#ifndef BVCQR_VERSION
#define BVCQR_VERSION "0.0.0"
#endif

namespace bvcqr {

std::string version() { return BVCQR_VERSION; }

namespace {

using Clock = std::chrono::steady_clock;

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string content_hash(std::string_view bytes) { return hex64(stats::fnv1a(bytes)); }

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw_usage("cannot create output directory '" + dir.string() + "'");
}

Json read_json(const fs::path& path, const std::string& what) {
  if (!fs::exists(path)) throw_usage(what + " '" + path.string() + "' does not exist");
  return parse_json_file(path);
}

// Collects the manifest fields while a command runs.
class Manifest {
 public:
  explicit Manifest(std::string command) : start_(Clock::now()) {
    j_["command"] = std::move(command);
    j_["version"] = version();
  }

  Json& operator[](const char* key) { return j_[key]; }

  std::string input(const std::string& name, const fs::path& path) {
    const std::string bytes = read_file(path);
    const std::string hash = content_hash(bytes);
    inputs_[name] = {{"path", fs::absolute(path).lexically_normal().string()},
                     {"fnv1a", hash},
                     {"bytes", bytes.size()}};
    return hash;
  }

  void write(const fs::path& dir, const std::string& name, std::string_view contents) {
    write_file(dir / name, contents);
    outputs_.push_back(name);
  }

  void finish(const fs::path& dir) {
    j_["inputs"] = inputs_;
    j_["outputs"] = outputs_;
    j_["wall_clock_seconds"] =
        std::chrono::duration<double>(Clock::now() - start_).count();
    write_file(dir / kManifestFile, dump(j_));
  }

 private:
  Json j_ = Json::object();
  Json inputs_ = Json::object();
  std::vector<std::string> outputs_;
  Clock::time_point start_;
};

void check_input_hash(const Json& manifest, const std::string& name) {
  const auto& in = manifest.at("inputs").at(name);
  const fs::path path = in.at("path").get<std::string>();
  if (!fs::exists(path)) throw_usage("recorded input '" + path.string() + "' no longer exists");
  if (content_hash(read_file(path)) != in.at("fnv1a").get<std::string>())
    throw_data("recorded input '" + path.string() + "' has changed since the manifest was written");
}

template <typename Write>
std::string to_text(Write&& w) {
  std::ostringstream os;
  w(os);
  return os.str();
}

void write_dense_triplets(const Eigen::MatrixXd& m, std::ostream& out) {
  out << "row,col,value\n";
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      if (m(r, c) != 0.0) out << r << ',' << c << ',' << format_double(m(r, c)) << '\n';
}

Json terms_at(const Model& model, const Eigen::VectorXd& flat) {
  return to_json(model.log_density_terms(model.unflatten(flat)));
}

std::string fmt(double v, int precision = 3) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

}  // namespace

FitConfig resolve_fit_config(const FitOptions& o) {
  FitConfig c;
  if (o.config)
    c = fit_config_from_json(*o.config);
  else if (o.config_file)
    c = load_fit_config(*o.config_file);
  if (o.seed) {
    c.sampler.seed = *o.seed;
    c.seed_given = true;
  }
  if (o.iterations) c.sampler.iterations = *o.iterations;
  if (o.warmup) c.sampler.warmup = *o.warmup;
  if (o.chains) c.sampler.chains = *o.chains;
  if (o.no_detect_filter) c.preprocess.detect_filter = false;
  if (o.no_lod_impute) c.preprocess.lod_impute = false;
  if (o.no_scale) c.preprocess.scale = false;
  if (o.no_horseshoe) c.hyper.horseshoe = false;
  if (!c.seed_given) throw_usage("a seed is required: pass --seed or set sampler.seed in the config");
  c.validate();
  return c;
}

void cmd_simulate(const SimulateOptions& o, std::ostream& log) {
  if (o.scenario.has_value() == o.scenario_file.has_value())
    throw_usage("give exactly one of --scenario (valid ids are 1, 2) or --scenario-file");
  if (!o.seed) throw_usage("--seed is required for simulate");

  Manifest manifest("simulate");
  Scenario scenario;
  Json options{{"seed", *o.seed}};
  if (o.scenario) {
    scenario = builtin_scenario(*o.scenario);
    options["scenario"] = *o.scenario;
  } else {
    manifest.input("scenario_file", *o.scenario_file);
    scenario = load_scenario(*o.scenario_file);
    options["scenario_file"] = fs::absolute(*o.scenario_file).lexically_normal().string();
  }
  scenario.seed = *o.seed;
  const SimulatedData data = generate(scenario);

  ensure_dir(o.out_dir);
  const std::string panel = to_text([&](std::ostream& os) { write_panel_csv(data.panel, os); });
  manifest.write(o.out_dir, "panel.csv", panel);

  Json truth = to_json(data.truth);
  truth["panel_fnv1a"] = content_hash(panel);
  truth["n"] = data.panel.n();
  truth["M"] = data.panel.num_exposures();
  manifest.write(o.out_dir, "truth.json", dump(truth));

  manifest["options"] = options;
  manifest["seed"] = *o.seed;
  manifest["config"] = to_json(scenario);
  manifest.finish(o.out_dir);
  log << "simulated scenario " << scenario.id << ": n=" << data.panel.n()
      << ", M=" << data.panel.num_exposures() << ", " << data.panel.num_observations()
      << " observations -> " << o.out_dir.string() << '\n';
}

int cmd_fit(const FitOptions& o, std::ostream& log) {
  const FitConfig config = resolve_fit_config(o);
  Manifest manifest("fit");
  manifest.input("data", o.data);
  if (o.lod) manifest.input("lod", *o.lod);
  if (o.config_file && !o.config) manifest.input("config", *o.config_file);

  const ExposurePanel panel = read_panel_csv(o.data, o.lod);
  ensure_dir(o.out_dir);
  const FitResult fit = fit_panel(panel, config);

  manifest.write(o.out_dir, "draws.csv",
                 to_text([&](std::ostream& os) { write_draws_csv(fit.draws, os); }));
  Json dm = draws_manifest(fit.draws);
  dm["exposure_names"] = fit.design->exposure_names;
  dm["covariate_names"] = fit.design->covariate_names;
  dm["subject_ids"] = fit.design->subject_ids;
  dm["config"] = to_json(config);
  manifest.write(o.out_dir, "draws_manifest.json", dump(dm));
  manifest.write(o.out_dir, "effects.csv",
                 to_text([&](std::ostream& os) { write_effects_csv(fit.effects, os); }));

  Json diag = to_json(fit.diagnostics);
  diag["unreliable"] = fit.unreliable;
  diag["reliability_failures"] = fit.reliability_notes;
  diag["rhat_gate"] = kRhatGate;
  diag["x_rank"] = fit.x_rank;
  diag["warnings"] = fit.warnings;
  manifest.write(o.out_dir, "diagnostics.json", dump(diag));
  manifest.write(o.out_dir, "preprocess.json", dump(to_json(fit.preprocessed.report)));

  if (o.dump_design) {
    const auto& d = *fit.design;
    manifest.write(o.out_dir, "design_X.csv",
                   to_text([&](std::ostream& os) { write_dense_triplets(d.X, os); }));
    manifest.write(o.out_dir, "design_W.csv",
                   to_text([&](std::ostream& os) { d.W.write_triplets(os); }));
    manifest.write(o.out_dir, "design_U.csv",
                   to_text([&](std::ostream& os) { d.U.write_triplets(os); }));
    manifest.write(o.out_dir, "design_Y.csv",
                   to_text([&](std::ostream& os) { write_dense_triplets(d.Y, os); }));
    manifest.write(o.out_dir, "design_q.csv",
                   to_text([&](std::ostream& os) { write_dense_triplets(d.q, os); }));
  }
  if (o.dump_terms) {
    const Model model(*fit.design, config.hyper, config.parameterization);
    const Eigen::MatrixXd pooled = fit.draws.pooled();
    const Eigen::VectorXd mean = pooled.colwise().mean().transpose();
    const Eigen::VectorXd last = fit.draws.chains.front().bottomRows(1).transpose();
    manifest.write(o.out_dir, "terms.json",
                   dump(Json{{"posterior_mean", terms_at(model, mean)},
                             {"last_draw_chain1", terms_at(model, last)}}));
  }

  Json options{{"data", fs::absolute(o.data).lexically_normal().string()},
               {"dump_design", o.dump_design},
               {"dump_terms", o.dump_terms}};
  if (o.lod) options["lod"] = fs::absolute(*o.lod).lexically_normal().string();
  manifest["options"] = options;
  manifest["seed"] = config.sampler.seed;
  manifest["config"] = to_json(config);
  manifest["unreliable"] = fit.unreliable;
  manifest.finish(o.out_dir);

  const auto [g1, g2] = global_trend(fit.draws);
  std::size_t significant = 0;
  for (const auto& r : fit.effects.rows) significant += r.summary.significant ? 1 : 0;
  log << "fit: n=" << fit.design->n() << ", M=" << fit.design->num_exposures() << ", "
      << fit.draws.num_chains() << " chains x " << fit.draws.draws_per_chain() << " draws\n"
      << "  gamma1 " << fmt(g1.mean) << " [" << fmt(g1.q025) << ", " << fmt(g1.q975) << "]"
      << "  gamma2 " << fmt(g2.mean) << " [" << fmt(g2.q025) << ", " << fmt(g2.q975) << "]\n"
      << "  significant effects: " << significant << " of " << fit.effects.rows.size() << '\n'
      << "  divergent: " << fit.diagnostics.divergent << " of " << fit.diagnostics.transitions
      << '\n';
  for (const auto& w : fit.warnings) log << "  warning: " << w << '\n';
  if (fit.unreliable) {
    log << "  UNRELIABLE:";
    for (const auto& n : fit.reliability_notes) log << ' ' << n << ';';
    log << '\n';
    return static_cast<int>(ErrorKind::Numerical);
  }
  return 0;
}

void cmd_summarize(const fs::path& fit_dir, std::ostream& out) {
  const Json dm = read_json(fit_dir / "draws_manifest.json", "draws manifest");
  std::ifstream in(fit_dir / "draws.csv");
  if (!in) throw_usage("no draws.csv in '" + fit_dir.string() + "'");
  const PosteriorDraws draws = read_draws_csv(in);
  const auto exposures = dm.at("exposure_names").get<std::vector<std::string>>();
  const EffectSummary effects = summarize_effects(draws, exposures);
  const auto [g1, g2] = global_trend(draws);
  const DiagnosticsReport diag = diagnose(draws, gated_parameters(draws));

  out << "chains " << draws.num_chains() << ", draws per chain " << draws.draws_per_chain()
      << ", divergent " << draws.divergent_count() << '\n';
  out << "gamma1 " << fmt(g1.mean) << " (" << fmt(g1.q025) << ", " << fmt(g1.q975) << ")\n";
  out << "gamma2 " << fmt(g2.mean) << " (" << fmt(g2.q025) << ", " << fmt(g2.q975) << ")\n";
  double max_rhat = 0.0, min_ess = std::numeric_limits<double>::infinity();
  for (const auto& p : diag.parameters) {
    if (p.rhat) max_rhat = std::max(max_rhat, *p.rhat);
    min_ess = std::min(min_ess, p.ess_bulk);
  }
  if (draws.num_chains() > 1) out << "max R-hat (gated) " << fmt(max_rhat) << '\n';
  out << "min bulk ESS (gated) " << fmt(min_ess, 0) << "\n\n";
  out << std::left << std::setw(16) << "chemical" << std::setw(12) << "level" << std::right
      << std::setw(9) << "mean" << std::setw(9) << "q2.5" << std::setw(9) << "q97.5" << "  sig\n";
  for (const auto& r : effects.rows) {
    out << std::left << std::setw(16) << r.chemical << std::setw(12) << to_string(r.level)
        << std::right << std::setw(9) << fmt(r.summary.mean) << std::setw(9)
        << fmt(r.summary.q025) << std::setw(9) << fmt(r.summary.q975)
        << (r.summary.significant ? "  *" : "") << '\n';
  }
}

HEvalReport cmd_eval(const fs::path& fit_dir, const fs::path& truth_path, std::ostream& log) {
  if (!fs::exists(truth_path))
    throw_usage("truth file '" + truth_path.string() + "' does not exist");
  const Json manifest = read_json(fit_dir / kManifestFile, "fit manifest");
  if (manifest.value("command", "") != "fit")
    throw_usage("'" + fit_dir.string() + "' is not a fit output directory");
  const Json tj = parse_json_file(truth_path);
  const GroundTruth truth = ground_truth_from_json(tj);

  const std::string fitted = manifest.at("inputs").at("data").at("fnv1a").get<std::string>();
  if (tj.contains("panel_fnv1a") && tj["panel_fnv1a"].get<std::string>() != fitted)
    throw_data("truth file does not belong to the fitted panel (panel hash " +
               tj["panel_fnv1a"].get<std::string>() + " vs fitted " + fitted + ")");

  std::ifstream in(fit_dir / "draws.csv");
  if (!in) throw_usage("no draws.csv in '" + fit_dir.string() + "'");
  const PosteriorDraws draws = read_draws_csv(in);
  const Eigen::VectorXd h_hat = posterior_mean_h(draws);
  if (h_hat.size() != truth.h.size())
    throw_data("truth has " + std::to_string(truth.h.size() / 2) + " subjects but the fit has " +
               std::to_string(h_hat.size() / 2));
  const HEvalReport report = evaluate_h(h_hat, truth.h);

  Json j = to_json(report);
  j["truth"] = {{"path", fs::absolute(truth_path).lexically_normal().string()},
                {"fnv1a", content_hash(read_file(truth_path))}};
  write_file(fit_dir / "heval.json", dump(j));
  log << "h1: intercept " << fmt(report.h1.intercept) << ", slope " << fmt(report.h1.slope)
      << ", R2 " << fmt(report.h1.r_squared) << ", RMSE " << fmt(report.h1.rmse) << '\n'
      << "h2: intercept " << fmt(report.h2.intercept) << ", slope " << fmt(report.h2.slope)
      << ", R2 " << fmt(report.h2.r_squared) << ", RMSE " << fmt(report.h2.rmse) << '\n';
  return report;
}

std::string format_table(const ReproduceReport& report) {
  std::ostringstream os;
  os << std::left << std::setw(10) << "scenario" << std::setw(14) << "prior" << std::setw(6)
     << "h" << std::right << std::setw(11) << "intercept" << std::setw(9) << "slope"
     << std::setw(8) << "R2" << std::setw(8) << "RMSE" << "  result\n";
  for (const auto& r : report.rows) {
    os << std::left << std::setw(10) << r.scenario << std::setw(14)
       << (r.horseshoe ? "horseshoe" : "no-horseshoe") << std::setw(6)
       << (r.level == EffectLevel::Baseline ? "h1" : "h2") << std::right;
    if (r.eval) {
      os << std::setw(11) << fmt(r.eval->intercept) << std::setw(9) << fmt(r.eval->slope)
         << std::setw(8) << fmt(r.eval->r_squared) << std::setw(8) << fmt(r.eval->rmse);
    } else {
      os << std::setw(36) << "run failed";
    }
    os << "  " << (r.pass ? "pass" : "FAIL") << '\n';
  }
  return os.str();
}

ReproduceReport cmd_reproduce(const ReproduceOptions& o, std::ostream& log) {
  ensure_dir(o.out_dir);
  Manifest manifest("reproduce");
  const RecoveryBands bands = o.quick ? RecoveryBands{}.widened(1.5) : RecoveryBands{};

  ReproduceReport report;
  Json runs = Json::array();
  for (int id : {1, 2}) {
    std::optional<ScenarioRun> hs_run;
    std::optional<ScenarioRun> flat_run;
    for (bool horseshoe : {true, false}) {
      Scenario scenario = builtin_scenario(id);
      scenario.seed = o.seed;
      FitConfig config;
      config.sampler.seed = o.seed;
      config.seed_given = true;
      config.hyper.horseshoe = horseshoe;
      if (o.quick) {
        scenario.n = 50;
        config.sampler.iterations = 800;
        config.sampler.warmup = 400;
      }
      if (o.chains) config.sampler.chains = *o.chains;
      const std::string tag =
          "s" + std::to_string(id) + (horseshoe ? "_horseshoe" : "_no_horseshoe");
      log << "running scenario " << id << (horseshoe ? " with" : " without")
          << " horseshoe prior\n";
      Json entry{{"scenario", id}, {"horseshoe", horseshoe}, {"config", to_json(config)}};
      try {
        ScenarioRun run = run_scenario(scenario, config);
        entry["heval"] = to_json(run.heval);
        entry["selection"] = {{"planted", run.selection.planted},
                              {"planted_significant", run.selection.planted_significant},
                              {"nulls", run.selection.nulls},
                              {"null_significant", run.selection.null_significant},
                              {"mean_null_width", run.selection.mean_null_width},
                              {"mean_width", run.selection.mean_width}};
        entry["divergent"] = run.fit.diagnostics.divergent;
        entry["unreliable"] = run.fit.unreliable;
        entry["reliability_failures"] = run.fit.reliability_notes;
        if (run.fit.unreliable) report.failures.push_back(tag + ": unreliable fit");
        (horseshoe ? hs_run : flat_run) = std::move(run);
      } catch (const std::exception& e) {
        entry["error"] = e.what();
        report.failures.push_back(tag + ": " + e.what());
      }
      runs.push_back(entry);
    }

    if (hs_run && flat_run) {
      attach_shrinkage_ratio(hs_run->fit.effects, flat_run->fit.effects);
      const auto& a = hs_run->selection;
      const auto& b = flat_run->selection;
      const std::size_t fp_allowed = id == 1 ? 0 : 1;
      if (a.planted_significant != a.planted)
        report.failures.push_back("scenario " + std::to_string(id) + ": " +
                                  std::to_string(a.planted - a.planted_significant) +
                                  " planted effects missed");
      if (a.null_significant > fp_allowed)
        report.failures.push_back("scenario " + std::to_string(id) + ": " +
                                  std::to_string(a.null_significant) + " false positives");
      if (!(a.mean_null_width < b.mean_null_width))
        report.failures.push_back("scenario " + std::to_string(id) +
                                  ": horseshoe null intervals are not narrower");
    }
    for (bool horseshoe : {true, false}) {
      const auto& run = horseshoe ? hs_run : flat_run;
      if (run) {
        const std::string name = "effects_s" + std::to_string(id) +
                                 (horseshoe ? "_horseshoe.csv" : "_no_horseshoe.csv");
        manifest.write(o.out_dir, name, to_text([&](std::ostream& os) {
                         write_effects_csv(run->fit.effects, os);
                       }));
      }
      for (EffectLevel level : {EffectLevel::Baseline, EffectLevel::Trajectory}) {
        TableRow row;
        row.scenario = id;
        row.horseshoe = horseshoe;
        row.level = level;
        if (run) {
          const bool first = level == EffectLevel::Baseline;
          row.eval = first ? run->heval.h1 : run->heval.h2;
          if (horseshoe) {
            row.pass = bands.pass(*row.eval) && !run->fit.unreliable;
          } else if (hs_run) {
            // Ablation rows pass when the horseshoe fit recovers h at least as well.
            const double hs = first ? hs_run->heval.h1.rmse : hs_run->heval.h2.rmse;
            row.pass = first ? hs < row.eval->rmse : hs <= row.eval->rmse;
          }
        }
        if (!row.pass)
          report.failures.push_back("scenario " + std::to_string(id) +
                                    (horseshoe ? " horseshoe " : " no-horseshoe ") +
                                    (level == EffectLevel::Baseline ? "h1" : "h2") +
                                    (horseshoe ? " outside recovery bands"
                                               : " does not lose to the horseshoe fit"));
        report.rows.push_back(row);
      }
    }
  }
  report.all_pass = report.failures.empty();

  const std::string table = format_table(report);
  manifest.write(o.out_dir, "table.txt", table);
  Json bands_json{{"max_abs_intercept", bands.max_abs_intercept},
                  {"slope", {bands.slope_low, bands.slope_high}},
                  {"min_r_squared", bands.min_r_squared},
                  {"max_rmse", bands.max_rmse}};
  manifest.write(o.out_dir, "report.json",
                 dump(Json{{"bands", bands_json},
                           {"runs", runs},
                           {"failures", report.failures},
                           {"all_pass", report.all_pass}}));
  Json options{{"quick", o.quick}, {"seed", o.seed}};
  if (o.chains) options["chains"] = *o.chains;
  manifest["options"] = options;
  manifest["seed"] = o.seed;
  manifest["config"] = {{"bands", bands_json}};
  manifest.finish(o.out_dir);

  log << '\n' << table;
  for (const auto& f : report.failures) log << "failure: " << f << '\n';
  return report;
}

int cmd_replay(const fs::path& manifest_path, const fs::path& out_dir, std::ostream& log) {
  const Json m = read_json(manifest_path, "manifest");
  const std::string command = m.value("command", "");
  const Json& opt = m.at("options");
  if (command == "simulate") {
    SimulateOptions o;
    o.seed = opt.at("seed").get<std::uint64_t>();
    if (opt.contains("scenario")) o.scenario = opt["scenario"].get<int>();
    if (opt.contains("scenario_file")) {
      check_input_hash(m, "scenario_file");
      o.scenario_file = opt["scenario_file"].get<std::string>();
    }
    o.out_dir = out_dir;
    cmd_simulate(o, log);
    return 0;
  }
  if (command == "fit") {
    FitOptions o;
    check_input_hash(m, "data");
    o.data = opt.at("data").get<std::string>();
    if (opt.contains("lod")) {
      check_input_hash(m, "lod");
      o.lod = fs::path(opt["lod"].get<std::string>());
    }
    o.config = m.at("config");
    o.dump_design = opt.value("dump_design", false);
    o.dump_terms = opt.value("dump_terms", false);
    o.out_dir = out_dir;
    return cmd_fit(o, log);
  }
  if (command == "reproduce") {
    ReproduceOptions o;
    o.quick = opt.value("quick", false);
    o.seed = opt.at("seed").get<std::uint64_t>();
    if (opt.contains("chains")) o.chains = opt["chains"].get<int>();
    o.out_dir = out_dir;
    return cmd_reproduce(o, log).all_pass ? 0 : static_cast<int>(ErrorKind::Numerical);
  }
  throw_usage("manifest command '" + command + "' cannot be replayed");
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bayesian varying-coefficient quantile-mixture regression"};
  app.require_subcommand(1);
  app.set_version_flag("--version", version());

  SimulateOptions sim;
  auto* simulate = app.add_subcommand("simulate", "generate a synthetic panel with ground truth");
  simulate->add_option("--scenario", sim.scenario, "built-in scenario id (1 or 2)");
  simulate->add_option("--scenario-file", sim.scenario_file, "scenario JSON file");
  simulate->add_option("--seed", sim.seed, "data seed")->required();
  simulate->add_option("out_dir", sim.out_dir, "output directory")->required();

  FitOptions fo;
  auto* fit = app.add_subcommand("fit", "fit the model to a panel CSV");
  fit->add_option("data", fo.data, "panel CSV")->required()->check(CLI::ExistingFile);
  fit->add_option("out_dir", fo.out_dir, "output directory")->required();
  fit->add_option("--lod", fo.lod, "limit-of-detection CSV (chemical,lod)")
      ->check(CLI::ExistingFile);
  fit->add_option("--config", fo.config_file, "fit config JSON")->check(CLI::ExistingFile);
  fit->add_option("--seed", fo.seed, "sampler seed");
  fit->add_option("--iterations", fo.iterations, "iterations per chain, warmup included");
  fit->add_option("--warmup", fo.warmup, "warmup iterations per chain");
  fit->add_option("--chains", fo.chains, "number of chains");
  fit->add_flag("--no-detect-filter", fo.no_detect_filter, "keep low-detection chemicals");
  fit->add_flag("--no-lod-impute", fo.no_lod_impute, "skip LOD/sqrt(2) imputation");
  fit->add_flag("--no-scale", fo.no_scale, "skip 2-SD scaling");
  fit->add_flag("--no-horseshoe", fo.no_horseshoe, "fixed wide normal prior on effects");
  fit->add_flag("--dump-design", fo.dump_design, "write design matrices as triplet CSVs");
  fit->add_flag("--dump-terms", fo.dump_terms, "write per-term log density values");

  fs::path summarize_dir;
  auto* summarize = app.add_subcommand("summarize", "print a summary of a fit directory");
  summarize->add_option("fit_dir", summarize_dir)->required()->check(CLI::ExistingDirectory);

  fs::path eval_dir, truth_path;
  auto* eval = app.add_subcommand("eval", "evaluate recovered h against ground truth");
  eval->add_option("fit_dir", eval_dir)->required()->check(CLI::ExistingDirectory);
  eval->add_option("--truth", truth_path, "ground-truth JSON from simulate")->required();

  ReproduceOptions ro;
  auto* reproduce = app.add_subcommand("reproduce", "run both scenarios with and without horseshoe");
  reproduce->add_option("out_dir", ro.out_dir)->required();
  reproduce->add_flag("--quick", ro.quick, "n=50, 800 iterations, bands widened x1.5");
  reproduce->add_option("--seed", ro.seed, "data and sampler seed")->capture_default_str();
  reproduce->add_option("--chains", ro.chains, "number of chains");

  fs::path replay_manifest, replay_out;
  auto* replay = app.add_subcommand("replay", "re-run a command from its manifest");
  replay->add_option("manifest", replay_manifest)->required();
  replay->add_option("out_dir", replay_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : static_cast<int>(ErrorKind::Usage);
  }

  try {
    if (*simulate) {
      cmd_simulate(sim, out);
      return 0;
    }
    if (*fit) {
      const int code = cmd_fit(fo, out);
      if (code != 0) err << "error: fit is unreliable; see diagnostics.json\n";
      return code;
    }
    if (*summarize) {
      cmd_summarize(summarize_dir, out);
      return 0;
    }
    if (*eval) {
      cmd_eval(eval_dir, truth_path, out);
      return 0;
    }
    if (*reproduce) return cmd_reproduce(ro, out).all_pass ? 0 : static_cast<int>(ErrorKind::Numerical);
    if (*replay) return cmd_replay(replay_manifest, replay_out, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ErrorKind::Usage);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ErrorKind::Numerical);
  }
  return static_cast<int>(ErrorKind::Usage);
}

}  // namespace bvcqr
