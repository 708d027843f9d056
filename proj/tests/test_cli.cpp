#include <doctest.h>

#include <fstream>
#include <sstream>

#include "bvcqr/cli.hpp"
#include "bvcqr/config.hpp"
#include "bvcqr/outputs.hpp"
#include "bvcqr/panel_io.hpp"

using namespace bvcqr;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "bvcqr");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "bvcqr_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Small user scenario so fits finish in seconds.
fs::path small_scenario(const fs::path& dir) {
  const fs::path path = dir / "scenario.json";
  write_file(path, R"({"base": 1, "n": 12, "M": 4, "theta1": [0.2, 0, 0, 0], "theta2": [0, 0.1, 0, 0]})");
  return path;
}

Json read_json_file(const fs::path& p) { return Json::parse(read_file(p)); }

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("version and help") {
  const auto v = cli({"--version"});
  CHECK(v.code == 0);
  CHECK(v.out.find(version()) != std::string::npos);
  CHECK(cli({"--help"}).code == 0);
  CHECK(cli({}).code == 1);
  CHECK(cli({"frobnicate"}).code == 1);
}

TEST_CASE("simulate is deterministic and validates its arguments") {
  const auto dir = scratch("simulate");
  REQUIRE(cli({"simulate", "--scenario", "1", "--seed", "7", (dir / "a").string()}).code == 0);
  REQUIRE(cli({"simulate", "--scenario", "1", "--seed", "7", (dir / "b").string()}).code == 0);
  REQUIRE(cli({"simulate", "--scenario", "1", "--seed", "8", (dir / "c").string()}).code == 0);
  const auto a = read_file(dir / "a" / "panel.csv");
  CHECK(a == read_file(dir / "b" / "panel.csv"));
  CHECK(a != read_file(dir / "c" / "panel.csv"));
  CHECK(read_file(dir / "a" / "truth.json") == read_file(dir / "b" / "truth.json"));
  const auto truth = read_json_file(dir / "a" / "truth.json");
  CHECK(truth["n"] == 100);
  CHECK(truth["M"] == 36);
  const auto manifest = read_json_file(dir / "a" / kManifestFile);
  CHECK(manifest["command"] == "simulate");
  CHECK(manifest["seed"] == 7);

  CHECK(cli({"simulate", "--scenario", "3", "--seed", "7", (dir / "d").string()}).code == 1);
  CHECK(cli({"simulate", "--scenario", "1", (dir / "d").string()}).code == 1);
  CHECK(cli({"simulate", "--seed", "1", (dir / "d").string()}).code == 1);
  CHECK(cli({"simulate", "--scenario", "1", "--scenario-file", "x.json", "--seed", "1",
             (dir / "d").string()})
            .code == 1);
}

TEST_CASE("fit with default sampler settings, then summarize and eval") {
  const auto dir = scratch("fit");
  const auto sc = small_scenario(dir);
  REQUIRE(cli({"simulate", "--scenario-file", sc.string(), "--seed", "3", (dir / "sim").string()}).code == 0);
  const auto fit_dir = dir / "fit";
  const auto r = cli({"fit", (dir / "sim" / "panel.csv").string(), fit_dir.string(), "--seed", "2"});
  REQUIRE((r.code == 0 || r.code == 3));
  for (const char* f : {"draws.csv", "draws_manifest.json", "effects.csv", "diagnostics.json",
                        "preprocess.json", "manifest.json"})
    CHECK(fs::exists(fit_dir / f));
  const auto manifest = read_json_file(fit_dir / kManifestFile);
  CHECK(manifest["command"] == "fit");
  CHECK(manifest["config"]["sampler"]["iterations"] == 2000);
  CHECK(manifest["config"]["sampler"]["warmup"] == 1000);
  CHECK(manifest["config"]["sampler"]["chains"] == 4);
  CHECK(manifest["seed"] == 2);
  CHECK(manifest["inputs"]["data"]["fnv1a"].get<std::string>().size() == 16);

  // header plus 2M rows
  const auto effects = read_file(fit_dir / "effects.csv");
  CHECK(std::count(effects.begin(), effects.end(), '\n') == 1 + 2 * 4);
  CHECK(effects.rfind("chemical,level,mean,sd,q2.5,q50,q97.5,significant", 0) == 0);

  std::ifstream in(fit_dir / "draws.csv");
  const auto draws = read_draws_csv(in);
  CHECK(draws.num_chains() == 4);
  CHECK(draws.draws_per_chain() == 1000);

  const auto s = cli({"summarize", fit_dir.string()});
  CHECK(s.code == 0);
  CHECK(s.out.find("gamma1") != std::string::npos);

  const auto e = cli({"eval", fit_dir.string(), "--truth", (dir / "sim" / "truth.json").string()});
  CHECK(e.code == 0);
  CHECK(fs::exists(fit_dir / "heval.json"));
}

TEST_CASE("eval on truth-injected draws reports the identity") {
  const auto dir = scratch("eval");
  const auto sc = small_scenario(dir);
  REQUIRE(cli({"simulate", "--scenario-file", sc.string(), "--seed", "4", (dir / "sim").string()}).code == 0);
  const auto fit_dir = dir / "fit";
  const auto r = cli({"fit", (dir / "sim" / "panel.csv").string(), fit_dir.string(), "--seed", "1",
                      "--iterations", "300", "--warmup", "150", "--chains", "1"});
  REQUIRE((r.code == 0 || r.code == 3));

  const auto truth = ground_truth_from_json(read_json_file(dir / "sim" / "truth.json"));
  PosteriorDraws draws;
  {
    std::ifstream in(fit_dir / "draws.csv");
    draws = read_draws_csv(in);
  }
  const auto n = truth.h.size() / 2;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto c1 = static_cast<Eigen::Index>(draws.index_of("h1[" + std::to_string(i + 1) + "]"));
    const auto c2 = static_cast<Eigen::Index>(draws.index_of("h2[" + std::to_string(i + 1) + "]"));
    for (auto& m : draws.chains) {
      m.col(c1).setConstant(truth.h[i]);
      m.col(c2).setConstant(truth.h[n + i]);
    }
  }
  {
    std::ostringstream out;
    write_draws_csv(draws, out);
    write_file(fit_dir / "draws.csv", out.str());
  }
  REQUIRE(cli({"eval", fit_dir.string(), "--truth", (dir / "sim" / "truth.json").string()}).code == 0);
  const auto report = read_json_file(fit_dir / "heval.json");
  for (const char* level : {"h1", "h2"}) {
    CHECK(report[level]["intercept"].get<double>() == doctest::Approx(0.0).scale(1.0));
    CHECK(report[level]["slope"].get<double>() == doctest::Approx(1.0));
    CHECK(report[level]["r_squared"].get<double>() == doctest::Approx(1.0));
    CHECK(report[level]["rmse"].get<double>() == doctest::Approx(0.0).scale(1.0));
  }

  // truth from a different panel
  REQUIRE(cli({"simulate", "--scenario-file", sc.string(), "--seed", "5", (dir / "other").string()}).code == 0);
  CHECK(cli({"eval", fit_dir.string(), "--truth", (dir / "other" / "truth.json").string()}).code == 2);
  CHECK(cli({"eval", fit_dir.string(), "--truth", (dir / "missing.json").string()}).code == 1);
  CHECK(cli({"eval", (dir / "sim").string(), "--truth", (dir / "sim" / "truth.json").string()}).code == 1);
}

TEST_CASE("fit input errors map to exit codes") {
  const auto dir = scratch("errors");
  write_file(dir / "bad.csv", "subject_id,age,y,z_1\na,12,1,oops\n");
  CHECK(cli({"fit", (dir / "bad.csv").string(), (dir / "out").string(), "--seed", "1"}).code == 2);
  CHECK(cli({"fit", (dir / "bad.csv").string(), (dir / "out").string()}).code == 1);  // no seed
  CHECK(cli({"fit", (dir / "nope.csv").string(), (dir / "out").string(), "--seed", "1"}).code == 1);
  write_file(dir / "cfg.json", R"({"sampler": {"iterationz": 5}})");
  const auto sc = small_scenario(dir);
  REQUIRE(cli({"simulate", "--scenario-file", sc.string(), "--seed", "1", (dir / "sim").string()}).code == 0);
  CHECK(cli({"fit", (dir / "sim" / "panel.csv").string(), (dir / "out").string(), "--config",
             (dir / "cfg.json").string(), "--seed", "1"})
            .code == 1);
  CHECK(cli({"fit", (dir / "sim" / "panel.csv").string(), (dir / "out").string(), "--iterations",
             "100", "--warmup", "200", "--seed", "1"})
            .code == 1);
}

TEST_CASE("replay reproduces a fit byte for byte") {
  const auto dir = scratch("replay");
  const auto sc = small_scenario(dir);
  REQUIRE(cli({"simulate", "--scenario-file", sc.string(), "--seed", "6", (dir / "sim").string()}).code == 0);
  const auto r = cli({"fit", (dir / "sim" / "panel.csv").string(), (dir / "fit").string(), "--seed",
                      "9", "--iterations", "200", "--warmup", "100", "--chains", "2", "--dump-design",
                      "--dump-terms"});
  REQUIRE((r.code == 0 || r.code == 3));
  const auto again = cli({"replay", (dir / "fit" / kManifestFile).string(), (dir / "again").string()});
  CHECK(again.code == r.code);
  for (const char* f : {"draws.csv", "effects.csv", "diagnostics.json", "terms.json", "design_X.csv"})
    CHECK(read_file(dir / "fit" / f) == read_file(dir / "again" / f));

  const auto sim_again = cli({"replay", (dir / "sim" / kManifestFile).string(), (dir / "sim2").string()});
  CHECK(sim_again.code == 0);
  CHECK(read_file(dir / "sim" / "panel.csv") == read_file(dir / "sim2" / "panel.csv"));

  // a modified input no longer matches its recorded hash
  write_file(dir / "sim" / "panel.csv", read_file(dir / "sim" / "panel.csv") + "\n");
  CHECK(cli({"replay", (dir / "fit" / kManifestFile).string(), (dir / "again2").string()}).code == 2);
}

}  // TEST_SUITE
