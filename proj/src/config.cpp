#include "bvcqr/config.hpp"

#include <fstream>
#include <set>

#include "bvcqr/error.hpp"
#include "bvcqr/panel_io.hpp"

namespace bvcqr {

namespace {

void reject_unknown(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw_usage(where + " must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key)) throw_usage("unknown key '" + key + "' in " + where);
}

template <typename T>
void read_opt(const Json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw_usage(where + "." + key + " has the wrong type");
  }
}

Json matrix_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd matrix_from(const Json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw_usage(where + " must be a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (!j[static_cast<std::size_t>(i)].is_array() ||
        static_cast<Eigen::Index>(j[static_cast<std::size_t>(i)].size()) != cols)
      throw_usage(where + " rows must have equal length");
    for (Eigen::Index k = 0; k < cols; ++k)
      m(i, k) = j[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)].get<double>();
  }
  return m;
}

Json vector_json(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v[k]);
  return a;
}

Eigen::VectorXd vector_from(const Json& j, const std::string& where) {
  if (!j.is_array()) throw_usage(where + " must be an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) v[static_cast<Eigen::Index>(k)] = j[k].get<double>();
  return v;
}

Eigen::VectorXd theta_from(const Json& j, std::size_t M, const std::string& where) {
  if (j.is_array()) {
    Eigen::VectorXd v = vector_from(j, where);
    if (v.size() != static_cast<Eigen::Index>(M)) throw_usage(where + " must have length M");
    return v;
  }
  if (!j.is_object()) throw_usage(where + " must be an array or an index->value object");
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(M));
  for (const auto& [key, value] : j.items()) {
    std::size_t idx = 0;
    try {
      idx = std::stoul(key);
    } catch (...) {
      throw_usage(where + ": key '" + key + "' is not a chemical index");
    }
    if (idx < 1 || idx > M) throw_usage(where + ": chemical index " + key + " out of range");
    v[static_cast<Eigen::Index>(idx - 1)] = value.get<double>();
  }
  return v;
}

}  // namespace

void FitConfig::validate() const {
  hyper.validate();
  sampler.validate();
  if (!(design.age_divisor > 0.0)) throw_usage("design.age_divisor must be positive");
  if (!(preprocess.min_detect_frac >= 0.0 && preprocess.min_detect_frac <= 1.0))
    throw_usage("preprocess.min_detect_frac must lie in [0, 1]");
}

FitConfig fit_config_from_json(const Json& j) {
  FitConfig c;
  reject_unknown(j, {"hyper", "sampler", "design", "preprocess", "parameterization"}, "config");
  if (j.contains("hyper")) {
    const auto& h = j["hyper"];
    reject_unknown(h, {"alpha0", "gamma0", "alpha", "gamma", "nu0", "C0", "df_lambda", "df_tau",
                       "a0", "tau_power", "horseshoe", "ablation_theta_sd"},
                   "hyper");
    read_opt(h, "alpha0", c.hyper.alpha0, "hyper");
    read_opt(h, "gamma0", c.hyper.gamma0, "hyper");
    read_opt(h, "alpha", c.hyper.alpha, "hyper");
    read_opt(h, "gamma", c.hyper.gamma, "hyper");
    read_opt(h, "nu0", c.hyper.nu0, "hyper");
    read_opt(h, "df_lambda", c.hyper.df_lambda, "hyper");
    read_opt(h, "df_tau", c.hyper.df_tau, "hyper");
    read_opt(h, "a0", c.hyper.a0, "hyper");
    read_opt(h, "tau_power", c.hyper.tau_power, "hyper");
    read_opt(h, "horseshoe", c.hyper.horseshoe, "hyper");
    read_opt(h, "ablation_theta_sd", c.hyper.ablation_theta_sd, "hyper");
    if (h.contains("C0")) {
      const Eigen::MatrixXd m = matrix_from(h["C0"], "hyper.C0");
      if (m.rows() != 2 || m.cols() != 2) throw_usage("hyper.C0 must be 2 x 2");
      c.hyper.C0 = m;
    }
  }
  if (j.contains("sampler")) {
    const auto& s = j["sampler"];
    reject_unknown(s, {"iterations", "warmup", "target_accept", "max_tree_depth", "seed", "chains",
                       "init_radius", "max_energy_error", "divergence_tolerance", "parallel"},
                   "sampler");
    read_opt(s, "iterations", c.sampler.iterations, "sampler");
    read_opt(s, "warmup", c.sampler.warmup, "sampler");
    read_opt(s, "target_accept", c.sampler.target_accept, "sampler");
    read_opt(s, "max_tree_depth", c.sampler.max_tree_depth, "sampler");
    read_opt(s, "chains", c.sampler.chains, "sampler");
    read_opt(s, "init_radius", c.sampler.init_radius, "sampler");
    read_opt(s, "max_energy_error", c.sampler.max_energy_error, "sampler");
    read_opt(s, "divergence_tolerance", c.sampler.divergence_tolerance, "sampler");
    read_opt(s, "parallel", c.sampler.parallel, "sampler");
    if (s.contains("seed")) {
      read_opt(s, "seed", c.sampler.seed, "sampler");
      c.seed_given = true;
    }
  }
  if (j.contains("design")) {
    const auto& d = j["design"];
    reject_unknown(d, {"baseline_age", "age_divisor"}, "design");
    read_opt(d, "baseline_age", c.design.baseline_age, "design");
    read_opt(d, "age_divisor", c.design.age_divisor, "design");
  }
  if (j.contains("preprocess")) {
    const auto& p = j["preprocess"];
    reject_unknown(p, {"detect_filter", "min_detect_frac", "lod_impute", "scale"}, "preprocess");
    read_opt(p, "detect_filter", c.preprocess.detect_filter, "preprocess");
    read_opt(p, "min_detect_frac", c.preprocess.min_detect_frac, "preprocess");
    read_opt(p, "lod_impute", c.preprocess.lod_impute, "preprocess");
    read_opt(p, "scale", c.preprocess.scale, "preprocess");
  }
  if (j.contains("parameterization")) {
    const auto& p = j["parameterization"];
    reject_unknown(p, {"noncentered_theta", "noncentered_h", "noncentered_b"}, "parameterization");
    read_opt(p, "noncentered_theta", c.parameterization.noncentered_theta, "parameterization");
    read_opt(p, "noncentered_h", c.parameterization.noncentered_h, "parameterization");
    read_opt(p, "noncentered_b", c.parameterization.noncentered_b, "parameterization");
  }
  c.validate();
  return c;
}

Json parse_json_file(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw_usage("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

FitConfig load_fit_config(const std::filesystem::path& path) {
  return fit_config_from_json(parse_json_file(path));
}

Json to_json(const Hyperparameters& h) {
  return Json{{"alpha0", h.alpha0},       {"gamma0", h.gamma0},
              {"alpha", h.alpha},         {"gamma", h.gamma},
              {"nu0", h.nu0},             {"C0", matrix_json(h.C0)},
              {"df_lambda", h.df_lambda}, {"df_tau", h.df_tau},
              {"a0", h.a0},               {"tau_power", h.tau_power},
              {"horseshoe", h.horseshoe}, {"ablation_theta_sd", h.ablation_theta_sd}};
}

Json to_json(const SamplerConfig& s) {
  return Json{{"iterations", s.iterations},
              {"warmup", s.warmup},
              {"target_accept", s.target_accept},
              {"max_tree_depth", s.max_tree_depth},
              {"seed", s.seed},
              {"chains", s.chains},
              {"init_radius", s.init_radius},
              {"max_energy_error", s.max_energy_error},
              {"divergence_tolerance", s.divergence_tolerance},
              {"parallel", s.parallel}};
}

Json to_json(const FitConfig& c) {
  return Json{
      {"hyper", to_json(c.hyper)},
      {"sampler", to_json(c.sampler)},
      {"design", {{"baseline_age", c.design.baseline_age}, {"age_divisor", c.design.age_divisor}}},
      {"preprocess",
       {{"detect_filter", c.preprocess.detect_filter},
        {"min_detect_frac", c.preprocess.min_detect_frac},
        {"lod_impute", c.preprocess.lod_impute},
        {"scale", c.preprocess.scale}}},
      {"parameterization",
       {{"noncentered_theta", c.parameterization.noncentered_theta},
        {"noncentered_h", c.parameterization.noncentered_h},
        {"noncentered_b", c.parameterization.noncentered_b}}}};
}

Scenario scenario_from_json(const Json& j) {
  reject_unknown(j, {"base", "id", "n", "M", "rho", "covariance", "covariance_csv", "theta1",
                     "theta2", "scale1", "scale2", "ages", "baseline_age", "age_divisor", "beta",
                     "covariates", "D", "noise_sd", "seed"},
                 "scenario");
  Scenario s;
  if (j.contains("base")) {
    s = builtin_scenario(j["base"].get<int>());
  } else {
    s.id = 0;
    s.beta_true = Eigen::Vector2d(1.0, 0.5);
    s.covariates = {{CovariateKind::StandardNormal, 0.5}, {CovariateKind::Bernoulli, 0.5}};
    s.D_true << 0.25, 0.0, 0.0, 0.04;
    s.theta1_true = Eigen::VectorXd::Zero(36);
    s.theta2_true = Eigen::VectorXd::Zero(36);
    s.C = ar1_correlation(36, s.rho);
  }
  read_opt(j, "id", s.id, "scenario");
  const std::size_t old_M = s.M;
  read_opt(j, "n", s.n, "scenario");
  read_opt(j, "M", s.M, "scenario");
  read_opt(j, "rho", s.rho, "scenario");
  if (s.M != old_M || j.contains("rho")) s.C = ar1_correlation(s.M, s.rho);
  if (s.M != old_M) {
    s.theta1_true = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(s.M));
    s.theta2_true = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(s.M));
  }
  if (j.contains("covariance")) s.C = matrix_from(j["covariance"], "scenario.covariance");
  if (j.contains("covariance_csv")) {
    const std::string text = read_file(j["covariance_csv"].get<std::string>());
    std::vector<std::vector<double>> rows;
    std::size_t start = 0;
    while (start < text.size()) {
      auto end = text.find('\n', start);
      if (end == std::string::npos) end = text.size();
      const auto line = std::string_view(text).substr(start, end - start);
      if (!line.empty() && line != "\r") {
        std::vector<double> row;
        for (const auto& cell : split_csv_line(line)) row.push_back(parse_double(cell, "covariance CSV"));
        rows.push_back(std::move(row));
      }
      start = end + 1;
    }
    s.C.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != rows.size()) throw_usage("covariance CSV must be square");
      for (std::size_t k = 0; k < rows.size(); ++k)
        s.C(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
    }
  }
  read_opt(j, "scale1", s.scale1, "scenario");
  read_opt(j, "scale2", s.scale2, "scenario");
  // theta entries in files are unscaled weights when scale1/scale2 are given
  if (j.contains("theta1")) s.theta1_true = s.scale1 * theta_from(j["theta1"], s.M, "scenario.theta1");
  if (j.contains("theta2")) s.theta2_true = s.scale2 * theta_from(j["theta2"], s.M, "scenario.theta2");
  read_opt(j, "ages", s.ages, "scenario");
  read_opt(j, "baseline_age", s.baseline_age, "scenario");
  read_opt(j, "age_divisor", s.age_divisor, "scenario");
  if (j.contains("beta")) s.beta_true = vector_from(j["beta"], "scenario.beta");
  if (j.contains("covariates")) {
    s.covariates.clear();
    for (const auto& c : j["covariates"]) {
      const auto kind = c.at("kind").get<std::string>();
      CovariateSpec spec;
      if (kind == "normal") {
        spec.kind = CovariateKind::StandardNormal;
      } else if (kind == "bernoulli") {
        spec.kind = CovariateKind::Bernoulli;
        if (c.contains("p")) spec.probability = c["p"].get<double>();
      } else {
        throw_usage("covariate kind must be 'normal' or 'bernoulli'");
      }
      s.covariates.push_back(spec);
    }
  }
  if (j.contains("D")) {
    const Eigen::MatrixXd D = matrix_from(j["D"], "scenario.D");
    if (D.rows() != 2 || D.cols() != 2) throw_usage("scenario.D must be 2 x 2");
    s.D_true = D;
  }
  read_opt(j, "noise_sd", s.noise_sd, "scenario");
  read_opt(j, "seed", s.seed, "scenario");
  s.validate();
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  return scenario_from_json(parse_json_file(path));
}

Json to_json(const Scenario& s) {
  Json covs = Json::array();
  for (const auto& c : s.covariates) {
    if (c.kind == CovariateKind::StandardNormal)
      covs.push_back({{"kind", "normal"}});
    else
      covs.push_back({{"kind", "bernoulli"}, {"p", c.probability}});
  }
  return Json{{"id", s.id},
              {"n", s.n},
              {"M", s.M},
              {"rho", s.rho},
              {"covariance", matrix_json(s.C)},
              {"theta1", vector_json(s.theta1_true / s.scale1)},
              {"theta2", vector_json(s.theta2_true / s.scale2)},
              {"scale1", s.scale1},
              {"scale2", s.scale2},
              {"ages", s.ages},
              {"baseline_age", s.baseline_age},
              {"age_divisor", s.age_divisor},
              {"beta", vector_json(s.beta_true)},
              {"covariates", covs},
              {"D", matrix_json(s.D_true)},
              {"noise_sd", s.noise_sd},
              {"seed", s.seed}};
}

Json to_json(const GroundTruth& t) {
  Json q = Json::array();
  for (Eigen::Index i = 0; i < t.q.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index m = 0; m < t.q.cols(); ++m) row.push_back(t.q(i, m));
    q.push_back(row);
  }
  return Json{{"seed", t.seed},
              {"subject_ids", t.subject_ids},
              {"theta1", vector_json(t.theta1)},
              {"theta2", vector_json(t.theta2)},
              {"beta", vector_json(t.beta)},
              {"h", vector_json(t.h)},
              {"b", vector_json(t.b)},
              {"q", q}};
}

GroundTruth ground_truth_from_json(const Json& j) {
  GroundTruth t;
  try {
    t.seed = j.at("seed").get<std::uint64_t>();
    t.subject_ids = j.at("subject_ids").get<std::vector<std::string>>();
    t.theta1 = vector_from(j.at("theta1"), "truth.theta1");
    t.theta2 = vector_from(j.at("theta2"), "truth.theta2");
    t.beta = vector_from(j.at("beta"), "truth.beta");
    t.h = vector_from(j.at("h"), "truth.h");
    t.b = vector_from(j.at("b"), "truth.b");
    if (j.contains("q")) {
      const auto& q = j["q"];
      const auto n = static_cast<Eigen::Index>(q.size());
      const auto M = n > 0 ? static_cast<Eigen::Index>(q[0].size()) : 0;
      t.q.resize(n, M);
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index m = 0; m < M; ++m)
          t.q(i, m) = q[static_cast<std::size_t>(i)][static_cast<std::size_t>(m)].get<int>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw_data(std::string("malformed ground-truth file: ") + e.what());
  }
  return t;
}

}  // namespace bvcqr
