#include "bvcqr/outputs.hpp"

#include <cmath>
#include <istream>
#include <ostream>

#include "bvcqr/error.hpp"
#include "bvcqr/panel_io.hpp"

namespace bvcqr {

namespace {

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

}  // namespace

void write_draws_csv(const PosteriorDraws& draws, std::ostream& out) {
  out << "chain,iter,energy,divergent";
  for (const auto& n : draws.names) out << ',' << n;
  out << '\n';
  std::string line;
  for (std::size_t c = 0; c < draws.chains.size(); ++c) {
    const auto& m = draws.chains[c];
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      const auto& st = draws.stats[c][static_cast<std::size_t>(r)];
      line.clear();
      line += std::to_string(c + 1);
      line += ',';
      line += std::to_string(r + 1);
      line += ',';
      line += format_double(st.energy);
      line += st.divergent ? ",1" : ",0";
      for (Eigen::Index k = 0; k < m.cols(); ++k) {
        line += ',';
        line += format_double(m(r, k));
      }
      line += '\n';
      out << line;
    }
  }
}

PosteriorDraws read_draws_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw_data("draws file is empty");
  const auto header = split_csv_line(line);
  if (header.size() < 5 || header[0] != "chain" || header[1] != "iter" || header[2] != "energy" ||
      header[3] != "divergent")
    throw_data("draws file header must start with 'chain,iter,energy,divergent'");
  PosteriorDraws draws;
  draws.names.assign(header.begin() + 4, header.end());
  const auto dim = static_cast<Eigen::Index>(draws.names.size());

  std::vector<std::vector<std::vector<double>>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size())
      throw_data("draws file line " + std::to_string(lineno) + ": wrong field count");
    const auto chain = static_cast<std::size_t>(parse_double(f[0], "draws chain"));
    if (chain < 1) throw_data("draws file line " + std::to_string(lineno) + ": bad chain index");
    if (rows.size() < chain) {
      rows.resize(chain);
      draws.stats.resize(chain);
    }
    DrawStats st;
    st.energy = parse_double(f[2], "draws energy");
    st.divergent = f[3] == "1";
    draws.stats[chain - 1].push_back(st);
    std::vector<double> values(static_cast<std::size_t>(dim));
    for (Eigen::Index k = 0; k < dim; ++k)
      values[static_cast<std::size_t>(k)] = parse_double(f[static_cast<std::size_t>(k) + 4], "draws value");
    rows[chain - 1].push_back(std::move(values));
  }
  for (const auto& chain_rows : rows) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(chain_rows.size()), dim);
    for (std::size_t r = 0; r < chain_rows.size(); ++r)
      for (Eigen::Index k = 0; k < dim; ++k)
        m(static_cast<Eigen::Index>(r), k) = chain_rows[r][static_cast<std::size_t>(k)];
    draws.chains.push_back(std::move(m));
  }
  draws.config.chains = static_cast<int>(draws.chains.size());
  return draws;
}

Json draws_manifest(const PosteriorDraws& draws) {
  return Json{{"columns", {"chain", "iter", "energy", "divergent"}},
              {"parameters", draws.names},
              {"dim", draws.names.size()},
              {"chains", draws.num_chains()},
              {"draws_per_chain", draws.draws_per_chain()},
              {"seed", draws.config.seed},
              {"sampler", to_json(draws.config)},
              {"step_size", draws.step_size},
              {"warmup_divergences", draws.warmup_divergences}};
}

void write_effects_csv(const EffectSummary& summary, std::ostream& out) {
  bool ratio = false;
  for (const auto& r : summary.rows) ratio = ratio || r.shrinkage_ratio.has_value();
  out << "chemical,level,mean,sd,q2.5,q50,q97.5,significant";
  if (ratio) out << ",shrinkage_ratio";
  out << '\n';
  for (const auto& r : summary.rows) {
    const auto& s = r.summary;
    out << r.chemical << ',' << to_string(r.level) << ',' << format_double(s.mean) << ','
        << format_double(s.sd) << ',' << format_double(s.q025) << ',' << format_double(s.q50)
        << ',' << format_double(s.q975) << ',' << (s.significant ? 1 : 0);
    if (ratio) {
      out << ',';
      if (r.shrinkage_ratio) out << format_double(*r.shrinkage_ratio);
    }
    out << '\n';
  }
}

Json to_json(const HEvalReport& report) {
  auto level = [](const LevelEval& e) {
    return Json{{"intercept", e.intercept},
                {"slope", number_or_null(e.slope)},
                {"r_squared", e.r_squared},
                {"rmse", e.rmse},
                {"slope_defined", e.slope_defined}};
  };
  return Json{{"h1", level(report.h1)}, {"h2", level(report.h2)}};
}

Json to_json(const DiagnosticsReport& report) {
  Json params = Json::array();
  for (const auto& p : report.parameters) {
    params.push_back({{"name", p.name},
                      {"mean", p.mean},
                      {"sd", p.sd},
                      {"rhat", p.rhat ? number_or_null(*p.rhat) : Json(nullptr)},
                      {"ess_bulk", p.ess_bulk},
                      {"mcse_mean", p.mcse_mean}});
  }
  return Json{{"divergent", report.divergent},
              {"transitions", report.transitions},
              {"divergent_fraction", report.divergent_fraction},
              {"mean_step_size", report.mean_step_size},
              {"mean_tree_depth", report.mean_tree_depth},
              {"max_tree_depth_seen", report.max_tree_depth_seen},
              {"mean_accept_stat", report.mean_accept_stat},
              {"warnings", report.warnings},
              {"parameters", params}};
}

Json to_json(const std::vector<ChemicalReport>& report) {
  Json out = Json::array();
  for (const auto& c : report) {
    Json entry{{"chemical", c.name},
               {"detection_fraction", c.detection_fraction},
               {"retained", c.retained},
               {"imputed", c.imputed}};
    if (c.retained) {
      entry["scale_constant"] = c.scale_constant;
      entry["breakpoints"] = {c.breakpoints[0], c.breakpoints[1], c.breakpoints[2]};
    }
    out.push_back(entry);
  }
  return out;
}

Json to_json(const ParameterSummary& s) {
  return Json{{"mean", s.mean}, {"sd", s.sd},     {"q2.5", s.q025},
              {"q50", s.q50},   {"q97.5", s.q975}, {"significant", s.significant}};
}

Json to_json(const LogJointTerms& terms) {
  Json out = Json::object();
  for (const auto& [name, value] : terms.named()) out[name] = number_or_null(value);
  out["total"] = number_or_null(terms.total());
  return out;
}

}  // namespace bvcqr
