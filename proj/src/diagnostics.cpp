#include "bvcqr/diagnostics.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <numeric>

#include "bvcqr/error.hpp"
#include "bvcqr/stats.hpp"

namespace bvcqr {

namespace {

ChainSeries split_chains(const ChainSeries& chains) {
  ChainSeries out;
  for (const auto& c : chains) {
    const std::size_t half = c.size() / 2;
    out.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(half));
    out.emplace_back(c.end() - static_cast<std::ptrdiff_t>(half), c.end());
  }
  return out;
}

double rhat_of(const ChainSeries& chains) {
  const std::size_t m = chains.size();
  const double n = static_cast<double>(chains.front().size());
  std::vector<double> means(m), vars(m);
  for (std::size_t c = 0; c < m; ++c) {
    means[c] = stats::mean(chains[c]);
    vars[c] = stats::sample_variance(chains[c]);
  }
  const double W = stats::mean(vars);
  const double B_over_n = stats::sample_variance(means);
  if (!(W > 0.0)) return B_over_n > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
  const double var_plus = (n - 1.0) / n * W + B_over_n;
  return std::sqrt(var_plus / W);
}

double autocovariance(const std::vector<double>& x, double mean, std::size_t lag) {
  const std::size_t n = x.size();
  double acc = 0.0;
  for (std::size_t i = 0; i + lag < n; ++i) acc += (x[i] - mean) * (x[i + lag] - mean);
  return acc / static_cast<double>(n);
}

}  // namespace

double split_rhat(const ChainSeries& chains) { return rhat_of(split_chains(chains)); }

ChainSeries rank_normalize(const ChainSeries& chains) {
  std::vector<std::pair<double, std::size_t>> pooled;
  std::size_t total = 0;
  for (const auto& c : chains) total += c.size();
  pooled.reserve(total);
  for (const auto& c : chains)
    for (double v : c) pooled.emplace_back(v, pooled.size());
  std::sort(pooled.begin(), pooled.end());

  std::vector<double> ranks(total);
  for (std::size_t i = 0; i < total;) {
    std::size_t j = i;
    while (j + 1 < total && pooled[j + 1].first == pooled[i].first) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based average rank
    for (std::size_t k = i; k <= j; ++k) ranks[pooled[k].second] = avg;
    i = j + 1;
  }
  const boost::math::normal_distribution<double> normal;
  const double S = static_cast<double>(total);
  ChainSeries out;
  std::size_t k = 0;
  for (const auto& c : chains) {
    std::vector<double> z(c.size());
    for (auto& v : z) v = boost::math::quantile(normal, (ranks[k++] - 0.375) / (S + 0.25));
    out.push_back(std::move(z));
  }
  return out;
}

double rank_normalized_rhat(const ChainSeries& chains) {
  const ChainSeries split = split_chains(chains);
  const double bulk = rhat_of(rank_normalize(split));
  std::vector<double> all;
  for (const auto& c : split) all.insert(all.end(), c.begin(), c.end());
  const double median = stats::quantile(all, 0.5);
  ChainSeries folded = split;
  for (auto& c : folded)
    for (auto& v : c) v = std::abs(v - median);
  const double tail = rhat_of(rank_normalize(folded));
  return std::max(bulk, tail);
}

double effective_sample_size(const ChainSeries& chains) {
  const std::size_t m = chains.size();
  const std::size_t n = chains.front().size();
  if (n < 4) return static_cast<double>(m * n);
  const double nd = static_cast<double>(n);
  std::vector<double> means(m), acov0(m);
  for (std::size_t c = 0; c < m; ++c) {
    means[c] = stats::mean(chains[c]);
    acov0[c] = autocovariance(chains[c], means[c], 0);
  }
  auto mean_acov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t c = 0; c < m; ++c) s += autocovariance(chains[c], means[c], lag);
    return s / static_cast<double>(m);
  };
  const double mean_var = stats::mean(acov0) * nd / (nd - 1.0);
  double var_plus = mean_var * (nd - 1.0) / nd;
  if (m > 1) var_plus += stats::sample_variance(means);
  if (!(var_plus > 0.0)) return static_cast<double>(m * n);

  std::vector<double> rho(n + 2, 0.0);
  double rho_even = 1.0;
  rho[0] = rho_even;
  double rho_odd = 1.0 - (mean_var - mean_acov(1)) / var_plus;
  rho[1] = rho_odd;
  std::size_t s = 1;
  while (s < n - 5 && rho_even + rho_odd > 0.0) {
    rho_even = 1.0 - (mean_var - mean_acov(s + 1)) / var_plus;
    rho_odd = 1.0 - (mean_var - mean_acov(s + 2)) / var_plus;
    if (rho_even + rho_odd >= 0.0) {
      rho[s + 1] = rho_even;
      rho[s + 2] = rho_odd;
    }
    s += 2;
  }
  const std::size_t max_s = s;
  if (rho_even > 0.0) rho[max_s + 1] = rho_even;
  // initial positive sequence -> initial monotone sequence
  for (std::size_t t = 1; t + 3 <= max_s; t += 2) {
    if (rho[t + 1] + rho[t + 2] > rho[t - 1] + rho[t]) {
      rho[t + 1] = 0.5 * (rho[t - 1] + rho[t]);
      rho[t + 2] = rho[t + 1];
    }
  }
  double tau = -1.0 + rho[max_s + 1];
  for (std::size_t t = 0; t < max_s; ++t) tau += 2.0 * rho[t];
  const double total = static_cast<double>(m * n);
  tau = std::max(tau, 1.0 / std::log10(total));
  return total / tau;
}

double bulk_ess(const ChainSeries& chains) {
  return effective_sample_size(rank_normalize(split_chains(chains)));
}

ChainSeries extract_series(const PosteriorDraws& draws, Eigen::Index k) {
  ChainSeries out;
  for (const auto& c : draws.chains) {
    std::vector<double> v(static_cast<std::size_t>(c.rows()));
    for (Eigen::Index r = 0; r < c.rows(); ++r) v[static_cast<std::size_t>(r)] = c(r, k);
    out.push_back(std::move(v));
  }
  return out;
}

const ParameterDiagnostics& DiagnosticsReport::at(const std::string& name) const {
  for (const auto& p : parameters)
    if (p.name == name) return p;
  throw_usage("no diagnostics for parameter '" + name + "'");
}

DiagnosticsReport diagnose(const PosteriorDraws& draws, const std::vector<std::string>& names) {
  DiagnosticsReport report;
  if (draws.num_chains() == 0) throw_usage("no chains to diagnose");
  const bool multi = draws.num_chains() >= 2;
  if (!multi) report.warnings.push_back("single chain: R-hat omitted");
  if (draws.draws_per_chain() < 100)
    report.warnings.push_back("fewer than 100 retained draws per chain; diagnostics are noisy");

  std::vector<Eigen::Index> indices;
  if (names.empty()) {
    for (Eigen::Index k = 0; k < draws.dim(); ++k) indices.push_back(k);
  } else {
    for (const auto& nm : names) indices.push_back(draws.index_of(nm));
  }
  for (Eigen::Index k : indices) {
    const ChainSeries series = extract_series(draws, k);
    std::vector<double> all;
    for (const auto& c : series) all.insert(all.end(), c.begin(), c.end());
    ParameterDiagnostics pd;
    pd.name = draws.names[static_cast<std::size_t>(k)];
    pd.mean = stats::mean(all);
    pd.sd = stats::sample_sd(all);
    if (multi) pd.rhat = rank_normalized_rhat(series);
    pd.ess_bulk = series.front().size() >= 4 ? bulk_ess(series) : static_cast<double>(all.size());
    pd.mcse_mean = pd.ess_bulk > 0 ? pd.sd / std::sqrt(pd.ess_bulk) : 0.0;
    report.parameters.push_back(std::move(pd));
  }

  double step_sum = 0.0, depth_sum = 0.0, accept_sum = 0.0;
  for (std::size_t c = 0; c < draws.stats.size(); ++c) {
    for (const auto& st : draws.stats[c]) {
      ++report.transitions;
      report.divergent += st.divergent ? 1 : 0;
      depth_sum += st.tree_depth;
      accept_sum += st.accept_stat;
      report.max_tree_depth_seen = std::max(report.max_tree_depth_seen, st.tree_depth);
    }
  }
  for (double e : draws.step_size) step_sum += e;
  if (!draws.step_size.empty()) report.mean_step_size = step_sum / static_cast<double>(draws.step_size.size());
  if (report.transitions > 0) {
    const double t = static_cast<double>(report.transitions);
    report.divergent_fraction = static_cast<double>(report.divergent) / t;
    report.mean_tree_depth = depth_sum / t;
    report.mean_accept_stat = accept_sum / t;
  }
  if (report.divergent_fraction > draws.config.divergence_tolerance)
    report.warnings.push_back("more than " +
                              std::to_string(static_cast<int>(100 * draws.config.divergence_tolerance)) +
                              "% divergent transitions: fit unreliable");
  return report;
}

}  // namespace bvcqr
