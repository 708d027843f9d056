#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bvcqr/sampler.hpp"

namespace bvcqr {

struct ParameterDiagnostics {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  std::optional<double> rhat;  // absent with a single chain
  double ess_bulk = 0.0;
  double mcse_mean = 0.0;  // sd / sqrt(ess_bulk)
};

struct DiagnosticsReport {
  std::vector<ParameterDiagnostics> parameters;
  std::size_t divergent = 0;
  std::size_t transitions = 0;
  double divergent_fraction = 0.0;
  double mean_step_size = 0.0;
  double mean_tree_depth = 0.0;
  int max_tree_depth_seen = 0;
  double mean_accept_stat = 0.0;
  std::vector<std::string> warnings;

  const ParameterDiagnostics& at(const std::string& name) const;
};

/// `chains[c]` is one chain's draws for one scalar quantity.
using ChainSeries = std::vector<std::vector<double>>;

/// Classic split R-hat (chains halved, no rank normalization).
double split_rhat(const ChainSeries& chains);

/// Rank-normalized split R-hat: max of the bulk and folded (tail) versions.
double rank_normalized_rhat(const ChainSeries& chains);

/// Effective sample size by Geyer's initial monotone sequence, pooled
/// over chains (no splitting, no rank normalization).
double effective_sample_size(const ChainSeries& chains);

/// Bulk ESS: ESS of the rank-normalized split chains.
double bulk_ess(const ChainSeries& chains);

/// Normal scores of pooled fractional ranks, returned in chain layout.
ChainSeries rank_normalize(const ChainSeries& chains);

ChainSeries extract_series(const PosteriorDraws& draws, Eigen::Index k);

/// Diagnostics for every coordinate (or only those listed in `names`).
DiagnosticsReport diagnose(const PosteriorDraws& draws, const std::vector<std::string>& names = {});

}  // namespace bvcqr
