#pragma once

#include <filesystem>
#include <iosfwd>

#include "bvcqr/config.hpp"
#include "bvcqr/diagnostics.hpp"
#include "bvcqr/posterior.hpp"

namespace bvcqr {

/// Columnar draws: `chain,iter,energy,divergent,<constrained parameters>`,
/// one row per retained draw, chains in order, 1-based chain and iteration.
void write_draws_csv(const PosteriorDraws& draws, std::ostream& out);
PosteriorDraws read_draws_csv(std::istream& in);

/// Packing order, dimension and sampler echo for a draws file.
Json draws_manifest(const PosteriorDraws& draws);

/// `chemical,level,mean,sd,q2.5,q50,q97.5,significant[,shrinkage_ratio]`
void write_effects_csv(const EffectSummary& summary, std::ostream& out);

Json to_json(const HEvalReport& report);
Json to_json(const DiagnosticsReport& report);
Json to_json(const std::vector<ChemicalReport>& report);
Json to_json(const ParameterSummary& summary);
Json to_json(const LogJointTerms& terms);

}  // namespace bvcqr
