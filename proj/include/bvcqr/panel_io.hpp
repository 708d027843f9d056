#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bvcqr/preprocess.hpp"

namespace bvcqr {

/// Shortest round-trip decimal representation.
std::string format_double(double value);

/// Parses a finite double; throws a data error mentioning `context` otherwise.
double parse_double(std::string_view text, const std::string& context);

std::vector<std::string> split_csv_line(std::string_view line);

/// Reads a long-format panel CSV.
///
/// Header: `subject_id,age,y,<covariates>,<exposures>` where covariate
/// columns are prefixed `x_` and exposure columns `z_`. Exposures must be
/// constant within a subject. An empty exposure cell marks a below-LOD
/// measurement; an empty `y` cell marks a missing outcome (the visit is
/// dropped). `lod_path`, when given, is a CSV with header `chemical,lod`.
ExposurePanel read_panel_csv(const std::filesystem::path& path,
                             const std::optional<std::filesystem::path>& lod_path = {});

ExposurePanel read_panel_csv(std::istream& in, const std::string& source_name,
                             std::istream* lod_in = nullptr);

void write_panel_csv(const ExposurePanel& panel, std::ostream& out);
void write_panel_csv(const ExposurePanel& panel, const std::filesystem::path& path);

/// Reads a whole file into memory; throws a data error when unreadable.
std::string read_file(const std::filesystem::path& path);

/// Writes `contents`; throws a usage error when the path is unwritable.
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace bvcqr
