#include "bvcqr/panel_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "bvcqr/error.hpp"

namespace bvcqr {

std::string format_double(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text, const std::string& context) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r'))
    text.remove_suffix(1);
  double value = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size() || !std::isfinite(value))
    throw_data(context + ": cannot parse '" + std::string(text) + "' as a number");
  return value;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    auto field = line.substr(start, pos == std::string_view::npos ? std::string_view::npos
                                                                  : pos - start);
    while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
    while (!field.empty() && field.back() == ' ') field.remove_suffix(1);
    fields.emplace_back(field);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return fields;
}

namespace {

bool is_blank(const std::string& s) {
  return s.empty() || s == "NA" || s == "NaN" || s == "nan";
}

std::map<std::string, double> read_lod(std::istream& in) {
  std::map<std::string, double> lod;
  std::string line;
  if (!std::getline(in, line)) throw_data("LOD file is empty");
  const auto header = split_csv_line(line);
  if (header.size() < 2 || header[0] != "chemical" || header[1] != "lod")
    throw_data("LOD file header must be 'chemical,lod'");
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() < 2) throw_data("LOD file row " + std::to_string(row) + ": expected 2 fields");
    lod[f[0]] = parse_double(f[1], "LOD file row " + std::to_string(row));
  }
  return lod;
}

}  // namespace

ExposurePanel read_panel_csv(std::istream& in, const std::string& source_name,
                             std::istream* lod_in) {
  std::string line;
  if (!std::getline(in, line)) throw_data(source_name + ": empty panel file");
  const auto header = split_csv_line(line);
  if (header.size() < 3 || header[0] != "subject_id" || header[1] != "age" || header[2] != "y")
    throw_data(source_name + ": header must start with 'subject_id,age,y'");

  ExposurePanel panel;
  std::vector<std::size_t> cov_cols, exp_cols;
  for (std::size_t c = 3; c < header.size(); ++c) {
    if (header[c].rfind("x_", 0) == 0) {
      if (!exp_cols.empty())
        throw_data(source_name + ": covariate column '" + header[c] +
                   "' must precede the exposure columns");
      cov_cols.push_back(c);
      panel.covariate_names.push_back(header[c]);
    } else if (header[c].rfind("z_", 0) == 0) {
      exp_cols.push_back(c);
      panel.exposure_names.push_back(header[c]);
    } else {
      throw_data(source_name + ": column '" + header[c] +
                 "' is neither a covariate (x_*) nor an exposure (z_*)");
    }
  }
  const auto p = cov_cols.size();
  const auto M = exp_cols.size();

  struct Pending {
    Subject subject;
    std::vector<bool> detected;
    bool seen_values = false;
  };
  std::vector<Pending> pending;
  std::unordered_map<std::string, std::size_t> index;

  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const std::string where = source_name + " row " + std::to_string(row);
    const auto f = split_csv_line(line);
    if (f.size() != header.size())
      throw_data(where + ": expected " + std::to_string(header.size()) + " fields, found " +
                 std::to_string(f.size()));
    if (f[0].empty()) throw_data(where + ": empty subject_id");

    auto [it, inserted] = index.try_emplace(f[0], pending.size());
    if (inserted) {
      Pending fresh;
      fresh.subject.id = f[0];
      fresh.subject.covariates.resize(static_cast<Eigen::Index>(p));
      fresh.subject.exposures.resize(static_cast<Eigen::Index>(M));
      fresh.detected.assign(M, true);
      pending.push_back(std::move(fresh));
    }
    Pending& rec = pending[it->second];

    Eigen::VectorXd cov(static_cast<Eigen::Index>(p));
    for (std::size_t k = 0; k < p; ++k) {
      const auto& cell = f[cov_cols[k]];
      if (is_blank(cell)) throw_data(where + ": missing covariate '" + header[cov_cols[k]] + "'");
      cov[static_cast<Eigen::Index>(k)] = parse_double(cell, where + " column " + header[cov_cols[k]]);
    }
    Eigen::VectorXd z(static_cast<Eigen::Index>(M));
    std::vector<bool> detected(M, true);
    for (std::size_t k = 0; k < M; ++k) {
      const auto& cell = f[exp_cols[k]];
      if (is_blank(cell)) {
        z[static_cast<Eigen::Index>(k)] = std::nan("");
        detected[k] = false;
      } else {
        z[static_cast<Eigen::Index>(k)] = parse_double(cell, where + " column " + header[exp_cols[k]]);
      }
    }
    if (!rec.seen_values) {
      rec.subject.covariates = cov;
      rec.subject.exposures = z;
      rec.detected = detected;
      rec.seen_values = true;
    } else {
      for (std::size_t k = 0; k < p; ++k)
        if (rec.subject.covariates[static_cast<Eigen::Index>(k)] != cov[static_cast<Eigen::Index>(k)])
          throw_data(where + ": covariate '" + header[cov_cols[k]] +
                     "' varies within subject '" + f[0] + "'");
      for (std::size_t k = 0; k < M; ++k) {
        const double a = rec.subject.exposures[static_cast<Eigen::Index>(k)];
        const double b = z[static_cast<Eigen::Index>(k)];
        const bool same = (std::isnan(a) && std::isnan(b)) || a == b;
        if (!same)
          throw_data(where + ": exposure '" + header[exp_cols[k]] +
                     "' varies within subject '" + f[0] + "'");
      }
    }

    const double age = parse_double(f[1], where + " column age");
    if (!is_blank(f[2])) {
      rec.subject.observations.push_back({age, parse_double(f[2], where + " column y")});
    }
  }

  std::vector<std::vector<bool>> flags(M, std::vector<bool>(pending.size(), true));
  for (std::size_t i = 0; i < pending.size(); ++i) {
    auto& obs = pending[i].subject.observations;
    std::stable_sort(obs.begin(), obs.end(),
                     [](const Observation& a, const Observation& b) { return a.age < b.age; });
    for (std::size_t k = 0; k < M; ++k) {
      flags[k][i] = pending[i].detected[k];
    }
    panel.subjects.push_back(std::move(pending[i].subject));
  }
  panel.detect_flags = std::move(flags);

  if (lod_in) {
    const auto lod = read_lod(*lod_in);
    std::vector<double> values(M, std::nan(""));
    for (std::size_t k = 0; k < M; ++k) {
      const auto& name = panel.exposure_names[k];
      auto it = lod.find(name);
      if (it == lod.end()) it = lod.find(name.substr(2));
      if (it != lod.end()) values[k] = it->second;
    }
    panel.lod = std::move(values);
  }
  panel.validate();
  return panel;
}

ExposurePanel read_panel_csv(const std::filesystem::path& path,
                             const std::optional<std::filesystem::path>& lod_path) {
  std::ifstream in(path);
  if (!in) throw_data("cannot open panel file '" + path.string() + "'");
  if (lod_path) {
    std::ifstream lod_in(*lod_path);
    if (!lod_in) throw_data("cannot open LOD file '" + lod_path->string() + "'");
    return read_panel_csv(in, path.filename().string(), &lod_in);
  }
  return read_panel_csv(in, path.filename().string(), nullptr);
}

void write_panel_csv(const ExposurePanel& panel, std::ostream& out) {
  out << "subject_id,age,y";
  for (const auto& name : panel.covariate_names) out << ',' << name;
  for (const auto& name : panel.exposure_names) out << ',' << name;
  out << '\n';
  for (std::size_t i = 0; i < panel.n(); ++i) {
    const auto& s = panel.subjects[i];
    std::string tail;
    for (Eigen::Index k = 0; k < s.covariates.size(); ++k)
      tail += ',' + format_double(s.covariates[k]);
    for (Eigen::Index k = 0; k < s.exposures.size(); ++k) {
      tail += ',';
      const bool below = panel.detect_flags &&
                         !(*panel.detect_flags)[static_cast<std::size_t>(k)][i];
      if (!below && std::isfinite(s.exposures[k])) tail += format_double(s.exposures[k]);
    }
    for (const auto& o : s.observations)
      out << s.id << ',' << format_double(o.age) << ',' << format_double(o.y) << tail << '\n';
  }
}

void write_panel_csv(const ExposurePanel& panel, const std::filesystem::path& path) {
  std::ostringstream out;
  write_panel_csv(panel, out);
  write_file(path, out.str());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_usage("cannot write '" + path.string() + "'");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw_usage("failed writing '" + path.string() + "'");
}

}  // namespace bvcqr
