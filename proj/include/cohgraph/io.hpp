// CSV ingestion, JSON result serialization and DOT graph export.
#pragma once

#include "cohgraph/pipeline.hpp"
#include "cohgraph/simulate.hpp"

#include <json.hpp>

#include <fstream>
#include <iomanip>
#include <sstream>

namespace cohgraph {

// Carries the 1-based line number of the offending row.
class CsvError : public Error {
 public:
  CsvError(const std::string& what, int line) : Error(what), line(line) {}
  int line = 0;
};

struct CsvTable {
  Mat values;
  std::vector<std::string> column_names;
  bool had_header = false;
};

namespace detail {

inline bool parse_double(const std::string& token, double& out) {
  const char* begin = token.c_str();
  char* end = nullptr;
  out = std::strtod(begin, &end);
  if (end == begin) return false;
  while (*end == ' ' || *end == '\t' || *end == '\r') ++end;
  return *end == '\0';
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> tokens;
  std::string token;
  std::stringstream stream(line);
  while (std::getline(stream, token, ',')) {
    std::size_t a = token.find_first_not_of(" \t\r");
    std::size_t b = token.find_last_not_of(" \t\r");
    tokens.push_back(a == std::string::npos ? "" : token.substr(a, b - a + 1));
  }
  if (!line.empty() && line.back() == ',') tokens.push_back("");
  return tokens;
}

}  // namespace detail

// Comma-separated, rows = time points; an optional header row is detected by
// non-numeric tokens.
inline CsvTable read_csv(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw CsvError("cannot open input file: " + path, 0);
  CsvTable table;
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_number = 0;
  std::size_t width = 0;
  while (std::getline(file, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<std::string> tokens = detail::split_csv_line(line);
    if (rows.empty() && table.column_names.empty()) {
      bool all_numeric = true;
      double ignored;
      for (const std::string& t : tokens)
        if (!detail::parse_double(t, ignored)) { all_numeric = false; break; }
      if (!all_numeric) {
        table.column_names = tokens;
        table.had_header = true;
        width = tokens.size();
        continue;
      }
    }
    if (width == 0) width = tokens.size();
    if (tokens.size() != width)
      throw CsvError("row has " + std::to_string(tokens.size()) +
                         " fields, expected " + std::to_string(width),
                     line_number);
    std::vector<double> row(width);
    for (std::size_t j = 0; j < width; ++j) {
      if (!detail::parse_double(tokens[j], row[j]))
        throw CsvError("non-numeric value '" + tokens[j] + "'", line_number);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw CsvError("no data rows", line_number);
  if (table.column_names.empty())
    for (std::size_t j = 0; j < width; ++j)
      table.column_names.push_back("x" + std::to_string(j + 1));
  table.values.resize(rows.size(), width);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < width; ++j) table.values(i, j) = rows[i][j];
  return table;
}

// ---------------------------------------------------------------------------
// JSON serialization.  Field order is fixed and no timestamps are written,
// so identical configurations produce byte-identical files.
// ---------------------------------------------------------------------------

using Json = nlohmann::ordered_json;

inline Json complex_json(cx z) { return Json{{"re", z.real()}, {"im", z.imag()}}; }

inline Json analysis_json(const PipelineResult& result, const PipelineOptions& opts,
                          const std::vector<std::string>& names, Json config_echo) {
  Json root;
  root["schema_version"] = 1;
  root["config"] = std::move(config_echo);
  root["data"] = Json{{"rows", result.n},
                      {"columns", result.p},
                      {"column_names", names}};
  Json tuning;
  tuning["prewhiten_order"] = result.var_order_used;
  tuning["prewhiten_nonzeros"] = result.var_nonzeros;
  tuning["prewhiten_stable"] = result.var_stable;
  tuning["bandwidth_M"] = result.M;
  tuning["bandwidth_clamped"] = result.bandwidth_clamped;
  tuning["grid_N"] = result.grid.N;
  tuning["grid_d"] = result.grid.d();
  tuning["grid_frequencies"] = result.grid.frequencies;
  tuning["kernel"] = kernel_family_name(opts.kernel.family);
  tuning["kernel_c_k2"] = opts.kernel.c_k2;
  tuning["inverse_method"] = inverse_method_name(opts.inverse);
  tuning["lambda_per_frequency"] = result.lambda_used;
  tuning["bic_n_eff"] = result.n_eff;
  tuning["debias_fallbacks_per_frequency"] = result.debias_fallbacks;
  root["tuning"] = std::move(tuning);

  Json test;
  test["delta"] = result.test.delta;
  test["alpha"] = result.test.alpha;
  test["q"] = result.test.q;
  test["d"] = result.test.d;
  test["t_hat"] = result.test.t_hat;
  test["t_hat_feasible"] = result.test.t_hat_feasible;
  test["t_upper_bound"] =
      2.0 * std::log(static_cast<double>(result.test.d) * result.test.q);
  root["test"] = std::move(test);

  std::set<std::pair<int, int>> rejected(result.test.rejected.begin(),
                                         result.test.rejected.end());
  Json pairs = Json::array();
  for (const PairStatistic& stat : result.test.statistics) {
    Json entry;
    entry["u"] = stat.u + 1;
    entry["v"] = stat.v + 1;
    entry["names"] = Json::array({names[stat.u], names[stat.v]});
    entry["T"] = stat.T;
    entry["exceeded"] = stat.exceeded;
    entry["rejected"] = rejected.count({stat.u, stat.v}) > 0;
    double max_mod = 0.0;
    Json freqs = Json::array();
    for (const auto& rec : stat.per_frequency) {
      max_mod = std::max(max_mod, std::abs(rec.rho_de));
      freqs.push_back(Json{{"omega", rec.omega},
                           {"rho_de", complex_json(rec.rho_de)},
                           {"rho_plugin", complex_json(rec.rho_plugin)},
                           {"quad_form", rec.quad_form}});
    }
    entry["max_abs_rho_de"] = max_mod;
    entry["per_frequency"] = std::move(freqs);
    pairs.push_back(std::move(entry));
  }
  root["pairs"] = std::move(pairs);

  Json edges = Json::array();
  for (const auto& [u, v] : result.test.rejected)
    edges.push_back(Json{{"u", u + 1}, {"v", v + 1},
                         {"names", Json::array({names[u], names[v]})}});
  root["rejected_edges"] = std::move(edges);
  return root;
}

inline std::string dot_graph(const PipelineResult& result,
                             const std::vector<std::string>& names) {
  std::set<std::pair<int, int>> rejected(result.test.rejected.begin(),
                                         result.test.rejected.end());
  std::ostringstream out;
  out << "graph partial_coherence {\n";
  for (const std::string& name : names) out << "  \"" << name << "\";\n";
  for (const PairStatistic& stat : result.test.statistics) {
    if (rejected.count({stat.u, stat.v}) == 0) continue;
    double max_mod = 0.0;
    for (const auto& rec : stat.per_frequency)
      max_mod = std::max(max_mod, std::abs(rec.rho_de));
    out << "  \"" << names[stat.u] << "\" -- \"" << names[stat.v]
        << "\" [label=\"" << std::fixed << std::setprecision(3) << max_mod
        << "\"];\n";
    out.unsetf(std::ios_base::fixed);
  }
  out << "}\n";
  return out.str();
}

inline Json experiment_json(const ExperimentReport& report) {
  Json root;
  root["schema_version"] = 1;
  const ExperimentConfig& c = report.config;
  root["config"] = Json{{"kind", dgp_kind_name(c.kind)},
                        {"p", c.p},
                        {"n", c.n},
                        {"alpha", c.alpha},
                        {"delta", c.delta},
                        {"method", experiment_method_name(c.method)},
                        {"replications", c.replications},
                        {"seed", c.seed},
                        {"density", c.density},
                        {"strong_margin", c.strong_margin}};
  root["model"] = Json{{"s1", report.model_s1},
                       {"s2", report.model_s2},
                       {"pairs", report.pairs},
                       {"alternatives", report.alternatives},
                       {"strong_alternatives", report.strong_alternatives}};
  Json results;
  results["fdr"] = report.fdr_mean;
  results["fdr_sd"] = report.fdr_sd;
  if (report.power_defined) {
    results["power"] = report.power_mean;
    results["power_sd"] = report.power_sd;
    results["power_strong"] = report.power_strong_mean;
    results["power_strong_sd"] = report.power_strong_sd;
  } else {
    results["power"] = nullptr;
    results["power_sd"] = nullptr;
    results["power_strong"] = nullptr;
    results["power_strong_sd"] = nullptr;
  }
  root["results"] = std::move(results);
  return root;
}

// Plain-text table: method, alpha, FDR(sd), Power(sd).
inline std::string experiment_table(const ExperimentReport& report) {
  std::ostringstream out;
  auto cell = [](double mean, double sd) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << mean << "(" << sd << ")";
    return s.str();
  };
  out << "method        alpha   FDR(sd)      Power(sd)    StrongPower(sd)\n";
  out << std::left << std::setw(14)
      << experiment_method_name(report.config.method) << std::setw(8)
      << report.config.alpha << std::setw(13)
      << cell(report.fdr_mean, report.fdr_sd) << std::setw(13)
      << (report.power_defined ? cell(report.power_mean, report.power_sd) : "NA")
      << (report.power_defined
              ? cell(report.power_strong_mean, report.power_strong_sd)
              : "NA")
      << "\n";
  return out.str();
}

}  // namespace cohgraph
