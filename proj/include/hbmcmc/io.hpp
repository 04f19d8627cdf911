#pragma once

// Plain CSV files with "# key=value" metadata lines. Numbers are printed with
// 17 significant digits so every file parses back to the exact values.

#include "hbmcmc/analysis.hpp"
#include "hbmcmc/diagnostics.hpp"
#include "hbmcmc/fem.hpp"
#include "hbmcmc/models.hpp"
#include "hbmcmc/samplers.hpp"

#include <map>
#include <string>
#include <vector>

namespace hbmcmc {

struct CsvTable {
  std::map<std::string, std::string> meta;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // throws ConfigError when absent
  double number(std::size_t row, const std::string& name) const;
};

CsvTable read_csv(const std::string& path);
void write_csv(const std::string& path, const CsvTable& t);

std::string format_double(double v);

/// node_coord,value
void write_nodal(const std::string& path, const Mesh1D& mesh, const Vec& values,
                 const std::map<std::string, std::string>& meta = {});
/// Checks that the node coordinates match `mesh`.
Vec read_nodal(const std::string& path, const Mesh1D& mesh);

/// point,value,sigma,signal
void write_observations(const std::string& path, const ObservationSetup& obs);
ObservationSetup read_observations(const std::string& path, const Mesh1D& mesh);

/// Chain format: "# method=", "# seed=", "# chain_id=", "# n=" (plus r, l,
/// start_index, start_solves, solver_failures, wall_seconds), then
/// k,accepted,log_post,cum_solves,m_1..m_n.
void write_chain(const std::string& path, const Chain& chain);
Chain read_chain(const std::string& path);
/// chain_*.csv files of a directory in chain_id order.
std::vector<Chain> read_chain_dir(const std::string& dir);
std::string chain_file_name(int chain_id);

void write_report(const std::string& path, const std::vector<DiagnosticsReport>& reports);
std::vector<DiagnosticsReport> read_report(const std::string& path);

void write_classification(const std::string& path, const EigenClassification& c);
/// grid,density[,gaussian_at_map_density]
void write_marginal(const std::string& path, const MarginalCurve& c);
/// Long format x,y,density,gaussian_at_map_density with the contour levels in metadata.
void write_contour(const std::string& path, const Contour2D& c);

/// FNV-1a of the file bytes, skipping metadata lines that start with
/// "# wall_seconds=" so recorded timings do not affect the hash.
std::uint64_t hash_file(const std::string& path);

}  // namespace hbmcmc
