#include "hbmcmc/io.hpp"

#include "hbmcmc/config.hpp"
#include "hbmcmc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace hbmcmc {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double to_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw ConfigError("");
    return v;
  } catch (const std::exception&) {
    // stod rejects "inf"/"nan" spellings on some platforms; accept ours.
    if (s == "inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
    if (s == "nan") return NAN;
    throw ConfigError("cannot parse number '" + s + "' in " + what);
  }
}

long to_long(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(s, &pos);
    if (pos != s.size()) throw ConfigError("");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("cannot parse integer '" + s + "' in " + what);
  }
}

const std::string& meta_value(const CsvTable& t, const std::string& key, const std::string& path) {
  auto it = t.meta.find(key);
  if (it == t.meta.end()) throw ConfigError(path + ": missing metadata '" + key + "'");
  return it->second;
}

std::ofstream open_out(const std::string& path) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  return out;
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int CsvTable::column(const std::string& name) const {
  auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw ConfigError("CSV column '" + name + "' not found");
  return static_cast<int>(it - columns.begin());
}

double CsvTable::number(std::size_t row, const std::string& name) const {
  return to_double(rows.at(row).at(static_cast<std::size_t>(column(name))), "column " + name);
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read '" + path + "'");
  CsvTable t;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.rfind("# ", 0) == 0) {
      const auto eq = line.find('=');
      if (eq != std::string::npos) t.meta[line.substr(2, eq - 2)] = line.substr(eq + 1);
      continue;
    }
    auto cells = split_commas(line);
    if (!header) {
      t.columns = std::move(cells);
      header = true;
    } else {
      if (cells.size() != t.columns.size()) throw ConfigError(path + ": ragged row");
      t.rows.push_back(std::move(cells));
    }
  }
  if (!header) throw ConfigError(path + ": no header row");
  return t;
}

void write_csv(const std::string& path, const CsvTable& t) {
  auto out = open_out(path);
  for (const auto& [k, v] : t.meta) out << "# " << k << "=" << v << "\n";
  for (std::size_t i = 0; i < t.columns.size(); ++i) out << (i ? "," : "") << t.columns[i];
  out << "\n";
  for (const auto& r : t.rows) {
    for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << r[i];
    out << "\n";
  }
}

void write_nodal(const std::string& path, const Mesh1D& mesh, const Vec& values,
                 const std::map<std::string, std::string>& meta) {
  if (values.size() != mesh.n_nodes()) throw ConfigError("write_nodal: size mismatch");
  CsvTable t;
  t.meta = meta;
  t.columns = {"node_coord", "value"};
  for (int i = 0; i < mesh.n_nodes(); ++i) t.rows.push_back({format_double(mesh.x(i)), format_double(values(i))});
  write_csv(path, t);
}

Vec read_nodal(const std::string& path, const Mesh1D& mesh) {
  const CsvTable t = read_csv(path);
  if (static_cast<int>(t.rows.size()) != mesh.n_nodes()) throw ConfigError(path + ": node count mismatch");
  Vec v(mesh.n_nodes());
  for (int i = 0; i < mesh.n_nodes(); ++i) {
    if (std::abs(t.number(static_cast<std::size_t>(i), "node_coord") - mesh.x(i)) > 1e-12 * (1 + mesh.length())) {
      throw ConfigError(path + ": node coordinates do not match the mesh");
    }
    v(i) = t.number(static_cast<std::size_t>(i), "value");
  }
  return v;
}

void write_observations(const std::string& path, const ObservationSetup& obs) {
  CsvTable t;
  t.columns = {"point", "value", "sigma", "signal"};
  for (int i = 0; i < obs.q(); ++i) {
    const double signal = obs.signal.size() == obs.q() ? obs.signal(i) : NAN;
    t.rows.push_back({format_double(obs.points[static_cast<std::size_t>(i)]), format_double(obs.y_obs(i)),
                      format_double(std::sqrt(obs.noise_var(i))), format_double(signal)});
  }
  write_csv(path, t);
}

ObservationSetup read_observations(const std::string& path, const Mesh1D& mesh) {
  const CsvTable t = read_csv(path);
  std::vector<double> pts;
  for (std::size_t r = 0; r < t.rows.size(); ++r) pts.push_back(t.number(r, "point"));
  ObservationSetup obs = make_observation_setup(mesh, pts);
  const int q = obs.q();
  obs.y_obs.resize(q);
  obs.noise_var.resize(q);
  obs.signal.resize(q);
  for (int i = 0; i < q; ++i) {
    const auto r = static_cast<std::size_t>(i);
    obs.y_obs(i) = t.number(r, "value");
    const double s = t.number(r, "sigma");
    obs.noise_var(i) = s * s;
    obs.signal(i) = t.number(r, "signal");
  }
  return obs;
}

std::string chain_file_name(int chain_id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "chain_%03d.csv", chain_id);
  return buf;
}

void write_chain(const std::string& path, const Chain& chain) {
  auto out = open_out(path);
  const auto& m = chain.meta;
  out << "# method=" << m.method << "\n"
      << "# seed=" << m.seed << "\n"
      << "# chain_id=" << m.chain_id << "\n"
      << "# n=" << m.n << "\n"
      << "# r=" << m.r << "\n"
      << "# l=" << m.l << "\n"
      << "# start_index=" << m.start_index << "\n"
      << "# start_solves=" << m.start_solves << "\n"
      << "# solver_failures=" << m.solver_failures << "\n"
      << "# wall_seconds=" << format_double(m.wall_seconds) << "\n";
  out << "k,accepted,log_post,cum_solves";
  for (int i = 1; i <= m.n; ++i) out << ",m_" << i;
  out << "\n";
  std::string row;
  for (int k = 0; k < chain.size(); ++k) {
    row.clear();
    row += std::to_string(k);
    row += chain.accepted[static_cast<std::size_t>(k)] ? ",1," : ",0,";
    row += format_double(chain.log_post(k));
    row += ",";
    row += std::to_string(chain.cumulative_solves[static_cast<std::size_t>(k)]);
    for (Eigen::Index i = 0; i < chain.samples.cols(); ++i) {
      row += ",";
      row += format_double(chain.samples(k, i));
    }
    out << row << "\n";
  }
  if (!out) throw NumericalError("failed while writing '" + path + "'");
}

Chain read_chain(const std::string& path) {
  const CsvTable t = read_csv(path);
  Chain c;
  c.meta.method = meta_value(t, "method", path);
  c.meta.seed = std::stoull(meta_value(t, "seed", path));
  c.meta.chain_id = static_cast<int>(to_long(meta_value(t, "chain_id", path), path));
  c.meta.n = static_cast<int>(to_long(meta_value(t, "n", path), path));
  auto opt_long = [&](const std::string& k, long def) {
    auto it = t.meta.find(k);
    return it == t.meta.end() ? def : to_long(it->second, path);
  };
  c.meta.r = static_cast<int>(opt_long("r", 0));
  c.meta.l = static_cast<int>(opt_long("l", 0));
  c.meta.start_index = static_cast<int>(opt_long("start_index", -1));
  c.meta.start_solves = opt_long("start_solves", 0);
  c.meta.solver_failures = opt_long("solver_failures", 0);
  if (auto it = t.meta.find("wall_seconds"); it != t.meta.end()) c.meta.wall_seconds = to_double(it->second, path);

  const int n = c.meta.n;
  if (static_cast<int>(t.columns.size()) != 4 + n) throw ConfigError(path + ": column count does not match n");
  const auto N = static_cast<Eigen::Index>(t.rows.size());
  c.samples.resize(N, n);
  c.log_post.resize(N);
  c.accepted.resize(static_cast<std::size_t>(N));
  c.cumulative_solves.resize(static_cast<std::size_t>(N));
  for (Eigen::Index k = 0; k < N; ++k) {
    const auto& r = t.rows[static_cast<std::size_t>(k)];
    c.accepted[static_cast<std::size_t>(k)] = r[1] == "1";
    c.log_post(k) = to_double(r[2], path);
    c.cumulative_solves[static_cast<std::size_t>(k)] = to_long(r[3], path);
    for (int i = 0; i < n; ++i) c.samples(k, i) = to_double(r[static_cast<std::size_t>(4 + i)], path);
  }
  return c;
}

std::vector<Chain> read_chain_dir(const std::string& dir) {
  if (!fs::is_directory(dir)) throw ConfigError("'" + dir + "' is not a directory");
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (e.is_regular_file() && name.rfind("chain_", 0) == 0 && e.path().extension() == ".csv") {
      files.push_back(e.path().string());
    }
  }
  if (files.empty()) throw ConfigError("no chain_*.csv files in '" + dir + "'");
  std::vector<Chain> chains;
  for (const auto& f : files) chains.push_back(read_chain(f));
  std::sort(chains.begin(), chains.end(), [](const Chain& a, const Chain& b) { return a.meta.chain_id < b.meta.chain_id; });
  return chains;
}

void write_report(const std::string& path, const std::vector<DiagnosticsReport>& reports) {
  CsvTable t;
  t.columns = {"method", "chains", "samples", "probe_index", "mpsrf", "mpsrf_regularized", "iat", "ess", "msj", "ar",
               "setup_solves", "total_solves", "spis", "tpis"};
  for (const auto& r : reports) {
    t.rows.push_back({r.method, std::to_string(r.chains), std::to_string(r.samples), std::to_string(r.probe_index),
                      format_double(r.mpsrf), r.mpsrf_regularized ? "1" : "0", format_double(r.iat), format_double(r.ess), format_double(r.msj),
                      format_double(r.acceptance_rate), std::to_string(r.setup_solves),
                      std::to_string(r.total_solves), format_double(r.spis), format_double(r.tpis)});
  }
  write_csv(path, t);
}

std::vector<DiagnosticsReport> read_report(const std::string& path) {
  const CsvTable t = read_csv(path);
  std::vector<DiagnosticsReport> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    DiagnosticsReport r;
    r.method = t.rows[i][static_cast<std::size_t>(t.column("method"))];
    r.chains = static_cast<int>(t.number(i, "chains"));
    r.samples = static_cast<int>(t.number(i, "samples"));
    r.probe_index = static_cast<int>(t.number(i, "probe_index"));
    r.mpsrf = t.number(i, "mpsrf");
    r.mpsrf_regularized = t.number(i, "mpsrf_regularized") != 0.0;
    r.iat = t.number(i, "iat");
    r.ess = t.number(i, "ess");
    r.msj = t.number(i, "msj");
    r.acceptance_rate = t.number(i, "ar");
    r.setup_solves = to_long(t.rows[i][static_cast<std::size_t>(t.column("setup_solves"))], path);
    r.total_solves = to_long(t.rows[i][static_cast<std::size_t>(t.column("total_solves"))], path);
    r.spis = t.number(i, "spis");
    r.tpis = t.number(i, "tpis");
    out.push_back(r);
  }
  return out;
}

void write_classification(const std::string& path, const EigenClassification& c) {
  CsvTable t;
  t.columns = {"index", "lambda", "r_m", "r_p", "d", "group", "norm_observed", "norm_unobserved"};
  for (const auto& r : c) {
    t.rows.push_back({std::to_string(r.index), format_double(r.lambda), format_double(r.r_m), format_double(r.r_p),
                      format_double(r.d), to_string(r.group), format_double(r.norm_observed),
                      format_double(r.norm_unobserved)});
  }
  write_csv(path, t);
}

void write_marginal(const std::string& path, const MarginalCurve& c) {
  CsvTable t;
  t.meta["provenance"] = c.provenance;
  t.meta["bandwidth"] = format_double(c.bandwidth);
  t.meta["p025"] = format_double(c.p025);
  t.meta["p975"] = format_double(c.p975);
  t.columns = {"grid", "density"};
  if (c.gaussian_at_map) t.columns.push_back("gaussian_at_map_density");
  for (Eigen::Index i = 0; i < c.grid.size(); ++i) {
    std::vector<std::string> row{format_double(c.grid(i)), format_double(c.density(i))};
    if (c.gaussian_at_map) row.push_back(format_double((*c.gaussian_at_map)(i)));
    t.rows.push_back(std::move(row));
  }
  write_csv(path, t);
}

void write_contour(const std::string& path, const Contour2D& c) {
  CsvTable t;
  auto join = [](const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ";" : "") + format_double(v[i]);
    return s;
  };
  t.meta["i"] = std::to_string(c.i);
  t.meta["j"] = std::to_string(c.j);
  t.meta["mass_levels"] = join(c.mass_levels);
  t.meta["density_levels"] = join(c.levels);
  t.meta["gaussian_levels"] = join(c.gaussian_levels);
  t.meta["bandwidth_x"] = format_double(c.bx);
  t.meta["bandwidth_y"] = format_double(c.by);
  t.columns = {"x", "y", "density", "gaussian_at_map_density"};
  for (Eigen::Index a = 0; a < c.gx.size(); ++a) {
    for (Eigen::Index b = 0; b < c.gy.size(); ++b) {
      t.rows.push_back({format_double(c.gx(a)), format_double(c.gy(b)), format_double(c.density(a, b)),
                        format_double(c.gaussian_at_map(a, b))});
    }
  }
  write_csv(path, t);
}

std::uint64_t hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + path + "'");
  std::uint64_t h = fnv1a("");
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("# wall_seconds=", 0) == 0) continue;
    h = fnv1a(line + "\n", h);
  }
  return h;
}

}  // namespace hbmcmc
