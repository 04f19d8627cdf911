#include "hbmcmc/pipeline.hpp"

#include "hbmcmc/errors.hpp"
#include "hbmcmc/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <numbers>

namespace hbmcmc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ObsRegion region_of(const RunConfig& cfg) {
  return cfg.obs_region == "full" ? ObsRegion::Full : ObsRegion::RightHalf;
}

long meta_long(const CsvTable& t, const std::string& key, long def = 0) {
  auto it = t.meta.find(key);
  return it == t.meta.end() ? def : std::stol(it->second);
}

double meta_double(const CsvTable& t, const std::string& key, double def = 0.0) {
  auto it = t.meta.find(key);
  return it == t.meta.end() ? def : std::stod(it->second);
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> m{Method::RWMH, Method::SN, Method::SNMAP, Method::ISMAP};
  return m;
}

// Hash of the settings the pilot depends on. Worker count, campaign length,
// output location and post-processing options do not change the starts.
std::string start_points_hash(const RunConfig& cfg) {
  RunConfig k = cfg;
  const RunConfig d;
  k.run_workers = d.run_workers;
  k.run_samples = d.run_samples;
  k.run_methods = d.run_methods;
  k.run_burn_frac = d.run_burn_frac;
  k.run_out_dir = d.run_out_dir;
  k.diagnose_probe_x = d.diagnose_probe_x;
  k.diagnose_iat = d.diagnose_iat;
  k.analyze_eigs = d.analyze_eigs;
  k.analyze_pairs = d.analyze_pairs;
  k.analyze_method = d.analyze_method;
  return hex64(config_hash(k));
}

std::vector<Vec> load_or_make_starts(const RunConfig& cfg, Problem& p, const SamplerSetup& setup,
                                     const Vec& m_map, std::vector<int>& indices, long& pilot_solves) {
  const std::string path = out_path(cfg, "start_points.csv");
  const std::string hash = start_points_hash(cfg);
  const int n = p.prior->n();
  if (fs::exists(path)) {
    const CsvTable t = read_csv(path);
    auto it = t.meta.find("config_hash");
    if (it != t.meta.end() && it->second == hash && static_cast<int>(t.rows.size()) == cfg.run_chains) {
      std::vector<Vec> starts;
      indices.clear();
      for (std::size_t r = 0; r < t.rows.size(); ++r) {
        indices.push_back(static_cast<int>(t.number(r, "pilot_index")));
        Vec v(n);
        for (int i = 0; i < n; ++i) v(i) = t.number(r, "m_" + std::to_string(i + 1));
        starts.push_back(v);
      }
      pilot_solves = 0;
      return starts;
    }
  }

  ProposalKind kind{parse_method(cfg.pilot_method), cfg.run_rwmh_sigma};
  if (kind.method == Method::RWMH && !(kind.rwmh_sigma > 0)) {
    kind.rwmh_sigma = tune_rwmh_sigma(setup, *p.model, m_map, 0.1, 20, 100, splitmix64(cfg.run_seed ^ kTuneStream));
  }
  const long before = p.model->counter().linearized_solves();
  const Chain pilot = run_chain(kind, setup, *p.model, m_map, cfg.pilot_samples,
                                splitmix64(cfg.run_seed ^ kPilotStream), 0);
  pilot_solves = p.model->counter().linearized_solves() - before;
  indices = select_start_points(pilot, cfg.run_chains, *p.space);

  CsvTable t;
  t.meta["config_hash"] = hash;
  t.meta["pilot_method"] = cfg.pilot_method;
  t.meta["pilot_samples"] = std::to_string(cfg.pilot_samples);
  t.meta["pilot_solves"] = std::to_string(pilot_solves);
  t.columns = {"pilot_index"};
  for (int i = 1; i <= n; ++i) t.columns.push_back("m_" + std::to_string(i));
  std::vector<Vec> starts;
  for (int idx : indices) {
    const Vec v = pilot.samples.row(idx).transpose();
    std::vector<std::string> row{std::to_string(idx)};
    for (int i = 0; i < n; ++i) row.push_back(format_double(v(i)));
    t.rows.push_back(std::move(row));
    starts.push_back(v);
  }
  write_csv(path, t);
  return starts;
}

}  // namespace

std::string out_path(const RunConfig& cfg, const std::string& rel) { return (fs::path(cfg.run_out_dir) / rel).string(); }

std::string chains_dir(const RunConfig& cfg, Method m) { return out_path(cfg, "chains/" + to_string(m)); }

std::uint64_t campaign_seed(const RunConfig& cfg, Method m) {
  return splitmix64(cfg.run_seed ^ (0x6d6574686f640000ULL + static_cast<std::uint64_t>(m)));
}

Problem make_problem(const RunConfig& cfg, std::optional<ObservationSetup> obs) {
  cfg.validate();
  const Mesh1D mesh = Mesh1D::uniform(cfg.mesh_n_nodes, cfg.mesh_length);
  Problem p;
  p.space = assemble_mass(mesh);
  p.prior = std::make_shared<const GaussianPrior>(p.space, cfg.prior_a, cfg.prior_b,
                                                  Vec::Constant(mesh.n_nodes(), cfg.prior_mean_constant));
  ObservationSetup o = obs ? std::move(*obs)
                           : make_observation_setup(mesh, observation_points(mesh, cfg.obs_count, region_of(cfg)));
  if (cfg.model_kind == "linear") {
    p.model = std::make_unique<LinearGaussianModel>(p.space, std::move(o));
  } else {
    p.model = std::make_unique<ExpReaction1D>(p.space, std::move(o), cfg.model_source_constant);
  }
  return p;
}

Vec make_truth(const RunConfig& cfg, const Problem& p) {
  if (cfg.truth_kind == "prior_mean") return p.prior->mean();
  if (cfg.truth_kind == "prior_sample") {
    Rng rng = make_stream(cfg.run_seed, kTruthStream);
    return p.prior->sample(rng);
  }
  return default_truth(p.mesh());
}

SynthOutput cmd_synth(const RunConfig& cfg) {
  Problem p = make_problem(cfg);
  SynthOutput out;
  out.truth = make_truth(cfg, p);
  Rng rng = make_stream(cfg.run_seed, kNoiseStream);
  out.obs = synthesize_data(*p.model, out.truth, cfg.obs_noise_rel, rng);
  out.solves = p.model->counter().linearized_solves();
  fs::create_directories(cfg.run_out_dir);
  write_nodal(out_path(cfg, "truth.csv"), p.mesh(), out.truth, {{"truth_kind", cfg.truth_kind}});
  write_observations(out_path(cfg, "observations.csv"), out.obs);
  return out;
}

Problem load_problem(const RunConfig& cfg) {
  const Mesh1D mesh = Mesh1D::uniform(cfg.mesh_n_nodes, cfg.mesh_length);
  const std::string path = out_path(cfg, "observations.csv");
  if (!fs::exists(path)) throw ConfigError("'" + path + "' not found; run synth first");
  return make_problem(cfg, read_observations(path, mesh));
}

MapResult cmd_map(const RunConfig& cfg) {
  Problem p = load_problem(cfg);
  MapOptions opts;
  opts.grad_tol_rel = cfg.map_grad_tol_rel;
  opts.max_newton = cfg.map_max_newton;
  MapResult res = solve_map(*p.model, *p.prior, p.prior->mean(), opts);
  write_nodal(out_path(cfg, "map.csv"), p.mesh(), res.m_map,
              {{"newton_iters", std::to_string(res.newton_iters)},
               {"cg_iters", std::to_string(res.total_cg_iters)},
               {"converged", res.converged ? "1" : "0"},
               {"solves", std::to_string(res.solve_count.linearized_solves())}});
  CsvTable hist;
  hist.columns = {"iter", "grad_norm", "cost"};
  for (std::size_t k = 0; k < res.grad_norm_history.size(); ++k) {
    hist.rows.push_back({std::to_string(k), format_double(res.grad_norm_history[k]), format_double(res.cost_history[k])});
  }
  write_csv(out_path(cfg, "map_history.csv"), hist);
  if (!res.converged) {
    throw NumericalError("MAP solve did not reach the gradient tolerance within map.max_newton iterations");
  }
  return res;
}

StoredMap read_map(const RunConfig& cfg, const Mesh1D& mesh) {
  const std::string path = out_path(cfg, "map.csv");
  if (!fs::exists(path)) throw ConfigError("'" + path + "' not found; run map first");
  StoredMap s;
  s.m_map = read_nodal(path, mesh);
  s.solves = meta_long(read_csv(path), "solves");
  return s;
}

std::shared_ptr<const LowRankHessian> lowrank_at_map(const RunConfig& cfg, Problem& p, const Vec& m_map,
                                                     long* solves) {
  Rng rng = make_stream(cfg.run_seed, kLowRankStream);
  const long before = p.model->counter().linearized_solves();
  auto lrh = std::make_shared<const LowRankHessian>(
      build_lowrank(*p.model, p.prior, m_map, cfg.lowrank_r, cfg.lowrank_l, rng));
  if (solves) *solves = p.model->counter().linearized_solves() - before;
  CsvTable t;
  t.meta["rank"] = std::to_string(lrh->rank());
  t.meta["lanczos_iterations"] = std::to_string(lrh->lanczos_iterations());
  t.meta["restarts"] = std::to_string(lrh->restarts());
  t.meta["unconverged_pairs"] = std::to_string(lrh->unconverged_pairs());
  t.columns = {"i", "ritz_value", "retained", "residual"};
  for (Eigen::Index i = 0; i < lrh->ritz_values().size(); ++i) {
    const bool kept = i < lrh->rank();
    t.rows.push_back({std::to_string(i), format_double(lrh->ritz_values()(i)), kept ? "1" : "0",
                      kept ? format_double(lrh->residual_estimates()(i)) : ""});
  }
  write_csv(out_path(cfg, "lowrank_map.csv"), t);
  return lrh;
}

SampleOutput cmd_sample(const RunConfig& cfg, Method method) {
  const auto t0 = std::chrono::steady_clock::now();
  Problem p = load_problem(cfg);
  const StoredMap map = read_map(cfg, p.mesh());

  SamplerSetup setup;
  setup.prior = p.prior;
  setup.r = cfg.lowrank_r;
  setup.l = cfg.lowrank_l;
  setup.m_map = map.m_map;
  SampleOutput out;
  setup.lrh_map = lowrank_at_map(cfg, p, map.m_map, &out.lowrank_solves);

  ProposalKind kind{method, cfg.run_rwmh_sigma};
  long tune_solves = 0;
  if (method == Method::RWMH && !(kind.rwmh_sigma > 0)) {
    const long before = p.model->counter().linearized_solves();
    kind.rwmh_sigma = tune_rwmh_sigma(setup, *p.model, map.m_map, 0.1, 20, 100, splitmix64(cfg.run_seed ^ kTuneStream));
    tune_solves = p.model->counter().linearized_solves() - before;
  }
  // The SN proposal never touches the MAP point, so its setup is free; the
  // MAP-based proposals pay for the MAP solve and the low-rank build.
  if (method == Method::SNMAP || method == Method::ISMAP) out.setup_solves = map.solves + out.lowrank_solves;
  if (method == Method::RWMH) out.setup_solves = tune_solves;

  std::vector<int> indices;
  const std::vector<Vec> starts = load_or_make_starts(cfg, p, setup, map.m_map, indices, out.pilot_solves);
  out.setup_seconds = seconds_since(t0);

  out.chains = run_chains(kind, setup, *p.model, starts, cfg.run_samples, campaign_seed(cfg, method), cfg.run_workers);

  const std::string dir = chains_dir(cfg, method);
  fs::create_directories(dir);
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().filename().string().rfind("chain_", 0) == 0) fs::remove(e.path());
  }
  long failures = 0;
  for (std::size_t i = 0; i < out.chains.size(); ++i) {
    out.chains[i].meta.start_index = indices[i];
    failures += out.chains[i].meta.solver_failures;
    write_chain((fs::path(dir) / chain_file_name(out.chains[i].meta.chain_id)).string(), out.chains[i]);
  }
  CsvTable s;
  s.meta["method"] = to_string(method);
  s.meta["setup_solves"] = std::to_string(out.setup_solves);
  s.meta["map_solves"] = std::to_string(map.solves);
  s.meta["lowrank_solves"] = std::to_string(out.lowrank_solves);
  s.meta["tune_solves"] = std::to_string(tune_solves);
  s.meta["rwmh_sigma"] = format_double(kind.rwmh_sigma);
  s.meta["solver_failures"] = std::to_string(failures);
  s.meta["wall_seconds"] = format_double(out.setup_seconds);
  s.columns = {"chain_id", "start_index", "start_solves", "step_solves", "acceptance_rate"};
  for (const auto& c : out.chains) {
    s.rows.push_back({std::to_string(c.meta.chain_id), std::to_string(c.meta.start_index),
                      std::to_string(c.meta.start_solves), std::to_string(c.cumulative_solves.back()),
                      format_double(c.acceptance_rate())});
  }
  write_csv((fs::path(dir) / "setup.csv").string(), s);
  return out;
}

std::vector<DiagnosticsReport> cmd_diagnose(const RunConfig& cfg, const std::string& dir) {
  cfg.validate();
  const Mesh1D mesh = Mesh1D::uniform(cfg.mesh_n_nodes, cfg.mesh_length);
  const auto space = assemble_mass(mesh);
  const int probe = probe_node(mesh, cfg.diagnose_probe_x);
  const IatEstimator est = parse_iat_estimator(cfg.diagnose_iat);

  std::vector<std::string> dirs;
  bool has_chains = false;
  if (fs::is_directory(dir)) {
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.path().filename().string().rfind("chain_", 0) == 0) has_chains = true;
    }
  } else {
    throw ConfigError("'" + dir + "' is not a directory");
  }
  if (has_chains) {
    dirs.push_back(dir);
  } else {
    for (Method m : all_methods()) {
      const fs::path d = fs::path(dir) / to_string(m);
      if (fs::is_directory(d)) dirs.push_back(d.string());
    }
  }
  if (dirs.empty()) throw ConfigError("no chain files found under '" + dir + "'");

  std::vector<DiagnosticsReport> reports;
  for (const auto& d : dirs) {
    const std::vector<Chain> chains = read_chain_dir(d);
    long setup = 0;
    double setup_seconds = 0.0;
    const fs::path sp = fs::path(d) / "setup.csv";
    if (fs::exists(sp)) {
      const CsvTable t = read_csv(sp.string());
      setup = meta_long(t, "setup_solves");
      setup_seconds = meta_double(t, "wall_seconds");
    }
    reports.push_back(diagnose(chains, *space, probe, setup, cfg.run_burn_frac, est, setup_seconds));
  }
  fs::create_directories(cfg.run_out_dir);
  write_report(out_path(cfg, "report.csv"), reports);
  return reports;
}

AnalyzeOutput cmd_analyze(const RunConfig& cfg, const std::string& dir) {
  Problem p = load_problem(cfg);
  const Mesh1D& mesh = p.mesh();
  const StoredMap map = read_map(cfg, mesh);
  AnalyzeOutput out;
  const long before = p.model->counter().linearized_solves();
  out.eigensystem = posterior_eigensystem(*p.model, *p.prior, map.m_map);
  const double observed_from = mesh.left() + 0.5 * mesh.length();
  out.classification = classify(out.eigensystem, *p.model, *p.prior, map.m_map, observed_from);
  out.solves = p.model->counter().linearized_solves() - before;

  const std::string adir = out_path(cfg, "analysis");
  fs::create_directories(adir);
  write_classification((fs::path(adir) / "eigen_classification.csv").string(), out.classification);

  const std::vector<Chain> chains = read_chain_dir(dir);
  const Mat pooled = pool_samples(chains, cfg.run_burn_frac);
  const auto& es = out.eigensystem;

  // Nodal Gaussian-at-MAP variance: diag(V Lambda^{-1} V^T).
  const Vec gauss_var = es.V.array().square().matrix() * es.lambda.cwiseInverse();
  const Vec prior_var = p.prior->pointwise_variance();
  out.probe_node = probe_node(mesh, cfg.diagnose_probe_x);
  out.unobserved_node = mesh.nearest_node(mesh.left() + 0.25 * mesh.length());
  for (int node : {out.probe_node, out.unobserved_node}) {
    MarginalCurve c = point_marginal(pooled, node);
    auto pdf = c.grid.array() - map.m_map(node);
    c.gaussian_at_map = ((-0.5 * pdf.square() / gauss_var(node)).exp() / std::sqrt(2.0 * std::numbers::pi * gauss_var(node))).matrix();
    *c.gaussian_at_map /= trapezoid(c.grid, *c.gaussian_at_map);
    write_marginal((fs::path(adir) / ("marginal_" + c.provenance + ".csv")).string(), c);
    out.point_marginals.push_back(std::move(c));
  }
  const Vec col = pooled.col(out.unobserved_node);
  out.posterior_variance_unobserved = (col.array() - col.mean()).square().sum() / static_cast<double>(col.size() - 1);
  out.prior_variance_unobserved = prior_var(out.unobserved_node);

  std::vector<int> eig_idx;
  for (int i = 0; i < std::min<int>(cfg.analyze_eigs, static_cast<int>(es.lambda.size())); ++i) eig_idx.push_back(i);
  out.eigen_marginals = eigen_marginals(pooled, es, p.prior->mean(), map.m_map, eig_idx, *p.space);
  for (const auto& c : out.eigen_marginals) {
    write_marginal((fs::path(adir) / ("marginal_" + c.provenance + ".csv")).string(), c);
  }
  for (const auto& [i, j] : parse_pairs(cfg.analyze_pairs)) {
    Contour2D c = eigen_pair_density(pooled, es, p.prior->mean(), map.m_map, i, j, *p.space);
    write_contour((fs::path(adir) / ("contour_" + std::to_string(i) + "_" + std::to_string(j) + ".csv")).string(), c);
    out.contours.push_back(std::move(c));
  }

  // Posterior-mean minus MAP along the top eigenvector; reported, not asserted.
  const Vec post_mean = pooled.colwise().mean().transpose();
  const double shift_v1 = p.space->inner(es.V.col(0), post_mean - map.m_map);

  int informed = 0;
  double min_frac = 1.0;
  for (const auto& r : out.classification) {
    if (r.group == EigenGroup::DataInformed) {
      ++informed;
      min_frac = std::min(min_frac, r.observed_fraction());
    }
  }
  CsvTable s;
  s.columns = {"quantity", "value"};
  auto add = [&](const std::string& k, double v) { s.rows.push_back({k, format_double(v)}); };
  add("chains", static_cast<double>(chains.size()));
  add("pooled_samples", static_cast<double>(pooled.rows()));
  add("probe_node", out.probe_node);
  add("unobserved_node", out.unobserved_node);
  add("unobserved_prior_variance", out.prior_variance_unobserved);
  add("unobserved_posterior_variance", out.posterior_variance_unobserved);
  add("unobserved_variance_ratio", out.posterior_variance_unobserved / out.prior_variance_unobserved);
  add("data_informed_count", informed);
  add("data_informed_min_observed_fraction", informed ? min_frac : 0.0);
  add("posterior_mean_minus_map_along_v1", shift_v1);
  add("eigensystem_solves", static_cast<double>(out.solves));
  write_csv((fs::path(adir) / "summary.csv").string(), s);
  return out;
}

PipelineOutput cmd_pipeline(const RunConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  PipelineOutput out;
  json wall = json::object();
  fs::create_directories(cfg.run_out_dir);
  // a full run always pays for its own pilot
  fs::remove(out_path(cfg, "start_points.csv"));
  save_config(cfg, out_path(cfg, "config.json"));

  auto stage = [&](const std::string& name, auto&& fn) {
    const auto ts = std::chrono::steady_clock::now();
    fn();
    wall[name] = seconds_since(ts);
  };

  stage("synth", [&] { out.stage_solves["synth"] = cmd_synth(cfg).solves; });
  stage("map", [&] { out.stage_solves["map"] = cmd_map(cfg).solve_count.linearized_solves(); });
  for (const auto& name : cfg.run_methods) {
    const Method m = parse_method(name);
    stage("sample." + name, [&] {
      const SampleOutput s = cmd_sample(cfg, m);
      long start = 0;
      long steps = 0;
      for (const auto& c : s.chains) {
        start += c.meta.start_solves;
        steps += c.cumulative_solves.back();
      }
      out.stage_solves["sample." + name + ".setup"] = s.setup_solves;
      out.stage_solves["sample." + name + ".lowrank"] = s.lowrank_solves;
      out.stage_solves["sample." + name + ".start"] = start;
      out.stage_solves["sample." + name + ".steps"] = steps;
      if (s.pilot_solves > 0) out.stage_solves["pilot"] = s.pilot_solves;
    });
  }
  stage("diagnose", [&] { out.reports = cmd_diagnose(cfg, out_path(cfg, "chains")); });

  std::string analyze_method = cfg.run_methods.front();
  if (std::find(cfg.run_methods.begin(), cfg.run_methods.end(), cfg.analyze_method) != cfg.run_methods.end()) {
    analyze_method = cfg.analyze_method;
  }
  stage("analyze", [&] {
    out.stage_solves["analyze"] = cmd_analyze(cfg, chains_dir(cfg, parse_method(analyze_method))).solves;
  });

  json files = json::object();
  const fs::path root(cfg.run_out_dir);
  std::vector<fs::path> paths;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = fs::relative(e.path(), root).generic_string();
    if (rel == "manifest.json" || rel == "report.csv") continue;
    paths.push_back(e.path());
  }
  std::sort(paths.begin(), paths.end());
  for (const auto& pth : paths) files[fs::relative(pth, root).generic_string()] = hex64(hash_file(pth.string()));

  json reports = json::array();
  for (const auto& r : out.reports) {
    reports.push_back({{"method", r.method},
                       {"mpsrf", r.mpsrf},
                       {"iat", r.iat},
                       {"ess", r.ess},
                       {"msj", r.msj},
                       {"ar", r.acceptance_rate},
                       {"setup_solves", r.setup_solves},
                       {"total_solves", r.total_solves},
                       {"spis", r.spis}});
  }
  json stages(out.stage_solves);
  std::uint64_t h = config_hash(cfg);
  h = fnv1a(stages.dump(), h);
  h = fnv1a(files.dump(), h);
  h = fnv1a(reports.dump(), h);
  out.manifest_hash = hex64(h);

  wall["total"] = seconds_since(t0);
  json manifest = {{"config_hash", hex64(config_hash(cfg))},
                   {"config", json::parse(to_json_string(cfg))},
                   {"stage_solves", stages},
                   {"files", files},
                   {"reports", reports},
                   {"manifest_hash", out.manifest_hash},
                   {"wall_seconds", wall}};
  std::ofstream mf(out_path(cfg, "manifest.json"));
  mf << manifest.dump(2) << "\n";
  return out;
}

}  // namespace hbmcmc
