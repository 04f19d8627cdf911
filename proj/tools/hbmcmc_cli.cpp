// hbmcmc command-line driver.
//
//   hbmcmc synth|map|sample|diagnose|analyze|pipeline [--config FILE] [--<key> VALUE ...]
//
// Every config key is a flag of the same dotted name (--prior.a 0.01). Flags
// override the config file. Exit codes: 0 success, 2 config error,
// 3 numerical failure.

#include "hbmcmc/config.hpp"
#include "hbmcmc/errors.hpp"
#include "hbmcmc/io.hpp"
#include "hbmcmc/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>

namespace {

using namespace hbmcmc;

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct Common {
  std::string config_path;
  std::map<std::string, std::string> overrides;
};

void add_config_flags(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "JSON config file");
  for (const auto& key : config_keys()) {
    cmd->add_option_function<std::string>(
        "--" + key, [&c, key](const std::string& v) { c.overrides[key] = v; }, "config key " + key);
  }
}

void alias(CLI::App* cmd, Common& c, const std::string& flag, const std::string& key, const std::string& help) {
  cmd->add_option_function<std::string>(
      flag, [&c, key](const std::string& v) { c.overrides[key] = v; }, help + " (same as --" + key + ")");
}

RunConfig resolve(const Common& c) {
  RunConfig cfg = c.config_path.empty() ? RunConfig{} : load_config(c.config_path);
  apply_overrides(cfg, c.overrides);
  cfg.validate();
  return cfg;
}

void print_reports(const std::vector<DiagnosticsReport>& reports) {
  std::printf("%-6s %8s %9s %10s %10s %6s %12s %10s\n", "method", "MPSRF", "IAT", "ESS", "MSJ", "AR", "SPIS",
              "TPIS");
  for (const auto& r : reports) {
    std::printf("%-6s %8.4f %9.2f %10.1f %10.4g %6.3f %12.2f %10.3g\n", r.method.c_str(), r.mpsrf, r.iat, r.ess,
                r.msj, r.acceptance_rate, r.spis, r.tpis);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hessian-based MCMC for 1D Bayesian inverse problems"};
  app.require_subcommand(1);

  Common synth_c, map_c, sample_c, diag_c, analyze_c, pipe_c;
  auto* synth = app.add_subcommand("synth", "generate truth.csv and observations.csv");
  add_config_flags(synth, synth_c);

  auto* map = app.add_subcommand("map", "solve for the MAP point (map.csv)");
  add_config_flags(map, map_c);

  auto* sample = app.add_subcommand("sample", "run a chain campaign for one method");
  add_config_flags(sample, sample_c);
  std::string method = "snmap";
  sample->add_option("--method", method, "rwmh|sn|snmap|ismap")->capture_default_str();
  alias(sample, sample_c, "--chains", "run.chains", "number of chains");
  alias(sample, sample_c, "--samples", "run.samples", "samples per chain");
  alias(sample, sample_c, "--seed", "run.seed", "master seed");

  auto* diag = app.add_subcommand("diagnose", "chain diagnostics (report.csv)");
  add_config_flags(diag, diag_c);
  std::string diag_dir;
  diag->add_option("--chains-dir", diag_dir, "directory of chain files or of method subdirectories");
  alias(diag, diag_c, "--probe-x", "diagnose.probe_x", "probe location as a fraction of the domain");

  auto* analyze = app.add_subcommand("analyze", "posterior eigen-analysis and marginals");
  add_config_flags(analyze, analyze_c);
  std::string analyze_dir;
  analyze->add_option("--chains-dir", analyze_dir, "directory of chain files");
  alias(analyze, analyze_c, "--eigs", "analyze.eigs", "number of eigen-directions for marginals");
  alias(analyze, analyze_c, "--pairs", "analyze.pairs", "eigen pairs for 2D densities, e.g. 0,1;1,2");

  auto* pipe = app.add_subcommand("pipeline", "synth, map, sample, diagnose and analyze in one run");
  add_config_flags(pipe, pipe_c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (synth->parsed()) {
      const RunConfig cfg = resolve(synth_c);
      const SynthOutput s = cmd_synth(cfg);
      std::printf("synth: %d observations written to %s\n", s.obs.q(), cfg.run_out_dir.c_str());
    } else if (map->parsed()) {
      const RunConfig cfg = resolve(map_c);
      const MapResult r = cmd_map(cfg);
      std::printf("map: %d Newton iterations, %d CG iterations, gradient reduction %.3g, %ld solves\n",
                  r.newton_iters, r.total_cg_iters, r.grad_norm_history.back() / r.grad_norm_history.front(),
                  r.solve_count.linearized_solves());
    } else if (sample->parsed()) {
      const RunConfig cfg = resolve(sample_c);
      const Method m = parse_method(method);
      const SampleOutput s = cmd_sample(cfg, m);
      long failures = 0;
      for (const auto& c : s.chains) failures += c.meta.solver_failures;
      std::printf("sample: %zu %s chains x %d samples in %s (setup solves %ld, pilot solves %ld)\n",
                  s.chains.size(), to_string(m).c_str(), cfg.run_samples, chains_dir(cfg, m).c_str(),
                  s.setup_solves, s.pilot_solves);
      if (failures > 0) std::fprintf(stderr, "warning: %ld proposals rejected after solver failures\n", failures);
    } else if (diag->parsed()) {
      const RunConfig cfg = resolve(diag_c);
      const std::string dir = diag_dir.empty() ? out_path(cfg, "chains") : diag_dir;
      print_reports(cmd_diagnose(cfg, dir));
    } else if (analyze->parsed()) {
      const RunConfig cfg = resolve(analyze_c);
      const std::string dir = analyze_dir.empty() ? chains_dir(cfg, parse_method(cfg.analyze_method)) : analyze_dir;
      const AnalyzeOutput a = cmd_analyze(cfg, dir);
      int informed = 0;
      for (const auto& r : a.classification) informed += r.group == EigenGroup::DataInformed;
      std::printf("analyze: %d data-informed directions; unobserved node %d variance ratio %.3f\n", informed,
                  a.unobserved_node, a.posterior_variance_unobserved / a.prior_variance_unobserved);
    } else if (pipe->parsed()) {
      const RunConfig cfg = resolve(pipe_c);
      const PipelineOutput p = cmd_pipeline(cfg);
      print_reports(p.reports);
      std::printf("manifest hash %s\n", p.manifest_hash.c_str());
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kExitNumerical;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return kExitConfig;
  }
  return 0;
}
