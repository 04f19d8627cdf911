#pragma once

// Run configuration. Keys are dotted ("prior.a") and stored as nested JSON.
// Every key is also a CLI flag of the same name.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace hbmcmc {

struct RunConfig {
  double prior_a = 1e-2;
  double prior_b = 1e2;
  double prior_mean_constant = 1.0;
  int mesh_n_nodes = 139;
  double mesh_length = 1.0;

  std::string model_kind = "exp_reaction";  // linear | exp_reaction
  double model_source_constant = 1.0;
  int obs_count = 10;
  std::string obs_region = "right_half";  // right_half | full
  double obs_noise_rel = 0.015;
  std::string truth_kind = "sine";  // sine | prior_mean | prior_sample

  int lowrank_r = 20;
  int lowrank_l = 5;
  double map_grad_tol_rel = 1e-5;
  int map_max_newton = 50;

  std::uint64_t run_seed = 20111;
  int run_chains = 21;
  int run_samples = 25000;
  double run_burn_frac = 0.0;
  std::string run_out_dir = "out";
  int run_workers = 1;
  std::vector<std::string> run_methods{"sn", "snmap", "ismap"};
  double run_rwmh_sigma = 0.0;  // 0 = tune on a short pilot
  int pilot_samples = 2000;
  std::string pilot_method = "snmap";

  double diagnose_probe_x = 0.69;
  std::string diagnose_iat = "windowed";
  int analyze_eigs = 8;
  std::string analyze_pairs = "0,1";
  std::string analyze_method = "snmap";

  bool operator==(const RunConfig&) const = default;

  /// Range and enum checks; throws ConfigError.
  void validate() const;
};

/// Dotted key names in canonical order.
const std::vector<std::string>& config_keys();

/// Nested JSON text; keys sorted, doubles printed losslessly.
std::string to_json_string(const RunConfig& c);
/// Unknown keys and type mismatches throw ConfigError. Missing keys keep
/// their defaults. Does not validate.
RunConfig from_json_string(const std::string& text);
RunConfig load_config(const std::string& path);
void save_config(const RunConfig& c, const std::string& path);

/// Applies "key" -> textual value overrides (as given on the command line).
void apply_overrides(RunConfig& c, const std::map<std::string, std::string>& overrides);

/// Stable hash of the canonical serialization.
std::uint64_t config_hash(const RunConfig& c);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& data, std::uint64_t h = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t h);

/// "0,1;2,3" -> {(0,1), (2,3)}.
std::vector<std::pair<int, int>> parse_pairs(const std::string& s);

}  // namespace hbmcmc
