#include "hbmcmc/config.hpp"

#include "hbmcmc/errors.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

namespace hbmcmc {

using nlohmann::json;

namespace {

struct Field {
  std::string key;
  std::function<json(const RunConfig&)> get;
  std::function<void(RunConfig&, const json&)> set;
  std::function<json(const std::string&)> parse;  // CLI text -> json value
};

template <class T>
T as(const json& j, const std::string& key) {
  try {
    if constexpr (std::is_same_v<T, double>) {
      if (!j.is_number()) throw ConfigError("");
    } else if constexpr (std::is_integral_v<T>) {
      if (!j.is_number_integer() && !j.is_number_unsigned()) throw ConfigError("");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!j.is_string()) throw ConfigError("");
    }
    return j.get<T>();
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type: " + j.dump());
  }
}

json parse_number(const std::string& key, const std::string& text, bool integer) {
  try {
    std::size_t pos = 0;
    if (integer) {
      const long long v = std::stoll(text, &pos);
      if (pos != text.size()) throw ConfigError("");
      return v;
    }
    const double v = std::stod(text, &pos);
    if (pos != text.size()) throw ConfigError("");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("cannot parse value '" + text + "' for '" + key + "'");
  }
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) {
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

template <class T>
Field scalar(const std::string& key, T RunConfig::*member) {
  Field f;
  f.key = key;
  f.get = [member](const RunConfig& c) { return json(c.*member); };
  f.set = [member, key](RunConfig& c, const json& j) {
    if constexpr (std::is_same_v<T, int>) {
      const auto v = as<long long>(j, key);
      if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
        throw ConfigError("config key '" + key + "' is out of range");
      }
      c.*member = static_cast<int>(v);
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      if (j.is_number_integer() && !j.is_number_unsigned() && j.get<long long>() < 0) throw ConfigError("config key '" + key + "' must be >= 0");
      c.*member = as<std::uint64_t>(j, key);
    } else {
      c.*member = as<T>(j, key);
    }
  };
  f.parse = [key](const std::string& text) -> json {
    if constexpr (std::is_same_v<T, std::string>) return text;
    else if constexpr (std::is_same_v<T, double>) return parse_number(key, text, false);
    else if constexpr (std::is_same_v<T, std::uint64_t>) {
      try {
        std::size_t pos = 0;
        const unsigned long long v = std::stoull(text, &pos);
        if (pos != text.size() || text.find('-') != std::string::npos) throw ConfigError("");
        return static_cast<std::uint64_t>(v);
      } catch (const std::exception&) {
        throw ConfigError("cannot parse value '" + text + "' for '" + key + "'");
      }
    } else return parse_number(key, text, true);
  };
  return f;
}

Field string_list(const std::string& key, std::vector<std::string> RunConfig::*member) {
  Field f;
  f.key = key;
  f.get = [member](const RunConfig& c) { return json(c.*member); };
  f.set = [member, key](RunConfig& c, const json& j) {
    if (!j.is_array()) throw ConfigError("config key '" + key + "' must be a list of strings");
    std::vector<std::string> v;
    for (const auto& e : j) v.push_back(as<std::string>(e, key));
    c.*member = std::move(v);
  };
  f.parse = [](const std::string& text) -> json { return split(text, ','); };
  return f;
}

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      scalar("prior.a", &RunConfig::prior_a),
      scalar("prior.b", &RunConfig::prior_b),
      scalar("prior.mean_constant", &RunConfig::prior_mean_constant),
      scalar("mesh.n_nodes", &RunConfig::mesh_n_nodes),
      scalar("mesh.length", &RunConfig::mesh_length),
      scalar("model.kind", &RunConfig::model_kind),
      scalar("model.source_constant", &RunConfig::model_source_constant),
      scalar("obs.count", &RunConfig::obs_count),
      scalar("obs.region", &RunConfig::obs_region),
      scalar("obs.noise_rel", &RunConfig::obs_noise_rel),
      scalar("truth.kind", &RunConfig::truth_kind),
      scalar("lowrank.r", &RunConfig::lowrank_r),
      scalar("lowrank.l", &RunConfig::lowrank_l),
      scalar("map.grad_tol_rel", &RunConfig::map_grad_tol_rel),
      scalar("map.max_newton", &RunConfig::map_max_newton),
      scalar("run.seed", &RunConfig::run_seed),
      scalar("run.chains", &RunConfig::run_chains),
      scalar("run.samples", &RunConfig::run_samples),
      scalar("run.burn_frac", &RunConfig::run_burn_frac),
      scalar("run.out_dir", &RunConfig::run_out_dir),
      scalar("run.workers", &RunConfig::run_workers),
      string_list("run.methods", &RunConfig::run_methods),
      scalar("run.rwmh_sigma", &RunConfig::run_rwmh_sigma),
      scalar("pilot.samples", &RunConfig::pilot_samples),
      scalar("pilot.method", &RunConfig::pilot_method),
      scalar("diagnose.probe_x", &RunConfig::diagnose_probe_x),
      scalar("diagnose.iat", &RunConfig::diagnose_iat),
      scalar("analyze.eigs", &RunConfig::analyze_eigs),
      scalar("analyze.pairs", &RunConfig::analyze_pairs),
      scalar("analyze.method", &RunConfig::analyze_method),
  };
  return f;
}

const Field& field(const std::string& key) {
  for (const auto& f : fields()) {
    if (f.key == key) return f;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

std::pair<std::string, std::string> split_key(const std::string& key) {
  const auto dot = key.find('.');
  return {key.substr(0, dot), key.substr(dot + 1)};
}

bool one_of(const std::string& v, std::initializer_list<const char*> opts) {
  for (const char* o : opts) {
    if (v == o) return true;
  }
  return false;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& f : fields()) k.push_back(f.key);
    return k;
  }();
  return keys;
}

void RunConfig::validate() const {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  require(prior_a > 0 && prior_b > 0, "prior.a and prior.b must be positive");
  require(mesh_n_nodes >= 3, "mesh.n_nodes must be >= 3");
  require(mesh_length > 0, "mesh.length must be positive");
  require(one_of(model_kind, {"linear", "exp_reaction"}), "model.kind must be linear or exp_reaction");
  require(obs_count >= 1, "obs.count must be >= 1");
  require(one_of(obs_region, {"right_half", "full"}), "obs.region must be right_half or full");
  require(obs_noise_rel >= 0, "obs.noise_rel must be >= 0");
  require(one_of(truth_kind, {"sine", "prior_mean", "prior_sample"}),
          "truth.kind must be sine, prior_mean or prior_sample");
  require(lowrank_r >= 1 && lowrank_l >= 0, "lowrank.r must be >= 1 and lowrank.l >= 0");
  require(lowrank_r + lowrank_l <= mesh_n_nodes, "lowrank.r + lowrank.l must not exceed mesh.n_nodes");
  require(map_grad_tol_rel > 0 && map_grad_tol_rel < 1, "map.grad_tol_rel must lie in (0, 1)");
  require(map_max_newton >= 1, "map.max_newton must be >= 1");
  require(run_chains >= 1, "run.chains must be >= 1");
  require(run_samples >= 10, "run.samples must be >= 10");
  require(run_burn_frac >= 0 && run_burn_frac < 1, "run.burn_frac must lie in [0, 1)");
  require(!run_out_dir.empty(), "run.out_dir must not be empty");
  require(run_workers >= 1, "run.workers must be >= 1");
  require(!run_methods.empty(), "run.methods must not be empty");
  for (const auto& m : run_methods) {
    require(one_of(m, {"rwmh", "sn", "snmap", "ismap"}), "run.methods: unknown method '" + m + "'");
  }
  require(run_rwmh_sigma >= 0, "run.rwmh_sigma must be >= 0");
  require(pilot_samples >= run_chains, "pilot.samples must be >= run.chains");
  require(one_of(pilot_method, {"rwmh", "sn", "snmap", "ismap"}), "pilot.method: unknown method");
  require(diagnose_probe_x >= 0 && diagnose_probe_x <= 1, "diagnose.probe_x must lie in [0, 1]");
  require(one_of(diagnose_iat, {"windowed", "max_truncation", "initial_positive"}),
          "diagnose.iat must be windowed, max_truncation or initial_positive");
  require(analyze_eigs >= 1 && analyze_eigs <= mesh_n_nodes, "analyze.eigs must lie in [1, mesh.n_nodes]");
  require(one_of(analyze_method, {"rwmh", "sn", "snmap", "ismap"}), "analyze.method: unknown method");
  for (const auto& [i, j] : parse_pairs(analyze_pairs)) {
    require(i >= 0 && j >= 0 && i < mesh_n_nodes && j < mesh_n_nodes && i != j,
            "analyze.pairs: indices must be distinct and within the parameter dimension");
  }
}

std::string to_json_string(const RunConfig& c) {
  json j = json::object();
  for (const auto& f : fields()) {
    const auto [sec, name] = split_key(f.key);
    j[sec][name] = f.get(c);
  }
  return j.dump(2) + "\n";
}

RunConfig from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c;
  for (const auto& [sec, body] : j.items()) {
    if (!body.is_object()) throw ConfigError("config section '" + sec + "' must be an object");
    for (const auto& [name, value] : body.items()) field(sec + "." + name).set(c, value);
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_string(ss.str());
}

void save_config(const RunConfig& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << to_json_string(c);
}

void apply_overrides(RunConfig& c, const std::map<std::string, std::string>& overrides) {
  for (const auto& [key, text] : overrides) {
    const Field& f = field(key);
    f.set(c, f.parse(text));
  }
}

std::uint64_t fnv1a(const std::string& data, std::uint64_t h) {
  for (unsigned char ch : data) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::uint64_t config_hash(const RunConfig& c) { return fnv1a(to_json_string(c)); }

std::vector<std::pair<int, int>> parse_pairs(const std::string& s) {
  std::vector<std::pair<int, int>> out;
  for (const auto& item : split(s, ';')) {
    const auto parts = split(item, ',');
    if (parts.size() != 2) throw ConfigError("analyze.pairs: expected 'i,j' items separated by ';'");
    try {
      out.emplace_back(std::stoi(parts[0]), std::stoi(parts[1]));
    } catch (const std::exception&) {
      throw ConfigError("analyze.pairs: indices must be integers");
    }
  }
  return out;
}

}  // namespace hbmcmc
