// Python bindings: configs travel as JSON text, arrays as numpy via Eigen.

#include "hbmcmc/config.hpp"
#include "hbmcmc/diagnostics.hpp"
#include "hbmcmc/errors.hpp"
#include "hbmcmc/io.hpp"
#include "hbmcmc/pipeline.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace hbmcmc;

namespace {

RunConfig parse(const std::string& json_text, const std::map<std::string, std::string>& overrides) {
  RunConfig c = from_json_string(json_text);
  apply_overrides(c, overrides);
  c.validate();
  return c;
}

py::dict report_dict(const DiagnosticsReport& r) {
  py::dict d;
  d["method"] = r.method;
  d["chains"] = r.chains;
  d["samples"] = r.samples;
  d["probe_index"] = r.probe_index;
  d["mpsrf"] = r.mpsrf;
  d["mpsrf_regularized"] = r.mpsrf_regularized;
  d["iat"] = r.iat;
  d["ess"] = r.ess;
  d["msj"] = r.msj;
  d["acceptance_rate"] = r.acceptance_rate;
  d["setup_solves"] = r.setup_solves;
  d["total_solves"] = r.total_solves;
  d["spis"] = r.spis;
  d["tpis"] = r.tpis;
  return d;
}

py::list report_list(const std::vector<DiagnosticsReport>& rs) {
  py::list out;
  for (const auto& r : rs) out.append(report_dict(r));
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Hessian-based MCMC for 1D Bayesian inverse problems";

  static py::exception<ConfigError> config_error(m, "ConfigError", PyExc_ValueError);
  static py::exception<NumericalError> numerical_error(m, "NumericalError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      config_error(e.what());
    } catch (const NumericalError& e) {
      numerical_error(e.what());
    }
  });

  m.def("config_keys", &config_keys);
  m.def("default_config_json", [] { return to_json_string(RunConfig{}); });
  m.def("normalize_config", [](const std::string& text, const std::map<std::string, std::string>& overrides) {
    return to_json_string(parse(text, overrides));
  }, py::arg("config_json"), py::arg("overrides") = std::map<std::string, std::string>{});

  m.def("synth", [](const std::string& cfg) {
    const SynthOutput s = cmd_synth(parse(cfg, {}));
    py::dict d;
    d["truth"] = s.truth;
    d["y_obs"] = s.obs.y_obs;
    d["points"] = s.obs.points;
    d["noise_var"] = s.obs.noise_var;
    return d;
  });
  m.def("map", [](const std::string& cfg) {
    const MapResult r = cmd_map(parse(cfg, {}));
    py::dict d;
    d["m_map"] = r.m_map;
    d["newton_iters"] = r.newton_iters;
    d["cg_iters"] = r.total_cg_iters;
    d["grad_norm_history"] = r.grad_norm_history;
    d["cost_history"] = r.cost_history;
    d["solves"] = r.solve_count.linearized_solves();
    return d;
  });
  m.def("sample", [](const std::string& cfg, const std::string& method) {
    const SampleOutput s = cmd_sample(parse(cfg, {}), parse_method(method));
    py::list chains;
    for (const auto& c : s.chains) chains.append(c.samples);
    py::dict d;
    d["chains"] = chains;
    d["setup_solves"] = s.setup_solves;
    d["pilot_solves"] = s.pilot_solves;
    return d;
  });
  m.def("diagnose", [](const std::string& cfg, const std::string& dir) {
    return report_list(cmd_diagnose(parse(cfg, {}), dir));
  });
  m.def("pipeline", [](const std::string& cfg) {
    const PipelineOutput p = cmd_pipeline(parse(cfg, {}));
    py::dict d;
    d["reports"] = report_list(p.reports);
    d["stage_solves"] = p.stage_solves;
    d["manifest_hash"] = p.manifest_hash;
    return d;
  });

  m.def("iat", [](const Vec& x, const std::string& est) { return iat(x, parse_iat_estimator(est)); }, py::arg("x"),
        py::arg("estimator") = "windowed");
  m.def("ess", [](const Vec& x, const std::string& est) { return ess(x, parse_iat_estimator(est)); }, py::arg("x"),
        py::arg("estimator") = "windowed");
  m.def("autocorrelation", &autocorrelation, py::arg("x"), py::arg("max_lag"));
  m.def("mpsrf", [](const std::vector<Mat>& chains) { return mpsrf_detail(chains).value; });
}
