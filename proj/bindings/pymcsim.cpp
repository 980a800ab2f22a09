// Thin python surface: JSON/text in, JSON/text out.  The heavy lifting stays
// in the C++ core; these wrappers exist for scripting and smoke tests.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "mcsim/core.hpp"
#include "mcsim/engine.hpp"
#include "mcsim/litmus.hpp"
#include "mcsim/metrics.hpp"
#include "mcsim/report.hpp"

namespace py = pybind11;
using namespace mcsim;

namespace {

SystemConfig config_of(const std::string& config_json) {
  if (config_json.empty()) return default_config(2);
  nlohmann::json j = nlohmann::json::parse(config_json);
  return config_from_json(j);
}

std::vector<std::vector<TraceEvent>> apps_of(const std::vector<std::string>& traces, u32 bs) {
  std::vector<std::vector<TraceEvent>> apps;
  for (const std::string& t : traces) apps.push_back(parse_trace(t, bs));
  return apps;
}

}  // namespace

PYBIND11_MODULE(_mcsim, m) {
  m.doc() = "mcsim core bindings";

  m.def("version", [] { return std::string("1.0.0"); });

  m.def("default_config", [](u32 cores) { return config_to_json(default_config(cores)).dump(2); },
        py::arg("cores") = 2);

  m.def("validate_config", [](const std::string& config_json) {
    return config_to_json(config_of(config_json)).dump(2);
  });

  m.def(
      "run",
      [](const std::string& config_json, const std::vector<std::string>& traces, u64 seed) {
        SystemConfig cfg = config_of(config_json);
        ExperimentResult r = run_experiment(cfg, apps_of(traces, cfg.block_size_bytes), seed);
        return py::make_tuple(run_summary_json(r, cfg, seed, 1).dump(2) + "\n",
                              run_metrics_csv(r));
      },
      py::arg("config_json"), py::arg("traces"), py::arg("seed") = 0,
      "Runs each trace alone and all together; returns (summary_json, metrics_csv).");

  m.def("amdahl", [](double f, u32 n) { return scaling_law(f, n, ScalingLaw::Amdahl); });
  m.def("gustafson", [](double f, u32 n) { return scaling_law(f, n, ScalingLaw::Gustafson); });

  m.def(
      "dynamic_power",
      [](double f_hz, double f_base, double f_turbo, double v_dd, double v_min, double tdp) {
        DvfsParams p;
        p.f_base = f_base;
        p.f_turbo = f_turbo;
        p.v_dd = v_dd;
        p.v_min = v_min;
        p.tdp_watts = tdp;
        return dynamic_power(p, f_hz);
      },
      py::arg("f_hz"), py::arg("f_base") = 4.0e9, py::arg("f_turbo") = 4.4e9,
      py::arg("v_dd") = 1.2, py::arg("v_min") = 1.0, py::arg("tdp") = 88.0);

  m.def(
      "litmus_outcomes",
      [](const std::string& program, const std::string& model) {
        LitmusProgram p = parse_litmus(program);
        OutcomeSet set;
        if (model == "sc")
          set = enumerate_sc(p);
        else if (model == "tso")
          set = enumerate_tso(p);
        else if (model == "weak")
          set = enumerate_weak(p);
        else
          throw std::invalid_argument("model must be sc, tso or weak");
        return format_outcomes(set);
      },
      py::arg("program"), py::arg("model") = "sc");

  m.def("normalize_trace", [](const std::string& text) {
    std::vector<TraceEvent> ev = parse_trace(text, 64);
    return render_trace(ev);
  });

  m.def(
      "generate_trace",
      [](const std::string& pattern, u32 threads, u32 events, u64 seed) {
        TraceGenParams p;
        p.thread_count = threads;
        p.events_per_thread = events;
        TracePattern pat;
        if (pattern == "streaming")
          pat = TracePattern::Streaming;
        else if (pattern == "random")
          pat = TracePattern::RandomUniform;
        else if (pattern == "false_sharing")
          pat = TracePattern::FalseSharing;
        else if (pattern == "row_local")
          pat = TracePattern::RowLocal;
        else
          throw std::invalid_argument("unknown pattern");
        return render_trace(generate_trace(pat, p, seed));
      },
      py::arg("pattern"), py::arg("threads") = 2, py::arg("events") = 64, py::arg("seed") = 0);
}
