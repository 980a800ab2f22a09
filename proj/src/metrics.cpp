#include "mcsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "mcsim/core.hpp"

namespace mcsim {

double scaling_law(double f, u64 n, ScalingLaw law) {
  if (!(f >= 0.0 && f <= 1.0)) fail(Err::InvalidConfig, "parallel fraction must be in [0, 1]");
  if (n < 1) fail(Err::InvalidConfig, "n must be >= 1");
  switch (law) {
    case ScalingLaw::Amdahl:
      return 1.0 / ((1.0 - f) + f / double(n));
    case ScalingLaw::Gustafson:
      return (1.0 - f) + f * double(n);
  }
  return 0.0;
}

ParallelMetrics parallel_metrics(double t_sequential, double t_parallel, u64 n) {
  if (!(t_sequential > 0.0) || !(t_parallel > 0.0))
    fail(Err::InvalidDuration, "times must be positive");
  if (n < 1) fail(Err::InvalidConfig, "n must be >= 1");
  ParallelMetrics m;
  m.speedup = t_sequential / t_parallel;
  m.efficiency = t_sequential / (t_parallel * double(n));
  return m;
}

MetricReport multiprogram_metrics(std::span<const AppPerf> apps) {
  MetricReport r;
  if (apps.empty()) return r;
  double ws = 0.0, slowdown_sum = 0.0;
  double lo = 0.0, hi = 0.0;
  for (const AppPerf& a : apps) {
    if (!(a.ipc_alone > 0.0))
      fail(Err::MissingBaseline, "app '" + a.app + "' has no alone-run IPC");
    double sd = a.ipc_shared > 0.0 ? a.ipc_alone / a.ipc_shared
                                   : std::numeric_limits<double>::infinity();
    r.slowdowns.push_back({a.app, sd});
    ws += 1.0 / sd;
    slowdown_sum += sd;
    if (r.slowdowns.size() == 1) {
      lo = hi = sd;
    } else {
      lo = std::min(lo, sd);
      hi = std::max(hi, sd);
    }
  }
  r.weighted_speedup = ws;
  r.harmonic_speedup = double(apps.size()) / slowdown_sum;
  r.fairness = hi > 0.0 ? lo / hi : 0.0;
  r.max_slowdown = hi;
  return r;
}

double ws_improvement(double ws_before, double ws_after) {
  if (!(ws_before > 0.0) || !(ws_after > 0.0))
    fail(Err::MissingBaseline, "weighted speedups must be positive");
  return ws_after / ws_before;
}

PowerEnergy power_energy(std::span<const std::pair<double, double>> segments,
                         const DvfsParams& dvfs, double static_watts) {
  PowerEnergy pe;
  double total_s = 0.0;
  for (auto& [f, secs] : segments) {
    if (!(secs > 0.0)) fail(Err::InvalidDuration, "segment duration must be positive");
    pe.joules += (dynamic_power(dvfs, f) + static_watts) * secs;
    total_s += secs;
  }
  if (total_s > 0.0) pe.average_watts = pe.joules / total_s;
  return pe;
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string metrics_csv(const MetricReport& r) {
  std::ostringstream os;
  os << "metric,app,value\n";
  for (auto& [app, sd] : r.slowdowns) os << "slowdown," << app << "," << format_number(sd) << "\n";
  os << "weighted_speedup,all," << format_number(r.weighted_speedup) << "\n";
  os << "harmonic_speedup,all," << format_number(r.harmonic_speedup) << "\n";
  os << "fairness,all," << format_number(r.fairness) << "\n";
  os << "max_slowdown,all," << format_number(r.max_slowdown) << "\n";
  if (r.parallel) {
    os << "speedup,all," << format_number(r.parallel->speedup) << "\n";
    os << "efficiency,all," << format_number(r.parallel->efficiency) << "\n";
  }
  os << "energy_joules,all," << format_number(r.energy_joules) << "\n";
  os << "average_power_watts,all," << format_number(r.average_power_watts) << "\n";
  return os.str();
}

nlohmann::json metrics_json(const MetricReport& r) {
  nlohmann::json j;
  j["slowdowns"] = nlohmann::json::object();
  for (auto& [app, sd] : r.slowdowns) j["slowdowns"][app] = sd;
  j["weighted_speedup"] = r.weighted_speedup;
  j["harmonic_speedup"] = r.harmonic_speedup;
  j["fairness"] = r.fairness;
  j["max_slowdown"] = r.max_slowdown;
  if (r.parallel) {
    j["speedup"] = r.parallel->speedup;
    j["efficiency"] = r.parallel->efficiency;
  }
  j["energy_joules"] = r.energy_joules;
  j["average_power_watts"] = r.average_power_watts;
  return j;
}

}  // namespace mcsim
