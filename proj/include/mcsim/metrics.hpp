#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mcsim/config.hpp"

namespace mcsim {

enum class ScalingLaw { Amdahl, Gustafson };

// Amdahl:    S(n) = 1 / ((1-f) + f/n)
// Gustafson: S(n) = (1-f) + f*n
// Requires f in [0,1] and n >= 1.
double scaling_law(double f, u64 n, ScalingLaw law);

struct ParallelMetrics {
  double speedup = 0;     // T_s / T_p
  double efficiency = 0;  // T_s / (T_p * n)
};
ParallelMetrics parallel_metrics(double t_sequential, double t_parallel, u64 n);

struct AppPerf {
  std::string app;
  double ipc_alone = 0;   // baseline, required > 0
  double ipc_shared = 0;
  u64 instructions = 0;
};

struct MetricReport {
  std::vector<std::pair<std::string, double>> slowdowns;  // per app, input order
  double weighted_speedup = 0;   // sum of 1/slowdown
  double harmonic_speedup = 0;   // n / sum of slowdowns
  double fairness = 0;           // min slowdown / max slowdown
  double max_slowdown = 0;
  std::optional<ParallelMetrics> parallel;
  double energy_joules = 0;
  double average_power_watts = 0;
};

// slowdown_i = ipc_alone_i / ipc_shared_i.  Throws MissingBaseline when some
// ipc_alone is not positive.
MetricReport multiprogram_metrics(std::span<const AppPerf> apps);

// WS_after / WS_before; both must be positive.
double ws_improvement(double ws_before, double ws_after);

struct PowerEnergy {
  double average_watts = 0;
  double joules = 0;
};
// Integrates the DVFS power curve over (frequency, seconds) segments plus a
// constant static offset.  Durations must be positive (InvalidDuration).
PowerEnergy power_energy(std::span<const std::pair<double, double>> segments,
                         const DvfsParams& dvfs, double static_watts);

// Fixed-width numeric formatting used by every CSV/JSON emitter: 6 significant
// digits, so identical runs serialize byte-identically.
std::string format_number(double v);

std::string metrics_csv(const MetricReport& r);
nlohmann::json metrics_json(const MetricReport& r);

}  // namespace mcsim
