#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "mcsim/cache.hpp"
#include "mcsim/coherence.hpp"
#include "mcsim/config.hpp"
#include "mcsim/dram.hpp"
#include "mcsim/metrics.hpp"
#include "mcsim/trace.hpp"

namespace mcsim {

struct RunOptions {
  bool capture_messages = false;
  bool capture_commands = false;
  bool capture_events = false;
};

struct LevelStats {
  u64 accesses = 0;
  u64 hits = 0;
  u64 misses = 0;
  u64 fills = 0;
  u64 writebacks = 0;
};

struct ThreadStats {
  u32 app = 0;
  u64 instructions = 0;
  u64 loads = 0;
  u64 stores = 0;
  u64 computes = 0;
  u64 fences = 0;
  u64 forwarded_loads = 0;
  Cycle finish_cycle = 0;
  u64 mem_accesses = 0;        // demand loads/stores that reached the caches
  u64 mem_latency_sum = 0;
  std::vector<u64> load_values;  // value tracking only, program order
};

struct CoreExecStats {
  u64 instructions = 0;
  u64 busy_cycles = 0;
  u64 stall_cycles = 0;
  u64 idle_cycles = 0;
  u64 context_switches = 0;
  double energy_joules = 0;
  std::map<double, u64> cycles_at_freq;
};

// One globally-ordered read/write as it became visible; replayed by the
// data-value oracle.
struct ValueTxn {
  u64 seq = 0;
  Cycle cycle = 0;
  bool is_store = false;
  u32 thread = 0;
  Addr addr = 0;
  u32 size = 0;
  u64 value = 0;  // stored value / observed load value
};

struct RunStats {
  Cycle total_cycles = 0;
  u64 instructions = 0;
  std::vector<ThreadStats> threads;
  std::vector<CoreExecStats> cores;
  std::map<std::string, LevelStats> levels;  // keyed by cache level name
  CoherenceCounters coherence;
  DramStats dram;
  u64 mshr_merges = 0;
  u64 mshr_stalls = 0;
  u64 store_buffer_drains = 0;
  u64 demand_accesses = 0;      // all demand loads/stores
  u64 demand_latency_sum = 0;
  // optional captures
  std::vector<CoherenceMessage> messages;
  std::vector<DramCommand> commands;
  std::vector<std::string> events;
  std::vector<ValueTxn> value_log;                 // value tracking only
  std::map<u64, std::vector<u8>> final_memory;     // value tracking only, by block
  u64 read_final(Addr addr, u32 size, u32 block_size) const;
  double ipc() const { return total_cycles ? double(instructions) / double(total_cycles) : 0.0; }
};

// Deterministic cycle-driven run of one or more apps on the configured
// machine.  Each app is one trace (its threads numbered locally from 0);
// global thread ids are assigned app by app.  The seed only tags the run —
// the simulation itself has no stochastic element.
RunStats run(const SystemConfig& cfg, const std::vector<std::vector<TraceEvent>>& apps,
             u64 seed = 0, const RunOptions& opt = {});

struct ExperimentResult {
  std::vector<RunStats> alone;  // one per app
  RunStats shared;
  std::vector<AppPerf> perfs;
  MetricReport report;
};

// Runs every app alone, then all together, and folds the IPCs into the
// multiprogram metric report.  Energy/power in the report come from the
// shared run.
ExperimentResult run_experiment(const SystemConfig& cfg,
                                const std::vector<std::vector<TraceEvent>>& apps, u64 seed = 0,
                                const RunOptions& opt = {});

// --- OS scheduler (separable for unit tests) --------------------------------

// Static affinity-balanced assignment of threads to per-core run queues with
// round-robin time slicing inside each queue.
class Scheduler {
 public:
  Scheduler(u32 cores, u64 quantum, u64 switch_cycles,
            const std::map<u32, std::vector<u32>>& affinity, u32 thread_count);

  const std::vector<std::vector<u32>>& queues() const { return queues_; }

  // Next thread to run on `core` given the currently running thread (-1 when
  // idle), skipping finished threads; -1 when nothing is runnable.
  i32 pick_next(u32 core, i32 current, const std::vector<bool>& finished);

  u64 quantum() const { return quantum_; }
  u64 switch_cycles() const { return switch_cycles_; }

 private:
  std::vector<std::vector<u32>> queues_;
  std::vector<std::size_t> rr_;
  u64 quantum_;
  u64 switch_cycles_;
};

}  // namespace mcsim
