#include "mcsim/report.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace mcsim {

namespace {

std::string endpoint(i32 id) {
  if (id == kHome) return "dir";
  if (id == kBusBroadcast) return "bus";
  return "C" + std::to_string(id);
}

std::string hexblock(u64 b) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(b));
  return buf;
}

nlohmann::json level_json(const LevelStats& s) {
  return {{"accesses", s.accesses}, {"hits", s.hits},   {"misses", s.misses},
          {"fills", s.fills},       {"writebacks", s.writebacks}};
}

}  // namespace

std::string run_metrics_csv(const ExperimentResult& r) {
  std::ostringstream out;
  out << "metric,app,value\n";
  for (const AppPerf& p : r.perfs) {
    out << "ipc_alone," << p.app << "," << format_number(p.ipc_alone) << "\n";
    out << "ipc_shared," << p.app << "," << format_number(p.ipc_shared) << "\n";
  }
  for (const auto& [app, sd] : r.report.slowdowns)
    out << "slowdown," << app << "," << format_number(sd) << "\n";
  out << "weighted_speedup,all," << format_number(r.report.weighted_speedup) << "\n";
  out << "harmonic_speedup,all," << format_number(r.report.harmonic_speedup) << "\n";
  out << "fairness,all," << format_number(r.report.fairness) << "\n";
  out << "max_slowdown,all," << format_number(r.report.max_slowdown) << "\n";
  out << "energy_joules,all," << format_number(r.report.energy_joules) << "\n";
  out << "average_power_watts,all," << format_number(r.report.average_power_watts) << "\n";
  return out.str();
}

static nlohmann::json run_json(const RunStats& s) {
  nlohmann::json j;
  j["total_cycles"] = s.total_cycles;
  j["instructions"] = s.instructions;
  j["ipc"] = s.ipc();
  j["demand_accesses"] = s.demand_accesses;
  j["amat"] = s.demand_accesses ? double(s.demand_latency_sum) / double(s.demand_accesses) : 0.0;
  j["store_buffer_drains"] = s.store_buffer_drains;
  j["mshr_merges"] = s.mshr_merges;
  j["mshr_stalls"] = s.mshr_stalls;

  nlohmann::json levels = nlohmann::json::object();
  for (const auto& [name, ls] : s.levels) levels[name] = level_json(ls);
  j["caches"] = levels;

  nlohmann::json coh;
  for (std::size_t k = 0; k < kMsgKinds; ++k)
    coh[msg_name(static_cast<MsgKind>(k))] = s.coherence.by_kind[k];
  coh["transactions"] = s.coherence.transactions;
  coh["invalidation_events"] = s.coherence.invalidation_events;
  coh["swmr_violations"] = s.coherence.swmr_violations;
  j["coherence"] = coh;

  j["dram"] = {{"reads", s.dram.reads},
               {"writes", s.dram.writes},
               {"row_hits", s.dram.row_hits},
               {"row_misses", s.dram.row_misses},
               {"row_conflicts", s.dram.row_conflicts},
               {"queue_delay_sum", s.dram.queue_delay_sum}};

  nlohmann::json threads = nlohmann::json::array();
  for (std::size_t t = 0; t < s.threads.size(); ++t) {
    const ThreadStats& ts = s.threads[t];
    threads.push_back({{"thread", t},
                       {"app", ts.app},
                       {"instructions", ts.instructions},
                       {"loads", ts.loads},
                       {"stores", ts.stores},
                       {"computes", ts.computes},
                       {"fences", ts.fences},
                       {"forwarded_loads", ts.forwarded_loads},
                       {"finish_cycle", ts.finish_cycle},
                       {"mem_accesses", ts.mem_accesses},
                       {"mem_latency_sum", ts.mem_latency_sum}});
  }
  j["threads"] = threads;

  nlohmann::json cores = nlohmann::json::array();
  for (std::size_t c = 0; c < s.cores.size(); ++c) {
    const CoreExecStats& cs = s.cores[c];
    nlohmann::json freqs = nlohmann::json::object();
    for (const auto& [f, n] : cs.cycles_at_freq) freqs[format_number(f)] = n;
    cores.push_back({{"core", c},
                     {"instructions", cs.instructions},
                     {"busy_cycles", cs.busy_cycles},
                     {"stall_cycles", cs.stall_cycles},
                     {"idle_cycles", cs.idle_cycles},
                     {"context_switches", cs.context_switches},
                     {"energy_joules", cs.energy_joules},
                     {"cycles_at_freq", freqs}});
  }
  j["cores"] = cores;
  return j;
}

nlohmann::json run_summary_json(const ExperimentResult& r, const SystemConfig& cfg, u64 seed,
                                u32 repeat) {
  nlohmann::json j;
  j["seed"] = seed;
  j["repeat"] = repeat;
  j["config"] = config_to_json(cfg);
  j["shared"] = run_json(r.shared);
  nlohmann::json alone = nlohmann::json::array();
  for (const RunStats& a : r.alone) alone.push_back(run_json(a));
  j["alone"] = alone;

  nlohmann::json apps = nlohmann::json::array();
  for (const AppPerf& p : r.perfs)
    apps.push_back({{"app", p.app},
                    {"instructions", p.instructions},
                    {"ipc_alone", p.ipc_alone},
                    {"ipc_shared", p.ipc_shared}});
  j["apps"] = apps;
  j["metrics"] = metrics_json(r.report);
  return j;
}

std::string messages_log_text(std::span<const CoherenceMessage> msgs) {
  std::ostringstream out;
  for (const CoherenceMessage& m : msgs)
    out << m.cycle << " " << msg_name(m.kind) << " " << hexblock(m.block) << " "
        << endpoint(m.src) << " " << endpoint(m.dst) << "\n";
  return out.str();
}

std::string commands_log_text(std::span<const DramCommand> cmds) {
  std::vector<DramCommand> sorted(cmds.begin(), cmds.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const DramCommand& a, const DramCommand& b) { return a.cycle < b.cycle; });
  std::ostringstream out;
  for (const DramCommand& c : sorted)
    out << c.cycle << " " << c.channel << " " << c.bank << " " << dram_cmd_name(c.cmd) << " "
        << c.row_or_col << "\n";
  return out.str();
}

std::string events_log_text(std::span<const std::string> events) {
  std::ostringstream out;
  for (const std::string& e : events) out << e << "\n";
  return out.str();
}

}  // namespace mcsim
