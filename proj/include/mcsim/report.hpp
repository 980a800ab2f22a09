#pragma once

#include <string>

#include <json.hpp>

#include "mcsim/engine.hpp"

namespace mcsim {

// Serialization of run results used by the CLI.  All emitters are
// deterministic: sorted keys, fixed 6-significant-digit numbers, '\n' endings.

// metric,app,value rows: per-app slowdown/ipc then the aggregate block.
std::string run_metrics_csv(const ExperimentResult& r);

nlohmann::json run_summary_json(const ExperimentResult& r, const SystemConfig& cfg, u64 seed,
                                u32 repeat);

// "cycle kind block src dst", one message per line.
std::string messages_log_text(std::span<const CoherenceMessage> msgs);

// "cycle channel bank cmd row/col", one DRAM command per line.
std::string commands_log_text(std::span<const DramCommand> cmds);

std::string events_log_text(std::span<const std::string> events);

}  // namespace mcsim
