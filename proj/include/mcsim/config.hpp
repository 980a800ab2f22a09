#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mcsim/errors.hpp"

namespace mcsim {

using u8 = std::uint8_t;
using u32 = std::uint32_t;
using u64 = std::uint64_t;
using i32 = std::int32_t;
using i64 = std::int64_t;
using Addr = std::uint64_t;
using Cycle = std::uint64_t;

enum class Protocol { Msi, Mesi };
enum class Transport { Snoopy, Directory };
enum class SliceDecoder { BitSelect, XorHash };
enum class Inclusion { Inclusive, NonInclusive };
enum class LlcLayout { Ring, Bus };
enum class InterleaveScheme { CacheBlockInterleave, RowInterleave, NonInterleaved };
enum class RowPolicy { OpenRow, ClosedRow, Timeout };
enum class DramScheduler { Fcfs, FrFcfs, ThreadFair };
enum class ConsistencyMode { Sc, Tso };
enum class GovernorPolicy { Performance, Powersave, Ondemand };

// Voltage/frequency operating envelope of one core.  activity_alpha and
// capacitance_c may be left at 0: the power model is calibrated so that
// P(f_base) == tdp_watts, which folds alpha*C into the TDP.
struct DvfsParams {
  double f_base = 4.0e9;
  double f_turbo = 4.0e9;
  double v_dd = 1.2;
  double v_min = 1.0;
  double tdp_watts = 88.0;
  double activity_alpha = 0.0;
  double capacitance_c = 0.0;
  std::vector<double> frequency_steps;  // ascending; filled in by validate_config
};

struct CoreConfig {
  double base_frequency_hz = 4.0e9;
  std::optional<DvfsParams> dvfs;
  u32 store_buffer_depth = 0;  // 0 disables the buffer
  ConsistencyMode consistency_mode = ConsistencyMode::Sc;
  GovernorPolicy governor = GovernorPolicy::Performance;
  double static_power_watts = 0.0;
};

struct CacheConfig {
  std::string level;  // "L1I", "L1D", "L2", "LLC", ...
  u64 capacity_bytes = 32768;
  u32 associativity = 8;
  u32 latency_cycles = 4;
  bool shared = false;
  // shared (LLC) only:
  u32 slice_count = 1;
  SliceDecoder slice_decoder = SliceDecoder::BitSelect;
  Inclusion inclusion = Inclusion::Inclusive;
  u32 mshr_per_slice = 8;
  std::map<u32, std::vector<u32>> way_partition;  // core id -> allowed ways (fills only)
  LlcLayout layout = LlcLayout::Bus;
  u32 hop_latency_cycles = 2;
  u32 bus_latency_cycles = 6;
  std::optional<u64> block_size_bytes;  // must match the global block size if given
  // derived by validate_config:
  u32 sets = 0;         // sets per slice
  u32 index_bits = 0;   // log2(sets)
  u32 slice_bits = 0;   // log2(slice_count)
};

struct DramGeometry {
  u32 channels = 1;
  u32 ranks_per_channel = 1;
  u32 banks_per_rank = 8;
  u64 rows_per_bank = 16384;
  u32 row_size_bytes = 2048;
};

// DRAM command spacings, in memory cycles.
struct TimingParams {
  u32 t_rcd = 10;
  u32 t_cl = 10;
  u32 t_bl = 4;
  u32 t_rp = 10;
};

struct DramConfig {
  DramGeometry geometry;
  TimingParams timing;
  InterleaveScheme interleaving = InterleaveScheme::RowInterleave;
  RowPolicy row_policy = RowPolicy::OpenRow;
  u32 row_timeout_cycles = 0;  // Timeout policy only
  DramScheduler scheduler = DramScheduler::FrFcfs;
  double thread_fair_threshold = 2.0;
  // derived by validate_config:
  u32 channel_bits = 0;
  u32 rank_bits = 0;
  u32 bank_bits = 0;
  u32 row_bits = 0;
  u32 column_bits = 0;  // log2(row_size_bytes), includes the block offset bits
};

struct OsConfig {
  u64 quantum_cycles = 100000;
  u64 context_switch_cycles = 0;
  std::map<u32, std::vector<u32>> affinity;  // thread id -> allowed cores; absent = any
};

struct CoherenceConfig {
  Protocol protocol = Protocol::Mesi;
  Transport transport = Transport::Directory;
  u32 bus_occupancy_cycles = 4;  // snoopy: cycles one transaction holds the bus
};

struct SystemConfig {
  u32 core_count = 1;
  std::vector<CoreConfig> per_core;  // size == core_count after validation
  std::vector<CacheConfig> cache_levels;
  CoherenceConfig coherence;
  DramConfig dram;
  OsConfig os;
  u32 block_size_bytes = 64;
  bool value_tracking = false;
  u64 deadlock_cycles = 100000;
  // derived:
  u32 offset_bits = 0;
  bool validated = false;

  // Data-path private levels (cache_levels entries that are private and not an
  // instruction cache), in order; index of the shared LLC.  Set by validate_config.
  std::vector<u32> data_path_levels;
  i32 llc_index = -1;

  const CacheConfig& llc() const { return cache_levels.at(static_cast<u32>(llc_index)); }
};

bool is_pow2(u64 v);
u32 log2_exact(u64 v);

// Checks invariants, fills every derived field, and returns the config.
// Pure: validating an already-validated config is the identity.
SystemConfig validate_config(SystemConfig cfg);

SystemConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const SystemConfig& cfg);
SystemConfig load_config_file(const std::string& path);

// Small 2-level config (L1D + L2 + LLC) used by tests and as the CLI default.
SystemConfig default_config(u32 cores);

bool operator==(const SystemConfig& a, const SystemConfig& b);

}  // namespace mcsim
