#include "mcsim/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace mcsim {

bool is_pow2(u64 v) { return v != 0 && (v & (v - 1)) == 0; }

u32 log2_exact(u64 v) {
  u32 b = 0;
  while ((u64(1) << b) < v) ++b;
  return b;
}

namespace {

void require(bool ok, Err code, const std::string& field, const std::string& why) {
  if (!ok) fail(code, field + " " + why);
}

void require_pow2(u64 v, const std::string& field) {
  if (!is_pow2(v)) fail(Err::NonPowerOfTwo, field + " = " + std::to_string(v));
}

bool is_icache(const std::string& level) {
  return level == "L1I" || level == "l1i";
}

}  // namespace

SystemConfig validate_config(SystemConfig cfg) {
  require(cfg.core_count >= 1, Err::InvalidConfig, "core_count", "must be >= 1");

  require_pow2(cfg.block_size_bytes, "block_size_bytes");
  cfg.offset_bits = log2_exact(cfg.block_size_bytes);

  // per_core: absent -> defaults; a single entry replicates across all cores.
  if (cfg.per_core.empty()) cfg.per_core.resize(cfg.core_count);
  if (cfg.per_core.size() == 1 && cfg.core_count > 1)
    cfg.per_core.resize(cfg.core_count, cfg.per_core[0]);
  require(cfg.per_core.size() == cfg.core_count, Err::InvalidConfig, "per_core",
          "must have one entry per core");

  for (std::size_t i = 0; i < cfg.per_core.size(); ++i) {
    CoreConfig& cc = cfg.per_core[i];
    const std::string tag = "per_core[" + std::to_string(i) + "]";
    require(cc.base_frequency_hz > 0, Err::InvalidConfig, tag + ".base_frequency_hz",
            "must be > 0");
    require(cc.static_power_watts >= 0, Err::InvalidConfig, tag + ".static_power_watts",
            "must be >= 0");
    if (cc.dvfs) {
      DvfsParams& d = *cc.dvfs;
      if (d.f_base <= 0) d.f_base = cc.base_frequency_hz;
      if (d.f_turbo <= 0) d.f_turbo = d.f_base;
      require(d.f_base > 0 && d.f_turbo >= d.f_base, Err::InvalidConfig, tag + ".dvfs",
              "needs 0 < f_base <= f_turbo");
      require(d.v_min > 0 && d.v_dd >= d.v_min, Err::InvalidConfig, tag + ".dvfs",
              "needs 0 < v_min <= v_dd");
      require(d.tdp_watts > 0, Err::InvalidConfig, tag + ".dvfs.tdp_watts", "must be > 0");
      if (d.frequency_steps.empty()) {
        d.frequency_steps.push_back(d.f_base);
        if (d.f_turbo > d.f_base) d.frequency_steps.push_back(d.f_turbo);
      }
      for (std::size_t s = 0; s < d.frequency_steps.size(); ++s) {
        double f = d.frequency_steps[s];
        require(f > 0 && f <= d.f_turbo, Err::FrequencyOutOfRange,
                tag + ".dvfs.frequency_steps[" + std::to_string(s) + "]",
                "must lie in (0, f_turbo]");
        if (s > 0)
          require(f > d.frequency_steps[s - 1], Err::InvalidConfig, tag + ".dvfs.frequency_steps",
                  "must be strictly ascending");
      }
    }
  }

  // Cache levels: private levels first, then exactly one shared LLC.
  require(!cfg.cache_levels.empty(), Err::InvalidConfig, "cache_levels", "must not be empty");
  cfg.data_path_levels.clear();
  cfg.llc_index = -1;
  for (std::size_t i = 0; i < cfg.cache_levels.size(); ++i) {
    CacheConfig& cl = cfg.cache_levels[i];
    const std::string tag = "cache_levels[" + std::to_string(i) + "]";
    if (cl.block_size_bytes && *cl.block_size_bytes != cfg.block_size_bytes)
      fail(Err::InconsistentBlockSize,
           tag + ".block_size_bytes = " + std::to_string(*cl.block_size_bytes) +
               " but block_size_bytes = " + std::to_string(cfg.block_size_bytes));
    cl.block_size_bytes = cfg.block_size_bytes;
    require_pow2(cl.capacity_bytes, tag + ".capacity_bytes");
    require_pow2(cl.associativity, tag + ".associativity");
    require(cl.latency_cycles >= 1, Err::InvalidConfig, tag + ".latency_cycles", "must be >= 1");
    u64 blocks = cl.capacity_bytes / cfg.block_size_bytes;
    require(blocks * cfg.block_size_bytes == cl.capacity_bytes && blocks >= cl.associativity,
            Err::InvalidConfig, tag + ".capacity_bytes", "too small for one set");
    u64 sets_total = blocks / cl.associativity;
    require(sets_total * cl.associativity == blocks, Err::InvalidConfig, tag + ".capacity_bytes",
            "capacity must equal sets * ways * block size");
    require_pow2(sets_total, tag + ".sets");

    if (cl.shared) {
      require(cfg.llc_index < 0, Err::InvalidConfig, tag, "only one shared level is allowed");
      require_pow2(cl.slice_count, tag + ".slice_count");
      require(cl.slice_count <= sets_total, Err::InvalidConfig, tag + ".slice_count",
              "must divide the set count");
      cl.slice_bits = log2_exact(cl.slice_count);
      cl.sets = static_cast<u32>(sets_total / cl.slice_count);
      require(cl.mshr_per_slice >= 1, Err::InvalidConfig, tag + ".mshr_per_slice", "must be >= 1");
      for (auto& [core, ways] : cl.way_partition) {
        const std::string ptag = tag + ".way_partition[" + std::to_string(core) + "]";
        require(core < cfg.core_count, Err::InvalidConfig, ptag, "names a core out of range");
        require(!ways.empty(), Err::InvalidConfig, ptag, "must allow at least one way");
        for (u32 w : ways)
          require(w < cl.associativity, Err::InvalidConfig, ptag, "way index out of range");
        std::sort(ways.begin(), ways.end());
        ways.erase(std::unique(ways.begin(), ways.end()), ways.end());
      }
      cfg.llc_index = static_cast<i32>(i);
    } else {
      require(cfg.llc_index < 0, Err::InvalidConfig, tag,
              "private levels must precede the shared LLC");
      cl.slice_count = 1;
      cl.slice_bits = 0;
      cl.sets = static_cast<u32>(sets_total);
      if (!is_icache(cl.level)) cfg.data_path_levels.push_back(static_cast<u32>(i));
    }
    cl.index_bits = log2_exact(cl.sets);
  }
  require(cfg.llc_index >= 0, Err::InvalidConfig, "cache_levels", "needs a shared LLC level");
  require(!cfg.data_path_levels.empty(), Err::InvalidConfig, "cache_levels",
          "needs at least one private data level");

  // Coherence
  require(cfg.coherence.bus_occupancy_cycles >= 1, Err::InvalidConfig,
          "coherence.bus_occupancy_cycles", "must be >= 1");

  // DRAM geometry and derived field widths
  {
    DramConfig& d = cfg.dram;
    require_pow2(d.geometry.channels, "dram.geometry.channels");
    require_pow2(d.geometry.ranks_per_channel, "dram.geometry.ranks_per_channel");
    require_pow2(d.geometry.banks_per_rank, "dram.geometry.banks_per_rank");
    require_pow2(d.geometry.rows_per_bank, "dram.geometry.rows_per_bank");
    require_pow2(d.geometry.row_size_bytes, "dram.geometry.row_size_bytes");
    require(d.geometry.row_size_bytes >= cfg.block_size_bytes, Err::InvalidConfig,
            "dram.geometry.row_size_bytes", "must be >= block_size_bytes");
    d.channel_bits = log2_exact(d.geometry.channels);
    d.rank_bits = log2_exact(d.geometry.ranks_per_channel);
    d.bank_bits = log2_exact(d.geometry.banks_per_rank);
    d.row_bits = log2_exact(d.geometry.rows_per_bank);
    d.column_bits = log2_exact(d.geometry.row_size_bytes);
    require(d.timing.t_rcd >= 1 && d.timing.t_cl >= 1 && d.timing.t_bl >= 1 && d.timing.t_rp >= 1,
            Err::InvalidConfig, "dram.timing", "all parameters must be >= 1");
    if (d.row_policy == RowPolicy::Timeout)
      require(d.row_timeout_cycles >= 1, Err::InvalidConfig, "dram.row_timeout_cycles",
              "must be >= 1 for the Timeout policy");
    require(d.thread_fair_threshold >= 1.0, Err::InvalidConfig, "dram.thread_fair_threshold",
            "must be >= 1");
  }

  // OS
  require(cfg.os.quantum_cycles >= 1, Err::InvalidConfig, "os.quantum_cycles", "must be >= 1");
  for (auto& [tid, cores] : cfg.os.affinity) {
    const std::string tag = "os.affinity[" + std::to_string(tid) + "]";
    if (cores.empty()) fail(Err::EmptyAffinity, tag + " allows no cores");
    for (u32 c : cores)
      require(c < cfg.core_count, Err::InvalidConfig, tag, "names a core out of range");
    std::sort(cores.begin(), cores.end());
    cores.erase(std::unique(cores.begin(), cores.end()), cores.end());
  }

  require(cfg.deadlock_cycles >= 1, Err::InvalidConfig, "deadlock_cycles", "must be >= 1");

  cfg.validated = true;
  return cfg;
}

// --- JSON -------------------------------------------------------------------

namespace {

using nlohmann::json;

template <typename T>
void get_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

template <typename Enum>
Enum parse_enum(const json& j, const char* key, Enum cur,
                std::initializer_list<std::pair<const char*, Enum>> names) {
  if (!j.contains(key)) return cur;
  std::string s = j.at(key).get<std::string>();
  std::string lower = s;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  for (auto& [name, val] : names) {
    std::string n = name;
    std::string nl = n;
    std::transform(nl.begin(), nl.end(), nl.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (s == n || lower == nl) return val;
  }
  fail(Err::InvalidConfig, std::string(key) + " has unknown value '" + s + "'");
}

template <typename Enum>
const char* enum_str(Enum v, std::initializer_list<std::pair<const char*, Enum>> names) {
  for (auto& [name, val] : names)
    if (val == v) return name;
  return "?";
}

#define ENUM_NAMES_PROTOCOL {"MSI", Protocol::Msi}, {"MESI", Protocol::Mesi}
#define ENUM_NAMES_TRANSPORT {"snoopy", Transport::Snoopy}, {"directory", Transport::Directory}
#define ENUM_NAMES_DECODER \
  {"BitSelect", SliceDecoder::BitSelect}, {"XorHash", SliceDecoder::XorHash}
#define ENUM_NAMES_INCLUSION \
  {"Inclusive", Inclusion::Inclusive}, {"NonInclusive", Inclusion::NonInclusive}
#define ENUM_NAMES_LAYOUT {"Ring", LlcLayout::Ring}, {"Bus", LlcLayout::Bus}
#define ENUM_NAMES_INTERLEAVE                                 \
  {"CacheBlockInterleave", InterleaveScheme::CacheBlockInterleave}, \
      {"RowInterleave", InterleaveScheme::RowInterleave},           \
      {"NonInterleaved", InterleaveScheme::NonInterleaved}
#define ENUM_NAMES_ROWPOLICY                                            \
  {"OpenRow", RowPolicy::OpenRow}, {"ClosedRow", RowPolicy::ClosedRow}, \
      {"Timeout", RowPolicy::Timeout}
#define ENUM_NAMES_SCHED                                                 \
  {"FCFS", DramScheduler::Fcfs}, {"FRFCFS", DramScheduler::FrFcfs},      \
      {"ThreadFair", DramScheduler::ThreadFair}
#define ENUM_NAMES_CONSISTENCY {"SC", ConsistencyMode::Sc}, {"TSO", ConsistencyMode::Tso}
#define ENUM_NAMES_GOVERNOR                                \
  {"performance", GovernorPolicy::Performance},            \
      {"powersave", GovernorPolicy::Powersave},            \
      {"ondemand", GovernorPolicy::Ondemand}

std::map<u32, std::vector<u32>> parse_u32_map(const json& j) {
  std::map<u32, std::vector<u32>> out;
  for (auto it = j.begin(); it != j.end(); ++it)
    out[static_cast<u32>(std::stoul(it.key()))] = it.value().get<std::vector<u32>>();
  return out;
}

json dump_u32_map(const std::map<u32, std::vector<u32>>& m) {
  json out = json::object();
  for (auto& [k, v] : m) out[std::to_string(k)] = v;
  return out;
}

}  // namespace

SystemConfig config_from_json(const nlohmann::json& j) {
  SystemConfig cfg;
  get_if(j, "core_count", cfg.core_count);
  get_if(j, "block_size_bytes", cfg.block_size_bytes);
  get_if(j, "value_tracking", cfg.value_tracking);
  get_if(j, "deadlock_cycles", cfg.deadlock_cycles);

  if (j.contains("per_core")) {
    for (const json& cj : j.at("per_core")) {
      CoreConfig cc;
      get_if(cj, "base_frequency_hz", cc.base_frequency_hz);
      get_if(cj, "store_buffer_depth", cc.store_buffer_depth);
      get_if(cj, "static_power_watts", cc.static_power_watts);
      cc.consistency_mode =
          parse_enum(cj, "consistency_mode", cc.consistency_mode, {ENUM_NAMES_CONSISTENCY});
      cc.governor = parse_enum(cj, "governor", cc.governor, {ENUM_NAMES_GOVERNOR});
      if (cj.contains("dvfs")) {
        const json& dj = cj.at("dvfs");
        DvfsParams d;
        get_if(dj, "f_base", d.f_base);
        get_if(dj, "f_turbo", d.f_turbo);
        get_if(dj, "v_dd", d.v_dd);
        get_if(dj, "v_min", d.v_min);
        get_if(dj, "tdp_watts", d.tdp_watts);
        get_if(dj, "activity_alpha", d.activity_alpha);
        get_if(dj, "capacitance_c", d.capacitance_c);
        get_if(dj, "frequency_steps", d.frequency_steps);
        cc.dvfs = d;
      }
      cfg.per_core.push_back(cc);
    }
  }

  if (j.contains("cache_levels")) {
    for (const json& cj : j.at("cache_levels")) {
      CacheConfig cl;
      get_if(cj, "level", cl.level);
      get_if(cj, "capacity_bytes", cl.capacity_bytes);
      get_if(cj, "associativity", cl.associativity);
      get_if(cj, "latency_cycles", cl.latency_cycles);
      get_if(cj, "shared", cl.shared);
      get_if(cj, "slice_count", cl.slice_count);
      get_if(cj, "mshr_per_slice", cl.mshr_per_slice);
      get_if(cj, "hop_latency_cycles", cl.hop_latency_cycles);
      get_if(cj, "bus_latency_cycles", cl.bus_latency_cycles);
      cl.slice_decoder = parse_enum(cj, "slice_decoder", cl.slice_decoder, {ENUM_NAMES_DECODER});
      cl.inclusion = parse_enum(cj, "inclusion", cl.inclusion, {ENUM_NAMES_INCLUSION});
      cl.layout = parse_enum(cj, "layout", cl.layout, {ENUM_NAMES_LAYOUT});
      if (cj.contains("block_size_bytes")) cl.block_size_bytes = cj.at("block_size_bytes").get<u64>();
      if (cj.contains("way_partition")) cl.way_partition = parse_u32_map(cj.at("way_partition"));
      cfg.cache_levels.push_back(cl);
    }
  }

  if (j.contains("coherence")) {
    const json& cj = j.at("coherence");
    cfg.coherence.protocol =
        parse_enum(cj, "protocol", cfg.coherence.protocol, {ENUM_NAMES_PROTOCOL});
    cfg.coherence.transport =
        parse_enum(cj, "transport", cfg.coherence.transport, {ENUM_NAMES_TRANSPORT});
    get_if(cj, "bus_occupancy_cycles", cfg.coherence.bus_occupancy_cycles);
  }

  if (j.contains("dram")) {
    const json& dj = j.at("dram");
    DramConfig& d = cfg.dram;
    if (dj.contains("geometry")) {
      const json& gj = dj.at("geometry");
      get_if(gj, "channels", d.geometry.channels);
      get_if(gj, "ranks_per_channel", d.geometry.ranks_per_channel);
      get_if(gj, "banks_per_rank", d.geometry.banks_per_rank);
      get_if(gj, "rows_per_bank", d.geometry.rows_per_bank);
      get_if(gj, "row_size_bytes", d.geometry.row_size_bytes);
    }
    if (dj.contains("timing")) {
      const json& tj = dj.at("timing");
      get_if(tj, "t_rcd", d.timing.t_rcd);
      get_if(tj, "t_cl", d.timing.t_cl);
      get_if(tj, "t_bl", d.timing.t_bl);
      get_if(tj, "t_rp", d.timing.t_rp);
    }
    d.interleaving = parse_enum(dj, "interleaving", d.interleaving, {ENUM_NAMES_INTERLEAVE});
    d.row_policy = parse_enum(dj, "row_policy", d.row_policy, {ENUM_NAMES_ROWPOLICY});
    d.scheduler = parse_enum(dj, "scheduler", d.scheduler, {ENUM_NAMES_SCHED});
    get_if(dj, "row_timeout_cycles", d.row_timeout_cycles);
    get_if(dj, "thread_fair_threshold", d.thread_fair_threshold);
  }

  if (j.contains("os")) {
    const json& oj = j.at("os");
    get_if(oj, "quantum_cycles", cfg.os.quantum_cycles);
    get_if(oj, "context_switch_cycles", cfg.os.context_switch_cycles);
    if (oj.contains("affinity")) cfg.os.affinity = parse_u32_map(oj.at("affinity"));
  }

  return validate_config(cfg);
}

nlohmann::json config_to_json(const SystemConfig& cfg) {
  json j;
  j["core_count"] = cfg.core_count;
  j["block_size_bytes"] = cfg.block_size_bytes;
  j["value_tracking"] = cfg.value_tracking;
  j["deadlock_cycles"] = cfg.deadlock_cycles;
  j["per_core"] = json::array();
  for (const CoreConfig& cc : cfg.per_core) {
    json cj;
    cj["base_frequency_hz"] = cc.base_frequency_hz;
    cj["store_buffer_depth"] = cc.store_buffer_depth;
    cj["static_power_watts"] = cc.static_power_watts;
    cj["consistency_mode"] = enum_str(cc.consistency_mode, {ENUM_NAMES_CONSISTENCY});
    cj["governor"] = enum_str(cc.governor, {ENUM_NAMES_GOVERNOR});
    if (cc.dvfs) {
      json dj;
      dj["f_base"] = cc.dvfs->f_base;
      dj["f_turbo"] = cc.dvfs->f_turbo;
      dj["v_dd"] = cc.dvfs->v_dd;
      dj["v_min"] = cc.dvfs->v_min;
      dj["tdp_watts"] = cc.dvfs->tdp_watts;
      dj["activity_alpha"] = cc.dvfs->activity_alpha;
      dj["capacitance_c"] = cc.dvfs->capacitance_c;
      dj["frequency_steps"] = cc.dvfs->frequency_steps;
      cj["dvfs"] = dj;
    }
    j["per_core"].push_back(cj);
  }
  j["cache_levels"] = json::array();
  for (const CacheConfig& cl : cfg.cache_levels) {
    json cj;
    cj["level"] = cl.level;
    cj["capacity_bytes"] = cl.capacity_bytes;
    cj["associativity"] = cl.associativity;
    cj["latency_cycles"] = cl.latency_cycles;
    cj["shared"] = cl.shared;
    if (cl.shared) {
      cj["slice_count"] = cl.slice_count;
      cj["slice_decoder"] = enum_str(cl.slice_decoder, {ENUM_NAMES_DECODER});
      cj["inclusion"] = enum_str(cl.inclusion, {ENUM_NAMES_INCLUSION});
      cj["mshr_per_slice"] = cl.mshr_per_slice;
      cj["layout"] = enum_str(cl.layout, {ENUM_NAMES_LAYOUT});
      cj["hop_latency_cycles"] = cl.hop_latency_cycles;
      cj["bus_latency_cycles"] = cl.bus_latency_cycles;
      if (!cl.way_partition.empty()) cj["way_partition"] = dump_u32_map(cl.way_partition);
    }
    j["cache_levels"].push_back(cj);
  }
  j["coherence"] = {
      {"protocol", enum_str(cfg.coherence.protocol, {ENUM_NAMES_PROTOCOL})},
      {"transport", enum_str(cfg.coherence.transport, {ENUM_NAMES_TRANSPORT})},
      {"bus_occupancy_cycles", cfg.coherence.bus_occupancy_cycles},
  };
  j["dram"] = {
      {"geometry",
       {{"channels", cfg.dram.geometry.channels},
        {"ranks_per_channel", cfg.dram.geometry.ranks_per_channel},
        {"banks_per_rank", cfg.dram.geometry.banks_per_rank},
        {"rows_per_bank", cfg.dram.geometry.rows_per_bank},
        {"row_size_bytes", cfg.dram.geometry.row_size_bytes}}},
      {"timing",
       {{"t_rcd", cfg.dram.timing.t_rcd},
        {"t_cl", cfg.dram.timing.t_cl},
        {"t_bl", cfg.dram.timing.t_bl},
        {"t_rp", cfg.dram.timing.t_rp}}},
      {"interleaving", enum_str(cfg.dram.interleaving, {ENUM_NAMES_INTERLEAVE})},
      {"row_policy", enum_str(cfg.dram.row_policy, {ENUM_NAMES_ROWPOLICY})},
      {"row_timeout_cycles", cfg.dram.row_timeout_cycles},
      {"scheduler", enum_str(cfg.dram.scheduler, {ENUM_NAMES_SCHED})},
      {"thread_fair_threshold", cfg.dram.thread_fair_threshold},
  };
  j["os"] = {
      {"quantum_cycles", cfg.os.quantum_cycles},
      {"context_switch_cycles", cfg.os.context_switch_cycles},
  };
  if (!cfg.os.affinity.empty()) j["os"]["affinity"] = dump_u32_map(cfg.os.affinity);
  return j;
}

SystemConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Err::InvalidConfig, "cannot open config file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(Err::SyntaxError, path + ": " + e.what());
  }
  return config_from_json(j);
}

SystemConfig default_config(u32 cores) {
  SystemConfig cfg;
  cfg.core_count = cores;
  cfg.per_core.assign(cores, CoreConfig{});
  CacheConfig l1d;
  l1d.level = "L1D";
  l1d.capacity_bytes = 32768;
  l1d.associativity = 8;
  l1d.latency_cycles = 4;
  CacheConfig l2;
  l2.level = "L2";
  l2.capacity_bytes = 262144;
  l2.associativity = 8;
  l2.latency_cycles = 12;
  CacheConfig llc;
  llc.level = "LLC";
  llc.shared = true;
  llc.capacity_bytes = 2097152;
  llc.associativity = 16;
  llc.latency_cycles = 30;
  llc.slice_count = std::max<u32>(1, u32(1) << log2_exact(cores));
  if (!is_pow2(cores)) llc.slice_count = 1;
  llc.layout = LlcLayout::Ring;
  cfg.cache_levels = {l1d, l2, llc};
  return validate_config(cfg);
}

bool operator==(const SystemConfig& a, const SystemConfig& b) {
  return config_to_json(a) == config_to_json(b) && a.validated == b.validated &&
         a.offset_bits == b.offset_bits && a.llc_index == b.llc_index &&
         a.data_path_levels == b.data_path_levels;
}

}  // namespace mcsim
