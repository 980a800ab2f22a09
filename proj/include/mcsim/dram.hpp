#pragma once

#include <deque>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mcsim/config.hpp"

namespace mcsim {

struct DecodedAddress {
  u32 channel = 0;
  u32 rank = 0;
  u32 bank = 0;  // within rank
  u64 row = 0;
  u64 column = 0;  // byte offset within the row
  bool operator==(const DecodedAddress&) const = default;
};

// Splits a physical address into channel/rank/bank/row/column per the
// interleaving scheme.  Bit layouts, lowest bits first:
//   CacheBlockInterleave: [offset][channel][rank][bank][column-high][row]
//   RowInterleave:        [offset][column-high][channel][rank][bank][row]
//   NonInterleaved:       [offset][column-high][row][channel][rank][bank]
// Throws AddressOutOfRange when addr exceeds the geometry's capacity.
DecodedAddress decode_address(Addr addr, InterleaveScheme scheme, const DramConfig& cfg,
                              u32 offset_bits);

u64 dram_capacity_bytes(const DramGeometry& g);

struct MemRequest {
  u64 id = 0;
  Addr block_address = 0;
  DecodedAddress where;
  u32 thread_id = 0;
  Cycle arrival = 0;
  bool is_write = false;
};

enum class DramCmd : u8 { Act, Pre, Rd, Wr };
const char* dram_cmd_name(DramCmd c);

struct DramCommand {
  Cycle cycle = 0;
  u32 channel = 0;
  u32 bank = 0;  // flat bank index: rank * banks_per_rank + bank
  DramCmd cmd = DramCmd::Act;
  u64 row_or_col = 0;
};

struct BankState {
  std::optional<u64> open_row;
  Cycle free_at = 0;         // next command may start here
  Cycle last_burst_end = 0;  // for the Timeout row policy
};

// Pure command-timing computation for one request dispatched `now` on a free
// bank.  Bursts serialize on the channel's shared data bus (`bus_free`).
struct ServicePlan {
  std::optional<Cycle> pre_at;
  std::optional<Cycle> act_at;
  Cycle cas_at = 0;
  Cycle burst_at = 0;
  Cycle done = 0;  // burst_at + t_bl
  bool row_hit = false;
  bool row_closed = false;  // bank had no open row
};
ServicePlan plan_service(const BankState& bank, Cycle bus_free, u64 row, const TimingParams& t,
                         Cycle now);

// Scheduler selection among requests whose bank is free at `now`.
//   Fcfs:   oldest issuable request
//   FrFcfs: oldest issuable row-hit, else oldest issuable
// Returns an index into `queue`.  ThreadFair needs controller state and lives
// on DramChannel.
std::optional<std::size_t> pick_request(std::span<const MemRequest> queue,
                                        std::span<const BankState> banks, DramScheduler policy,
                                        Cycle now, u32 banks_per_rank);

inline u32 flat_bank(const DecodedAddress& d, u32 banks_per_rank) {
  return d.rank * banks_per_rank + d.bank;
}

struct DramStats {
  u64 reads = 0;
  u64 writes = 0;
  u64 row_hits = 0;
  u64 row_misses = 0;     // bank was closed
  u64 row_conflicts = 0;  // wrong row was open
  u64 queue_delay_sum = 0;
};

// One channel: per-bank state, a shared data bus, a request queue, and a
// scheduling policy.  tick() dispatches at most one request per cycle and
// reports completions due this cycle.
class DramChannel {
 public:
  DramChannel(u32 channel_id, const DramConfig& cfg);

  void enqueue(const MemRequest& req);

  struct Done {
    MemRequest req;
    Cycle at = 0;
  };
  void tick(Cycle now, std::vector<Done>& out);

  bool idle() const { return queue_.empty() && inflight_.empty(); }
  const DramStats& stats() const { return stats_; }
  void set_command_log(std::vector<DramCommand>* sink) { cmd_log_ = sink; }
  std::span<const BankState> banks() const { return banks_; }

  // Per-thread queueing-delay slowdown estimate used by the ThreadFair policy.
  double slowdown_estimate(u32 thread) const;

 private:
  std::optional<std::size_t> select(Cycle now);
  void dispatch(std::size_t idx, Cycle now);
  void log_cmd(Cycle cycle, u32 bank, DramCmd cmd, u64 arg);

  u32 id_;
  const DramConfig& cfg_;
  u32 banks_per_channel_;
  std::vector<BankState> banks_;
  Cycle bus_free_ = 0;
  std::deque<MemRequest> queue_;
  struct Inflight {
    MemRequest req;
    Cycle done;
    u32 bank;
    u64 row;
  };
  std::vector<Inflight> inflight_;  // kept sorted by (done, req.id)
  struct FairShare {
    u64 wait = 0;
    u64 service = 0;
  };
  std::unordered_map<u32, FairShare> fair_;
  DramStats stats_;
  std::vector<DramCommand>* cmd_log_ = nullptr;
};

// Post-hoc audit of a command log against the timing parameters: per-bank
// command spacings and non-overlapping per-channel bursts.  Returns human-
// readable violations; empty means the log is clean.
std::vector<std::string> audit_commands(std::span<const DramCommand> log, const TimingParams& t);

// Mean end-to-end latency over all recorded accesses; the canonical
// hit_time + miss_rate * miss_penalty composition of AMAT.  Throws NoAccesses
// when accesses == 0.
double amat_summary(u64 accesses, u64 total_latency_cycles);

}  // namespace mcsim
