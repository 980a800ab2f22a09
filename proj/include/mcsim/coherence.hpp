#pragma once

#include <array>
#include <functional>
#include <optional>
#include <unordered_map>
#include <vector>

#include "mcsim/cache.hpp"
#include "mcsim/config.hpp"

namespace mcsim {

enum class MsgKind : u8 { GetS, GetM, Upgrade, Inv, InvAck, Data, WritebackData };
constexpr std::size_t kMsgKinds = 7;
const char* msg_name(MsgKind k);

// src/dst: core id >= 0, kBusBroadcast for a snoopy broadcast, kHome for the
// directory / home LLC slice.
constexpr i32 kBusBroadcast = -1;
constexpr i32 kHome = -2;

struct CoherenceMessage {
  Cycle cycle = 0;
  MsgKind kind = MsgKind::GetS;
  u64 block = 0;
  i32 src = 0;
  i32 dst = 0;
};

enum class DataSource { None, Llc, Owner, Memory };

// What a transaction did; the engine moves the actual bytes.
struct TxnResult {
  CoherenceState new_state = CoherenceState::Invalid;  // requester's state afterwards
  DataSource data_source = DataSource::None;
  i32 prev_owner = -1;            // core that supplied / was downgraded, if any
  bool owner_was_modified = false;
  std::vector<u32> invalidated;   // cores whose copy died in this transaction
};

struct CoherenceCounters {
  std::array<u64, kMsgKinds> by_kind{};
  u64 transactions = 0;
  u64 invalidation_events = 0;  // copies killed by remote writes or back-invalidation
  u64 swmr_violations = 0;
  u64 inv_without_ack = 0;  // nonzero would break message conservation
  u64 total() const {
    u64 s = 0;
    for (u64 v : by_kind) s += v;
    return s;
  }
};

// Block-granular MSI/MESI state machine over all private caches, with the
// directory (or the snoop bus) as the single serialization point.  Stable
// states only: each call is one atomic transaction.
class CoherenceDomain {
 public:
  CoherenceDomain(Protocol proto, Transport transport, u32 cores);

  CoherenceState state(u32 core, u64 block) const;
  std::optional<u32> owner(u64 block) const;  // core holding M or E
  std::vector<u32> holders(u64 block) const;  // cores with any non-I copy
  bool any_holder(u64 block) const;

  // Read transaction for a core in I.  llc_has tells the domain whether the
  // home slice can supply data without a memory fetch.
  TxnResult read_request(Cycle cycle, u32 core, u64 block, bool llc_has);

  // Write transaction for a core in I (GetM) or S (Upgrade).
  TxnResult write_request(Cycle cycle, u32 core, u64 block, bool llc_has);

  // MESI E->M on a local write: no traffic at all.
  void silent_upgrade(u32 core, u64 block);

  // The last private copy of `block` left core `core`'s caches.  M sends
  // WritebackData to the home slice; E/S drop silently.
  void private_eviction(Cycle cycle, u32 core, u64 block, bool modified);

  struct BackInval {
    std::vector<u32> holders;
    std::optional<u32> dirty_owner;  // core whose M data must go to memory
  };
  // Inclusive LLC evicting `block`: back-invalidates every private copy.
  BackInval llc_eviction(Cycle cycle, u64 block);

  const CoherenceCounters& counters() const { return counters_; }
  void set_log(std::vector<CoherenceMessage>* sink) { log_ = sink; }
  const std::unordered_map<u64, std::vector<CoherenceState>>& table() const { return table_; }

 private:
  std::vector<CoherenceState>& entry(u64 block);
  void drop_entry_if_empty(u64 block);
  void emit(Cycle cycle, MsgKind kind, u64 block, i32 src, i32 dst);
  void check_swmr(u64 block);

  Protocol proto_;
  Transport transport_;
  u32 cores_;
  std::unordered_map<u64, std::vector<CoherenceState>> table_;  // absent => all Invalid
  CoherenceCounters counters_;
  std::vector<CoherenceMessage>* log_ = nullptr;
};

}  // namespace mcsim
