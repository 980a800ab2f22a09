#include "mcsim/coherence.hpp"

#include <algorithm>
#include <cassert>

namespace mcsim {

const char* msg_name(MsgKind k) {
  switch (k) {
    case MsgKind::GetS: return "GetS";
    case MsgKind::GetM: return "GetM";
    case MsgKind::Upgrade: return "Upgrade";
    case MsgKind::Inv: return "Inv";
    case MsgKind::InvAck: return "InvAck";
    case MsgKind::Data: return "Data";
    case MsgKind::WritebackData: return "WritebackData";
  }
  return "?";
}

CoherenceDomain::CoherenceDomain(Protocol proto, Transport transport, u32 cores)
    : proto_(proto), transport_(transport), cores_(cores) {}

std::vector<CoherenceState>& CoherenceDomain::entry(u64 block) {
  auto it = table_.find(block);
  if (it == table_.end())
    it = table_.emplace(block, std::vector<CoherenceState>(cores_, CoherenceState::Invalid)).first;
  return it->second;
}

void CoherenceDomain::drop_entry_if_empty(u64 block) {
  auto it = table_.find(block);
  if (it == table_.end()) return;
  for (CoherenceState s : it->second)
    if (s != CoherenceState::Invalid) return;
  table_.erase(it);  // absent entry <=> all cores Invalid
}

CoherenceState CoherenceDomain::state(u32 core, u64 block) const {
  auto it = table_.find(block);
  return it == table_.end() ? CoherenceState::Invalid : it->second[core];
}

std::optional<u32> CoherenceDomain::owner(u64 block) const {
  auto it = table_.find(block);
  if (it == table_.end()) return std::nullopt;
  for (u32 c = 0; c < cores_; ++c)
    if (it->second[c] == CoherenceState::Modified || it->second[c] == CoherenceState::Exclusive)
      return c;
  return std::nullopt;
}

std::vector<u32> CoherenceDomain::holders(u64 block) const {
  std::vector<u32> out;
  auto it = table_.find(block);
  if (it == table_.end()) return out;
  for (u32 c = 0; c < cores_; ++c)
    if (it->second[c] != CoherenceState::Invalid) out.push_back(c);
  return out;
}

bool CoherenceDomain::any_holder(u64 block) const { return !holders(block).empty(); }

void CoherenceDomain::emit(Cycle cycle, MsgKind kind, u64 block, i32 src, i32 dst) {
  ++counters_.by_kind[static_cast<std::size_t>(kind)];
  if (log_) log_->push_back({cycle, kind, block, src, dst});
}

void CoherenceDomain::check_swmr(u64 block) {
  auto it = table_.find(block);
  if (it == table_.end()) return;
  u32 holders_n = 0, exclusive_n = 0;
  for (CoherenceState s : it->second) {
    if (s != CoherenceState::Invalid) ++holders_n;
    if (s == CoherenceState::Modified || s == CoherenceState::Exclusive) ++exclusive_n;
  }
  if (exclusive_n > 1 || (exclusive_n == 1 && holders_n > 1)) ++counters_.swmr_violations;
}

TxnResult CoherenceDomain::read_request(Cycle cycle, u32 core, u64 block, bool llc_has) {
  ++counters_.transactions;
  std::vector<CoherenceState>& st = entry(block);
  assert(st[core] == CoherenceState::Invalid);

  std::optional<u32> own;
  bool anyone = false;
  for (u32 c = 0; c < cores_; ++c) {
    if (st[c] == CoherenceState::Invalid) continue;
    anyone = true;
    if (st[c] == CoherenceState::Modified || st[c] == CoherenceState::Exclusive) own = c;
  }

  TxnResult res;
  if (transport_ == Transport::Snoopy) {
    emit(cycle, MsgKind::GetS, block, i32(core), kBusBroadcast);
    if (own) {
      emit(cycle, MsgKind::Data, block, i32(*own), i32(core));
    } else {
      emit(cycle, MsgKind::Data, block, kHome, i32(core));
    }
  } else {
    emit(cycle, MsgKind::GetS, block, i32(core), kHome);
    if (own) {
      // Directory forwards the request to the owner; a modified owner also
      // pushes its data down to the home slice.
      emit(cycle, MsgKind::GetS, block, kHome, i32(*own));
      emit(cycle, MsgKind::Data, block, i32(*own), i32(core));
      if (st[*own] == CoherenceState::Modified)
        emit(cycle, MsgKind::WritebackData, block, i32(*own), kHome);
    } else {
      emit(cycle, MsgKind::Data, block, kHome, i32(core));
    }
  }

  if (own) {
    res.prev_owner = i32(*own);
    res.owner_was_modified = st[*own] == CoherenceState::Modified;
    res.data_source = DataSource::Owner;
    st[*own] = CoherenceState::Shared;
  } else {
    res.data_source = llc_has ? DataSource::Llc : DataSource::Memory;
  }

  // First reader gets E under MESI, S otherwise.
  res.new_state = (proto_ == Protocol::Mesi && !anyone) ? CoherenceState::Exclusive
                                                        : CoherenceState::Shared;
  st[core] = res.new_state;
  check_swmr(block);
  return res;
}

TxnResult CoherenceDomain::write_request(Cycle cycle, u32 core, u64 block, bool llc_has) {
  ++counters_.transactions;
  std::vector<CoherenceState>& st = entry(block);
  assert(st[core] == CoherenceState::Invalid || st[core] == CoherenceState::Shared);
  const bool upgrade = st[core] == CoherenceState::Shared;

  std::optional<u32> own;
  for (u32 c = 0; c < cores_; ++c)
    if (st[c] == CoherenceState::Modified || st[c] == CoherenceState::Exclusive) own = c;
  const bool own_modified = own && st[*own] == CoherenceState::Modified;

  TxnResult res;
  const MsgKind req_kind = upgrade ? MsgKind::Upgrade : MsgKind::GetM;
  const i32 req_dst = transport_ == Transport::Snoopy ? kBusBroadcast : kHome;
  emit(cycle, req_kind, block, i32(core), req_dst);

  for (u32 c = 0; c < cores_; ++c) {
    if (c == core || st[c] == CoherenceState::Invalid) continue;
    if (transport_ == Transport::Directory) emit(cycle, MsgKind::Inv, block, kHome, i32(c));
    // the displaced owner hands its copy to the new one
    if (own && c == *own && !upgrade) emit(cycle, MsgKind::Data, block, i32(c), i32(core));
    emit(cycle, MsgKind::InvAck, block, i32(c), i32(core));
    st[c] = CoherenceState::Invalid;
    res.invalidated.push_back(c);
    ++counters_.invalidation_events;
  }

  if (own) {
    res.prev_owner = i32(*own);
    res.owner_was_modified = own_modified;
  }

  if (upgrade) {
    res.data_source = DataSource::None;  // requester already has the bytes
  } else if (own) {
    res.data_source = DataSource::Owner;
  } else {
    res.data_source = llc_has ? DataSource::Llc : DataSource::Memory;
    emit(cycle, MsgKind::Data, block, kHome, i32(core));
  }

  st[core] = CoherenceState::Modified;
  res.new_state = CoherenceState::Modified;
  check_swmr(block);
  return res;
}

void CoherenceDomain::silent_upgrade(u32 core, u64 block) {
  std::vector<CoherenceState>& st = entry(block);
  assert(proto_ == Protocol::Mesi && st[core] == CoherenceState::Exclusive);
  st[core] = CoherenceState::Modified;  // zero messages: that is the point of E
  check_swmr(block);
}

void CoherenceDomain::private_eviction(Cycle cycle, u32 core, u64 block, bool modified) {
  auto it = table_.find(block);
  if (it == table_.end()) return;
  if (modified) emit(cycle, MsgKind::WritebackData, block, i32(core), kHome);
  it->second[core] = CoherenceState::Invalid;
  drop_entry_if_empty(block);
}

CoherenceDomain::BackInval CoherenceDomain::llc_eviction(Cycle cycle, u64 block) {
  BackInval out;
  auto it = table_.find(block);
  if (it == table_.end()) return out;
  for (u32 c = 0; c < cores_; ++c) {
    if (it->second[c] == CoherenceState::Invalid) continue;
    out.holders.push_back(c);
    emit(cycle, MsgKind::Inv, block, kHome, i32(c));
    emit(cycle, MsgKind::InvAck, block, i32(c), kHome);
    if (it->second[c] == CoherenceState::Modified) {
      out.dirty_owner = c;
      emit(cycle, MsgKind::WritebackData, block, i32(c), kHome);
    }
    it->second[c] = CoherenceState::Invalid;
    ++counters_.invalidation_events;
  }
  drop_entry_if_empty(block);
  return out;
}

}  // namespace mcsim
