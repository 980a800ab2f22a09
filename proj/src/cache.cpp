#include "mcsim/cache.hpp"

#include <algorithm>
#include <cassert>
#include <cstring>

namespace mcsim {

const char* state_name(CoherenceState s) {
  switch (s) {
    case CoherenceState::Invalid: return "I";
    case CoherenceState::Shared: return "S";
    case CoherenceState::Exclusive: return "E";
    case CoherenceState::Modified: return "M";
  }
  return "?";
}

CacheArray::CacheArray(u32 sets, u32 ways) : sets_(sets), ways_(ways) {
  blocks_.resize(static_cast<size_t>(sets) * ways);
  // lru_position starts as a valid permutation per set
  for (u32 s = 0; s < sets; ++s)
    for (u32 w = 0; w < ways; ++w) way(s, w).lru_position = w;
}

CacheBlockMeta* CacheArray::find(u64 block, u32 set) {
  for (u32 w = 0; w < ways_; ++w) {
    CacheBlockMeta& m = way(set, w);
    if (m.valid && m.tag == block) return &m;
  }
  return nullptr;
}

const CacheBlockMeta* CacheArray::find(u64 block, u32 set) const {
  return const_cast<CacheArray*>(this)->find(block, set);
}

void CacheArray::make_mru(u32 set, u32 w) {
  u32 old = way(set, w).lru_position;
  for (u32 i = 0; i < ways_; ++i) {
    CacheBlockMeta& m = way(set, i);
    if (m.lru_position < old) ++m.lru_position;
  }
  way(set, w).lru_position = 0;
}

void CacheArray::touch(u64 block, u32 set) {
  for (u32 w = 0; w < ways_; ++w)
    if (way(set, w).valid && way(set, w).tag == block) {
      make_mru(set, w);
      return;
    }
}

std::optional<u32> CacheArray::pick_victim(u32 set, std::span<const u32> allowed) const {
  auto usable = [&](u32 w) {
    if (allowed.empty()) return true;
    return std::find(allowed.begin(), allowed.end(), w) != allowed.end();
  };
  // empty way first
  for (u32 w = 0; w < ways_; ++w)
    if (usable(w) && !way(set, w).valid && !way(set, w).filling) return w;
  // then strict LRU among the allowed, skipping ways reserved by a fill
  std::optional<u32> best;
  u32 best_pos = 0;
  for (u32 w = 0; w < ways_; ++w) {
    const CacheBlockMeta& m = way(set, w);
    if (!usable(w) || m.filling) continue;
    if (!best || m.lru_position > best_pos) {
      best = w;
      best_pos = m.lru_position;
    }
  }
  return best;
}

CacheBlockMeta CacheArray::install(u64 block, u32 set, u32 w) {
  CacheBlockMeta old = way(set, w);
  CacheBlockMeta& m = way(set, w);
  m.tag = block;
  m.valid = true;
  m.dirty = false;
  m.filling = false;
  m.state = CoherenceState::Invalid;
  make_mru(set, w);
  return old;
}

void CacheArray::invalidate(u64 block, u32 set) {
  for (u32 w = 0; w < ways_; ++w) {
    CacheBlockMeta& m = way(set, w);
    if (m.valid && m.tag == block) {
      m.valid = false;
      m.dirty = false;
      m.filling = false;
      m.state = CoherenceState::Invalid;
      return;
    }
  }
}

u32 slice_of(Addr address, u32 slice_count, SliceDecoder decoder, u32 offset_bits) {
  if (slice_count == 1) return 0;
  u64 block = address >> offset_bits;
  u32 mask = slice_count - 1;
  switch (decoder) {
    case SliceDecoder::BitSelect:
      return static_cast<u32>(block & mask);
    case SliceDecoder::XorHash: {
      u32 bits = log2_exact(slice_count);
      u32 r = 0;
      while (block) {
        r ^= static_cast<u32>(block & mask);
        block >>= bits;
      }
      return r;
    }
  }
  return 0;
}

u32 ring_hops(u32 core, u32 slice, u32 slice_count) {
  u32 a = core % slice_count;
  u32 d = a > slice ? a - slice : slice - a;
  return std::min(d, slice_count - d);
}

u64 nuca_latency(u32 core, u32 slice, const RingLayout& layout, u32 base_latency) {
  return u64(base_latency) +
         u64(ring_hops(core, slice, layout.slice_count)) * layout.hop_latency_cycles;
}

MshrOutcome MshrFile::request(u64 block, bool is_write) {
  for (MshrEntry& e : entries_) {
    if (e.block == block) {
      // Reads piggyback on an outstanding read fill; everything else waits so
      // transactions on one block stay serialized.
      if (!is_write && !e.is_write) {
        ++e.merged;
        ++merges_;
        return MshrOutcome::Merged;
      }
      ++stalls_;
      return MshrOutcome::StallFull;
    }
  }
  if (entries_.size() >= capacity_) {
    ++stalls_;
    return MshrOutcome::StallFull;
  }
  entries_.push_back({block, is_write, 0});
  return MshrOutcome::Allocated;
}

bool MshrFile::tracks(u64 block) const {
  for (const MshrEntry& e : entries_)
    if (e.block == block) return true;
  return false;
}

void MshrFile::release(u64 block) {
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (entries_[i].block == block) {
      entries_.erase(entries_.begin() + static_cast<std::ptrdiff_t>(i));
      return;
    }
}

const char* mshr_outcome_name(MshrOutcome o) {
  switch (o) {
    case MshrOutcome::Allocated: return "Allocated";
    case MshrOutcome::Merged: return "Merged";
    case MshrOutcome::StallFull: return "StallFull";
  }
  return "?";
}

std::vector<u8>& BlockStore::block(u64 block_addr) {
  auto it = blocks_.find(block_addr);
  if (it == blocks_.end())
    it = blocks_.emplace(block_addr, std::vector<u8>(block_size_, 0)).first;
  return it->second;
}

const std::vector<u8>* BlockStore::find(u64 block_addr) const {
  auto it = blocks_.find(block_addr);
  return it == blocks_.end() ? nullptr : &it->second;
}

u64 BlockStore::read(u64 addr, u32 size) const {
  u64 blk = addr / block_size_;
  u64 off = addr % block_size_;
  const std::vector<u8>* d = find(blk);
  u64 v = 0;
  for (u32 i = 0; i < size; ++i) {
    u8 byte = d ? (*d)[off + i] : 0;
    v |= u64(byte) << (8 * i);
  }
  return v;
}

void BlockStore::write(u64 addr, u32 size, u64 value) {
  u64 blk = addr / block_size_;
  u64 off = addr % block_size_;
  std::vector<u8>& d = block(blk);
  for (u32 i = 0; i < size; ++i) d[off + i] = static_cast<u8>(value >> (8 * i));
}

}  // namespace mcsim
