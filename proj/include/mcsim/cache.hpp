#pragma once

#include <array>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "mcsim/config.hpp"

namespace mcsim {

enum class CoherenceState : u8 { Invalid, Shared, Exclusive, Modified };
const char* state_name(CoherenceState s);

struct CacheBlockMeta {
  u64 tag = 0;  // block address (full, not truncated): simplest unambiguous tag
  bool valid = false;
  bool dirty = false;
  bool filling = false;  // way reserved for an in-flight fill
  CoherenceState state = CoherenceState::Invalid;
  u32 lru_position = 0;  // 0 = MRU .. ways-1 = LRU, a permutation within each set
};

// One set-associative tag array with strict LRU.  Used for each private level
// and for each LLC slice.
class CacheArray {
 public:
  CacheArray(u32 sets, u32 ways);

  u32 sets() const { return sets_; }
  u32 ways() const { return ways_; }

  CacheBlockMeta* find(u64 block, u32 set);
  const CacheBlockMeta* find(u64 block, u32 set) const;
  bool contains(u64 block, u32 set) const { return find(block, set) != nullptr; }

  // Moves the block to MRU.
  void touch(u64 block, u32 set);

  // Victim way for a fill: an invalid allowed way if any, else the allowed way
  // closest to LRU.  Ways mid-fill are skipped; nullopt when every allowed way
  // is mid-fill.  Empty `allowed` means all ways.
  std::optional<u32> pick_victim(u32 set, std::span<const u32> allowed) const;

  CacheBlockMeta& way(u32 set, u32 w) { return blocks_[static_cast<size_t>(set) * ways_ + w]; }
  const CacheBlockMeta& way(u32 set, u32 w) const {
    return blocks_[static_cast<size_t>(set) * ways_ + w];
  }

  // Installs `block` in way `w` of `set` as MRU and returns the previous
  // occupant's meta (valid=false when the way was empty).
  CacheBlockMeta install(u64 block, u32 set, u32 w);

  void invalidate(u64 block, u32 set);

 private:
  void make_mru(u32 set, u32 w);
  u32 sets_, ways_;
  std::vector<CacheBlockMeta> blocks_;
};

// --- Address hashing --------------------------------------------------------

// Home slice of a block address.  BitSelect: lowest log2(slice_count) bits of
// the block index.  XorHash: XOR-fold of (address >> offset_bits) taken in
// log2(slice_count)-bit groups.
u32 slice_of(Addr address, u32 slice_count, SliceDecoder decoder, u32 offset_bits);

struct RingLayout {
  u32 slice_count = 1;
  u32 hop_latency_cycles = 2;
};

// Hop count between a core's ring stop (core % slice_count) and a slice.
u32 ring_hops(u32 core, u32 slice, u32 slice_count);

// base slice latency + min ring distance * hop latency
u64 nuca_latency(u32 core, u32 slice, const RingLayout& layout, u32 base_latency);

// --- MSHRs ------------------------------------------------------------------

enum class MshrOutcome { Allocated, Merged, StallFull };
const char* mshr_outcome_name(MshrOutcome o);

struct MshrEntry {
  u64 block = 0;
  bool is_write = false;
  u32 merged = 0;  // extra requesters riding this fill
};

// Miss-status holding registers of one LLC slice.  Reads to the same block
// merge; anything else needs a fresh entry (write transactions keep the block
// exclusive to one miss at a time, so a write never merges).
class MshrFile {
 public:
  explicit MshrFile(u32 capacity) : capacity_(capacity) {}

  MshrOutcome request(u64 block, bool is_write);
  bool tracks(u64 block) const;
  void release(u64 block);
  std::size_t live() const { return entries_.size(); }
  u64 merges() const { return merges_; }
  u64 stalls() const { return stalls_; }

 private:
  u32 capacity_;
  std::vector<MshrEntry> entries_;
  u64 merges_ = 0;
  u64 stalls_ = 0;
};

// --- Block data (value tracking) -------------------------------------------

// Byte-accurate block storage, zero-fill on first touch.
class BlockStore {
 public:
  explicit BlockStore(u32 block_size) : block_size_(block_size) {}
  std::vector<u8>& block(u64 block_addr);
  const std::vector<u8>* find(u64 block_addr) const;
  void erase(u64 block_addr) { blocks_.erase(block_addr); }
  void put(u64 block_addr, std::vector<u8> data) { blocks_[block_addr] = std::move(data); }
  u64 read(u64 addr, u32 size) const;           // little-endian, zero when absent
  void write(u64 addr, u32 size, u64 value);
  const std::unordered_map<u64, std::vector<u8>>& all() const { return blocks_; }

 private:
  u32 block_size_;
  std::unordered_map<u64, std::vector<u8>> blocks_;
};

}  // namespace mcsim
