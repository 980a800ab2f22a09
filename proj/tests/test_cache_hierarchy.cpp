#include <algorithm>
#include <set>
#include <vector>

#include "doctest.h"
#include "mcsim/cache.hpp"

using namespace mcsim;

namespace {

// install into the victim way the array itself picks
u32 fill(CacheArray& arr, u64 block, u32 set) {
  auto w = arr.pick_victim(set, {});
  REQUIRE(w.has_value());
  arr.install(block, set, *w);
  return *w;
}

bool lru_is_permutation(const CacheArray& arr, u32 set) {
  std::set<u32> seen;
  for (u32 w = 0; w < arr.ways(); ++w) seen.insert(arr.way(set, w).lru_position);
  return seen.size() == arr.ways() && *seen.begin() == 0 && *seen.rbegin() == arr.ways() - 1;
}

}  // namespace

TEST_CASE("strict LRU victim selection") {
  CacheArray arr(1, 4);
  fill(arr, 0xA, 0);
  fill(arr, 0xB, 0);
  fill(arr, 0xC, 0);
  fill(arr, 0xD, 0);
  // A is oldest; touching it promotes it to MRU, so B becomes the victim
  arr.touch(0xA, 0);
  auto w = arr.pick_victim(0, {});
  REQUIRE(w.has_value());
  CHECK(arr.way(0, *w).tag == 0xB);
  CHECK(lru_is_permutation(arr, 0));
  // untouched order evicts strictly oldest-first
  CacheArray arr2(1, 4);
  fill(arr2, 1, 0);
  fill(arr2, 2, 0);
  fill(arr2, 3, 0);
  fill(arr2, 4, 0);
  auto v2 = arr2.pick_victim(0, {});
  CHECK(arr2.way(0, *v2).tag == 1);
}

TEST_CASE("install reports the previous occupant") {
  CacheArray arr(2, 2);
  CacheBlockMeta old = arr.install(0x10, 1, 0);
  CHECK(!old.valid);
  arr.way(1, 0).dirty = true;
  CacheBlockMeta prev = arr.install(0x20, 1, 0);
  CHECK(prev.valid);
  CHECK(prev.tag == 0x10);
  CHECK(prev.dirty);
  CHECK(arr.find(0x20, 1) != nullptr);
  CHECK(arr.find(0x10, 1) == nullptr);
}

TEST_CASE("invalid ways are preferred and filling ways are skipped") {
  CacheArray arr(1, 3);
  fill(arr, 1, 0);
  fill(arr, 2, 0);
  // one way still empty: it must be chosen even though block 1 is older
  auto w = arr.pick_victim(0, {});
  REQUIRE(w.has_value());
  CHECK(!arr.way(0, *w).valid);
  arr.install(3, 0, *w);
  // reserve two ways for fills; only the third remains eligible
  arr.way(0, 0).filling = true;
  arr.way(0, 1).filling = true;
  auto v = arr.pick_victim(0, {});
  REQUIRE(v.has_value());
  CHECK(*v == 2);
  arr.way(0, 2).filling = true;
  CHECK(!arr.pick_victim(0, {}).has_value());
}

TEST_CASE("way restriction constrains victims") {
  CacheArray arr(1, 4);
  for (u64 b = 1; b <= 4; ++b) fill(arr, b, 0);
  std::vector<u32> allowed{2, 3};
  auto w = arr.pick_victim(0, allowed);
  REQUIRE(w.has_value());
  CHECK((*w == 2 || *w == 3));
  // block 3 (way 2) is older than block 4 (way 3)
  CHECK(arr.way(0, *w).tag == 3);
}

TEST_CASE("lru positions stay a permutation under arbitrary traffic") {
  CacheArray arr(4, 8);
  u64 x = 12345;
  for (int i = 0; i < 2000; ++i) {
    x = x * 6364136223846793005ull + 1442695040888963407ull;
    u32 set = static_cast<u32>((x >> 10) & 3);
    u64 block = (x >> 20) % 32;
    if (x & 1) {
      if (auto w = arr.pick_victim(set, {})) arr.install(block, set, *w);
    } else if (x & 2) {
      arr.touch(block, set);
    } else {
      arr.invalidate(block, set);
    }
    for (u32 s = 0; s < 4; ++s) CHECK(lru_is_permutation(arr, s));
  }
}

TEST_CASE("bit-select slice decoding uses the low block bits") {
  CHECK(slice_of(0x40, 4, SliceDecoder::BitSelect, 6) == 1);
  CHECK(slice_of(0x100, 4, SliceDecoder::BitSelect, 6) == 0);
  CHECK(slice_of(0xC0, 4, SliceDecoder::BitSelect, 6) == 3);
  CHECK(slice_of(0x1234, 1, SliceDecoder::XorHash, 6) == 0);
  // consecutive blocks spread round-robin: k * slice_count blocks -> k each
  std::vector<u32> counts(4, 0);
  for (u64 b = 0; b < 64; ++b) counts[slice_of(b << 6, 4, SliceDecoder::BitSelect, 6)]++;
  for (u32 c : counts) CHECK(c == 16);
}

TEST_CASE("xor-hash folds the whole block index") {
  // block 0b011011: groups (11, 10, 01) fold to 0
  CHECK(slice_of(u64(0b011011) << 6, 4, SliceDecoder::XorHash, 6) == 0);
  // block 0b0110: groups (10, 01) fold to 3
  CHECK(slice_of(u64(0b0110) << 6, 4, SliceDecoder::XorHash, 6) == 3);
  // equal low bits, different high bits -> usually different slices
  CHECK(slice_of(u64(0b01) << 6, 4, SliceDecoder::XorHash, 6) == 1);
  CHECK(slice_of(u64(0b0101) << 6, 4, SliceDecoder::XorHash, 6) == 0);
  // still a valid slice id over a wide sample
  for (u64 b = 0; b < 4096; ++b) CHECK(slice_of(b << 6, 8, SliceDecoder::XorHash, 6) < 8);
}

TEST_CASE("ring distance takes the shorter direction") {
  CHECK(ring_hops(0, 4, 8) == 4);
  CHECK(ring_hops(1, 7, 8) == 2);
  CHECK(ring_hops(3, 0, 4) == 1);
  CHECK(ring_hops(5, 1, 4) == 0);  // core 5 attaches at stop 1
  RingLayout ring{4, 2};
  CHECK(nuca_latency(0, 2, ring, 30) == 34);
  CHECK(nuca_latency(3, 0, ring, 30) == 32);
  CHECK(nuca_latency(2, 2, ring, 30) == 30);
}

TEST_CASE("mshr merges reads and stalls everything else") {
  MshrFile m(2);
  CHECK(m.request(0xA, false) == MshrOutcome::Allocated);
  CHECK(m.request(0xB, true) == MshrOutcome::Allocated);
  CHECK(m.live() == 2);
  // capacity reached
  CHECK(m.request(0xC, false) == MshrOutcome::StallFull);
  // read-after-read merges; writes never merge
  CHECK(m.request(0xA, false) == MshrOutcome::Merged);
  CHECK(m.request(0xA, true) == MshrOutcome::StallFull);
  CHECK(m.request(0xB, false) == MshrOutcome::StallFull);  // pending write
  CHECK(m.tracks(0xA));
  m.release(0xA);
  CHECK(!m.tracks(0xA));
  CHECK(m.request(0xC, false) == MshrOutcome::Allocated);
  CHECK(m.merges() == 1);
  CHECK(m.stalls() == 3);
}

TEST_CASE("block store reads and writes little-endian bytes") {
  BlockStore bs(64);
  CHECK(bs.read(0x123, 8) == 0);  // zero-fill on first touch
  bs.write(0, 4, 0x04030201);
  CHECK(bs.block(0)[0] == 0x01);
  CHECK(bs.block(0)[3] == 0x04);
  CHECK(bs.read(0, 4) == 0x04030201);
  CHECK(bs.read(1, 2) == 0x0302);
  CHECK(bs.read(3, 1) == 0x04);
  bs.write(60, 4, 0xdeadbeef);  // last word of block 0
  CHECK(bs.read(60, 4) == 0xdeadbeef);
  bs.erase(0);
  CHECK(bs.read(0, 4) == 0);
  bs.put(5, std::vector<u8>(64, 0xFF));
  REQUIRE(bs.find(5) != nullptr);
  CHECK(bs.read(5 * 64, 8) == ~0ull);
}
