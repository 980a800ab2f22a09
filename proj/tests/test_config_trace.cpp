#include <functional>
#include <sstream>

#include "doctest.h"
#include "mcsim/config.hpp"
#include "mcsim/trace.hpp"

using namespace mcsim;

namespace {

Err code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const SimError& e) {
    return e.code();
  }
  FAIL("expected a SimError");
  return Err::InvalidConfig;
}

}  // namespace

TEST_CASE("default config validates and derives fields") {
  SystemConfig cfg = default_config(2);
  CHECK(cfg.validated);
  CHECK(cfg.core_count == 2);
  CHECK(cfg.per_core.size() == 2);
  CHECK(cfg.offset_bits == 6);
  CHECK(cfg.llc_index == 2);
  CHECK(cfg.data_path_levels == std::vector<u32>{0, 1});
  const CacheConfig& llc = cfg.llc();
  CHECK(llc.shared);
  CHECK(llc.slice_count == 2);
  // 2 MiB, 16 ways, 64B blocks -> 2048 sets total, 1024 per slice
  CHECK(llc.sets == 1024);
  CHECK(llc.index_bits == 10);
  CHECK(llc.slice_bits == 1);
  // L1D: 32 KiB / 8 ways / 64 B
  CHECK(cfg.cache_levels[0].sets == 64);
}

TEST_CASE("validation is idempotent") {
  SystemConfig cfg = default_config(4);
  SystemConfig again = validate_config(cfg);
  CHECK(cfg == again);
}

TEST_CASE("json round trip preserves the config") {
  SystemConfig cfg = default_config(4);
  cfg.per_core[1].store_buffer_depth = 8;
  cfg.per_core[1].consistency_mode = ConsistencyMode::Tso;
  cfg.per_core[2].dvfs = DvfsParams{};
  cfg.per_core[2].dvfs->f_turbo = 4.4e9;
  cfg.os.affinity[3] = {1, 2};
  cfg.cache_levels[2].way_partition[0] = {0, 1, 2, 3};
  cfg = validate_config(cfg);
  SystemConfig back = config_from_json(config_to_json(cfg));
  CHECK(cfg == back);
  CHECK(back.per_core[1].consistency_mode == ConsistencyMode::Tso);
  CHECK(back.per_core[2].dvfs.has_value());
  CHECK(back.per_core[2].dvfs->frequency_steps == std::vector<double>{4.0e9, 4.4e9});
}

TEST_CASE("validation failure modes") {
  SUBCASE("non-power-of-two capacity") {
    SystemConfig cfg = default_config(1);
    cfg.cache_levels[0].capacity_bytes = 3000;
    cfg.validated = false;
    CHECK(code_of([&] { validate_config(cfg); }) == Err::NonPowerOfTwo);
  }
  SUBCASE("per-level block size disagrees") {
    SystemConfig cfg = default_config(1);
    cfg.cache_levels[1].block_size_bytes = 128;
    cfg.validated = false;
    CHECK(code_of([&] { validate_config(cfg); }) == Err::InconsistentBlockSize);
  }
  SUBCASE("empty affinity list") {
    SystemConfig cfg = default_config(2);
    cfg.os.affinity[0] = {};
    cfg.validated = false;
    CHECK(code_of([&] { validate_config(cfg); }) == Err::EmptyAffinity);
  }
  SUBCASE("zero quantum") {
    SystemConfig cfg = default_config(1);
    cfg.os.quantum_cycles = 0;
    cfg.validated = false;
    CHECK(code_of([&] { validate_config(cfg); }) == Err::InvalidConfig);
  }
  SUBCASE("no shared level") {
    SystemConfig cfg = default_config(1);
    cfg.cache_levels.pop_back();
    cfg.validated = false;
    CHECK(code_of([&] { validate_config(cfg); }) == Err::InvalidConfig);
  }
  SUBCASE("descending frequency steps") {
    SystemConfig cfg = default_config(1);
    cfg.per_core[0].dvfs = DvfsParams{};
    cfg.per_core[0].dvfs->frequency_steps = {4.0e9, 2.0e9};
    cfg.validated = false;
    CHECK(code_of([&] { validate_config(cfg); }) == Err::InvalidConfig);
  }
  SUBCASE("frequency step above turbo") {
    SystemConfig cfg = default_config(1);
    cfg.per_core[0].dvfs = DvfsParams{};
    cfg.per_core[0].dvfs->frequency_steps = {5.0e9};
    cfg.validated = false;
    CHECK(code_of([&] { validate_config(cfg); }) == Err::FrequencyOutOfRange);
  }
}

TEST_CASE("trace parsing accepts the documented forms") {
  std::string text =
      "# comment line\n"
      "T0 L 0x1000 8\n"
      "T0 S 0x1040 4 123   # trailing comment\n"
      "T1 C 250\n"
      "T1 F\n"
      "\n";
  std::vector<TraceEvent> evs = parse_trace(text);
  REQUIRE(evs.size() == 4);
  CHECK(evs[0] == TraceEvent{0, EventKind::Load, 0x1000, 8, 0, 0});
  CHECK(evs[1] == TraceEvent{0, EventKind::Store, 0x1040, 4, 123, 0});
  CHECK(evs[2] == TraceEvent{1, EventKind::Compute, 0, 0, 0, 250});
  CHECK(evs[3] == TraceEvent{1, EventKind::Fence, 0, 0, 0, 0});
}

TEST_CASE("trace parsing rejects malformed input") {
  CHECK(code_of([] { parse_trace(std::string("T0 L 0x10")); }) == Err::SyntaxError);
  CHECK(code_of([] { parse_trace(std::string("X0 L 0x10 8")); }) == Err::SyntaxError);
  CHECK(code_of([] { parse_trace(std::string("T0 Q 0x10 8")); }) == Err::SyntaxError);
  CHECK(code_of([] { parse_trace(std::string("T0 L 0x10 3")); }) == Err::SyntaxError);
  CHECK(code_of([] { parse_trace(std::string("T0 L 0x10 128")); }) == Err::SyntaxError);
  CHECK(code_of([] { parse_trace(std::string("T0 S 0x10 8")); }) == Err::SyntaxError);
  // 8-byte access starting 4 bytes before a 64-byte boundary
  CHECK(code_of([] { parse_trace(std::string("T0 L 0x3c 8")); }) == Err::CrossesBlockBoundary);
  // the same access is fine with 128-byte blocks
  CHECK(parse_trace(std::string("T0 L 0x3c 8"), 128).size() == 1);
}

TEST_CASE("syntax errors carry the line number") {
  try {
    parse_trace(std::string("T0 L 0x0 8\nT0 L zz 8\n"));
    FAIL("should have thrown");
  } catch (const SimError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("render/parse round trip") {
  std::string text =
      "T0 L 0x1000 8\n"
      "T2 S 0xff80 2 65535\n"
      "T1 C 7\n"
      "T0 F\n";
  std::vector<TraceEvent> evs = parse_trace(text);
  CHECK(render_trace(evs) == text);
  CHECK(parse_trace(render_trace(evs)) == evs);
}

TEST_CASE("trace generation is a pure function of the seed") {
  TraceGenParams p;
  p.thread_count = 3;
  p.events_per_thread = 32;
  auto a = generate_trace(TracePattern::RandomUniform, p, 42);
  auto b = generate_trace(TracePattern::RandomUniform, p, 42);
  auto c = generate_trace(TracePattern::RandomUniform, p, 43);
  CHECK(a == b);
  CHECK(a != c);
  // generated traces always re-parse
  CHECK(parse_trace(render_trace(a)) == a);
}

TEST_CASE("streaming pattern walks disjoint contiguous blocks per thread") {
  TraceGenParams p;
  p.thread_count = 2;
  p.events_per_thread = 8;
  auto evs = generate_trace(TracePattern::Streaming, p, 0);
  REQUIRE(evs.size() == 16);
  for (u32 i = 0; i < 8; ++i) {
    CHECK(evs[i].thread_id == 0);
    CHECK(evs[i].address == u64(i) * 64);
    CHECK(evs[8 + i].thread_id == 1);
    CHECK(evs[8 + i].address == u64(8 + i) * 64);
  }
}

TEST_CASE("false sharing pattern shares a block unless padded") {
  TraceGenParams p;
  p.thread_count = 2;
  p.events_per_thread = 4;
  auto shared = generate_trace(TracePattern::FalseSharing, p, 0);
  REQUIRE(shared.size() == 8);
  CHECK(shared[0].address / 64 == shared[1].address / 64);
  CHECK(shared[0].address != shared[1].address);
  p.padded = true;
  auto padded = generate_trace(TracePattern::FalseSharing, p, 0);
  CHECK(padded[0].address / 64 != padded[1].address / 64);
  // strict alternation either way
  for (std::size_t i = 0; i < shared.size(); ++i) CHECK(shared[i].thread_id == i % 2);
}

TEST_CASE("row-local pattern keeps each thread inside its own row") {
  TraceGenParams p;
  p.thread_count = 2;
  p.events_per_thread = 40;  // exceeds 2048/64 = 32 blocks, must wrap
  p.row_size_bytes = 2048;
  p.row_index = 3;
  auto evs = generate_trace(TracePattern::RowLocal, p, 0);
  for (const TraceEvent& ev : evs) {
    u64 row = ev.address / p.row_size_bytes;
    CHECK(row == p.row_index + ev.thread_id);
  }
}
