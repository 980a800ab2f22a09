#include <vector>

#include "doctest.h"
#include "mcsim/dram.hpp"

using namespace mcsim;

namespace {

DramConfig make_cfg(u32 channels, u32 banks, DramScheduler sched = DramScheduler::FrFcfs,
                    RowPolicy policy = RowPolicy::OpenRow) {
  DramConfig d;
  d.geometry.channels = channels;
  d.geometry.ranks_per_channel = 1;
  d.geometry.banks_per_rank = banks;
  d.geometry.rows_per_bank = 16384;
  d.geometry.row_size_bytes = 2048;
  d.scheduler = sched;
  d.row_policy = policy;
  d.channel_bits = log2_exact(channels);
  d.rank_bits = 0;
  d.bank_bits = log2_exact(banks);
  d.row_bits = 14;
  d.column_bits = 11;
  return d;
}

MemRequest make_req(const DramConfig& cfg, u64 id, Addr addr, Cycle arrival, u32 thread = 0,
                    bool write = false) {
  MemRequest r;
  r.id = id;
  r.block_address = addr;
  r.where = decode_address(addr, cfg.interleaving, cfg, 6);
  r.thread_id = thread;
  r.arrival = arrival;
  r.is_write = write;
  return r;
}

std::vector<DramChannel::Done> drive(const DramConfig& cfg, const std::vector<MemRequest>& reqs,
                                     Cycle horizon, std::vector<DramCommand>* log = nullptr) {
  DramChannel ch(0, cfg);
  if (log) ch.set_command_log(log);
  std::vector<DramChannel::Done> out;
  for (Cycle now = 0; now <= horizon; ++now) {
    for (const MemRequest& r : reqs)
      if (r.arrival == now) ch.enqueue(r);
    ch.tick(now, out);
  }
  REQUIRE(ch.idle());
  return out;
}

}  // namespace

TEST_CASE("address decode splits bits per interleaving scheme") {
  DramConfig cfg = make_cfg(2, 8);
  SUBCASE("cache-block interleave puts the channel right above the offset") {
    DecodedAddress d = decode_address(0x40, InterleaveScheme::CacheBlockInterleave, cfg, 6);
    CHECK(d == DecodedAddress{1, 0, 0, 0, 0});
    DecodedAddress d2 = decode_address(0x80, InterleaveScheme::CacheBlockInterleave, cfg, 6);
    CHECK(d2 == DecodedAddress{0, 0, 1, 0, 0});
  }
  SUBCASE("row interleave keeps a whole row in one bank") {
    DecodedAddress d = decode_address(0x40, InterleaveScheme::RowInterleave, cfg, 6);
    CHECK(d == DecodedAddress{0, 0, 0, 0, 64});
    // addresses below the row size map entirely to the column
    for (Addr a : {0x0ull, 0x48ull, 0x7c8ull}) {
      DecodedAddress x = decode_address(a, InterleaveScheme::RowInterleave, cfg, 6);
      CHECK(x.column == a);
      CHECK(x.channel == 0);
      CHECK(x.row == 0);
    }
    CHECK(decode_address(0x800, InterleaveScheme::RowInterleave, cfg, 6).channel == 1);
  }
  SUBCASE("non-interleaved fills a whole channel before the next") {
    DecodedAddress d = decode_address(0x800, InterleaveScheme::NonInterleaved, cfg, 6);
    CHECK(d == DecodedAddress{0, 0, 0, 1, 0});
    // first channel crossing at rows_per_bank * row_size = 32 MiB
    DecodedAddress x = decode_address(u64(16384) * 2048, InterleaveScheme::NonInterleaved, cfg, 6);
    CHECK(x.channel == 1);
    CHECK(x.row == 0);
  }
  SUBCASE("capacity bound") {
    u64 cap = dram_capacity_bytes(cfg.geometry);
    CHECK(cap == u64(512) * 1024 * 1024);
    CHECK_NOTHROW(decode_address(cap - 64, InterleaveScheme::RowInterleave, cfg, 6));
    CHECK_THROWS_AS(decode_address(cap, InterleaveScheme::RowInterleave, cfg, 6), SimError);
    try {
      decode_address(cap, InterleaveScheme::CacheBlockInterleave, cfg, 6);
    } catch (const SimError& e) {
      CHECK(e.code() == Err::AddressOutOfRange);
    }
  }
}

TEST_CASE("service plans for hit, closed and conflicting banks") {
  TimingParams t;  // 10/10/4/10
  BankState closed;
  ServicePlan p = plan_service(closed, 0, 7, t, 0);
  CHECK(p.row_closed);
  CHECK(p.act_at == 0);
  CHECK(p.cas_at == 10);
  CHECK(p.burst_at == 20);
  CHECK(p.done == 24);

  BankState open;
  open.open_row = 7;
  ServicePlan hit = plan_service(open, 0, 7, t, 5);
  CHECK(hit.row_hit);
  CHECK(!hit.act_at.has_value());
  CHECK(hit.cas_at == 5);
  CHECK(hit.done == 19);

  ServicePlan conf = plan_service(open, 0, 9, t, 0);
  CHECK(!conf.row_hit);
  CHECK(conf.pre_at == 0);
  CHECK(conf.act_at == 10);
  CHECK(conf.cas_at == 20);
  CHECK(conf.done == 34);

  // a busy data bus pushes the burst out
  ServicePlan busy = plan_service(closed, 25, 7, t, 0);
  CHECK(busy.burst_at == 25);
  CHECK(busy.done == 29);
}

TEST_CASE("single read on a precharged bank finishes at t_rcd+t_cl+t_bl") {
  DramConfig cfg = make_cfg(1, 2);
  auto done = drive(cfg, {make_req(cfg, 0, 0, 0)}, 100);
  REQUIRE(done.size() == 1);
  CHECK(done[0].at == 24);
  DramChannel probe(0, cfg);
  CHECK(probe.stats().reads == 0);
}

TEST_CASE("bank conflict serializes, bank parallelism overlaps") {
  DramConfig cfg = make_cfg(1, 2);
  SUBCASE("same bank, different rows: 24 then 58") {
    // bank 0 row 0 and bank 0 row 1
    auto done = drive(cfg, {make_req(cfg, 0, 0, 0), make_req(cfg, 1, 4096, 0)}, 200);
    REQUIRE(done.size() == 2);
    CHECK(done[0].at == 24);
    CHECK(done[1].at == 58);
  }
  SUBCASE("different banks: 24 then 28, gated only by the shared bus") {
    auto done = drive(cfg, {make_req(cfg, 0, 0, 0), make_req(cfg, 1, 2048, 0)}, 200);
    REQUIRE(done.size() == 2);
    CHECK(done[0].at == 24);
    CHECK(done[1].at == 28);
  }
}

TEST_CASE("FR-FCFS reorders for row hits, FCFS never does") {
  // A(row0), B(row1), C(row0), all bank 0, arriving together
  auto requests = [](const DramConfig& cfg) {
    return std::vector<MemRequest>{make_req(cfg, 0, 0, 0), make_req(cfg, 1, 4096, 0),
                                   make_req(cfg, 2, 64, 0)};
  };
  DramConfig fr = make_cfg(1, 2, DramScheduler::FrFcfs);
  {
    DramChannel ch(0, fr);
    std::vector<DramChannel::Done> out;
    for (const MemRequest& r : requests(fr)) ch.enqueue(r);
    for (Cycle now = 0; now <= 200; ++now) ch.tick(now, out);
    REQUIRE(out.size() == 3);
    CHECK(out[0].req.id == 0);
    CHECK(out[1].req.id == 2);  // the young row hit jumps the queue
    CHECK(out[2].req.id == 1);
    CHECK(out[0].at == 24);
    CHECK(out[1].at == 38);
    CHECK(out[2].at == 72);
    CHECK(ch.stats().row_hits == 1);
  }
  DramConfig fc = make_cfg(1, 2, DramScheduler::Fcfs);
  {
    DramChannel ch(0, fc);
    std::vector<DramChannel::Done> out;
    for (const MemRequest& r : requests(fc)) ch.enqueue(r);
    for (Cycle now = 0; now <= 200; ++now) ch.tick(now, out);
    REQUIRE(out.size() == 3);
    CHECK(out[0].req.id == 0);
    CHECK(out[1].req.id == 1);
    CHECK(out[2].req.id == 2);
    CHECK(out[2].at == 92);
    CHECK(ch.stats().row_hits == 0);
    CHECK(ch.stats().row_conflicts == 2);
  }
}

TEST_CASE("closed-row policy precharges when no same-row work remains") {
  DramConfig cfg = make_cfg(1, 2, DramScheduler::FrFcfs, RowPolicy::ClosedRow);
  std::vector<DramCommand> log;
  DramChannel ch(0, cfg);
  ch.set_command_log(&log);
  std::vector<DramChannel::Done> out;
  ch.enqueue(make_req(cfg, 0, 0, 0));
  for (Cycle now = 0; now <= 100; ++now) ch.tick(now, out);
  REQUIRE(out.size() == 1);
  bool saw_pre = false;
  for (const DramCommand& c : log)
    if (c.cmd == DramCmd::Pre && c.cycle == 24) saw_pre = true;
  CHECK(saw_pre);
  CHECK(!ch.banks()[0].open_row.has_value());
}

TEST_CASE("timeout policy precharges after the idle window") {
  DramConfig cfg = make_cfg(1, 2, DramScheduler::FrFcfs, RowPolicy::Timeout);
  cfg.row_timeout_cycles = 5;
  std::vector<DramCommand> log;
  DramChannel ch(0, cfg);
  ch.set_command_log(&log);
  std::vector<DramChannel::Done> out;
  ch.enqueue(make_req(cfg, 0, 0, 0));
  for (Cycle now = 0; now <= 100; ++now) ch.tick(now, out);
  bool saw_pre = false;
  for (const DramCommand& c : log)
    if (c.cmd == DramCmd::Pre && c.cycle == 29) saw_pre = true;  // burst end 24 + 5
  CHECK(saw_pre);
}

TEST_CASE("thread-fair boosts a thread whose requests kept waiting") {
  // Phase 1 makes thread 1 wait 38 cycles behind thread 0's row hits, pushing
  // its slowdown estimate to (38+34)/34 ~ 2.12 > 2.0.  In phase 2 both threads
  // have one request and thread 0 owns the open row; FR-FCFS serves the row
  // hit first, thread-fair serves starved thread 1 first.
  auto script = [](const DramConfig& cfg) {
    return std::vector<MemRequest>{
        make_req(cfg, 0, 0, 0, 0),      make_req(cfg, 1, 0, 0, 0),
        make_req(cfg, 2, 2048, 0, 1),   make_req(cfg, 3, 0, 72, 0),
        make_req(cfg, 4, 0, 106, 0),    make_req(cfg, 5, 2048, 106, 1),
    };
  };
  DramConfig fair = make_cfg(1, 1, DramScheduler::ThreadFair);
  fair.thread_fair_threshold = 2.0;
  auto fair_done = drive(fair, script(fair), 400);
  DramConfig fr = make_cfg(1, 1, DramScheduler::FrFcfs);
  auto fr_done = drive(fr, script(fr), 400);
  REQUIRE(fair_done.size() == 6);
  REQUIRE(fr_done.size() == 6);
  // identical up to the divergence point
  for (int i = 0; i < 4; ++i) CHECK(fair_done[i].req.id == fr_done[i].req.id);
  CHECK(fr_done[4].req.id == 4);    // row hit wins
  CHECK(fr_done[5].req.id == 5);
  CHECK(fair_done[4].req.id == 5);  // starved thread wins
  CHECK(fair_done[5].req.id == 4);
  CHECK(fair_done[4].at < fr_done[5].at);
}

TEST_CASE("command audit accepts real logs and flags broken ones") {
  DramConfig cfg = make_cfg(1, 2, DramScheduler::FrFcfs);
  std::vector<DramCommand> log;
  std::vector<MemRequest> reqs{make_req(cfg, 0, 0, 0), make_req(cfg, 1, 4096, 0),
                               make_req(cfg, 2, 64, 0), make_req(cfg, 3, 2048, 5)};
  drive(cfg, reqs, 300, &log);
  CHECK(!log.empty());
  CHECK(audit_commands(log, cfg.timing).empty());

  TimingParams t;
  SUBCASE("CAS before t_rcd elapses") {
    std::vector<DramCommand> bad{{0, 0, 0, DramCmd::Act, 7}, {5, 0, 0, DramCmd::Rd, 0}};
    CHECK(audit_commands(bad, t).size() == 1);
  }
  SUBCASE("CAS with no open row") {
    std::vector<DramCommand> bad{{0, 0, 0, DramCmd::Rd, 0}};
    CHECK(!audit_commands(bad, t).empty());
  }
  SUBCASE("overlapping bursts on one channel") {
    std::vector<DramCommand> bad{{0, 0, 0, DramCmd::Act, 1},
                                 {0, 0, 1, DramCmd::Act, 1},
                                 {10, 0, 0, DramCmd::Rd, 0},
                                 {12, 0, 1, DramCmd::Rd, 0}};
    CHECK(audit_commands(bad, t).size() == 1);
  }
}

TEST_CASE("amat is the mean recorded latency") {
  CHECK(amat_summary(10, 9 * 4 + 104) == 14.0);
  CHECK(amat_summary(1, 71) == 71.0);
  CHECK_THROWS_AS(amat_summary(0, 0), SimError);
  try {
    amat_summary(0, 5);
  } catch (const SimError& e) {
    CHECK(e.code() == Err::NoAccesses);
  }
}
