#include "mcsim/dram.hpp"

#include <algorithm>
#include <cassert>
#include <map>
#include <sstream>

namespace mcsim {

const char* dram_cmd_name(DramCmd c) {
  switch (c) {
    case DramCmd::Act: return "ACT";
    case DramCmd::Pre: return "PRE";
    case DramCmd::Rd: return "RD";
    case DramCmd::Wr: return "WR";
  }
  return "?";
}

u64 dram_capacity_bytes(const DramGeometry& g) {
  return u64(g.channels) * g.ranks_per_channel * g.banks_per_rank * g.rows_per_bank *
         g.row_size_bytes;
}

DecodedAddress decode_address(Addr addr, InterleaveScheme scheme, const DramConfig& cfg,
                              u32 offset_bits) {
  if (addr >= dram_capacity_bytes(cfg.geometry)) {
    std::ostringstream os;
    os << "0x" << std::hex << addr << " beyond " << std::dec
       << dram_capacity_bytes(cfg.geometry) << " bytes";
    fail(Err::AddressOutOfRange, os.str());
  }
  u64 a = addr;
  auto take = [&a](u32 bits) {
    u64 v = a & ((u64(1) << bits) - 1);
    a >>= bits;
    return v;
  };
  const u32 colhigh_bits = cfg.column_bits - offset_bits;
  DecodedAddress d;
  u64 offset = take(offset_bits);
  u64 colhigh = 0;
  switch (scheme) {
    case InterleaveScheme::CacheBlockInterleave:
      d.channel = static_cast<u32>(take(cfg.channel_bits));
      d.rank = static_cast<u32>(take(cfg.rank_bits));
      d.bank = static_cast<u32>(take(cfg.bank_bits));
      colhigh = take(colhigh_bits);
      d.row = take(cfg.row_bits);
      break;
    case InterleaveScheme::RowInterleave:
      colhigh = take(colhigh_bits);
      d.channel = static_cast<u32>(take(cfg.channel_bits));
      d.rank = static_cast<u32>(take(cfg.rank_bits));
      d.bank = static_cast<u32>(take(cfg.bank_bits));
      d.row = take(cfg.row_bits);
      break;
    case InterleaveScheme::NonInterleaved:
      colhigh = take(colhigh_bits);
      d.row = take(cfg.row_bits);
      d.channel = static_cast<u32>(take(cfg.channel_bits));
      d.rank = static_cast<u32>(take(cfg.rank_bits));
      d.bank = static_cast<u32>(take(cfg.bank_bits));
      break;
  }
  assert(a == 0);  // capacity check above guarantees no bits remain
  d.column = (colhigh << offset_bits) | offset;
  return d;
}

ServicePlan plan_service(const BankState& bank, Cycle bus_free, u64 row, const TimingParams& t,
                         Cycle now) {
  ServicePlan p;
  Cycle start = std::max(now, bank.free_at);
  if (bank.open_row && *bank.open_row == row) {
    p.row_hit = true;
    p.cas_at = start;
  } else if (!bank.open_row) {
    p.row_closed = true;
    p.act_at = start;
    p.cas_at = start + t.t_rcd;
  } else {
    p.pre_at = start;
    p.act_at = start + t.t_rp;
    p.cas_at = *p.act_at + t.t_rcd;
  }
  // the data burst needs the channel's shared bus; data trails CAS by exactly
  // t_cl, so a bus stall pushes the CAS issue slot out with it
  p.burst_at = std::max(p.cas_at + t.t_cl, bus_free);
  p.cas_at = p.burst_at - t.t_cl;
  p.done = p.burst_at + t.t_bl;
  return p;
}

std::optional<std::size_t> pick_request(std::span<const MemRequest> queue,
                                        std::span<const BankState> banks, DramScheduler policy,
                                        Cycle now, u32 banks_per_rank) {
  std::optional<std::size_t> oldest, oldest_hit;
  auto older = [&](std::size_t a, std::size_t b) {  // queue order breaks arrival ties
    return queue[a].arrival != queue[b].arrival ? queue[a].arrival < queue[b].arrival : a < b;
  };
  for (std::size_t i = 0; i < queue.size(); ++i) {
    const MemRequest& r = queue[i];
    if (r.arrival > now) continue;
    const BankState& b = banks[flat_bank(r.where, banks_per_rank)];
    if (b.free_at > now) continue;
    if (!oldest || older(i, *oldest)) oldest = i;
    bool hit = b.open_row && *b.open_row == r.where.row;
    if (hit && (!oldest_hit || older(i, *oldest_hit))) oldest_hit = i;
  }
  if (policy == DramScheduler::FrFcfs && oldest_hit) return oldest_hit;
  return oldest;
}

DramChannel::DramChannel(u32 channel_id, const DramConfig& cfg)
    : id_(channel_id),
      cfg_(cfg),
      banks_per_channel_(cfg.geometry.ranks_per_channel * cfg.geometry.banks_per_rank) {
  banks_.resize(banks_per_channel_);
}

void DramChannel::enqueue(const MemRequest& req) { queue_.push_back(req); }

void DramChannel::log_cmd(Cycle cycle, u32 bank, DramCmd cmd, u64 arg) {
  if (cmd_log_) cmd_log_->push_back({cycle, id_, bank, cmd, arg});
}

double DramChannel::slowdown_estimate(u32 thread) const {
  auto it = fair_.find(thread);
  if (it == fair_.end() || it->second.service == 0) return 1.0;
  return double(it->second.wait + it->second.service) / double(it->second.service);
}

std::optional<std::size_t> DramChannel::select(Cycle now) {
  std::vector<MemRequest> snapshot(queue_.begin(), queue_.end());
  if (cfg_.scheduler != DramScheduler::ThreadFair)
    return pick_request(snapshot, banks_, cfg_.scheduler, now, cfg_.geometry.banks_per_rank);

  // ThreadFair: when some thread's queueing slowdown estimate exceeds the
  // threshold, serve that thread's oldest issuable request; otherwise FR-FCFS.
  u32 victim = 0;
  double worst = 0.0;
  bool have = false;
  std::map<u32, bool> seen;
  for (const MemRequest& r : queue_) {
    if (seen.count(r.thread_id)) continue;
    seen[r.thread_id] = true;
    double est = slowdown_estimate(r.thread_id);
    if (!have || est > worst || (est == worst && r.thread_id < victim)) {
      if (!have || est > worst) {
        victim = r.thread_id;
        worst = est;
      } else if (r.thread_id < victim) {
        victim = r.thread_id;
      }
      have = true;
    }
  }
  if (have && worst > cfg_.thread_fair_threshold) {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < snapshot.size(); ++i) {
      const MemRequest& r = snapshot[i];
      if (r.thread_id != victim || r.arrival > now) continue;
      if (banks_[flat_bank(r.where, cfg_.geometry.banks_per_rank)].free_at > now) continue;
      if (!best || snapshot[i].arrival < snapshot[*best].arrival) best = i;
    }
    if (best) return best;
  }
  return pick_request(snapshot, banks_, DramScheduler::FrFcfs, now, cfg_.geometry.banks_per_rank);
}

void DramChannel::dispatch(std::size_t idx, Cycle now) {
  MemRequest req = queue_[idx];
  queue_.erase(queue_.begin() + static_cast<std::ptrdiff_t>(idx));
  u32 bank_idx = flat_bank(req.where, cfg_.geometry.banks_per_rank);
  BankState& bank = banks_[bank_idx];
  ServicePlan plan = plan_service(bank, bus_free_, req.where.row, cfg_.timing, now);

  if (plan.row_hit)
    ++stats_.row_hits;
  else if (plan.row_closed)
    ++stats_.row_misses;
  else
    ++stats_.row_conflicts;
  if (req.is_write)
    ++stats_.writes;
  else
    ++stats_.reads;
  stats_.queue_delay_sum += now - req.arrival;

  if (plan.pre_at) log_cmd(*plan.pre_at, bank_idx, DramCmd::Pre, *bank.open_row);
  if (plan.act_at) log_cmd(*plan.act_at, bank_idx, DramCmd::Act, req.where.row);
  log_cmd(plan.cas_at, bank_idx, req.is_write ? DramCmd::Wr : DramCmd::Rd, req.where.column);

  bank.open_row = req.where.row;
  bank.free_at = plan.done;
  bank.last_burst_end = plan.done;
  bus_free_ = plan.done;

  FairShare& fs = fair_[req.thread_id];
  fs.wait += now - req.arrival;
  fs.service += plan.done - now;

  Inflight inf{req, plan.done, bank_idx, req.where.row};
  auto pos = std::lower_bound(inflight_.begin(), inflight_.end(), inf,
                              [](const Inflight& a, const Inflight& b) {
                                return a.done != b.done ? a.done < b.done : a.req.id < b.req.id;
                              });
  inflight_.insert(pos, inf);
}

void DramChannel::tick(Cycle now, std::vector<Done>& out) {
  // completions due this cycle (and the ClosedRow policy decision they carry)
  while (!inflight_.empty() && inflight_.front().done <= now) {
    Inflight inf = inflight_.front();
    inflight_.erase(inflight_.begin());
    if (cfg_.row_policy == RowPolicy::ClosedRow) {
      bool keep_open = false;
      for (const MemRequest& r : queue_)
        if (flat_bank(r.where, cfg_.geometry.banks_per_rank) == inf.bank &&
            r.where.row == inf.row) {
          keep_open = true;
          break;
        }
      BankState& bank = banks_[inf.bank];
      if (!keep_open && bank.open_row && *bank.open_row == inf.row && bank.free_at <= inf.done) {
        log_cmd(inf.done, inf.bank, DramCmd::Pre, inf.row);
        bank.open_row.reset();
        bank.free_at = inf.done + cfg_.timing.t_rp;
      }
    }
    out.push_back({inf.req, inf.done});
  }

  if (cfg_.row_policy == RowPolicy::Timeout) {
    for (u32 b = 0; b < banks_.size(); ++b) {
      BankState& bank = banks_[b];
      if (bank.open_row && bank.free_at <= now && now >= bank.last_burst_end + cfg_.row_timeout_cycles) {
        log_cmd(now, b, DramCmd::Pre, *bank.open_row);
        bank.open_row.reset();
        bank.free_at = now + cfg_.timing.t_rp;
      }
    }
  }

  // one dispatch per channel per cycle
  if (auto idx = select(now)) dispatch(*idx, now);
}

// --- audit ------------------------------------------------------------------

std::vector<std::string> audit_commands(std::span<const DramCommand> log, const TimingParams& t) {
  std::vector<std::string> issues;
  auto complain = [&](const DramCommand& c, const std::string& why) {
    std::ostringstream os;
    os << "cycle " << c.cycle << " ch" << c.channel << " bank" << c.bank << " "
       << dram_cmd_name(c.cmd) << ": " << why;
    issues.push_back(os.str());
  };

  struct BankTrack {
    std::optional<Cycle> last_act, last_pre, last_burst_end;
    bool row_open = false;
  };
  std::map<std::pair<u32, u32>, BankTrack> banks;
  std::map<u32, std::vector<std::pair<Cycle, Cycle>>> bursts;  // per channel

  std::vector<DramCommand> sorted(log.begin(), log.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const DramCommand& a, const DramCommand& b) { return a.cycle < b.cycle; });

  for (const DramCommand& c : sorted) {
    BankTrack& bt = banks[{c.channel, c.bank}];
    switch (c.cmd) {
      case DramCmd::Act:
        if (bt.row_open) complain(c, "ACT with a row already open");
        if (bt.last_pre && c.cycle < *bt.last_pre + t.t_rp) complain(c, "ACT violates t_rp");
        if (bt.last_burst_end && c.cycle < *bt.last_burst_end)
          complain(c, "ACT during an active burst");
        bt.last_act = c.cycle;
        bt.row_open = true;
        break;
      case DramCmd::Pre:
        if (bt.last_burst_end && c.cycle < *bt.last_burst_end)
          complain(c, "PRE during an active burst");
        bt.last_pre = c.cycle;
        bt.row_open = false;
        break;
      case DramCmd::Rd:
      case DramCmd::Wr: {
        if (!bt.row_open) complain(c, "CAS with no open row");
        if (bt.last_act && c.cycle < *bt.last_act + t.t_rcd) complain(c, "CAS violates t_rcd");
        Cycle burst_start = c.cycle + t.t_cl;
        bt.last_burst_end = burst_start + t.t_bl;
        bursts[c.channel].push_back({burst_start, burst_start + t.t_bl});
        break;
      }
    }
  }
  for (auto& [ch, iv] : bursts) {
    std::sort(iv.begin(), iv.end());
    for (std::size_t i = 1; i < iv.size(); ++i)
      if (iv[i].first < iv[i - 1].second) {
        std::ostringstream os;
        os << "ch" << ch << ": bursts [" << iv[i - 1].first << "," << iv[i - 1].second << ") and ["
           << iv[i].first << "," << iv[i].second << ") overlap on the data bus";
        issues.push_back(os.str());
      }
  }
  return issues;
}

double amat_summary(u64 accesses, u64 total_latency_cycles) {
  if (accesses == 0) fail(Err::NoAccesses, "no memory accesses recorded");
  return double(total_latency_cycles) / double(accesses);
}

}  // namespace mcsim
