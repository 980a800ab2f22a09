#include "mcsim/engine.hpp"

#include <algorithm>
#include <cassert>
#include <cinttypes>
#include <cstdio>
#include <deque>
#include <unordered_map>
#include <unordered_set>

#include "mcsim/core.hpp"

namespace mcsim {

namespace {

std::string hexaddr(u64 v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "0x%" PRIx64, v);
  return buf;
}

// All memory latencies are in cycles of one fixed reference clock; a core's
// own frequency only gates how often it may issue.  The reference is the
// fastest frequency any core can reach.
u64 reference_hz(const SystemConfig& cfg) {
  double best = 0;
  for (const CoreConfig& c : cfg.per_core) {
    double top = c.base_frequency_hz;
    if (c.dvfs && !c.dvfs->frequency_steps.empty()) top = c.dvfs->frequency_steps.back();
    best = std::max(best, top);
  }
  return static_cast<u64>(best);
}

struct ThreadRt {
  u32 app = 0;
  std::vector<TraceEvent> events;
  std::size_t pc = 0;
  bool done() const { return pc >= events.size(); }
};

// One LLC-bound transaction: a demand load/store that missed the private
// levels, or a store-buffer drain that needs ownership.
struct LlcReq {
  u64 seq = 0;
  u32 core = 0;
  u32 thread = 0;
  bool is_store = false;
  bool is_drain = false;
  Addr addr = 0;
  u32 size = 0;
  u64 value = 0;
  u64 block = 0;
  Cycle extra = 0;  // post-transaction path delay (snoopy: NUCA hop cost)
};

struct PendingFill {
  u32 slice = 0;
  u32 set = 0;
  u32 way = 0;
  LlcReq primary;
  std::vector<LlcReq> merged;  // read requests riding the same fetch
};

struct CoreRt {
  // scheduling
  i32 tid = -1;
  u64 quantum_left = 0;
  Cycle ready_at = 0;  // context-switch penalty runs until here
  // frequency ladder
  std::vector<double> steps;
  std::size_t step = 0;
  u64 freq = 0;   // Hz
  u64 accum = 0;  // issue tokens vs the reference clock, capped at one cycle
  u64 window_busy = 0;
  // instruction in flight
  bool executing = false;
  bool issued = false;
  TraceEvent ev;
  u64 compute_left = 0;
  bool mem_pending = false;
  bool mem_done_known = false;
  Cycle mem_done = 0;
  Cycle mem_issue = 0;
  // store buffer
  StoreBuffer sb;
  bool drain_pending = false;
  bool drain_done_known = false;
  Cycle drain_done = 0;
};

struct BusEntry {
  Cycle ready = 0;
  u64 seq = 0;
  LlcReq req;
};

class Simulation {
 public:
  Simulation(const SystemConfig& cfg, const std::vector<std::vector<TraceEvent>>& apps,
             const RunOptions& opt)
      : cfg_(cfg),
        opt_(opt),
        llc_(cfg_.llc()),
        coh_(cfg.coherence.protocol, cfg.coherence.transport, cfg.core_count),
        sched_(cfg.core_count, cfg.os.quantum_cycles, cfg.os.context_switch_cycles,
               cfg.os.affinity, count_threads(apps)),
        backing_(cfg.block_size_bytes),
        llc_data_(cfg.block_size_bytes) {
    build_threads(apps);
    ref_hz_ = reference_hz(cfg_);

    cores_.resize(cfg_.core_count);
    for (u32 c = 0; c < cfg_.core_count; ++c) {
      CoreRt& rt = cores_[c];
      const CoreConfig& cc = cfg_.per_core[c];
      rt.steps = cc.dvfs ? cc.dvfs->frequency_steps : std::vector<double>{cc.base_frequency_hz};
      // performance governor starts at the top; everything else at the base step
      rt.step = cc.governor == GovernorPolicy::Powersave ? 0 : rt.steps.size() - 1;
      if (cc.governor == GovernorPolicy::Ondemand) {
        auto it = std::find(rt.steps.begin(), rt.steps.end(), cc.base_frequency_hz);
        if (it != rt.steps.end()) rt.step = static_cast<std::size_t>(it - rt.steps.begin());
      }
      rt.freq = static_cast<u64>(rt.steps[rt.step]);
      rt.sb = StoreBuffer(cc.store_buffer_depth);
      core_data_.emplace_back(cfg_.block_size_bytes);
    }

    for (u32 lv : cfg_.data_path_levels) {
      const CacheConfig& lc = cfg_.cache_levels[lv];
      lat_prefix_.push_back((lat_prefix_.empty() ? 0 : lat_prefix_.back()) + lc.latency_cycles);
      level_names_.push_back(lc.level);
      priv_.emplace_back();
      for (u32 c = 0; c < cfg_.core_count; ++c)
        priv_.back().emplace_back(lc.sets, lc.associativity);
    }
    t1_extra_ = lat_prefix_.empty() ? 0 : lat_prefix_.back();

    for (u32 s = 0; s < llc_.slice_count; ++s) {
      slices_.emplace_back(llc_.sets, llc_.associativity);
      mshr_.emplace_back(llc_.mshr_per_slice);
    }
    for (u32 c = 0; c < cfg_.core_count; ++c) {
      auto it = llc_.way_partition.find(c);
      allowed_ways_.push_back(it == llc_.way_partition.end() ? std::vector<u32>{} : it->second);
    }

    channels_.reserve(cfg_.dram.geometry.channels);
    for (u32 ch = 0; ch < cfg_.dram.geometry.channels; ++ch) channels_.emplace_back(ch, cfg_.dram);

    stats_.threads.resize(threads_.size());
    for (std::size_t t = 0; t < threads_.size(); ++t) stats_.threads[t].app = threads_[t].app;
    stats_.cores.resize(cfg_.core_count);
    for (const std::string& n : level_names_) stats_.levels[n];
    stats_.levels[llc_.level];

    if (opt_.capture_messages) coh_.set_log(&stats_.messages);
    if (opt_.capture_commands)
      for (DramChannel& ch : channels_) ch.set_command_log(&stats_.commands);
    finished_.assign(threads_.size(), false);
  }

  RunStats take() {
    Cycle now = 0;
    u64 quiet = 0;
    while (!drained()) {
      u64 before = work_;
      body(now);
      quiet = (work_ == before) ? quiet + 1 : 0;
      if (quiet > cfg_.deadlock_cycles)
        fail(Err::DeadlockDetected, "no forward progress for " +
                                        std::to_string(cfg_.deadlock_cycles) +
                                        " cycles (at cycle " + std::to_string(now) + ")");
      ++now;
    }
    finalize();
    return std::move(stats_);
  }

 private:
  static u32 count_threads(const std::vector<std::vector<TraceEvent>>& apps) {
    u32 n = 0;
    for (const auto& app : apps) {
      u32 top = 0;
      for (const TraceEvent& e : app) top = std::max(top, e.thread_id + 1);
      n += top;
    }
    return n;
  }

  void build_threads(const std::vector<std::vector<TraceEvent>>& apps) {
    for (std::size_t a = 0; a < apps.size(); ++a) {
      u32 top = 0;
      for (const TraceEvent& e : apps[a]) top = std::max(top, e.thread_id + 1);
      std::vector<char> seen(top, 0);
      for (const TraceEvent& e : apps[a]) seen[e.thread_id] = 1;
      for (u32 t = 0; t < top; ++t)
        if (!seen[t])
          fail(Err::UnknownThread, "app " + std::to_string(a) + " skips thread id " +
                                       std::to_string(t) + " (ids must be contiguous from 0)");
      u32 base = static_cast<u32>(threads_.size());
      threads_.resize(base + top);
      for (u32 t = 0; t < top; ++t) threads_[base + t].app = static_cast<u32>(a);
      for (const TraceEvent& e : apps[a]) threads_[base + e.thread_id].events.push_back(e);
    }
  }

  // --- address helpers --------------------------------------------------------

  u64 block_of(Addr a) const { return a >> cfg_.offset_bits; }
  u32 priv_set(u64 blk, std::size_t lvl) const {
    return static_cast<u32>(blk & (priv_[lvl][0].sets() - 1));
  }
  u32 llc_slice(u64 blk) const {
    return slice_of(blk << cfg_.offset_bits, llc_.slice_count, llc_.slice_decoder,
                    cfg_.offset_bits);
  }
  u32 llc_set(u64 blk) const {
    // the slice-selection bits sit below the per-slice index
    return static_cast<u32>((blk >> (llc_.slice_decoder == SliceDecoder::BitSelect
                                         ? llc_.slice_bits
                                         : 0)) &
                            (llc_.sets - 1));
  }
  Cycle access_latency(u32 core, u32 slice) const {
    if (llc_.layout == LlcLayout::Ring)
      return nuca_latency(core, slice, RingLayout{llc_.slice_count, llc_.hop_latency_cycles},
                          llc_.latency_cycles);
    return llc_.latency_cycles + llc_.bus_latency_cycles;
  }

  // --- logging ----------------------------------------------------------------

  void event(Cycle now, const std::string& component, const std::string& what) {
    if (!opt_.capture_events) return;
    stats_.events.push_back(std::to_string(now) + " " + component + " " + what);
  }

  void log_value(Cycle now, bool is_store, u32 thread, Addr addr, u32 size, u64 value) {
    if (!cfg_.value_tracking) return;
    stats_.value_log.push_back(ValueTxn{value_seq_++, now, is_store, thread, addr, size, value});
  }

  // --- data movement (value tracking) ------------------------------------------

  void apply_store(Cycle now, u32 core, u32 thread, Addr addr, u32 size, u64 value) {
    u64 blk = block_of(addr);
    if (cfg_.value_tracking) core_data_[core].write(addr, size, value);
    for (std::size_t lv = 0; lv < priv_.size(); ++lv) {
      CacheBlockMeta* m = priv_[lv][core].find(blk, priv_set(blk, lv));
      if (m) m->dirty = true;
    }
    log_value(now, true, thread, addr, size, value);
  }

  u64 capture_load(Cycle now, u32 core, u32 thread, Addr addr, u32 size) {
    u64 v = cfg_.value_tracking ? core_data_[core].read(addr, size) : 0;
    log_value(now, false, thread, addr, size, v);
    stats_.threads[thread].load_values.push_back(v);
    return v;
  }

  bool in_private(u32 core, u64 blk) const {
    for (std::size_t lv = 0; lv < priv_.size(); ++lv)
      if (priv_[lv][core].contains(blk, priv_set(blk, lv))) return true;
    return false;
  }

  void sync_state(u32 core, u64 blk) {
    CoherenceState st = coh_.state(core, blk);
    for (std::size_t lv = 0; lv < priv_.size(); ++lv) {
      CacheBlockMeta* m = priv_[lv][core].find(blk, priv_set(blk, lv));
      if (m) {
        m->state = st;
        if (st != CoherenceState::Modified) m->dirty = false;
      }
    }
  }

  void invalidate_private(u32 core, u64 blk) {
    for (std::size_t lv = 0; lv < priv_.size(); ++lv)
      priv_[lv][core].invalidate(blk, priv_set(blk, lv));
    core_data_[core].erase(blk);
  }

  void dram_write(Cycle now, u64 blk, u32 thread) {
    MemRequest r;
    r.id = next_dram_id_++;
    r.block_address = blk << cfg_.offset_bits;
    r.where = decode_address(r.block_address, cfg_.dram.interleaving, cfg_.dram, cfg_.offset_bits);
    r.thread_id = thread;
    r.arrival = now;
    r.is_write = true;
    channels_[r.where.channel].enqueue(r);
    stats_.levels[llc_.level].writebacks++;
  }

  // Evicts whatever sits in (slice, set, way).  Inclusive LLCs yank every
  // private copy; dirty data (from the private owner if one exists, else from
  // the slice itself) goes back to memory.
  void evict_llc_way(Cycle now, u32 slice, u32 set, u32 way, u32 thread) {
    CacheBlockMeta& m = slices_[slice].way(set, way);
    if (!m.valid) return;
    u64 vblk = m.tag;
    bool wrote = false;
    if (llc_.inclusion == Inclusion::Inclusive) {
      CoherenceDomain::BackInval bi = coh_.llc_eviction(now, vblk);
      if (bi.dirty_owner) {
        if (cfg_.value_tracking)
          backing_.put(vblk, core_data_[*bi.dirty_owner].block(vblk));
        dram_write(now, vblk, thread);
        wrote = true;
      }
      for (u32 c : bi.holders) invalidate_private(c, vblk);
      event(now, llc_.level + std::to_string(slice), "back-invalidate " + hexaddr(vblk));
    }
    if (!wrote && m.dirty) {
      if (cfg_.value_tracking)
        if (const std::vector<u8>* d = llc_data_.find(vblk)) backing_.put(vblk, *d);
      dram_write(now, vblk, thread);
    }
    llc_data_.erase(vblk);
    slices_[slice].invalidate(vblk, set);
  }

  // A dirty block left some core's private caches and wants to live in the
  // LLC.  Inclusive slices already hold it; non-inclusive slices allocate,
  // falling back to a straight memory write when every allowed way is mid-fill.
  void llc_writeback_allocate(Cycle now, u32 core, u32 thread, u64 blk,
                              const std::vector<u8>* data) {
    u32 slice = llc_slice(blk), set = llc_set(blk);
    CacheBlockMeta* m = slices_[slice].find(blk, set);
    if (m) {
      slices_[slice].touch(blk, set);
      m->dirty = true;
      if (data) llc_data_.put(blk, *data);
      return;
    }
    std::optional<u32> way = slices_[slice].pick_victim(set, allowed_ways_[core]);
    if (!way) {
      if (data) backing_.put(blk, *data);
      dram_write(now, blk, thread);
      return;
    }
    evict_llc_way(now, slice, set, *way, thread);
    slices_[slice].install(blk, set, *way);
    slices_[slice].way(set, *way).dirty = true;
    stats_.levels[llc_.level].fills++;
    if (data) llc_data_.put(blk, *data);
  }

  // The last private copy of blk is leaving `core`.
  void relinquish(Cycle now, u32 core, u32 thread, u64 blk) {
    CoherenceState st = coh_.state(core, blk);
    if (st == CoherenceState::Invalid) return;
    coh_.private_eviction(now, core, blk, st == CoherenceState::Modified);
    if (st == CoherenceState::Modified) {
      std::vector<u8> data;
      const std::vector<u8>* dp = nullptr;
      if (cfg_.value_tracking) {
        data = core_data_[core].block(blk);
        dp = &data;
      }
      llc_writeback_allocate(now, core, thread, blk, dp);
    }
    core_data_[core].erase(blk);
  }

  // Installs blk in every private data level of `core`, relinquishing victims
  // that no longer live anywhere in the hierarchy.  Lower levels first so an
  // L1 victim demoted to L2 survives the residency check.
  void fill_private(Cycle now, u32 core, u32 thread, u64 blk) {
    for (std::size_t lv = priv_.size(); lv-- > 0;) {
      CacheArray& arr = priv_[lv][core];
      u32 set = priv_set(blk, lv);
      if (arr.contains(blk, set)) {
        arr.touch(blk, set);
        continue;
      }
      std::optional<u32> way = arr.pick_victim(set, {});
      CacheBlockMeta old = arr.install(blk, set, *way);
      stats_.levels[level_names_[lv]].fills++;
      if (old.valid && old.tag != blk && !in_private(core, old.tag))
        relinquish(now, core, thread, old.tag);
    }
    sync_state(core, blk);
  }

  // --- LLC transactions ---------------------------------------------------------

  void schedule_txn(Cycle at, const LlcReq& req) { pend_[at].push_back(req); }

  void retry_txn(Cycle now, const LlcReq& req) { schedule_txn(now + 1, req); }

  void llc_request(Cycle now, const LlcReq& req) {
    Cycle t1 = now + t1_extra_;
    if (cfg_.coherence.transport == Transport::Directory) {
      LlcReq r = req;
      r.extra = 0;
      schedule_txn(t1 + access_latency(req.core, llc_slice(req.block)), r);
    } else {
      LlcReq r = req;
      r.extra = access_latency(req.core, llc_slice(req.block));
      bus_.push_back(BusEntry{t1, r.seq, r});
    }
  }

  void complete_demand(u32 core, Cycle at) {
    CoreRt& rt = cores_[core];
    rt.mem_done_known = true;
    rt.mem_done = at;
    horizon_ = std::max(horizon_, at);
  }

  void complete_drain(u32 core, Cycle at) {
    CoreRt& rt = cores_[core];
    rt.drain_done_known = true;
    rt.drain_done = at;
    horizon_ = std::max(horizon_, at);
  }

  void complete_req(const LlcReq& req, Cycle at) {
    if (req.is_drain)
      complete_drain(req.core, at);
    else
      complete_demand(req.core, at);
  }

  // Runs one coherence transaction at `now`.  Admission (block busy, MSHR
  // space, a fillable way) is checked before any message or state change, so
  // a rejected attempt leaves no trace and silently retries next cycle.
  void exec_txn(Cycle now, const LlcReq& req) {
    u64 blk = req.block;
    u32 slice = llc_slice(blk), set = llc_set(blk);

    // The block may have landed here between issue and execution via an own
    // store-buffer drain (or, for a drain, via on own load that won E): the
    // transaction then collapses to a local access.
    CoherenceState mine = coh_.state(req.core, blk);
    bool writable = mine == CoherenceState::Modified ||
                    (mine == CoherenceState::Exclusive &&
                     cfg_.coherence.protocol == Protocol::Mesi);
    if (!req.is_store && mine != CoherenceState::Invalid) {
      fill_private(now, req.core, req.thread, blk);
      capture_load(now, req.core, req.thread, req.addr, req.size);
      complete_req(req, now + req.extra);
      work_++;
      return;
    }
    if (req.is_store && writable) {
      if (mine == CoherenceState::Exclusive) coh_.silent_upgrade(req.core, blk);
      fill_private(now, req.core, req.thread, blk);
      apply_store(now, req.core, req.thread, req.addr, req.size, req.value);
      sync_state(req.core, blk);
      complete_req(req, now + req.extra);
      work_++;
      return;
    }

    if (busy_.count(blk)) {
      if (!req.is_store) {
        MshrOutcome o = mshr_[slice].request(blk, false);
        if (o == MshrOutcome::Merged) {
          fills_.at(blk).merged.push_back(req);
          return;
        }
      }
      retry_txn(now, req);
      return;
    }

    bool llc_has = slices_[slice].contains(blk, set);
    CoherenceState st = coh_.state(req.core, blk);
    bool upgrade = req.is_store && st == CoherenceState::Shared;
    bool has_owner = coh_.owner(blk).has_value();
    bool will_fetch = !llc_has && !upgrade && !has_owner;
    bool sync_install = !llc_has && !upgrade && has_owner;

    std::optional<u32> way;
    if (will_fetch || sync_install) {
      way = slices_[slice].pick_victim(set, allowed_ways_[req.core]);
      if (!way) {
        retry_txn(now, req);
        return;
      }
    }
    if (will_fetch && mshr_[slice].request(blk, req.is_store) == MshrOutcome::StallFull) {
      retry_txn(now, req);
      return;
    }

    work_++;
    stats_.levels[llc_.level].accesses++;

    if (will_fetch) {
      evict_llc_way(now, slice, set, *way, req.thread);
      TxnResult res = req.is_store ? coh_.write_request(now, req.core, blk, false)
                                   : coh_.read_request(now, req.core, blk, false);
      for (u32 c : res.invalidated) invalidate_private(c, blk);
      CacheBlockMeta& m = slices_[slice].way(set, *way);
      m.tag = blk;
      m.valid = false;
      m.filling = true;
      m.dirty = false;
      busy_.insert(blk);
      PendingFill pf;
      pf.slice = slice;
      pf.set = set;
      pf.way = *way;
      pf.primary = req;
      fills_.emplace(blk, std::move(pf));
      MemRequest r;
      r.id = next_dram_id_++;
      r.block_address = blk << cfg_.offset_bits;
      r.where =
          decode_address(r.block_address, cfg_.dram.interleaving, cfg_.dram, cfg_.offset_bits);
      r.thread_id = req.thread;
      r.arrival = now + req.extra;
      r.is_write = false;
      channels_[r.where.channel].enqueue(r);
      stats_.levels[llc_.level].misses++;
      event(now, llc_.level + std::to_string(slice),
            std::string(req.is_store ? "write" : "read") + " miss " + hexaddr(blk));
      return;
    }

    TxnResult res = req.is_store ? coh_.write_request(now, req.core, blk, llc_has)
                                 : coh_.read_request(now, req.core, blk, llc_has);

    std::vector<u8> owner_data;
    if (res.data_source == DataSource::Owner && cfg_.value_tracking)
      owner_data = core_data_[res.prev_owner].block(blk);
    for (u32 c : res.invalidated) invalidate_private(c, blk);

    if (sync_install) {
      evict_llc_way(now, slice, set, *way, req.thread);
      slices_[slice].install(blk, set, *way);
      stats_.levels[llc_.level].fills++;
      llc_has = true;
    }
    CacheBlockMeta* lm = slices_[slice].find(blk, set);

    switch (res.data_source) {
      case DataSource::Owner:
        if (cfg_.value_tracking) {
          core_data_[req.core].put(blk, owner_data);
          llc_data_.put(blk, owner_data);
        }
        if (lm && res.owner_was_modified) lm->dirty = true;
        if (res.prev_owner >= 0 && !req.is_store) sync_state(static_cast<u32>(res.prev_owner), blk);
        break;
      case DataSource::Llc:
        if (cfg_.value_tracking) core_data_[req.core].put(blk, llc_data_.block(blk));
        break;
      case DataSource::None:  // upgrade: requester already holds the bytes
        break;
      case DataSource::Memory:
        assert(false && "memory source without a fetch");
        break;
    }
    if (lm) slices_[slice].touch(blk, set);

    fill_private(now, req.core, req.thread, blk);
    if (req.is_store) {
      apply_store(now, req.core, req.thread, req.addr, req.size, req.value);
      sync_state(req.core, blk);
    } else {
      capture_load(now, req.core, req.thread, req.addr, req.size);
    }
    stats_.levels[llc_.level].hits++;
    complete_req(req, now + req.extra);
  }

  // DRAM handed back the block: finalize the reserved way, complete the
  // primary request, then run the piggybacked readers' transactions.
  void finish_fill(Cycle now, u64 blk) {
    PendingFill pf = std::move(fills_.at(blk));
    fills_.erase(blk);
    mshr_[pf.slice].release(blk);
    busy_.erase(blk);

    CacheBlockMeta& m = slices_[pf.slice].way(pf.set, pf.way);
    m.tag = blk;
    m.valid = true;
    m.filling = false;
    m.dirty = false;
    slices_[pf.slice].touch(blk, pf.set);
    if (cfg_.value_tracking) llc_data_.put(blk, backing_.block(blk));
    stats_.levels[llc_.level].fills++;
    work_++;
    event(now, llc_.level + std::to_string(pf.slice), "fill " + hexaddr(blk));

    const LlcReq& p = pf.primary;
    if (cfg_.value_tracking) core_data_[p.core].put(blk, backing_.block(blk));
    fill_private(now, p.core, p.thread, blk);
    if (p.is_store) {
      apply_store(now, p.core, p.thread, p.addr, p.size, p.value);
      sync_state(p.core, blk);
    } else {
      capture_load(now, p.core, p.thread, p.addr, p.size);
    }
    complete_req(p, now);

    for (const LlcReq& r : pf.merged) {
      if (coh_.state(r.core, blk) == CoherenceState::Invalid) {
        TxnResult res = coh_.read_request(now, r.core, blk, true);
        if (res.data_source == DataSource::Owner && cfg_.value_tracking) {
          core_data_[r.core].put(blk, core_data_[res.prev_owner].block(blk));
          llc_data_.put(blk, core_data_[res.prev_owner].block(blk));
          if (res.owner_was_modified) m.dirty = true;
        } else if (cfg_.value_tracking) {
          core_data_[r.core].put(blk, llc_data_.block(blk));
        }
        if (res.prev_owner >= 0) sync_state(static_cast<u32>(res.prev_owner), blk);
      }
      // else: the rider shares a core with the primary and the data is here
      fill_private(now, r.core, r.thread, blk);
      capture_load(now, r.core, r.thread, r.addr, r.size);
      stats_.levels[llc_.level].accesses++;
      stats_.levels[llc_.level].hits++;
      complete_req(r, now);
      work_++;
    }
  }

  // --- demand path ----------------------------------------------------------------

  // Returns true when the access was serviced by the private levels (the
  // completion cycle is then known); false when an LLC transaction started.
  bool start_demand(Cycle now, u32 core, u32 thread, const TraceEvent& e) {
    u64 blk = block_of(e.address);
    CoherenceState st = coh_.state(core, blk);
    bool is_store = e.kind == EventKind::Store;

    bool writable = st == CoherenceState::Modified ||
                    (st == CoherenceState::Exclusive && cfg_.coherence.protocol == Protocol::Mesi);
    bool hit = is_store ? writable : st != CoherenceState::Invalid;

    if (hit) {
      std::size_t lvl = priv_.size();
      for (std::size_t lv = 0; lv < priv_.size(); ++lv)
        if (priv_[lv][core].contains(blk, priv_set(blk, lv))) {
          lvl = lv;
          break;
        }
      assert(lvl < priv_.size() && "coherent block missing from private arrays");
      for (std::size_t lv = 0; lv < lvl; ++lv) {
        stats_.levels[level_names_[lv]].accesses++;
        stats_.levels[level_names_[lv]].misses++;
      }
      stats_.levels[level_names_[lvl]].accesses++;
      stats_.levels[level_names_[lvl]].hits++;
      if (is_store && st == CoherenceState::Exclusive) {
        coh_.silent_upgrade(core, blk);
        work_++;
      }
      fill_private(now, core, thread, blk);  // touches + pulls the block up to L1
      if (is_store)
        apply_store(now, core, thread, e.address, e.size_bytes, e.value);
      else
        capture_load(now, core, thread, e.address, e.size_bytes);
      Cycle lat = lat_prefix_[lvl];
      complete_demand(core, now + lat);
      return true;
    }

    for (std::size_t lv = 0; lv < priv_.size(); ++lv) {
      stats_.levels[level_names_[lv]].accesses++;
      stats_.levels[level_names_[lv]].misses++;
    }
    LlcReq req;
    req.seq = next_txn_seq_++;
    req.core = core;
    req.thread = thread;
    req.is_store = is_store;
    req.is_drain = false;
    req.addr = e.address;
    req.size = e.size_bytes;
    req.value = e.value;
    req.block = blk;
    llc_request(now, req);
    return false;
  }

  // --- store buffer ----------------------------------------------------------------

  void try_drain(Cycle now, u32 core, bool allow_hit) {
    CoreRt& rt = cores_[core];
    if (rt.drain_pending || rt.sb.empty() || rt.mem_pending) return;
    const StoreBufferEntry& e = rt.sb.front();
    u64 blk = block_of(e.address);
    CoherenceState st = coh_.state(core, blk);
    bool writable = st == CoherenceState::Modified ||
                    (st == CoherenceState::Exclusive && cfg_.coherence.protocol == Protocol::Mesi);
    u32 thread = static_cast<u32>(rt.tid);
    if (writable && in_private(core, blk)) {
      if (!allow_hit) return;  // buffer head already retired this cycle
      if (st == CoherenceState::Exclusive) coh_.silent_upgrade(core, blk);
      fill_private(now, core, thread, blk);
      apply_store(now, core, thread, e.address, e.size, e.value);
      rt.sb.pop();
      stats_.store_buffer_drains++;
      work_++;
      horizon_ = std::max(horizon_, now + 1);
      event(now, "core" + std::to_string(core), "drain " + hexaddr(e.address));
      return;
    }
    LlcReq req;
    req.seq = next_txn_seq_++;
    req.core = core;
    req.thread = thread;
    req.is_store = true;
    req.is_drain = true;
    req.addr = e.address;
    req.size = e.size;
    req.value = e.value;
    req.block = blk;
    rt.drain_pending = true;
    rt.drain_done_known = false;
    llc_request(now, req);
  }

  // --- per-cycle steps ----------------------------------------------------------------

  void step_dram(Cycle now) {
    done_scratch_.clear();
    for (DramChannel& ch : channels_) ch.tick(now, done_scratch_);
    for (const DramChannel::Done& d : done_scratch_) {
      work_++;
      horizon_ = std::max(horizon_, d.at);
      if (!d.req.is_write) finish_fill(now, block_of(d.req.block_address));
    }
  }

  void step_txns(Cycle now) {
    // pending list first (directory traffic and retries), then one bus grant
    auto it = pend_.find(now);
    if (it != pend_.end()) {
      std::vector<LlcReq> batch = std::move(it->second);
      pend_.erase(it);
      for (const LlcReq& r : batch) exec_txn(now, r);
    }
    if (!bus_.empty() && bus_free_ <= now) {
      for (std::size_t i = 0; i < bus_.size(); ++i) {
        if (bus_[i].ready <= now) {
          LlcReq r = bus_[i].req;
          bus_.erase(bus_.begin() + static_cast<std::ptrdiff_t>(i));
          bus_free_ = now + cfg_.coherence.bus_occupancy_cycles;
          work_++;
          exec_txn(now, r);
          break;
        }
      }
    }
  }

  void retire(Cycle now, u32 core) {
    CoreRt& rt = cores_[core];
    ThreadRt& th = threads_[rt.tid];
    ThreadStats& ts = stats_.threads[rt.tid];
    ts.instructions++;
    stats_.cores[core].instructions++;
    stats_.instructions++;
    rt.executing = false;
    rt.issued = false;
    th.pc++;
    work_++;
    if (th.done()) {
      ts.finish_cycle = now;
      finished_[rt.tid] = true;
      event(now, "core" + std::to_string(core), "thread " + std::to_string(rt.tid) + " done");
    }
  }

  bool take_token(CoreRt& rt) {
    if (rt.accum < ref_hz_) return false;
    rt.accum -= ref_hz_;
    return true;
  }

  void step_core(Cycle now, u32 core) {
    CoreRt& rt = cores_[core];
    CoreExecStats& cs = stats_.cores[core];
    cs.cycles_at_freq[static_cast<double>(rt.freq)]++;

    if (now < rt.ready_at) {  // paying a context-switch penalty
      cs.idle_cycles++;
      return;
    }

    // Governor window: re-evaluate the frequency step every OS quantum.
    if (cfg_.os.quantum_cycles && now && now % cfg_.os.quantum_cycles == 0) {
      double util = double(rt.window_busy) / double(cfg_.os.quantum_cycles);
      rt.step = governor_select(cfg_.per_core[core].governor, util, rt.step, rt.steps.size());
      rt.freq = static_cast<u64>(rt.steps[rt.step]);
      rt.window_busy = 0;
    }

    // Scheduling decision at instruction boundaries only, with an empty store
    // buffer (a switch would otherwise mix two threads' buffered stores).
    bool cur_done = rt.tid >= 0 && finished_[rt.tid];
    if (rt.tid < 0 || (!rt.executing && !rt.drain_pending && rt.sb.empty() &&
                       (cur_done || rt.quantum_left == 0))) {
      i32 cand = sched_.pick_next(core, rt.tid, finished_);
      if (cand != rt.tid) {
        if (cand >= 0) {
          if (rt.tid >= 0) {
            cs.context_switches++;
            rt.ready_at = now + sched_.switch_cycles();
            event(now, "core" + std::to_string(core),
                  "switch " + std::to_string(rt.tid) + " -> " + std::to_string(cand));
          }
          rt.tid = cand;
          rt.quantum_left = sched_.quantum();
          if (now < rt.ready_at) {
            cs.idle_cycles++;
            return;
          }
        } else if (cur_done) {
          rt.tid = -1;
        }
      } else if (rt.tid >= 0) {
        rt.quantum_left = sched_.quantum();
      }
    }
    if (rt.tid < 0) {
      cs.idle_cycles++;
      rt.accum = std::min(rt.accum + rt.freq, ref_hz_);
      return;
    }

    if (rt.quantum_left) rt.quantum_left--;
    rt.accum = std::min(rt.accum + rt.freq, 2 * ref_hz_);
    bool activity = false;
    bool cycle_consumed = false;

    // 1. completions
    if (rt.mem_pending && rt.mem_done_known && rt.mem_done <= now) {
      rt.mem_pending = false;
      rt.mem_done_known = false;
      ThreadStats& ts = stats_.threads[rt.tid];
      u64 lat = rt.mem_done - rt.mem_issue;
      ts.mem_accesses++;
      ts.mem_latency_sum += lat;
      stats_.demand_accesses++;
      stats_.demand_latency_sum += lat;
      retire(now, core);
      activity = true;
    }
    bool popped = false;
    if (rt.drain_pending && rt.drain_done_known && rt.drain_done <= now) {
      rt.drain_pending = false;
      rt.drain_done_known = false;
      rt.sb.pop();
      stats_.store_buffer_drains++;
      work_++;
      activity = true;
      popped = true;
    }

    // 2. opportunistic drain, one buffer entry per cycle when the L1 port is
    // free (no demand access in flight)
    try_drain(now, core, !popped);

    // 3. fence completion
    if (rt.executing && rt.issued && rt.ev.kind == EventKind::Fence && rt.sb.empty() &&
        !rt.drain_pending) {
      horizon_ = std::max(horizon_, now);
      retire(now, core);
      activity = true;
    }

    // 4. compute progress
    if (rt.executing && rt.issued && rt.ev.kind == EventKind::Compute) {
      if (take_token(rt)) {
        rt.compute_left--;
        activity = true;
        cycle_consumed = true;
        if (rt.compute_left == 0) {
          horizon_ = std::max(horizon_, now + 1);
          retire(now, core);
        }
      }
    }

    // 5. fetch the next instruction
    ThreadRt& th = threads_[rt.tid];
    if (!rt.executing && !th.done() && !cycle_consumed) {
      rt.ev = th.events[th.pc];
      rt.executing = true;
      rt.issued = false;
    }

    // 6. issue
    if (rt.executing && !rt.issued && !cycle_consumed && issue_allowed(core)) {
      if (take_token(rt)) {
        issue(now, core);
        activity = true;
        cycle_consumed = true;
      }
    }

    if (activity || rt.executing) {
      cs.busy_cycles += activity ? 1 : 0;
      cs.stall_cycles += activity ? 0 : 1;
      rt.window_busy++;
    } else {
      cs.idle_cycles++;
    }
    if (!cycle_consumed) rt.accum = std::min(rt.accum, ref_hz_);
  }

  bool issue_allowed(u32 core) const {
    const CoreRt& rt = cores_[core];
    const TraceEvent& e = rt.ev;
    if (e.kind == EventKind::Compute || e.kind == EventKind::Fence) return true;
    bool sc = cfg_.per_core[core].consistency_mode == ConsistencyMode::Sc;
    if (sc && (!rt.sb.empty() || rt.drain_pending)) return false;
    // A fill this core started (a draining store) may still be in flight for
    // the same block; the access has to wait for the block to land.
    auto f = fills_.find(block_of(e.address));
    if (f != fills_.end() && f->second.primary.core == core) return false;
    if (e.kind == EventKind::Load) {
      if (rt.sb.partial_overlap(e.address, e.size_bytes)) return false;
      return !rt.mem_pending;
    }
    // store
    if (rt.sb.enabled()) return !rt.sb.full();
    return !rt.mem_pending && !rt.drain_pending;
  }

  void issue(Cycle now, u32 core) {
    CoreRt& rt = cores_[core];
    ThreadStats& ts = stats_.threads[rt.tid];
    u32 thread = static_cast<u32>(rt.tid);
    rt.issued = true;
    switch (rt.ev.kind) {
      case EventKind::Compute: {
        ts.computes++;
        rt.compute_left = rt.ev.cycles ? rt.ev.cycles - 1 : 0;
        if (rt.compute_left == 0) {
          horizon_ = std::max(horizon_, now + 1);
          retire(now, core);
        }
        break;
      }
      case EventKind::Fence: {
        ts.fences++;
        // completes via step 3, possibly this very cycle next time around
        if (rt.sb.empty() && !rt.drain_pending) {
          horizon_ = std::max(horizon_, now);
          retire(now, core);
        }
        break;
      }
      case EventKind::Load: {
        ts.loads++;
        if (rt.sb.enabled()) {
          std::optional<u64> fwd = rt.sb.forward(rt.ev.address, rt.ev.size_bytes);
          if (fwd) {
            ts.forwarded_loads++;
            ts.load_values.push_back(cfg_.value_tracking ? *fwd : 0);
            horizon_ = std::max(horizon_, now + 1);
            retire(now, core);
            event(now, "core" + std::to_string(core), "forward " + hexaddr(rt.ev.address));
            return;
          }
        }
        rt.mem_pending = true;
        rt.mem_issue = now;
        rt.mem_done_known = false;
        if (start_demand(now, core, thread, rt.ev)) {
          // private hit: completion time already known
        }
        break;
      }
      case EventKind::Store: {
        ts.stores++;
        if (rt.sb.enabled()) {
          rt.sb.push(StoreBufferEntry{rt.ev.address, rt.ev.size_bytes, rt.ev.value, now});
          horizon_ = std::max(horizon_, now + 1);
          retire(now, core);
          return;
        }
        rt.mem_pending = true;
        rt.mem_issue = now;
        rt.mem_done_known = false;
        start_demand(now, core, thread, rt.ev);
        break;
      }
    }
  }

  void body(Cycle now) {
    step_dram(now);
    step_txns(now);
    for (u32 c = 0; c < cfg_.core_count; ++c) step_core(now, c);
  }

  bool drained() const {
    for (std::size_t t = 0; t < threads_.size(); ++t)
      if (!threads_[t].done()) return false;
    for (const CoreRt& rt : cores_) {
      if (rt.executing || rt.mem_pending || rt.drain_pending || !rt.sb.empty()) return false;
    }
    if (!bus_.empty() || !pend_.empty() || !fills_.empty()) return false;
    for (const DramChannel& ch : channels_)
      if (!ch.idle()) return false;
    return true;
  }

  void finalize() {
    stats_.total_cycles = horizon_;
    stats_.coherence = coh_.counters();
    for (const DramChannel& ch : channels_) {
      const DramStats& s = ch.stats();
      stats_.dram.reads += s.reads;
      stats_.dram.writes += s.writes;
      stats_.dram.row_hits += s.row_hits;
      stats_.dram.row_misses += s.row_misses;
      stats_.dram.row_conflicts += s.row_conflicts;
      stats_.dram.queue_delay_sum += s.queue_delay_sum;
    }
    for (const MshrFile& m : mshr_) {
      stats_.mshr_merges += m.merges();
      stats_.mshr_stalls += m.stalls();
    }
    for (u32 c = 0; c < cfg_.core_count; ++c) {
      const CoreConfig& cc = cfg_.per_core[c];
      CoreExecStats& cs = stats_.cores[c];
      double joules = 0;
      for (const auto& [freq, cycles] : cs.cycles_at_freq) {
        double dyn = cc.dvfs ? dynamic_power(*cc.dvfs, freq) : 0.0;
        joules += (dyn + cc.static_power_watts) * (double(cycles) / double(ref_hz_));
      }
      cs.energy_joules = joules;
    }
    if (cfg_.value_tracking) {
      // flush: modified private data wins over the slice copy, which wins
      // over plain memory
      for (const auto& [blk, data] : llc_data_.all()) {
        u32 slice = llc_slice(blk), set = llc_set(blk);
        const CacheBlockMeta* m = slices_[slice].find(blk, set);
        if (m && m->dirty) backing_.put(blk, data);
      }
      for (u32 c = 0; c < cfg_.core_count; ++c)
        for (const auto& [blk, data] : core_data_[c].all())
          if (coh_.state(c, blk) == CoherenceState::Modified) backing_.put(blk, data);
      for (const auto& [blk, data] : backing_.all()) stats_.final_memory[blk] = data;
    }
  }

  // --- members ----------------------------------------------------------------

  SystemConfig cfg_;
  RunOptions opt_;
  const CacheConfig& llc_;
  CoherenceDomain coh_;
  Scheduler sched_;
  BlockStore backing_;
  BlockStore llc_data_;
  std::vector<BlockStore> core_data_;

  std::vector<ThreadRt> threads_;
  std::vector<bool> finished_;
  std::vector<CoreRt> cores_;
  std::vector<std::vector<CacheArray>> priv_;  // [level][core]
  std::vector<Cycle> lat_prefix_;
  std::vector<std::string> level_names_;
  Cycle t1_extra_ = 0;
  std::vector<CacheArray> slices_;
  std::vector<MshrFile> mshr_;
  std::vector<std::vector<u32>> allowed_ways_;
  std::vector<DramChannel> channels_;
  std::vector<DramChannel::Done> done_scratch_;

  std::map<Cycle, std::vector<LlcReq>> pend_;
  std::vector<BusEntry> bus_;
  Cycle bus_free_ = 0;
  std::unordered_set<u64> busy_;
  std::unordered_map<u64, PendingFill> fills_;

  RunStats stats_;
  u64 ref_hz_ = 1;
  u64 next_txn_seq_ = 0;
  u64 next_dram_id_ = 0;
  u64 value_seq_ = 0;
  u64 work_ = 0;
  Cycle horizon_ = 0;
};

}  // namespace

u64 RunStats::read_final(Addr addr, u32 size, u32 block_size) const {
  u64 blk = addr / block_size;
  u64 off = addr % block_size;
  auto it = final_memory.find(blk);
  u64 v = 0;
  for (u32 i = 0; i < size; ++i) {
    u8 byte = it == final_memory.end() ? 0 : it->second[off + i];
    v |= u64(byte) << (8 * i);
  }
  return v;
}

RunStats run(const SystemConfig& cfg, const std::vector<std::vector<TraceEvent>>& apps, u64 seed,
             const RunOptions& opt) {
  (void)seed;  // the simulation is deterministic; the seed only tags the run
  SystemConfig v = cfg.validated ? cfg : validate_config(cfg);
  Simulation sim(v, apps, opt);
  return sim.take();
}

ExperimentResult run_experiment(const SystemConfig& cfg,
                                const std::vector<std::vector<TraceEvent>>& apps, u64 seed,
                                const RunOptions& opt) {
  SystemConfig v = cfg.validated ? cfg : validate_config(cfg);
  ExperimentResult out;

  // Global thread ids are handed out app by app; an app running alone keeps
  // its global affinity entries by remapping them onto its local ids.
  std::vector<u32> offsets;
  u32 next = 0;
  for (const auto& app : apps) {
    offsets.push_back(next);
    u32 top = 0;
    for (const TraceEvent& e : app) top = std::max(top, e.thread_id + 1);
    next += top;
  }

  for (std::size_t a = 0; a < apps.size(); ++a) {
    SystemConfig alone_cfg = v;
    alone_cfg.os.affinity.clear();
    u32 top = 0;
    for (const TraceEvent& e : apps[a]) top = std::max(top, e.thread_id + 1);
    for (u32 t = 0; t < top; ++t) {
      auto it = v.os.affinity.find(offsets[a] + t);
      if (it != v.os.affinity.end()) alone_cfg.os.affinity[t] = it->second;
    }
    out.alone.push_back(run(alone_cfg, {apps[a]}, seed, RunOptions{}));
  }

  out.shared = run(v, apps, seed, opt);

  for (std::size_t a = 0; a < apps.size(); ++a) {
    AppPerf p;
    p.app = "app" + std::to_string(a);
    u64 instr = 0;
    Cycle shared_fin = 0;
    for (std::size_t t = 0; t < out.shared.threads.size(); ++t) {
      if (out.shared.threads[t].app != static_cast<u32>(a)) continue;
      instr += out.shared.threads[t].instructions;
      shared_fin = std::max(shared_fin, out.shared.threads[t].finish_cycle);
    }
    Cycle alone_fin = 0;
    for (const ThreadStats& t : out.alone[a].threads)
      alone_fin = std::max(alone_fin, t.finish_cycle);
    p.instructions = instr;
    p.ipc_alone = alone_fin ? double(instr) / double(alone_fin) : 0.0;
    p.ipc_shared = shared_fin ? double(instr) / double(shared_fin) : 0.0;
    out.perfs.push_back(p);
  }

  out.report = multiprogram_metrics(out.perfs);
  double joules = 0;
  for (const CoreExecStats& cs : out.shared.cores) joules += cs.energy_joules;
  out.report.energy_joules = joules;
  double seconds = out.shared.total_cycles ? double(out.shared.total_cycles) /
                                                 double(reference_hz(v))
                                           : 0.0;
  out.report.average_power_watts = seconds > 0 ? joules / seconds : 0.0;
  return out;
}

Scheduler::Scheduler(u32 cores, u64 quantum, u64 switch_cycles,
                     const std::map<u32, std::vector<u32>>& affinity, u32 thread_count)
    : queues_(cores), rr_(cores, 0), quantum_(quantum), switch_cycles_(switch_cycles) {
  for (u32 t = 0; t < thread_count; ++t) {
    const std::vector<u32>* allowed = nullptr;
    auto it = affinity.find(t);
    if (it != affinity.end()) allowed = &it->second;
    u32 best = cores;  // invalid
    std::size_t best_len = 0;
    auto consider = [&](u32 c) {
      if (c >= cores) return;
      if (best == cores || queues_[c].size() < best_len) {
        best = c;
        best_len = queues_[c].size();
      }
    };
    if (allowed) {
      for (u32 c : *allowed) consider(c);
    } else {
      for (u32 c = 0; c < cores; ++c) consider(c);
    }
    if (best == cores)
      fail(Err::UnschedulableThread,
           "thread " + std::to_string(t) + " has no eligible core");
    queues_[best].push_back(t);
  }
}

i32 Scheduler::pick_next(u32 core, i32 current, const std::vector<bool>& finished) {
  (void)current;
  const std::vector<u32>& q = queues_[core];
  if (q.empty()) return -1;
  std::size_t n = q.size();
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t idx = (rr_[core] + i) % n;
    u32 t = q[idx];
    if (!finished[t]) {
      rr_[core] = (idx + 1) % n;
      return static_cast<i32>(t);
    }
  }
  return -1;
}

}  // namespace mcsim
