#pragma once

#include <deque>
#include <optional>

#include "mcsim/config.hpp"

namespace mcsim {

// --- DVFS power model -------------------------------------------------------
//
// Dynamic power follows alpha*C*V^2*f with the voltage tied to frequency:
// above the knee (f_base * v_min/v_dd) voltage scales linearly with f, giving
// a cubic P(f); below it the voltage floor v_min makes P(f) linear.  The curve
// is calibrated so P(f_base) == tdp_watts exactly.

double knee_frequency(const DvfsParams& p);

// Throws FrequencyOutOfRange unless 0 < f_hz <= f_turbo.
double dynamic_power(const DvfsParams& p, double f_hz);

// Governor step selection over an ascending frequency-step ladder.
// performance -> max step, powersave -> min step, ondemand -> one step up when
// utilization > 0.8, one step down when < 0.3, hold otherwise (clamped).
std::size_t governor_select(GovernorPolicy policy, double utilization,
                            std::size_t current_step, std::size_t step_count);

// --- Store buffer -----------------------------------------------------------

struct StoreBufferEntry {
  Addr address = 0;
  u32 size = 0;
  u64 value = 0;
  Cycle enqueued_at = 0;
};

// FIFO write buffer between a core and its L1.  Depth 0 disables it (the
// engine then issues stores as blocking writes).
class StoreBuffer {
 public:
  explicit StoreBuffer(u32 depth = 0) : depth_(depth) {}

  u32 depth() const { return depth_; }
  bool enabled() const { return depth_ > 0; }
  bool empty() const { return entries_.empty(); }
  bool full() const { return entries_.size() >= depth_; }
  std::size_t size() const { return entries_.size(); }

  void push(const StoreBufferEntry& e) { entries_.push_back(e); }
  const StoreBufferEntry& front() const { return entries_.front(); }
  void pop() { entries_.pop_front(); }

  // TSO load forwarding: youngest entry whose byte range covers [addr, addr+size).
  std::optional<u64> forward(Addr addr, u32 size) const;
  // True when some entry overlaps the range but none covers it fully; the
  // load then has to wait for the buffer to drain past the overlap.
  bool partial_overlap(Addr addr, u32 size) const;

 private:
  u32 depth_;
  std::deque<StoreBufferEntry> entries_;
};

}  // namespace mcsim
