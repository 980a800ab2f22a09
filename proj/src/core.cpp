#include "mcsim/core.hpp"

#include <algorithm>
#include <cmath>

namespace mcsim {

double knee_frequency(const DvfsParams& p) { return p.f_base * (p.v_min / p.v_dd); }

double dynamic_power(const DvfsParams& p, double f_hz) {
  if (!(f_hz > 0.0) || f_hz > p.f_turbo * (1.0 + 1e-12))
    fail(Err::FrequencyOutOfRange,
         "f = " + std::to_string(f_hz) + " Hz outside (0, " + std::to_string(p.f_turbo) + "]");
  // V scales linearly with f above the knee and is clamped at v_min below it;
  // P = tdp * (V/v_dd)^2 * (f/f_base) is then cubic above and linear below,
  // with P(f_base) == tdp by construction.
  double v = std::max(p.v_min, p.v_dd * (f_hz / p.f_base));
  double vr = v / p.v_dd;
  return p.tdp_watts * vr * vr * (f_hz / p.f_base);
}

std::size_t governor_select(GovernorPolicy policy, double utilization, std::size_t current_step,
                            std::size_t step_count) {
  if (step_count == 0) return 0;
  std::size_t top = step_count - 1;
  std::size_t cur = std::min(current_step, top);
  switch (policy) {
    case GovernorPolicy::Performance:
      return top;
    case GovernorPolicy::Powersave:
      return 0;
    case GovernorPolicy::Ondemand:
      if (utilization > 0.8) return std::min(cur + 1, top);
      if (utilization < 0.3) return cur > 0 ? cur - 1 : 0;
      return cur;
  }
  return cur;
}

std::optional<u64> StoreBuffer::forward(Addr addr, u32 size) const {
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (it->address <= addr && addr + size <= it->address + it->size) {
      // Carve the requested bytes out of the (possibly wider) buffered value.
      u64 shift = (addr - it->address) * 8;
      u64 v = it->value >> shift;
      if (size < 8) v &= (u64(1) << (size * 8)) - 1;
      return v;
    }
  }
  return std::nullopt;
}

bool StoreBuffer::partial_overlap(Addr addr, u32 size) const {
  for (const StoreBufferEntry& e : entries_) {
    bool overlap = e.address < addr + size && addr < e.address + e.size;
    bool covers = e.address <= addr && addr + size <= e.address + e.size;
    if (overlap && !covers) return true;
  }
  return false;
}

}  // namespace mcsim
