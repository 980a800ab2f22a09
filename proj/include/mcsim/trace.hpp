#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mcsim/config.hpp"

namespace mcsim {

enum class EventKind { Load, Store, Compute, Fence };

struct TraceEvent {
  u32 thread_id = 0;
  EventKind kind = EventKind::Load;
  Addr address = 0;
  u32 size_bytes = 0;  // power of two, <= block size, loads/stores only
  u64 value = 0;       // stores only
  u64 cycles = 0;      // compute only
  bool operator==(const TraceEvent&) const = default;
};

// Text format, one event per line ('#' starts a comment):
//   T<tid> L <hexaddr> <size>
//   T<tid> S <hexaddr> <size> <value>
//   T<tid> C <cycles>
//   T<tid> F
std::vector<TraceEvent> parse_trace(std::istream& in, u32 block_size_bytes = 64);
std::vector<TraceEvent> parse_trace(const std::string& text, u32 block_size_bytes = 64);
std::string render_trace(std::span<const TraceEvent> events);
std::vector<TraceEvent> load_trace_file(const std::string& path, u32 block_size_bytes = 64);

enum class TracePattern { Streaming, RandomUniform, FalseSharing, RowLocal };

struct TraceGenParams {
  u32 thread_count = 1;
  u32 events_per_thread = 16;
  u32 block_size_bytes = 64;
  Addr start_address = 0;
  u32 access_size = 8;
  // RandomUniform:
  u64 address_blocks = 64;     // footprint in blocks
  double store_fraction = 0.5;
  // FalseSharing:
  bool padded = false;  // true: second thread writes its own block instead
  // RowLocal:
  u32 row_size_bytes = 2048;
  u64 row_index = 0;  // thread t walks row (row_index + t)
};

// Pure function of (pattern, params, seed).
std::vector<TraceEvent> generate_trace(TracePattern pattern, const TraceGenParams& params,
                                       u64 seed);

}  // namespace mcsim
