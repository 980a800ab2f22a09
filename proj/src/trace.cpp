#include "mcsim/trace.hpp"

#include <charconv>
#include <fstream>
#include <random>
#include <sstream>

namespace mcsim {

namespace {

[[noreturn]] void bad_line(std::size_t line, const std::string& why) {
  fail(Err::SyntaxError, "trace line " + std::to_string(line) + ": " + why);
}

u64 parse_u64(const std::string& tok, std::size_t line, int base, const char* what) {
  u64 v = 0;
  const char* b = tok.data();
  const char* e = tok.data() + tok.size();
  if (base == 16 && tok.size() > 2 && tok[0] == '0' && (tok[1] == 'x' || tok[1] == 'X')) b += 2;
  auto [p, ec] = std::from_chars(b, e, v, base);
  if (ec != std::errc() || p != e)
    bad_line(line, std::string("bad ") + what + " '" + tok + "'");
  return v;
}

}  // namespace

std::vector<TraceEvent> parse_trace(std::istream& in, u32 block_size_bytes) {
  std::vector<TraceEvent> out;
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = raw.substr(0, raw.find('#'));
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    if (tok[0].size() < 2 || tok[0][0] != 'T') bad_line(lineno, "expected T<tid>");
    TraceEvent ev;
    ev.thread_id = static_cast<u32>(parse_u64(tok[0].substr(1), lineno, 10, "thread id"));
    if (tok.size() < 2 || tok[1].size() != 1) bad_line(lineno, "expected event kind");
    switch (tok[1][0]) {
      case 'L':
        ev.kind = EventKind::Load;
        if (tok.size() != 4) bad_line(lineno, "load needs address and size");
        ev.address = parse_u64(tok[2], lineno, 16, "address");
        ev.size_bytes = static_cast<u32>(parse_u64(tok[3], lineno, 10, "size"));
        break;
      case 'S':
        ev.kind = EventKind::Store;
        if (tok.size() != 5) bad_line(lineno, "store needs address, size and value");
        ev.address = parse_u64(tok[2], lineno, 16, "address");
        ev.size_bytes = static_cast<u32>(parse_u64(tok[3], lineno, 10, "size"));
        ev.value = parse_u64(tok[4], lineno, 10, "value");
        break;
      case 'C':
        ev.kind = EventKind::Compute;
        if (tok.size() != 3) bad_line(lineno, "compute needs a cycle count");
        ev.cycles = parse_u64(tok[2], lineno, 10, "cycle count");
        break;
      case 'F':
        ev.kind = EventKind::Fence;
        if (tok.size() != 2) bad_line(lineno, "fence takes no arguments");
        break;
      default:
        bad_line(lineno, std::string("unknown event kind '") + tok[1] + "'");
    }
    if (ev.kind == EventKind::Load || ev.kind == EventKind::Store) {
      if (!is_pow2(ev.size_bytes) || ev.size_bytes > block_size_bytes)
        bad_line(lineno, "size must be a power of two no larger than the block size");
      Addr first_block = ev.address / block_size_bytes;
      Addr last_block = (ev.address + ev.size_bytes - 1) / block_size_bytes;
      if (first_block != last_block)
        fail(Err::CrossesBlockBoundary,
             "trace line " + std::to_string(lineno) + ": access at 0x" +
                 [&] { std::ostringstream os; os << std::hex << ev.address; return os.str(); }() +
                 " spans two blocks");
    }
    out.push_back(ev);
  }
  return out;
}

std::vector<TraceEvent> parse_trace(const std::string& text, u32 block_size_bytes) {
  std::istringstream in(text);
  return parse_trace(in, block_size_bytes);
}

std::string render_trace(std::span<const TraceEvent> events) {
  std::ostringstream os;
  for (const TraceEvent& ev : events) {
    os << 'T' << ev.thread_id << ' ';
    switch (ev.kind) {
      case EventKind::Load:
        os << "L 0x" << std::hex << ev.address << std::dec << ' ' << ev.size_bytes;
        break;
      case EventKind::Store:
        os << "S 0x" << std::hex << ev.address << std::dec << ' ' << ev.size_bytes << ' '
           << ev.value;
        break;
      case EventKind::Compute:
        os << "C " << ev.cycles;
        break;
      case EventKind::Fence:
        os << 'F';
        break;
    }
    os << '\n';
  }
  return os.str();
}

std::vector<TraceEvent> load_trace_file(const std::string& path, u32 block_size_bytes) {
  std::ifstream in(path);
  if (!in) fail(Err::SyntaxError, "cannot open trace file " + path);
  return parse_trace(in, block_size_bytes);
}

std::vector<TraceEvent> generate_trace(TracePattern pattern, const TraceGenParams& p, u64 seed) {
  std::vector<TraceEvent> out;
  std::mt19937_64 rng(seed);
  const u64 bs = p.block_size_bytes;
  switch (pattern) {
    case TracePattern::Streaming: {
      // Each thread walks its own contiguous run of blocks, one load per block.
      for (u32 t = 0; t < p.thread_count; ++t)
        for (u32 i = 0; i < p.events_per_thread; ++i) {
          TraceEvent ev;
          ev.thread_id = t;
          ev.kind = EventKind::Load;
          ev.address = p.start_address + (u64(t) * p.events_per_thread + i) * bs;
          ev.size_bytes = p.access_size;
          out.push_back(ev);
        }
      break;
    }
    case TracePattern::RandomUniform: {
      // Round-robin emission so the file interleaves threads deterministically.
      std::uniform_int_distribution<u64> blk(0, p.address_blocks ? p.address_blocks - 1 : 0);
      std::uniform_int_distribution<u64> slot(0, bs / p.access_size - 1);
      std::uniform_real_distribution<double> coin(0.0, 1.0);
      for (u32 i = 0; i < p.events_per_thread; ++i)
        for (u32 t = 0; t < p.thread_count; ++t) {
          TraceEvent ev;
          ev.thread_id = t;
          ev.address = p.start_address + blk(rng) * bs + slot(rng) * p.access_size;
          ev.size_bytes = p.access_size;
          if (coin(rng) < p.store_fraction) {
            ev.kind = EventKind::Store;
            ev.value = rng();
          } else {
            ev.kind = EventKind::Load;
          }
          out.push_back(ev);
        }
      break;
    }
    case TracePattern::FalseSharing: {
      // Two threads pound the same block at distinct offsets (0x00 / 0x08),
      // strictly alternating.  padded moves thread 1 to its own block.
      Addr a0 = p.start_address;
      Addr a1 = p.start_address + (p.padded ? bs + 8 : 8);
      for (u32 i = 0; i < p.events_per_thread; ++i) {
        out.push_back({0, EventKind::Store, a0, p.access_size, u64(i) * 2, 0});
        out.push_back({1, EventKind::Store, a1, p.access_size, u64(i) * 2 + 1, 0});
      }
      break;
    }
    case TracePattern::RowLocal: {
      // Thread t streams loads through DRAM row (row_index + t), wrapping
      // inside the row, so every access after the first is a row hit.
      u64 blocks_per_row = p.row_size_bytes / bs;
      for (u32 t = 0; t < p.thread_count; ++t) {
        Addr row_base = p.start_address + (p.row_index + t) * p.row_size_bytes;
        for (u32 i = 0; i < p.events_per_thread; ++i) {
          TraceEvent ev;
          ev.thread_id = t;
          ev.kind = EventKind::Load;
          ev.address = row_base + (i % blocks_per_row) * bs;
          ev.size_bytes = p.access_size;
          out.push_back(ev);
        }
      }
      break;
    }
  }
  return out;
}

}  // namespace mcsim
