#pragma once

#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mcsim/config.hpp"

namespace mcsim {

// Untimed litmus-test engine, independent of the cycle simulator.  Programs
// are at most 4 threads x 8 instructions; memory starts all-zero.

struct LitmusInstr {
  enum Kind { StoreConst, LoadToReg, Fence } kind = StoreConst;
  std::string var;  // StoreConst / LoadToReg
  u64 value = 0;    // StoreConst
  std::string reg;  // LoadToReg
  bool operator==(const LitmusInstr&) const = default;
};

struct LitmusProgram {
  std::vector<std::vector<LitmusInstr>> threads;
};

constexpr std::size_t kMaxLitmusThreads = 4;
constexpr std::size_t kMaxLitmusInstrs = 8;

// Throws ProgramTooLarge when the limits are exceeded.
void check_program(const LitmusProgram& p);

// Text format, one instruction per line ('#' comments):
//   <tid> S <var> <int>
//   <tid> L <var> <reg>
//   <tid> F
LitmusProgram parse_litmus(std::istream& in);
LitmusProgram parse_litmus(const std::string& text);

struct Outcome {
  std::map<std::string, u64> regs;
  std::map<std::string, u64> memory;
  auto operator<=>(const Outcome&) const = default;
};
using OutcomeSet = std::set<Outcome>;

// All program-order-preserving interleavings.
OutcomeSet enumerate_sc(const LitmusProgram& p);

// SC plus per-thread FIFO store buffers with load forwarding; Fence drains.
OutcomeSet enumerate_tso(const LitmusProgram& p);

// Per-thread reorderings constrained by same-variable order, register RAW
// dependencies, and fences (which are also globally ordered), interleaved.
OutcomeSet enumerate_weak(const LitmusProgram& p);

OutcomeSet enumerate_model(const LitmusProgram& p, ConsistencyMode m);

// One line per distinct register valuation: "r0=0 r1=1", sorted
// lexicographically.  Outcomes differing only in memory collapse.
std::vector<std::string> format_outcomes(const OutcomeSet& s);

}  // namespace mcsim
