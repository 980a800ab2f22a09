#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "mcsim/litmus.hpp"

using namespace mcsim;

namespace {

const char* kSB =
    "0 S x 1\n"
    "0 L y r0\n"
    "1 S y 1\n"
    "1 L x r1\n";

const char* kMP =
    "0 S x 1\n"
    "0 S y 1\n"
    "1 L y r0\n"
    "1 L x r1\n";

bool has_regs(const OutcomeSet& s, const std::map<std::string, u64>& regs) {
  for (const Outcome& o : s)
    if (o.regs == regs) return true;
  return false;
}

bool subset(const OutcomeSet& a, const OutcomeSet& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

// Exhaustive SC reference: replay every distinct interleaving of the two
// programs' instruction streams via next_permutation.  Intentionally naive and
// memo-free so it cannot share a bug with the walker it checks.
OutcomeSet brute_force_sc(const LitmusProgram& p) {
  std::vector<std::size_t> sched;
  for (std::size_t t = 0; t < p.threads.size(); ++t)
    sched.insert(sched.end(), p.threads[t].size(), t);
  std::sort(sched.begin(), sched.end());
  Outcome zero;
  for (const auto& th : p.threads)
    for (const LitmusInstr& i : th) {
      if (i.kind != LitmusInstr::Fence) zero.memory.emplace(i.var, 0);
      if (i.kind == LitmusInstr::LoadToReg) zero.regs.emplace(i.reg, 0);
    }
  OutcomeSet out;
  do {
    Outcome o = zero;
    std::vector<std::size_t> pc(p.threads.size(), 0);
    for (std::size_t t : sched) {
      const LitmusInstr& i = p.threads[t][pc[t]++];
      if (i.kind == LitmusInstr::StoreConst)
        o.memory[i.var] = i.value;
      else if (i.kind == LitmusInstr::LoadToReg)
        o.regs[i.reg] = o.memory[i.var];
    }
    out.insert(o);
  } while (std::next_permutation(sched.begin(), sched.end()));
  return out;
}

LitmusProgram random_program(std::mt19937_64& rng) {
  const char* vars[] = {"x", "y"};
  const char* regs[] = {"r0", "r1", "r2", "r3"};
  LitmusProgram p;
  std::size_t threads = 2 + rng() % 2;
  p.threads.resize(threads);
  std::size_t next_reg = 0;
  for (std::size_t t = 0; t < threads; ++t) {
    std::size_t len = 1 + rng() % 3;
    for (std::size_t i = 0; i < len; ++i) {
      LitmusInstr ins;
      switch (rng() % 4) {
        case 0:
          ins.kind = LitmusInstr::Fence;
          break;
        case 1:
          ins.kind = LitmusInstr::LoadToReg;
          ins.var = vars[rng() % 2];
          ins.reg = regs[next_reg++ % 4];
          break;
        default:
          ins.kind = LitmusInstr::StoreConst;
          ins.var = vars[rng() % 2];
          ins.value = 1 + rng() % 3;
          break;
      }
      p.threads[t].push_back(ins);
    }
  }
  return p;
}

}  // namespace

TEST_CASE("litmus parsing") {
  LitmusProgram p = parse_litmus(std::string("# store buffering\n") + kSB + "\n");
  REQUIRE(p.threads.size() == 2);
  REQUIRE(p.threads[0].size() == 2);
  CHECK(p.threads[0][0] == LitmusInstr{LitmusInstr::StoreConst, "x", 1, ""});
  CHECK(p.threads[0][1] == LitmusInstr{LitmusInstr::LoadToReg, "y", 0, "r0"});
  CHECK(parse_litmus(std::string("0 F\n")).threads[0][0].kind == LitmusInstr::Fence);

  CHECK_THROWS_AS(parse_litmus(std::string("0 S x\n")), SimError);
  CHECK_THROWS_AS(parse_litmus(std::string("0 X y 1\n")), SimError);
  CHECK_THROWS_AS(parse_litmus(std::string("zz S x 1\n")), SimError);
  try {
    parse_litmus(std::string("4 S x 1\n"));  // thread ids run 0..3
    FAIL("expected ProgramTooLarge");
  } catch (const SimError& e) {
    CHECK(e.code() == Err::ProgramTooLarge);
  }
  std::string big;
  for (int i = 0; i < 9; ++i) big += "0 S x 1\n";
  CHECK_THROWS_AS(parse_litmus(big), SimError);
}

TEST_CASE("store buffering: TSO adds the 0,0 outcome SC forbids") {
  LitmusProgram p = parse_litmus(std::string(kSB));
  OutcomeSet sc = enumerate_sc(p);
  OutcomeSet tso = enumerate_tso(p);
  CHECK(format_outcomes(sc) ==
        std::vector<std::string>{"r0=0 r1=1", "r0=1 r1=0", "r0=1 r1=1"});
  CHECK(format_outcomes(tso) ==
        std::vector<std::string>{"r0=0 r1=0", "r0=0 r1=1", "r0=1 r1=0", "r0=1 r1=1"});
  CHECK(!has_regs(sc, {{"r0", 0}, {"r1", 0}}));
  CHECK(has_regs(tso, {{"r0", 0}, {"r1", 0}}));
  CHECK(subset(sc, tso));
}

TEST_CASE("message passing: stale data needs a weak model") {
  LitmusProgram p = parse_litmus(std::string(kMP));
  OutcomeSet sc = enumerate_sc(p);
  OutcomeSet tso = enumerate_tso(p);
  OutcomeSet weak = enumerate_weak(p);
  std::map<std::string, u64> stale{{"r0", 1}, {"r1", 0}};
  CHECK(!has_regs(sc, stale));
  CHECK(!has_regs(tso, stale));  // TSO keeps store order and load order
  CHECK(has_regs(weak, stale));
  CHECK(format_outcomes(sc) ==
        std::vector<std::string>{"r0=0 r1=0", "r0=0 r1=1", "r0=1 r1=1"});
  // fences on both sides forbid the stale observation even under weak
  LitmusProgram fenced = parse_litmus(std::string("0 S x 1\n0 F\n0 S y 1\n"
                                                  "1 L y r0\n1 F\n1 L x r1\n"));
  CHECK(!has_regs(enumerate_weak(fenced), stale));
}

TEST_CASE("fences restore SC for store buffering under TSO") {
  LitmusProgram p = parse_litmus(std::string("0 S x 1\n0 F\n0 L y r0\n"
                                             "1 S y 1\n1 F\n1 L x r1\n"));
  CHECK(enumerate_tso(p) == enumerate_sc(p));
  CHECK(!has_regs(enumerate_tso(p), {{"r0", 0}, {"r1", 0}}));
}

TEST_CASE("a thread always sees its own stores") {
  LitmusProgram p = parse_litmus(std::string("0 S x 9\n0 L x r0\n"));
  for (const OutcomeSet& s : {enumerate_sc(p), enumerate_tso(p), enumerate_weak(p)}) {
    REQUIRE(s.size() == 1);
    CHECK(s.begin()->regs.at("r0") == 9);  // TSO forwards from the buffer
    CHECK(s.begin()->memory.at("x") == 9);
  }
}

TEST_CASE("single-threaded programs look identical under every model") {
  LitmusProgram p = parse_litmus(std::string("0 S x 1\n0 L x r0\n0 S x 2\n0 L x r1\n"));
  OutcomeSet sc = enumerate_sc(p);
  CHECK(sc == enumerate_tso(p));
  CHECK(sc == enumerate_weak(p));
  REQUIRE(sc.size() == 1);
  CHECK(sc.begin()->regs.at("r0") == 1);
  CHECK(sc.begin()->regs.at("r1") == 2);
}

TEST_CASE("enumeration is deterministic") {
  LitmusProgram p = parse_litmus(std::string(kSB));
  CHECK(enumerate_sc(p) == enumerate_sc(p));
  CHECK(enumerate_tso(p) == enumerate_tso(p));
  CHECK(enumerate_weak(p) == enumerate_weak(p));
  CHECK(enumerate_model(p, ConsistencyMode::Sc) == enumerate_sc(p));
  CHECK(enumerate_model(p, ConsistencyMode::Tso) == enumerate_tso(p));
}

TEST_CASE("SC enumeration matches a brute-force interleaver on random programs") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 60; ++trial) {
    LitmusProgram p = random_program(rng);
    OutcomeSet sc = enumerate_sc(p);
    OutcomeSet tso = enumerate_tso(p);
    OutcomeSet weak = enumerate_weak(p);
    CHECK(sc == brute_force_sc(p));
    CHECK(subset(sc, tso));
    CHECK(subset(tso, weak));
  }
}
