#include "mcsim/litmus.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>
#include <unordered_set>

namespace mcsim {

void check_program(const LitmusProgram& p) {
  if (p.threads.size() > kMaxLitmusThreads)
    fail(Err::ProgramTooLarge,
         std::to_string(p.threads.size()) + " threads (max " +
             std::to_string(kMaxLitmusThreads) + ")");
  for (std::size_t t = 0; t < p.threads.size(); ++t)
    if (p.threads[t].size() > kMaxLitmusInstrs)
      fail(Err::ProgramTooLarge, "thread " + std::to_string(t) + " has " +
                                     std::to_string(p.threads[t].size()) + " instructions (max " +
                                     std::to_string(kMaxLitmusInstrs) + ")");
}

LitmusProgram parse_litmus(std::istream& in) {
  LitmusProgram p;
  std::string raw;
  std::size_t lineno = 0;
  auto bad = [&](const std::string& why) -> void {
    fail(Err::SyntaxError, "litmus line " + std::to_string(lineno) + ": " + why);
  };
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = raw.substr(0, raw.find('#'));
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    u64 tid = 0;
    auto [ptr, ec] = std::from_chars(tok[0].data(), tok[0].data() + tok[0].size(), tid);
    if (ec != std::errc() || ptr != tok[0].data() + tok[0].size()) bad("expected a thread id");
    if (tid >= kMaxLitmusThreads)
      fail(Err::ProgramTooLarge, "thread id " + std::to_string(tid) + " (max " +
                                     std::to_string(kMaxLitmusThreads - 1) + ")");
    if (p.threads.size() <= tid) p.threads.resize(tid + 1);
    if (tok.size() < 2 || tok[1].size() != 1) bad("expected S, L or F");
    LitmusInstr ins;
    switch (tok[1][0]) {
      case 'S': {
        if (tok.size() != 4) bad("store needs a variable and a value");
        ins.kind = LitmusInstr::StoreConst;
        ins.var = tok[2];
        u64 v = 0;
        auto [vp, vec] = std::from_chars(tok[3].data(), tok[3].data() + tok[3].size(), v);
        if (vec != std::errc() || vp != tok[3].data() + tok[3].size()) bad("bad store value");
        ins.value = v;
        break;
      }
      case 'L':
        if (tok.size() != 4) bad("load needs a variable and a register");
        ins.kind = LitmusInstr::LoadToReg;
        ins.var = tok[2];
        ins.reg = tok[3];
        break;
      case 'F':
        if (tok.size() != 2) bad("fence takes no arguments");
        ins.kind = LitmusInstr::Fence;
        break;
      default:
        bad("unknown instruction '" + tok[1] + "'");
    }
    p.threads[tid].push_back(ins);
  }
  check_program(p);
  return p;
}

LitmusProgram parse_litmus(const std::string& text) {
  std::istringstream in(text);
  return parse_litmus(in);
}

namespace {

// Shared enumeration plumbing: explicit state structs serialized into memo
// keys so revisited states prune the search.

struct Valuation {
  std::map<std::string, u64> mem, regs;
};

void seed_domains(const LitmusProgram& p, Valuation& v) {
  // every variable and register named anywhere appears in the outcome, zeroed
  for (const auto& th : p.threads)
    for (const LitmusInstr& i : th) {
      if (i.kind != LitmusInstr::Fence) v.mem.emplace(i.var, 0);
      if (i.kind == LitmusInstr::LoadToReg) v.regs.emplace(i.reg, 0);
    }
}

std::string key_of(const Valuation& v, const std::string& extra) {
  std::string k = extra + "|";
  for (auto& [name, val] : v.mem) k += name + "=" + std::to_string(val) + ",";
  k += "|";
  for (auto& [name, val] : v.regs) k += name + "=" + std::to_string(val) + ",";
  return k;
}

struct ScWalker {
  const LitmusProgram& p;
  OutcomeSet out;
  std::unordered_set<std::string> seen;

  void walk(std::vector<std::size_t>& pc, Valuation& v) {
    std::string k;
    for (std::size_t x : pc) k += std::to_string(x) + ";";
    if (!seen.insert(key_of(v, k)).second) return;
    bool terminal = true;
    for (std::size_t t = 0; t < p.threads.size(); ++t) {
      if (pc[t] >= p.threads[t].size()) continue;
      terminal = false;
      const LitmusInstr& i = p.threads[t][pc[t]];
      Valuation saved = v;
      if (i.kind == LitmusInstr::StoreConst)
        v.mem[i.var] = i.value;
      else if (i.kind == LitmusInstr::LoadToReg)
        v.regs[i.reg] = v.mem[i.var];
      ++pc[t];
      walk(pc, v);
      --pc[t];
      v = saved;
    }
    if (terminal) out.insert({v.regs, v.mem});
  }
};

struct TsoWalker {
  const LitmusProgram& p;
  OutcomeSet out;
  std::unordered_set<std::string> seen;
  // per-thread FIFO store buffer contents
  std::vector<std::vector<std::pair<std::string, u64>>> buf;

  std::string state_key(const std::vector<std::size_t>& pc, const Valuation& v) {
    std::string k;
    for (std::size_t t = 0; t < pc.size(); ++t) {
      k += std::to_string(pc[t]) + "[";
      for (auto& [var, val] : buf[t]) k += var + ":" + std::to_string(val) + " ";
      k += "];";
    }
    return key_of(v, k);
  }

  void walk(std::vector<std::size_t>& pc, Valuation& v) {
    if (!seen.insert(state_key(pc, v)).second) return;
    bool terminal = true;

    for (std::size_t t = 0; t < p.threads.size(); ++t) {
      // option 1: drain the oldest buffered store of thread t
      if (!buf[t].empty()) {
        terminal = false;
        auto e = buf[t].front();
        buf[t].erase(buf[t].begin());
        u64 old = v.mem[e.first];
        v.mem[e.first] = e.second;
        walk(pc, v);
        v.mem[e.first] = old;
        buf[t].insert(buf[t].begin(), e);
      }
      // option 2: execute thread t's next instruction
      if (pc[t] >= p.threads[t].size()) continue;
      const LitmusInstr& i = p.threads[t][pc[t]];
      if (i.kind == LitmusInstr::Fence && !buf[t].empty()) {
        terminal = false;  // fence is stalled, but drains above still make progress
        continue;
      }
      terminal = false;
      Valuation saved = v;
      if (i.kind == LitmusInstr::StoreConst) {
        buf[t].push_back({i.var, i.value});
        ++pc[t];
        walk(pc, v);
        --pc[t];
        buf[t].pop_back();
      } else {
        if (i.kind == LitmusInstr::LoadToReg) {
          // forward from the youngest same-variable buffered store
          bool fwd = false;
          for (auto it = buf[t].rbegin(); it != buf[t].rend(); ++it)
            if (it->first == i.var) {
              v.regs[i.reg] = it->second;
              fwd = true;
              break;
            }
          if (!fwd) v.regs[i.reg] = v.mem[i.var];
        }
        ++pc[t];
        walk(pc, v);
        --pc[t];
        v = saved;
      }
    }
    if (terminal) out.insert({v.regs, v.mem});
  }
};

struct WeakWalker {
  const LitmusProgram& p;
  OutcomeSet out;
  std::unordered_set<std::string> seen;
  std::vector<u32> done_mask;  // per thread, bit i = instruction i executed

  bool enabled(std::size_t t, std::size_t i) const {
    const auto& th = p.threads[t];
    if (done_mask[t] & (u32(1) << i)) return false;
    const LitmusInstr& me = th[i];
    for (std::size_t j = 0; j < i; ++j) {
      if (done_mask[t] & (u32(1) << j)) continue;
      const LitmusInstr& other = th[j];
      // a fence orders everything across it, in both directions
      if (other.kind == LitmusInstr::Fence || me.kind == LitmusInstr::Fence) return false;
      // same-variable accesses keep program order
      if (other.var == me.var) return false;
      // register RAW dependencies would pin ordering too, but no instruction
      // in this ISA reads a register, so there is nothing further to check
    }
    return true;
  }

  void walk(Valuation& v) {
    std::string k;
    for (u32 m : done_mask) k += std::to_string(m) + ";";
    if (!seen.insert(key_of(v, k)).second) return;
    bool terminal = true;
    for (std::size_t t = 0; t < p.threads.size(); ++t) {
      for (std::size_t i = 0; i < p.threads[t].size(); ++i) {
        if (done_mask[t] & (u32(1) << i)) continue;
        terminal = false;
        if (!enabled(t, i)) continue;
        const LitmusInstr& ins = p.threads[t][i];
        Valuation saved = v;
        if (ins.kind == LitmusInstr::StoreConst)
          v.mem[ins.var] = ins.value;
        else if (ins.kind == LitmusInstr::LoadToReg)
          v.regs[ins.reg] = v.mem[ins.var];
        done_mask[t] |= u32(1) << i;
        walk(v);
        done_mask[t] &= ~(u32(1) << i);
        v = saved;
      }
    }
    if (terminal) out.insert({v.regs, v.mem});
  }
};

}  // namespace

OutcomeSet enumerate_sc(const LitmusProgram& p) {
  check_program(p);
  ScWalker w{p};
  Valuation v;
  seed_domains(p, v);
  std::vector<std::size_t> pc(p.threads.size(), 0);
  w.walk(pc, v);
  return std::move(w.out);
}

OutcomeSet enumerate_tso(const LitmusProgram& p) {
  check_program(p);
  TsoWalker w{p};
  Valuation v;
  seed_domains(p, v);
  w.buf.resize(p.threads.size());
  std::vector<std::size_t> pc(p.threads.size(), 0);
  w.walk(pc, v);
  return std::move(w.out);
}

OutcomeSet enumerate_weak(const LitmusProgram& p) {
  check_program(p);
  WeakWalker w{p};
  Valuation v;
  seed_domains(p, v);
  w.done_mask.assign(p.threads.size(), 0);
  w.walk(v);
  return std::move(w.out);
}

OutcomeSet enumerate_model(const LitmusProgram& p, ConsistencyMode m) {
  return m == ConsistencyMode::Sc ? enumerate_sc(p) : enumerate_tso(p);
}

std::vector<std::string> format_outcomes(const OutcomeSet& s) {
  std::set<std::string> lines;
  for (const Outcome& o : s) {
    std::string line;
    for (auto& [reg, val] : o.regs) {
      if (!line.empty()) line += ' ';
      line += reg + "=" + std::to_string(val);
    }
    lines.insert(line);
  }
  return {lines.begin(), lines.end()};
}

}  // namespace mcsim
