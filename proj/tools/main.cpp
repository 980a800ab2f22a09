// mcsim command-line front end.
//
// Exit codes: 0 success, 1 input error (bad flags/files/programs),
// 2 simulation error.  All outputs are byte-deterministic.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mcsim/engine.hpp"
#include "mcsim/litmus.hpp"
#include "mcsim/metrics.hpp"
#include "mcsim/report.hpp"

#ifndef MCSIM_VERSION
#define MCSIM_VERSION "1.0.0"
#endif

namespace fs = std::filesystem;
using namespace mcsim;

namespace {

struct Inputs {
  SystemConfig cfg;
  std::vector<std::vector<TraceEvent>> apps;
};

// Everything here throws SimError -> exit 1; nothing is written yet.
Inputs load_inputs(const std::string& config_path, const std::vector<std::string>& trace_paths) {
  Inputs in;
  in.cfg = config_path.empty() ? default_config(2) : load_config_file(config_path);
  for (const std::string& p : trace_paths) {
    in.apps.push_back(load_trace_file(p, in.cfg.block_size_bytes));
    // thread ids must be contiguous from 0 within each app
    u32 top = 0;
    for (const TraceEvent& e : in.apps.back()) top = std::max(top, e.thread_id + 1);
    std::vector<char> seen(top, 0);
    for (const TraceEvent& e : in.apps.back()) seen[e.thread_id] = 1;
    for (u32 t = 0; t < top; ++t)
      if (!seen[t])
        fail(Err::UnknownThread,
             p + ": thread ids must be contiguous from 0 (missing T" + std::to_string(t) + ")");
  }
  return in;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Err::InvalidConfig, "cannot write " + path.string());
  out << text;
}

int cmd_run(const std::string& config_path, const std::vector<std::string>& traces,
            const std::string& out_dir, u64 seed, u32 repeat, bool dump_messages,
            bool dump_commands, bool dump_events) {
  Inputs in;
  try {
    if (traces.empty()) fail(Err::InvalidConfig, "run needs at least one --trace");
    if (repeat < 1) fail(Err::InvalidConfig, "--repeat must be >= 1");
    in = load_inputs(config_path, traces);
  } catch (const SimError& e) {
    std::cerr << "mcsim: " << e.what() << "\n";
    return 1;
  }

  try {
    RunOptions opt;
    opt.capture_messages = dump_messages;
    opt.capture_commands = dump_commands;
    opt.capture_events = dump_events;

    ExperimentResult result = run_experiment(in.cfg, in.apps, seed, opt);
    std::string summary = run_summary_json(result, in.cfg, seed, repeat).dump(2) + "\n";
    std::string csv = run_metrics_csv(result);
    for (u32 r = 1; r < repeat; ++r) {
      ExperimentResult again = run_experiment(in.cfg, in.apps, seed, opt);
      if (run_summary_json(again, in.cfg, seed, repeat).dump(2) + "\n" != summary)
        fail(Err::DeadlockDetected, "repeat " + std::to_string(r) + " diverged");
    }

    fs::create_directories(out_dir);
    write_file(fs::path(out_dir) / "summary.json", summary);
    write_file(fs::path(out_dir) / "metrics.csv", csv);
    if (dump_messages)
      write_file(fs::path(out_dir) / "messages.log", messages_log_text(result.shared.messages));
    if (dump_commands)
      write_file(fs::path(out_dir) / "commands.log", commands_log_text(result.shared.commands));
    if (dump_events)
      write_file(fs::path(out_dir) / "events.log", events_log_text(result.shared.events));
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "mcsim: " << e.what() << "\n";
    return 2;
  }
}

int cmd_sweep(const std::string& config_path, const std::vector<std::string>& traces,
              const std::string& out_dir, double f, std::vector<u32> n_list, u32 nmax, u64 seed) {
  Inputs in;
  try {
    if (traces.empty()) fail(Err::InvalidConfig, "sweep needs at least one --trace");
    if (f < 0.0 || f > 1.0) fail(Err::InvalidConfig, "--f must be within [0, 1]");
    if (n_list.empty()) {
      if (nmax < 1) fail(Err::InvalidConfig, "sweep needs --n points or --nmax");
      for (u32 n = 1; n <= nmax; n *= 2) {
        n_list.push_back(n);
        if (n > nmax / 2) break;
      }
      if (n_list.back() != nmax) n_list.push_back(nmax);
    }
    for (u32 n : n_list)
      if (n < 1) fail(Err::InvalidConfig, "sweep points must be >= 1");
    if (traces.size() != 1 && traces.size() != n_list.size())
      fail(Err::InvalidConfig, "give one trace, or exactly one per sweep point");
    in = load_inputs(config_path, traces);
  } catch (const SimError& e) {
    std::cerr << "mcsim: " << e.what() << "\n";
    return 1;
  }

  try {
    // rows sorted ascending by n; traces follow their point when given per-n
    std::vector<std::size_t> order(n_list.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return n_list[a] < n_list[b]; });

    auto cfg_for = [&](u32 n) {
      SystemConfig c = in.cfg;
      c.core_count = n;
      if (!c.per_core.empty()) c.per_core.resize(n, c.per_core.front());
      c.validated = false;
      return validate_config(c);
    };
    auto time_of = [&](u32 n, const std::vector<TraceEvent>& app) {
      RunStats s = run(cfg_for(n), {app}, seed, RunOptions{});
      return double(s.total_cycles);
    };

    const std::vector<TraceEvent>& base_app = in.apps.size() == 1 ? in.apps[0]
                                                                  : in.apps[order[0]];
    double t_serial = time_of(1, base_app);

    std::string csv = "n,time,speedup,efficiency,amdahl,gustafson\n";
    for (std::size_t i : order) {
      u32 n = n_list[i];
      const std::vector<TraceEvent>& app = in.apps.size() == 1 ? in.apps[0] : in.apps[i];
      double t = time_of(n, app);
      ParallelMetrics pm = parallel_metrics(t_serial, t, n);
      csv += std::to_string(n) + "," + format_number(t) + "," + format_number(pm.speedup) + "," +
             format_number(pm.efficiency) + "," +
             format_number(scaling_law(f, n, ScalingLaw::Amdahl)) + "," +
             format_number(scaling_law(f, n, ScalingLaw::Gustafson)) + "\n";
    }

    fs::create_directories(out_dir);
    write_file(fs::path(out_dir) / "sweep.csv", csv);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "mcsim: " << e.what() << "\n";
    return 2;
  }
}

int cmd_litmus(const std::string& path, const std::string& model) {
  LitmusProgram prog;
  try {
    std::ifstream f(path);
    if (!f) fail(Err::SyntaxError, "cannot open " + path);
    prog = parse_litmus(f);
  } catch (const SimError& e) {
    std::cerr << "mcsim: " << e.what() << "\n";
    return 1;
  }

  try {
    auto print_set = [&](const char* name, const OutcomeSet& set) {
      std::cout << "== " << name << " ==\n";
      for (const std::string& line : format_outcomes(set)) std::cout << line << "\n";
    };
    if (model == "sc" || model == "all") print_set("sc", enumerate_sc(prog));
    if (model == "tso" || model == "all") print_set("tso", enumerate_tso(prog));
    if (model == "weak" || model == "all") print_set("weak", enumerate_weak(prog));
    if (model == "all") {
      OutcomeSet sc = enumerate_sc(prog), tso = enumerate_tso(prog), weak = enumerate_weak(prog);
      auto subset = [](const OutcomeSet& a, const OutcomeSet& b) {
        return std::includes(b.begin(), b.end(), a.begin(), a.end());
      };
      std::cout << "== verdicts ==\n";
      std::cout << "sc subset of tso: " << (subset(sc, tso) ? "yes" : "no") << "\n";
      std::cout << "tso subset of weak: " << (subset(tso, weak) ? "yes" : "no") << "\n";
      auto report_gap = [&](const OutcomeSet& small, const OutcomeSet& big, const char* sname,
                            const char* bname) {
        for (const Outcome& o : big) {
          if (small.count(o)) continue;
          std::string line;
          for (const auto& [reg, val] : o.regs)
            line += (line.empty() ? "" : " ") + reg + "=" + std::to_string(val);
          std::cout << line << ": forbidden under " << sname << ", allowed under " << bname
                    << "\n";
        }
      };
      report_gap(sc, tso, "SC", "TSO");
      report_gap(tso, weak, "TSO", "WEAK");
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "mcsim: " << e.what() << "\n";
    return 2;
  }
}

int cmd_laws(double f, u32 nmax, const std::string& law) {
  try {
    if (f < 0.0 || f > 1.0) fail(Err::InvalidConfig, "--f must be within [0, 1]");
    if (nmax < 1) fail(Err::InvalidConfig, "--nmax must be >= 1");
    ScalingLaw which = law == "gustafson" ? ScalingLaw::Gustafson : ScalingLaw::Amdahl;
    if (law != "amdahl" && law != "gustafson")
      fail(Err::InvalidConfig, "law must be amdahl or gustafson");
    std::cout << "n,speedup\n";
    for (u32 n = 1; n <= nmax; ++n)
      std::cout << n << "," << format_number(scaling_law(f, n, which)) << "\n";
    return 0;
  } catch (const SimError& e) {
    std::cerr << "mcsim: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mcsim: deterministic trace-driven multicore memory-hierarchy simulator"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", model = "all", litmus_path, law = "amdahl";
  std::vector<std::string> traces;
  std::vector<u32> n_list;
  u64 seed = 0;
  u32 repeat = 1, nmax = 0;
  double f = 0.0;
  bool dump_messages = false, dump_commands = false, dump_events = false;

  CLI::App* c_run = app.add_subcommand("run", "simulate one or more trace apps");
  c_run->add_option("--config", config_path, "config JSON");
  c_run->add_option("--trace", traces, "trace file, repeatable; order = app id");
  c_run->add_option("--out", out_dir, "output directory");
  c_run->add_option("--seed", seed, "run seed, echoed into summary.json");
  c_run->add_option("--repeat", repeat, "repeat the experiment and check determinism");
  c_run->add_flag("--dump-messages", dump_messages, "write messages.log");
  c_run->add_flag("--dump-commands", dump_commands, "write commands.log");
  c_run->add_flag("--dump-events", dump_events, "write events.log");

  CLI::App* c_sweep = app.add_subcommand("sweep", "core-count scaling sweep");
  c_sweep->add_option("--config", config_path, "config JSON");
  c_sweep->add_option("--trace", traces, "trace file; one total or one per point");
  c_sweep->add_option("--out", out_dir, "output directory");
  c_sweep->add_option("--f", f, "parallel fraction for the analytic columns")->required();
  c_sweep->add_option("--n", n_list, "core-count point, repeatable");
  c_sweep->add_option("--nmax", nmax, "generate power-of-two points up to here");
  c_sweep->add_option("--seed", seed, "run seed");

  CLI::App* c_litmus = app.add_subcommand("litmus", "enumerate litmus-test outcomes");
  c_litmus->add_option("file", litmus_path, "litmus program")->required();
  c_litmus->add_option("--model", model, "sc|tso|weak|all")
      ->check(CLI::IsMember({"sc", "tso", "weak", "all"}));

  CLI::App* c_laws = app.add_subcommand("laws", "print analytic scaling-law CSV");
  c_laws->add_option("--f", f, "parallel fraction")->required();
  c_laws->add_option("--nmax", nmax, "largest n")->required();
  c_laws->add_option("law", law, "amdahl|gustafson");

  CLI::App* c_version = app.add_subcommand("version", "print version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  if (c_version->parsed()) {
    std::cout << "mcsim " << MCSIM_VERSION << "\n";
    return 0;
  }
  if (c_run->parsed())
    return cmd_run(config_path, traces, out_dir, seed, repeat, dump_messages, dump_commands,
                   dump_events);
  if (c_sweep->parsed()) return cmd_sweep(config_path, traces, out_dir, f, n_list, nmax, seed);
  if (c_litmus->parsed()) return cmd_litmus(litmus_path, model);
  if (c_laws->parsed()) return cmd_laws(f, nmax, law);
  return 1;
}
