// Copyright 2026 The pmostore Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef PMO_CLI_HPP_
#define PMO_CLI_HPP_

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "pmo/bench.hpp"
#include "pmo/crash_harness.hpp"
#include "pmo/layout.hpp"
#include "pmo/mapped_pmem.hpp"
#include "pmo/store.hpp"

namespace pmo::cli {

// Exit codes: 0 success, 1 violation or recoverable failure, 2 usage or
// parse error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

struct MkpmoArgs {
  std::string device;
  std::uint64_t size = 0;
  std::string name = "pmostore";
  std::uint64_t max_pmos = 64;
};

struct CrashtestArgs {
  std::string script_path;
  std::uint64_t budget = 4096;
  std::uint64_t seed = 1;
  std::string mutate;  // empty = correct protocol
};

struct BenchArgs {
  std::string device;
  BenchConfig config;
};

/// Formats (or reformats) a device image and prints the resulting header.
inline int cmd_mkpmo(const MkpmoArgs& args, std::ostream& out,
                     std::ostream& err) {
  try {
    MappedPmem dev = MappedPmem::create(args.device, args.size);
    PmoStore store = PmoStore::format(dev, args.name, args.max_pmos);
    out << store.volume().inspect();
    dev.checkpoint();
    return kExitOk;
  } catch (const Error& e) {
    err << "mkpmo: " << e.what() << "\n";
    return kExitFailure;
  }
}

/// Prints the header and one line per live object. Never writes a byte.
inline int cmd_inspect(const std::string& device, std::ostream& out,
                       std::ostream& err) {
  try {
    MappedPmem dev(device);
    Volume vol = Volume::open_system(dev, Volume::BootBump::kNoBump);
    out << vol.inspect();
    return kExitOk;
  } catch (const Error& e) {
    err << "inspect: " << e.what() << "\n";
    return kExitFailure;
  }
}

/// Runs recovery on every entry and reports the action each one needed.
inline int cmd_recover(const std::string& device, std::ostream& out,
                       std::ostream& err) {
  try {
    MappedPmem dev(device);
    PmoStore store = PmoStore::open_for_recovery(dev);
    auto actions = store.recover_all();
    for (const auto& act : actions) {
      out << act.name << " " << act.action;
      if (act.pages_copied > 0) out << " " << act.pages_copied << " pages";
      out << "\n";
    }
    out << "recovered " << actions.size() << " objects\n";
    dev.checkpoint();
    return kExitOk;
  } catch (const Error& e) {
    err << "recover: " << e.what() << "\n";
    return kExitFailure;
  }
}

/// Explores every crash schedule of a scripted workload and checks each
/// recovered image against the legal boundary states, then checks that
/// recovery itself is crash-idempotent. Exit 0 iff no violation.
inline int cmd_crashtest(const CrashtestArgs& args, std::ostream& out,
                         std::ostream& err) {
  WorkloadScript script;
  try {
    std::ifstream in(args.script_path);
    if (!in) throw FormatError("cannot read script: " + args.script_path);
    std::ostringstream text;
    text << in.rdbuf();
    script = WorkloadScript::parse(text.str());
  } catch (const Error& e) {
    err << "crashtest: " << e.what() << "\n";
    return kExitUsage;
  }

  HarnessOptions opts;
  opts.budget = args.budget;
  opts.seed = args.seed;
  try {
    if (!args.mutate.empty()) opts.faults = PsyncFaults::parse(args.mutate);
  } catch (const Error& e) {
    err << "crashtest: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    HarnessReport rep = run_exhaustive(script, opts);
    out << "script_steps " << script.steps.size() << "\n"
        << "crash_points " << rep.crash_points << "\n"
        << "schedules " << rep.images << "\n";
    for (const auto& [pmo, hist] : rep.histogram) {
      out << "histogram " << pmo;
      for (const auto& [idx, count] : hist) {
        out << " " << idx << ":" << count;
      }
      out << "\n";
    }
    out << "violations " << rep.violations << "\n";

    if (rep.violations > 0) {
      for (const auto& v : rep.violation_records) {
        out << "violation pmo=" << v.pmo
            << " crash_seq=" << v.schedule.crash_seq << " " << v.detail
            << "\n";
      }
      WorkloadScript reduced = minimize(script, opts);
      out << "minimized script (" << reduced.steps.size() << " steps):\n"
          << reduced.to_text();
      return kExitFailure;
    }

    IdempotenceReport idem = run_recovery_idempotence(script, opts);
    out << "recovery_crashes " << idem.recovery_crashes << "\n"
        << "recovery_mismatches " << idem.mismatches << "\n";
    return idem.pass() ? kExitOk : kExitFailure;
  } catch (const Error& e) {
    err << "crashtest: " << e.what() << "\n";
    return kExitFailure;
  }
}

/// Runs one timed workload against a real device image.
inline int cmd_bench(const BenchArgs& args, std::ostream& out,
                     std::ostream& err) {
  if (args.config.workload != "seqwrite" &&
      args.config.workload != "randwrite" &&
      args.config.workload != "linkedlist") {
    err << "bench: unknown workload: " << args.config.workload << "\n";
    return kExitUsage;
  }
  try {
    MappedPmem dev(args.device);
    PmoStore store = PmoStore::open(dev);
    BenchStats st = run_bench(store, dev, args.config);
    out << "workload " << st.workload << "\n"
        << "threads " << st.threads << "\n"
        << "pmo_pages " << st.pmo_pages << "\n"
        << "ops " << st.ops << "\n"
        << "ops_per_s " << std::fixed << std::setprecision(1) << st.ops_per_s
        << "\n"
        << "psyncs " << st.psyncs << "\n"
        << "pages_copied_min " << st.pages_copied_min << "\n"
        << "pages_copied_median " << st.pages_copied_median << "\n"
        << "pages_copied_max " << st.pages_copied_max << "\n"
        << "psync_us_p50 " << std::setprecision(1) << st.psync_us_p50 << "\n"
        << "psync_us_p90 " << st.psync_us_p90 << "\n"
        << "psync_us_p99 " << st.psync_us_p99 << "\n";
    dev.checkpoint();
    return kExitOk;
  } catch (const Error& e) {
    err << "bench: " << e.what() << "\n";
    return kExitFailure;
  }
}

namespace detail {

inline int handle_parse_error(CLI::App& app, const CLI::ParseError& e,
                              std::ostream& out, std::ostream& err) {
  if (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp") {
    out << app.help();
    return kExitOk;
  }
  err << e.what() << "\n";
  return kExitUsage;
}

}  // namespace detail

/// `pmoctl <mkpmo|inspect|recover|crashtest|bench> --flags`.
inline int run_pmoctl(int argc, const char* const* argv, std::ostream& out,
                      std::ostream& err) {
  CLI::App app{"persistent memory object store control"};
  app.require_subcommand(1);

  MkpmoArgs mk;
  auto* mkcmd = app.add_subcommand("mkpmo", "format a device image");
  mkcmd->add_option("--device", mk.device)->required();
  mkcmd->add_option("--size", mk.size)
      ->transform(CLI::AsSizeValue(false))
      ->required();
  mkcmd->add_option("--name", mk.name);
  mkcmd->add_option("--max-pmos", mk.max_pmos);

  std::string inspect_device;
  auto* inscmd = app.add_subcommand("inspect", "print header and entries");
  inscmd->add_option("--device", inspect_device)->required();

  std::string recover_device;
  auto* reccmd = app.add_subcommand("recover", "recover every object");
  reccmd->add_option("--device", recover_device)->required();

  CrashtestArgs ct;
  std::string ct_device;
  auto* ctcmd = app.add_subcommand("crashtest",
                                   "explore crash schedules of a script");
  ctcmd->add_option("--device", ct_device)
      ->description("reserved; exploration runs on an in-memory model")
      ->required();
  ctcmd->add_option("--script", ct.script_path)->required();
  ctcmd->add_option("--budget", ct.budget);
  ctcmd->add_option("--seed", ct.seed);
  ctcmd->add_option("--mutate", ct.mutate);

  BenchArgs bn;
  auto* bncmd = app.add_subcommand("bench", "run a timed workload");
  bncmd->add_option("--device", bn.device)->required();
  bncmd->add_option("--workload", bn.config.workload)->required();
  bncmd->add_option("--threads", bn.config.threads);
  bncmd->add_option("--delta-ms", bn.config.delta_ms);
  bncmd->add_option("--duration-s", bn.config.duration_s);
  bncmd->add_option("--seed", bn.config.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return detail::handle_parse_error(app, e, out, err);
  }

  if (mkcmd->parsed()) return cmd_mkpmo(mk, out, err);
  if (inscmd->parsed()) return cmd_inspect(inspect_device, out, err);
  if (reccmd->parsed()) return cmd_recover(recover_device, out, err);
  if (ctcmd->parsed()) return cmd_crashtest(ct, out, err);
  if (bncmd->parsed()) return cmd_bench(bn, out, err);
  return kExitUsage;
}

/// Standalone `mkpmo --device --size --name --max-pmos`.
inline int run_mkpmo(int argc, const char* const* argv, std::ostream& out,
                     std::ostream& err) {
  CLI::App app{"format a persistent memory object device image"};
  MkpmoArgs mk;
  app.add_option("--device", mk.device)->required();
  app.add_option("--size", mk.size)
      ->transform(CLI::AsSizeValue(false))
      ->required();
  app.add_option("--name", mk.name);
  app.add_option("--max-pmos", mk.max_pmos);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return detail::handle_parse_error(app, e, out, err);
  }
  return cmd_mkpmo(mk, out, err);
}

}  // namespace pmo::cli

#endif  // PMO_CLI_HPP_
