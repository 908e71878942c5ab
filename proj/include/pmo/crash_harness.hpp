// Copyright 2026 The pmostore Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Crash-consistency harness. Runs a scripted workload once on the
// simulated backend, then treats every protocol event as a crash point:
// for each point it materializes crash images (one per survivor subset of
// the then-pending lines), runs recovery on each image, and checks the
// recovered content of every object against a committed-state oracle that
// knows which durability boundaries are legal at that instant.
//
// The only states the oracle accepts are "absent", the creation zeros, or
// the content as of some completed durability point; inside a sync window
// both the old and the new boundary are legal, never a blend of the two.

#ifndef PMO_CRASH_HARNESS_HPP_
#define PMO_CRASH_HARNESS_HPP_

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pmo/errors.hpp"
#include "pmo/layout.hpp"
#include "pmo/pmem_model.hpp"
#include "pmo/store.hpp"

namespace pmo {

// ---------------------------------------------------------------------------
// workload scripts
// ---------------------------------------------------------------------------

struct ScriptStep {
  enum class Kind { kCreate, kAttach, kWrite, kPsync, kDetach, kDestroy };
  Kind kind = Kind::kPsync;
  std::string pmo;
  std::uint64_t pages = 0;               // create
  Permission perm = Permission::kRead;   // attach
  std::string key_token;                 // create / attach / destroy
  std::uint64_t page = 0;                // write
  std::uint8_t pattern = 0;              // write
};

/// Line-oriented workload description. One step per line:
///   create A 4 k1      # name, pages, key
///   attach A w k1      # permission r or w
///   write A 2 0xA5     # fill page 2 with the pattern byte
///   psync A
///   detach A
///   destroy A k1
///   crashpoints all    # directive: enumerate at every event (the default)
struct WorkloadScript {
  std::vector<ScriptStep> steps;
  bool crashpoints_all = true;

  static WorkloadScript parse(std::string_view text) {
    WorkloadScript script;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto pos = line.find('#'); pos != std::string::npos) {
        line.erase(pos);
      }
      std::istringstream ls(line);
      std::string op;
      if (!(ls >> op)) continue;  // blank
      auto fail = [&](const std::string& why) -> FormatError {
        return FormatError("script line " + std::to_string(lineno) + ": " +
                           why);
      };
      ScriptStep step;
      if (op == "create") {
        step.kind = ScriptStep::Kind::kCreate;
        std::uint64_t pages = 0;
        if (!(ls >> step.pmo >> pages >> step.key_token)) {
          throw fail("expected: create <name> <pages> <key>");
        }
        if (pages == 0 || pages > 65536) throw fail("page count out of range");
        step.pages = pages;
      } else if (op == "attach") {
        step.kind = ScriptStep::Kind::kAttach;
        std::string perm;
        if (!(ls >> step.pmo >> perm >> step.key_token)) {
          throw fail("expected: attach <name> <r|w> <key>");
        }
        if (perm == "r") {
          step.perm = Permission::kRead;
        } else if (perm == "w") {
          step.perm = Permission::kWrite;
        } else {
          throw fail("permission must be r or w");
        }
      } else if (op == "write") {
        step.kind = ScriptStep::Kind::kWrite;
        std::string pat;
        if (!(ls >> step.pmo >> step.page >> pat)) {
          throw fail("expected: write <name> <page> <pattern>");
        }
        std::uint64_t v = 0;
        try {
          v = std::stoull(pat, nullptr, 0);
        } catch (const std::exception&) {
          throw fail("bad pattern byte: " + pat);
        }
        if (v > 0xFF) throw fail("pattern must fit one byte");
        step.pattern = static_cast<std::uint8_t>(v);
      } else if (op == "psync") {
        step.kind = ScriptStep::Kind::kPsync;
        if (!(ls >> step.pmo)) throw fail("expected: psync <name>");
      } else if (op == "detach") {
        step.kind = ScriptStep::Kind::kDetach;
        if (!(ls >> step.pmo)) throw fail("expected: detach <name>");
      } else if (op == "destroy") {
        step.kind = ScriptStep::Kind::kDestroy;
        if (!(ls >> step.pmo >> step.key_token)) {
          throw fail("expected: destroy <name> <key>");
        }
      } else if (op == "crashpoints") {
        std::string what;
        if (!(ls >> what) || what != "all") {
          throw fail("only `crashpoints all` is supported");
        }
        script.crashpoints_all = true;
        continue;
      } else {
        throw fail("unknown step: " + op);
      }
      std::string extra;
      if (ls >> extra) throw fail("trailing tokens after " + op);
      script.steps.push_back(std::move(step));
    }
    return script;
  }

  std::string to_text() const {
    std::ostringstream out;
    for (const auto& s : steps) {
      switch (s.kind) {
        case ScriptStep::Kind::kCreate:
          out << "create " << s.pmo << ' ' << s.pages << ' ' << s.key_token;
          break;
        case ScriptStep::Kind::kAttach:
          out << "attach " << s.pmo << ' '
              << (s.perm == Permission::kWrite ? 'w' : 'r') << ' '
              << s.key_token;
          break;
        case ScriptStep::Kind::kWrite:
          out << "write " << s.pmo << ' ' << s.page << " 0x" << std::hex
              << static_cast<int>(s.pattern) << std::dec;
          break;
        case ScriptStep::Kind::kPsync:
          out << "psync " << s.pmo;
          break;
        case ScriptStep::Kind::kDetach:
          out << "detach " << s.pmo;
          break;
        case ScriptStep::Kind::kDestroy:
          out << "destroy " << s.pmo << ' ' << s.key_token;
          break;
      }
      out << '\n';
    }
    if (crashpoints_all) out << "crashpoints all\n";
    return out.str();
  }

  /// The two-boundary workload used throughout: one 4-page object, two
  /// sync points with overlapping dirty sets, a distinct byte per step.
  static WorkloadScript standard_script() {
    return parse(
        "create A 4 k1\n"
        "attach A w k1\n"
        "write A 0 0x11\n"
        "write A 2 0x22\n"
        "psync A\n"
        "write A 1 0x33\n"
        "write A 2 0x44\n"
        "write A 3 0x55\n"
        "psync A\n"
        "detach A\n"
        "crashpoints all\n");
  }
};

// ---------------------------------------------------------------------------
// committed-state oracle
// ---------------------------------------------------------------------------

/// Per-object timeline: the byte snapshots of every durability boundary
/// plus the event-seq windows during which each transition was in flight.
/// Boundary index -1 means "object does not exist".
struct PmoTimeline {
  std::vector<std::vector<std::byte>> boundaries;

  struct Phase {
    std::uint64_t begin_seq = 0;
    int low = -1;   // allowed boundary (or -1 absent)
    int high = -1;  // second allowed boundary during a transition window
  };
  std::vector<Phase> phases;  // sorted by begin_seq; phase i ends where
                              // phase i+1 begins

  std::pair<int, int> allowed_at(std::uint64_t seq) const {
    // Last phase whose begin_seq <= seq.
    auto it = std::upper_bound(
        phases.begin(), phases.end(), seq,
        [](std::uint64_t s, const Phase& p) { return s < p.begin_seq; });
    if (it == phases.begin()) return {-1, -1};  // before creation
    --it;
    return {it->low, it->high};
  }
};

struct LogicalOracle {
  std::map<std::string, PmoTimeline> timelines;
};

struct ExecutionTrace {
  std::uint64_t script_begin = 0;  // first crash point
  std::uint64_t script_end = 0;    // last crash point (inclusive)
  LogicalOracle oracle;
};

inline std::uint64_t script_key(std::string_view token) {
  return fnv1a64(token);
}

/// Device size that comfortably fits every object the script creates,
/// with room for shadow extents and churn.
inline std::uint64_t device_bytes_for(const WorkloadScript& script,
                                      std::uint64_t max_pmos) {
  std::uint64_t data_pages = 8;
  for (const auto& s : script.steps) {
    if (s.kind == ScriptStep::Kind::kCreate) {
      data_pages += 2 * (2 * s.pages + bitmap_pages_for(s.pages));
    }
  }
  std::uint64_t control_pages = (64 + max_pmos * 8 + kPageSize - 1) / kPageSize;
  std::uint64_t entry_pages =
      (max_pmos * kEntrySize + kPageSize - 1) / kPageSize;
  return (1 + control_pages + entry_pages + data_pages) * kPageSize;
}

/// Runs the script once against a fresh system on `dev`, recording the
/// oracle timeline. Throws on ill-formed scripts (missing attach, bad
/// keys, and so on) with whatever error the store raises.
inline ExecutionTrace execute_script(const WorkloadScript& script,
                                     SimulatedPmem& dev,
                                     const PsyncFaults& faults,
                                     const ProcessLiveness& liveness) {
  PmoStore::Config cfg;
  cfg.liveness = &liveness;
  PmoStore store = PmoStore::format(dev, "crashlab", 8, cfg);
  store.faults() = faults;

  ExecutionTrace tr;
  tr.script_begin = dev.seq();

  std::map<std::string, PmoHandle> handles;
  std::map<std::string, std::vector<std::byte>> logical;  // uncommitted view

  auto stable_index = [&](const std::string& name) {
    const auto& ph = tr.oracle.timelines.at(name).phases;
    return ph.empty() ? -1 : ph.back().high;
  };

  auto attached = [&](const std::string& name) -> PmoHandle& {
    auto it = handles.find(name);
    if (it == handles.end()) {
      throw DomainError("script step on an unattached object: " + name);
    }
    return it->second;
  };

  for (const auto& s : script.steps) {
    switch (s.kind) {
      case ScriptStep::Kind::kCreate: {
        std::uint64_t begin = dev.seq();
        store.pcreate(s.pmo, s.pages * kPageSize, script_key(s.key_token));
        auto& tl = tr.oracle.timelines[s.pmo];
        int idx = static_cast<int>(tl.boundaries.size());
        tl.boundaries.emplace_back(s.pages * kPageSize, std::byte{0});
        tl.phases.push_back({begin, -1, idx});
        tl.phases.push_back({dev.seq(), idx, idx});
        logical[s.pmo] = tl.boundaries.back();
        break;
      }
      case ScriptStep::Kind::kAttach: {
        handles.insert_or_assign(
            s.pmo, store.attach(s.pmo, s.perm, script_key(s.key_token), 1));
        break;
      }
      case ScriptStep::Kind::kWrite: {
        auto& h = attached(s.pmo);
        std::vector<std::byte> fill(kPageSize, std::byte{s.pattern});
        store.pmo_write(h, s.page * kPageSize, fill);
        auto& content = logical.at(s.pmo);
        std::memcpy(content.data() + s.page * kPageSize, fill.data(),
                    kPageSize);
        break;
      }
      case ScriptStep::Kind::kPsync: {
        auto& h = attached(s.pmo);
        std::uint64_t begin = dev.seq();
        store.psync(h);
        if (h.permission() != Permission::kWrite) break;  // ignored call
        auto& tl = tr.oracle.timelines.at(s.pmo);
        int prev = stable_index(s.pmo);
        int idx = static_cast<int>(tl.boundaries.size());
        tl.boundaries.push_back(logical.at(s.pmo));
        tl.phases.push_back({begin, prev, idx});
        tl.phases.push_back({dev.seq(), idx, idx});
        break;
      }
      case ScriptStep::Kind::kDetach: {
        auto it = handles.find(s.pmo);
        if (it == handles.end()) {
          throw DomainError("detach of an unattached object: " + s.pmo);
        }
        bool writer = it->second.permission() == Permission::kWrite;
        store.detach(it->second);
        handles.erase(it);
        if (writer) {
          // Un-synced stores die with the session.
          const auto& tl = tr.oracle.timelines.at(s.pmo);
          logical.at(s.pmo) = tl.boundaries.at(stable_index(s.pmo));
        }
        break;
      }
      case ScriptStep::Kind::kDestroy: {
        std::uint64_t begin = dev.seq();
        store.pdestroy(s.pmo, script_key(s.key_token));
        auto& tl = tr.oracle.timelines.at(s.pmo);
        int prev = stable_index(s.pmo);
        tl.phases.push_back({begin, prev, -1});
        tl.phases.push_back({dev.seq(), -1, -1});
        logical.erase(s.pmo);
        break;
      }
    }
  }
  tr.script_end = dev.seq();
  return tr;
}

// ---------------------------------------------------------------------------
// verdicts
// ---------------------------------------------------------------------------

struct CrashSchedule {
  std::uint64_t crash_seq = 0;
  std::vector<std::uint64_t> survivors;  // absolute line offsets
};

struct Verdict {
  CrashSchedule schedule;
  std::string pmo;
  int matched = -1;    // boundary index, -1 = absent; meaningless on violation
  bool violation = false;
  std::string detail;  // human-readable description of a violation
};

struct HarnessOptions {
  std::uint64_t budget = 4096;  // max survivor subsets per crash point
  std::uint64_t seed = 1;
  bool allow_sampling = true;   // false: over-budget points are an error
  PsyncFaults faults;           // protocol mutants under test
  std::uint64_t stop_after_violations = 0;  // 0 = full scan
  std::uint64_t max_recorded_violations = 8;
};

struct HarnessReport {
  std::uint64_t crash_points = 0;
  std::uint64_t images = 0;
  std::uint64_t violations = 0;
  std::uint64_t record_cap = 8;  // max violation_records kept
  // per object: matched boundary index -> image count (-1 = absent)
  std::map<std::string, std::map<int, std::uint64_t>> histogram;
  std::vector<Verdict> violation_records;  // capped at record_cap

  bool pass() const { return violations == 0; }

  /// Distinct existing states observed for one object (absences excluded).
  std::uint64_t distinct_states(const std::string& pmo) const {
    auto it = histogram.find(pmo);
    if (it == histogram.end()) return 0;
    std::uint64_t n = 0;
    for (const auto& [idx, count] : it->second) {
      if (idx >= 0 && count > 0) ++n;
    }
    return n;
  }
};

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a ^ (b + 0x9E3779B97F4A7C15ULL + (a << 6) + (a >> 2));
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

/// Dedup hash over whole crash images. Word-at-a-time: these buffers run
/// to megabytes and a byte-serial hash would dominate the harness.
inline std::uint64_t hash_bytes(const std::byte* p, std::size_t n) {
  std::uint64_t h = 0x9E3779B97F4A7C15ULL ^ n;
  while (n >= 8) {
    std::uint64_t k;
    std::memcpy(&k, p, 8);
    h = mix_seed(h, k);
    p += 8;
    n -= 8;
  }
  std::uint64_t tail = 0;
  if (n > 0) {
    std::memcpy(&tail, p, n);
    h = mix_seed(h, tail);
  }
  return h;
}

inline bool same_bytes(const std::vector<std::byte>& a,
                       const std::vector<std::byte>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size()) == 0;
}

/// Pass-through backend over a borrowed buffer that logs every mutated
/// range, so one recovery run can be undone cheaply against a base copy.
class PatchedPmem final : public PersistenceModel {
 public:
  using PersistenceModel::read_durable;
  using PersistenceModel::read_volatile;

  explicit PatchedPmem(std::vector<std::byte>& bytes) : bytes_(bytes) {}

  std::uint64_t size() const override { return bytes_.size(); }

  void store(std::uint64_t offset, std::span<const std::byte> data) override {
    std::memcpy(bytes_.data() + offset, data.data(), data.size());
    touched_.push_back({offset, offset + data.size()});
  }
  void flush_line(LineAddr) override {}
  void fence() override {}
  void uncached_atomic_write(std::uint64_t offset,
                             std::uint64_t word) override {
    std::memcpy(bytes_.data() + offset, &word, 8);
    touched_.push_back({offset, offset + 8});
  }
  void read_volatile(std::uint64_t offset,
                     std::span<std::byte> out) const override {
    std::memcpy(out.data(), bytes_.data() + offset, out.size());
  }
  void read_durable(std::uint64_t offset,
                    std::span<std::byte> out) const override {
    read_volatile(offset, out);
  }
  void add_uncached_range(std::uint64_t, std::uint64_t) override {}
  void checkpoint(const std::filesystem::path& path) const override {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw RangeError("cannot write image: " + path.string());
    out.write(reinterpret_cast<const char*>(bytes_.data()),
              static_cast<std::streamsize>(bytes_.size()));
  }
  void copy_and_flush(std::uint64_t dst, std::uint64_t src,
                      std::uint64_t len) override {
    std::memmove(bytes_.data() + dst, bytes_.data() + src, len);
    touched_.push_back({dst, dst + len});
  }

  void undo_into(const std::vector<std::byte>& base) {
    for (const auto& r : touched_) {
      std::memcpy(bytes_.data() + r.begin, base.data() + r.begin,
                  r.end - r.begin);
    }
    touched_.clear();
  }

 private:
  std::vector<std::byte>& bytes_;
  std::vector<ByteRange> touched_;
};

/// Checks one recovered image against the oracle. `bytes` is the device
/// buffer after recovery ran on it.
inline void judge_image(const std::vector<std::byte>& bytes,
                        const LogicalOracle& oracle, std::uint64_t crash_seq,
                        const std::vector<std::uint64_t>& survivors,
                        HarnessReport& report,
                        const std::function<void(const Verdict&)>& sink) {
  PatchedPmem view(const_cast<std::vector<std::byte>&>(bytes));
  Volume vol = Volume::open_system(view, Volume::BootBump::kNoBump);
  for (const auto& [name, tl] : oracle.timelines) {
    auto [low, high] = tl.allowed_at(crash_seq);
    auto slot = vol.lookup_slot(name);
    Verdict v;
    v.pmo = name;

    if (!slot.has_value()) {
      v.matched = -1;
      v.violation = low != -1 && high != -1;
      if (v.violation) v.detail = "object missing outside a legal window";
    } else {
      MetadataEntry e = vol.read_entry(*slot);
      const std::byte* got = bytes.data() + vol.data_byte(e.primary_offset);
      v.violation = true;
      for (int cand : {low, high}) {
        if (cand < 0) continue;
        const auto& want = tl.boundaries.at(static_cast<std::size_t>(cand));
        if (e.size == want.size() &&
            std::memcmp(got, want.data(), want.size()) == 0) {
          v.matched = cand;
          v.violation = false;
          break;
        }
      }
      if (v.violation) {
        std::ostringstream d;
        d << "content matches no legal boundary (allowed";
        if (low >= 0) d << " b" << low;
        if (high >= 0 && high != low) d << " b" << high;
        if (low == -1 || high == -1) d << " absent";
        d << ")";
        v.detail = d.str();
      }
    }

    if (v.violation) {
      ++report.violations;
      if (report.violation_records.size() < report.record_cap) {
        v.schedule.crash_seq = crash_seq;
        v.schedule.survivors = survivors;
        report.violation_records.push_back(v);
      }
    } else {
      ++report.histogram[name][v.matched];
    }
    if (sink) {
      v.schedule.crash_seq = crash_seq;
      v.schedule.survivors = survivors;
      sink(v);
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// exhaustive crash exploration
// ---------------------------------------------------------------------------

/// Explores every crash point of the script. The adversary keeps an
/// arbitrary subset of pending lines at each point; subsets are exhaustive
/// whenever 2^|pending| fits the budget, otherwise empty + full + seeded
/// uniform samples. Pending lines whose content already equals the durable
/// bytes are projected out first; keeping or dropping them cannot change
/// the image.
inline HarnessReport run_exhaustive(
    const WorkloadScript& script, const HarnessOptions& opts,
    const std::function<void(const Verdict&)>& sink = nullptr) {
  FakeProcessLiveness liveness;
  liveness.set_alive(1, true);
  SimulatedPmem dev(device_bytes_for(script, 8));
  ExecutionTrace tr = execute_script(script, dev, opts.faults, liveness);

  HarnessReport report;
  report.record_cap = opts.max_recorded_violations;
  const auto& log = dev.event_log();

  SimState cur(dev.initial_media());
  std::uint64_t cursor = 0;
  // `work` mirrors cur.media() exactly; patched and restored per image.
  std::vector<std::byte> work;

  auto advance_to = [&](std::uint64_t s) {
    while (cursor < s) {
      const ProtocolEvent& ev = log[cursor];
      if (ev.kind == EventKind::kFence) {
        std::vector<std::uint64_t> lines;
        lines.reserve(cur.pending().size());
        for (const auto& [line, _] : cur.pending()) lines.push_back(line);
        cur.apply(ev);
        for (std::uint64_t line : lines) {
          std::memcpy(work.data() + line, cur.media().data() + line,
                      kCacheLineSize);
        }
      } else if (ev.kind == EventKind::kUncachedWrite) {
        cur.apply(ev);
        std::memcpy(work.data() + ev.addr, cur.media().data() + ev.addr, 8);
      } else {
        cur.apply(ev);
      }
      ++cursor;
    }
  };

  work = cur.media();
  std::vector<std::uint64_t> lines;
  for (std::uint64_t s = tr.script_begin; s <= log.size(); ++s) {
    advance_to(s);
    ++report.crash_points;

    lines.clear();
    for (const auto& [line, content] : cur.pending()) {
      if (std::memcmp(content.data(), cur.media().data() + line,
                      kCacheLineSize) != 0) {
        lines.push_back(line);
      }
    }
    if (!opts.allow_sampling &&
        (lines.size() >= 64 || (1ULL << lines.size()) > opts.budget)) {
      throw ConfigError("crash point needs " +
                        std::to_string(lines.size()) +
                        " pending lines enumerated but sampling is off");
    }
    auto subsets = SimulatedPmem::survivor_subsets(
        lines.size(), opts.budget, detail::mix_seed(opts.seed, s));

    std::vector<std::uint64_t> survivors;
    for (const auto& subset : subsets) {
      survivors.clear();
      for (std::uint64_t idx : subset) {
        std::uint64_t line = lines[idx];
        std::memcpy(work.data() + line, cur.pending().at(line).data(),
                    kCacheLineSize);
        survivors.push_back(line);
      }

      detail::PatchedPmem pm(work);
      {
        PmoStore rec = PmoStore::open_for_recovery(pm);
        rec.recover_all();
      }
      ++report.images;
      detail::judge_image(work, tr.oracle, s, survivors, report, sink);

      pm.undo_into(cur.media());
      for (std::uint64_t line : survivors) {
        std::memcpy(work.data() + line, cur.media().data() + line,
                    kCacheLineSize);
      }
      if (opts.stop_after_violations != 0 &&
          report.violations >= opts.stop_after_violations) {
        return report;
      }
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// recovery idempotence
// ---------------------------------------------------------------------------

struct IdempotenceReport {
  std::uint64_t crash_points = 0;
  std::uint64_t outer_images = 0;
  std::uint64_t unique_images = 0;
  std::uint64_t recovery_crashes = 0;
  std::uint64_t mismatches = 0;

  bool pass() const { return mismatches == 0; }
};

/// For every sampled crash image: recover it, then crash that recovery at
/// every one of its own events (adversary keeps none or all pending lines),
/// recover again, and require the final bytes to match the uninterrupted
/// recovery bit for bit. Also re-runs recovery on the finished image and
/// requires a byte-identical no-op.
///
/// Outer survivor sampling is capped at 16 per crash point regardless of
/// opts.budget: each image multiplies into one re-recovery per recovery
/// event, so content exhaustiveness is run_exhaustive's job, not this one's.
inline IdempotenceReport run_recovery_idempotence(const WorkloadScript& script,
                                                  const HarnessOptions& opts) {
  FakeProcessLiveness liveness;
  liveness.set_alive(1, true);
  SimulatedPmem dev(device_bytes_for(script, 8));
  ExecutionTrace tr = execute_script(script, dev, opts.faults, liveness);

  IdempotenceReport report;
  const auto& log = dev.event_log();

  SimState cur(dev.initial_media());
  std::uint64_t cursor = 0;
  std::set<std::uint64_t> seen_images;

  std::vector<std::byte> img;
  std::vector<std::uint64_t> lines;
  for (std::uint64_t s = tr.script_begin; s <= log.size(); ++s) {
    while (cursor < s) cur.apply(log[cursor++]);
    ++report.crash_points;

    lines.clear();
    for (const auto& [line, content] : cur.pending()) {
      if (std::memcmp(content.data(), cur.media().data() + line,
                      kCacheLineSize) != 0) {
        lines.push_back(line);
      }
    }
    auto subsets = SimulatedPmem::survivor_subsets(
        lines.size(), std::min<std::uint64_t>(opts.budget, 16),
        detail::mix_seed(opts.seed, s));

    for (const auto& subset : subsets) {
      ++report.outer_images;
      img = cur.media();
      for (std::uint64_t idx : subset) {
        std::uint64_t line = lines[idx];
        std::memcpy(img.data() + line, cur.pending().at(line).data(),
                    kCacheLineSize);
      }
      std::uint64_t h = detail::hash_bytes(img.data(), img.size());
      if (!seen_images.insert(h).second) continue;
      ++report.unique_images;

      // Reference: recover the image start to finish.
      std::vector<std::byte> reference = img;
      {
        detail::PatchedPmem pm(reference);
        PmoStore rec = PmoStore::open_for_recovery(pm);
        rec.recover_all();
      }

      // Re-running on the finished image must change nothing.
      {
        std::vector<std::byte> again = reference;
        detail::PatchedPmem pm(again);
        PmoStore rec = PmoStore::open_for_recovery(pm);
        rec.recover_all();
        if (!detail::same_bytes(again, reference)) ++report.mismatches;
      }

      // Crash the recovery itself at every event it performs, keeping
      // either none or all of the pending lines. Only events that can
      // change a crash image spawn a new test: a flush extends the
      // survivable set (new full image), an uncached write moves media
      // directly (both images change), while a plain store lives in the
      // cache no image contains and a fence merely realizes the full
      // image that was already tested.
      SimulatedPmem sim(img);
      {
        PmoStore rec = PmoStore::open_for_recovery(sim);
        rec.recover_all();
      }
      SimState rcur(sim.initial_media());
      std::vector<std::byte> inner;
      auto recrash = [&](bool keep_pending) {
        ++report.recovery_crashes;
        inner = rcur.media();
        if (keep_pending) {
          for (const auto& [line, content] : rcur.pending()) {
            std::memcpy(inner.data() + line, content.data(), kCacheLineSize);
          }
        }
        detail::PatchedPmem pm(inner);
        PmoStore rec = PmoStore::open_for_recovery(pm);
        rec.recover_all();
        if (!detail::same_bytes(inner, reference)) ++report.mismatches;
      };
      recrash(false);  // pending is empty here, full would be identical
      for (const auto& ev : sim.event_log()) {
        rcur.apply(ev);
        switch (ev.kind) {
          case EventKind::kStore:
          case EventKind::kFence:
            break;
          case EventKind::kFlush:
            recrash(true);
            break;
          case EventKind::kUncachedWrite:
            recrash(false);
            recrash(true);
            break;
        }
      }
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// violation replay and script minimization
// ---------------------------------------------------------------------------

/// Re-executes the script and re-judges one recorded crash schedule.
/// Deterministic: the same schedule always yields the same verdicts.
inline std::vector<Verdict> replay_schedule(const WorkloadScript& script,
                                            const HarnessOptions& opts,
                                            const CrashSchedule& schedule) {
  FakeProcessLiveness liveness;
  liveness.set_alive(1, true);
  SimulatedPmem dev(device_bytes_for(script, 8));
  ExecutionTrace tr = execute_script(script, dev, opts.faults, liveness);

  SimState cur = dev.replay_to(schedule.crash_seq);
  std::vector<std::byte> work = cur.media();
  for (std::uint64_t line : schedule.survivors) {
    auto it = cur.pending().find(line);
    if (it == cur.pending().end()) {
      throw DomainError("schedule survivor line is not pending at its seq");
    }
    std::memcpy(work.data() + line, it->second.data(), kCacheLineSize);
  }
  detail::PatchedPmem pm(work);
  {
    PmoStore rec = PmoStore::open_for_recovery(pm);
    rec.recover_all();
  }
  HarnessReport scratch;
  std::vector<Verdict> verdicts;
  detail::judge_image(work, tr.oracle, schedule.crash_seq, schedule.survivors,
                      scratch, [&](const Verdict& v) { verdicts.push_back(v); });
  return verdicts;
}

/// Greedy single-pass reduction: drop steps from the end toward the front
/// while the script still produces at least one violation. Ill-formed
/// candidates (for example a write whose attach was dropped) simply fail
/// the predicate.
inline WorkloadScript minimize(const WorkloadScript& script,
                               HarnessOptions opts) {
  opts.stop_after_violations = 1;
  opts.budget = std::min<std::uint64_t>(opts.budget, 512);
  auto violates = [&](const WorkloadScript& cand) {
    try {
      return run_exhaustive(cand, opts).violations > 0;
    } catch (const std::exception&) {
      return false;
    }
  };
  WorkloadScript best = script;
  if (!violates(best)) return best;
  for (std::size_t i = best.steps.size(); i-- > 0;) {
    WorkloadScript cand = best;
    cand.steps.erase(cand.steps.begin() + static_cast<std::ptrdiff_t>(i));
    if (violates(cand)) best = std::move(cand);
  }
  return best;
}

}  // namespace pmo

#endif  // PMO_CRASH_HARNESS_HPP_
