#include "pmo/cli.hpp"

#include <unistd.h>

#include <gtest/gtest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "pmo/bench.hpp"
#include "pmo/crash_harness.hpp"
#include "pmo/mapped_pmem.hpp"
#include "pmo/page_guard.hpp"
#include "pmo/store.hpp"

namespace pmo {
namespace {

struct TempPath {
  std::filesystem::path path;

  explicit TempPath(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("pmocli_" + std::to_string(::getpid()) + "_" + tag);
    std::filesystem::remove(path);
  }
  ~TempPath() { std::filesystem::remove(path); }
  std::string str() const { return path.string(); }
};

struct CmdResult {
  int rc = 0;
  std::string out;
  std::string err;

  bool printed(const std::string& needle) const {
    return out.find(needle) != std::string::npos;
  }
};

CmdResult ctl(std::initializer_list<std::string> args) {
  std::vector<std::string> storage{"pmoctl"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  argv.reserve(storage.size());
  for (const auto& s : storage) argv.push_back(s.c_str());
  std::ostringstream out;
  std::ostringstream err;
  CmdResult r;
  r.rc = cli::run_pmoctl(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::vector<std::byte> file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::vector<char> raw((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
  std::vector<std::byte> bytes(raw.size());
  std::memcpy(bytes.data(), raw.data(), raw.size());
  return bytes;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  out << text;
}

// ---------------------------------------------------------------------------
// mkpmo
// ---------------------------------------------------------------------------

TEST(Mkpmo, FormatsAnEmptySystemAndPrintsTheHeader) {
  TempPath img("mk.img");
  CmdResult r = ctl({"mkpmo", "--device", img.str(), "--size", "1MiB",
                     "--name", "lab", "--max-pmos", "8"});
  ASSERT_EQ(r.rc, 0) << r.err;
  EXPECT_TRUE(r.printed("magic PMOSTOR1"));
  EXPECT_TRUE(r.printed("system_name lab"));
  EXPECT_TRUE(r.printed("allocated_count 0"));
  EXPECT_EQ(std::filesystem::file_size(img.path), 1u << 20);

  CmdResult ins = ctl({"inspect", "--device", img.str()});
  ASSERT_EQ(ins.rc, 0) << ins.err;
  EXPECT_TRUE(ins.printed("magic PMOSTOR1"));
  EXPECT_TRUE(ins.printed("system_name lab"));
  EXPECT_TRUE(ins.printed("max_pmos 8"));
  EXPECT_FALSE(ins.printed("entry "));
}

TEST(Mkpmo, RejectsADeviceTooSmallForTheLayout) {
  TempPath img("tiny.img");
  CmdResult r = ctl({"mkpmo", "--device", img.str(), "--size", "8KiB"});
  EXPECT_EQ(r.rc, 1);
  EXPECT_NE(r.err.find("mkpmo:"), std::string::npos);
}

TEST(Mkpmo, ImageBytesAreIdenticalAcrossRuns) {
  TempPath a("det_a.img");
  TempPath b("det_b.img");
  auto flags = [&](const TempPath& p) {
    return ctl({"mkpmo", "--device", p.str(), "--size", "1MiB", "--name",
                "golden", "--max-pmos", "16"});
  };
  ASSERT_EQ(flags(a).rc, 0);
  ASSERT_EQ(flags(b).rc, 0);
  EXPECT_TRUE(file_bytes(a.str()) == file_bytes(b.str()));
}

// ---------------------------------------------------------------------------
// inspect
// ---------------------------------------------------------------------------

TEST(Inspect, ListsLiveEntriesWithoutWritingAByte) {
  TempPath img("ins.img");
  ASSERT_EQ(ctl({"mkpmo", "--device", img.str(), "--size", "1MiB"}).rc, 0);
  {
    MappedPmem dev(img.path);
    PmoStore store = PmoStore::open(dev);
    store.pcreate("A", 2 * kPageSize, fnv1a64("k1"));
    store.pcreate("B", kPageSize, fnv1a64("k2"));
    dev.checkpoint();
  }
  auto before = file_bytes(img.str());

  CmdResult r = ctl({"inspect", "--device", img.str()});
  ASSERT_EQ(r.rc, 0) << r.err;
  EXPECT_TRUE(r.printed("allocated_count 2"));
  EXPECT_TRUE(r.printed("entry A state=D"));
  EXPECT_TRUE(r.printed("entry B state=D"));

  EXPECT_TRUE(file_bytes(img.str()) == before) << "inspect mutated the image";
}

TEST(Inspect, FailsCleanlyOnAnUnformattedFile) {
  TempPath img("raw.img");
  write_text(img.str(), std::string(8192, 'x'));
  CmdResult r = ctl({"inspect", "--device", img.str()});
  EXPECT_EQ(r.rc, 1);
}

// ---------------------------------------------------------------------------
// recover
// ---------------------------------------------------------------------------

TEST(Recover, CopiesShadowPagesForACrashedSyncAndIsThenANoOp) {
  TempPath img("rec.img");
  ASSERT_EQ(ctl({"mkpmo", "--device", img.str(), "--size", "1MiB"}).rc, 0);
  {
    MappedPmem dev(img.path);
    PmoStore store = PmoStore::open(dev);
    store.pcreate("A", 4 * kPageSize, fnv1a64("k1"));
    PmoHandle h = store.attach("A", Permission::kWrite, fnv1a64("k1"), 1);
    std::vector<std::byte> fill(kPageSize, std::byte{0x7E});
    store.pmo_write(h, 1 * kPageSize, fill);
    store.pmo_write(h, 3 * kPageSize, fill);
    store.faults().halt_after_state_c = true;
    store.psync(h);  // halts right after the C transition
    dev.checkpoint();
  }

  CmdResult ins = ctl({"inspect", "--device", img.str()});
  EXPECT_TRUE(ins.printed("entry A state=C"));

  CmdResult r = ctl({"recover", "--device", img.str()});
  ASSERT_EQ(r.rc, 0) << r.err;
  EXPECT_TRUE(r.printed("A copy-shadow-to-primary 2 pages"));
  EXPECT_TRUE(r.printed("recovered 1 objects"));

  CmdResult again = ctl({"recover", "--device", img.str()});
  ASSERT_EQ(again.rc, 0);
  EXPECT_TRUE(again.printed("A none"));
  EXPECT_FALSE(again.printed("copy-shadow-to-primary"));

  // The crashed sync's pages made it into the primary copy.
  MappedPmem dev(img.path);
  PmoStore store = PmoStore::open(dev);
  PmoHandle h = store.attach("A", Permission::kRead, fnv1a64("k1"), 1);
  auto page = store.pmo_read(h, 3 * kPageSize, kPageSize);
  EXPECT_EQ(page[0], std::byte{0x7E});
  store.detach(h);
}

// ---------------------------------------------------------------------------
// crashtest
// ---------------------------------------------------------------------------

TEST(Crashtest, PassesTheTwoPsyncScript) {
  TempPath script("std.script");
  write_text(script.str(), WorkloadScript::standard_script().to_text());
  CmdResult r = ctl({"crashtest", "--device", "unused.img", "--script",
                     script.str(), "--budget", "128", "--seed", "7"});
  ASSERT_EQ(r.rc, 0) << r.err;
  EXPECT_TRUE(r.printed("violations 0"));
  EXPECT_TRUE(r.printed("histogram A"));
  EXPECT_TRUE(r.printed("recovery_mismatches 0"));
}

TEST(Crashtest, EmptyScriptIsOneTrivialSchedule) {
  TempPath script("empty.script");
  write_text(script.str(), "");
  CmdResult r = ctl({"crashtest", "--device", "unused.img", "--script",
                     script.str()});
  ASSERT_EQ(r.rc, 0) << r.err;
  EXPECT_TRUE(r.printed("crash_points 1"));
  EXPECT_TRUE(r.printed("schedules 1"));
  EXPECT_TRUE(r.printed("violations 0"));
}

TEST(Crashtest, MutantExitsOneWithAMinimizedScript) {
  TempPath script("mut.script");
  write_text(script.str(), WorkloadScript::standard_script().to_text());
  CmdResult r = ctl({"crashtest", "--device", "unused.img", "--script",
                     script.str(), "--budget", "256", "--mutate",
                     "drop-fence-2"});
  ASSERT_EQ(r.rc, 1) << r.out;
  EXPECT_TRUE(r.printed("violation pmo=A"));
  EXPECT_TRUE(r.printed("minimized script"));
}

TEST(Crashtest, UsageErrorsExitTwo) {
  TempPath script("bad.script");
  write_text(script.str(), "explode A 1 k1\n");
  EXPECT_EQ(ctl({"crashtest", "--device", "d", "--script", script.str()}).rc,
            2);
  EXPECT_EQ(ctl({"crashtest", "--device", "d", "--script",
                 "/nonexistent/path.script"}).rc,
            2);
  TempPath ok("ok.script");
  write_text(ok.str(), "create A 1 k1\n");
  EXPECT_EQ(ctl({"crashtest", "--device", "d", "--script", ok.str(),
                 "--mutate", "drop-everything"}).rc,
            2);
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

TEST(Bench, SequentialWriteReportsThroughputAndCopyCounts) {
  TempPath img("bench1.img");
  ASSERT_EQ(ctl({"mkpmo", "--device", img.str(), "--size", "2MiB"}).rc, 0);
  CmdResult r = ctl({"bench", "--device", img.str(), "--workload", "seqwrite",
                     "--threads", "2", "--delta-ms", "50", "--duration-s",
                     "1"});
  ASSERT_EQ(r.rc, 0) << r.err;
  EXPECT_TRUE(r.printed("workload seqwrite"));
  EXPECT_TRUE(r.printed("threads 2"));
  std::istringstream in(r.out);
  std::string k;
  std::uint64_t ops = 0;
  std::uint64_t psyncs = 0;
  while (in >> k) {
    if (k == "ops") in >> ops;
    if (k == "psyncs") in >> psyncs;
  }
  EXPECT_GT(ops, 0u);
  EXPECT_GE(psyncs, 2u);  // at least one cadence sync plus the final one
}

TEST(Bench, LinkedListSurvivesTheRunAndTraversesAfterReattach) {
  TempPath img("bench2.img");
  ASSERT_EQ(ctl({"mkpmo", "--device", img.str(), "--size", "2MiB"}).rc, 0);
  CmdResult r = ctl({"bench", "--device", img.str(), "--workload",
                     "linkedlist", "--threads", "1", "--delta-ms", "20",
                     "--duration-s", "1"});
  ASSERT_EQ(r.rc, 0) << r.err;

  MappedPmem dev(img.path);
  PmoStore store = PmoStore::open(dev);
  MappedWindow win(store, dev, "bench.t0", Permission::kRead, fnv1a64("bench"),
                   static_cast<std::uint64_t>(::getpid()));
  auto* header = reinterpret_cast<detail::BenchListHeader*>(win.data());
  ASSERT_GT(header->count, 0u);
  std::uint64_t walked = 0;
  auto* lo = win.data();
  auto* hi = win.data() + win.size();
  for (detail::BenchNode* n = header->head; n != nullptr; n = n->next) {
    ASSERT_GE(reinterpret_cast<std::byte*>(n), lo);
    ASSERT_LT(reinterpret_cast<std::byte*>(n) + sizeof(detail::BenchNode), hi);
    ASSERT_EQ(n->value, header->count - walked - 1);
    ++walked;
  }
  EXPECT_EQ(walked, header->count);
  win.close();
}

TEST(Bench, UnknownWorkloadExitsTwo) {
  CmdResult r = ctl({"bench", "--device", "whatever.img", "--workload",
                     "fsync-storm"});
  EXPECT_EQ(r.rc, 2);
}

// ---------------------------------------------------------------------------
// top-level parsing
// ---------------------------------------------------------------------------

TEST(Pmoctl, TopLevelUsage) {
  EXPECT_EQ(ctl({}).rc, 2);
  EXPECT_EQ(ctl({"--help"}).rc, 0);
  EXPECT_EQ(ctl({"mkpmo", "--device", "x", "--bytes", "1MiB"}).rc, 2);
  EXPECT_EQ(ctl({"inspect"}).rc, 2);  // --device is required
}

}  // namespace
}  // namespace pmo
