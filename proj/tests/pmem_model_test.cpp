// Copyright 2026 The pmostore Authors.
// SPDX-License-Identifier: Apache-2.0

#include "pmo/pmem_model.hpp"

#include <gtest/gtest.h>

#include <cstdint>
#include <filesystem>
#include <random>
#include <set>
#include <vector>

namespace pmo {
namespace {

// ---------------------------------------------------------------------------
// Test-side oracles. These reconstruct expected answers by independent means
// (byte-at-a-time replay, brute-force interval walks) and are frozen here;
// the model under test must agree with them, not vice versa.
// ---------------------------------------------------------------------------

// Brute-force interval arithmetic: walk every byte in the range, collect the
// distinct lines its bytes fall into.
std::vector<std::uint64_t> oracle_lines_touched(std::uint64_t offset,
                                                std::uint64_t len) {
  std::set<std::uint64_t> lines;
  for (std::uint64_t b = offset; b < offset + len; ++b) {
    lines.insert((b / 64) * 64);
  }
  return {lines.begin(), lines.end()};
}

// Byte-wise replay of an event log. Deliberately structured unlike the
// model: three parallel byte arrays plus per-line validity masks, applied
// one byte at a time.
struct OracleState {
  std::vector<std::uint8_t> media;
  std::vector<std::uint8_t> cache_bytes;
  std::vector<bool> cache_valid;    // per line
  std::vector<std::uint8_t> pend_bytes;
  std::vector<bool> pend_valid;     // per line

  explicit OracleState(std::uint64_t size)
      : media(size, 0),
        cache_bytes(size, 0),
        cache_valid(size / 64, false),
        pend_bytes(size, 0),
        pend_valid(size / 64, false) {}

  std::uint8_t visible(std::uint64_t b) const {
    std::uint64_t line = b / 64;
    if (cache_valid[line]) return cache_bytes[b];
    if (pend_valid[line]) return pend_bytes[b];
    return media[b];
  }

  void step(const ProtocolEvent& ev) {
    switch (ev.kind) {
      case EventKind::kStore:
        for (std::uint64_t i = 0; i < ev.len; ++i) {
          std::uint64_t b = ev.addr + i;
          std::uint64_t line = b / 64;
          if (!cache_valid[line]) {
            // fill the whole line from the currently visible contents
            for (std::uint64_t j = line * 64; j < line * 64 + 64; ++j) {
              cache_bytes[j] = pend_valid[line] ? pend_bytes[j] : media[j];
            }
            cache_valid[line] = true;
          }
          cache_bytes[b] = std::to_integer<std::uint8_t>(ev.payload[i]);
        }
        break;
      case EventKind::kFlush: {
        std::uint64_t line = ev.addr / 64;
        if (cache_valid[line]) {
          for (std::uint64_t j = line * 64; j < line * 64 + 64; ++j) {
            pend_bytes[j] = cache_bytes[j];
          }
          pend_valid[line] = true;
          cache_valid[line] = false;
        }
        break;
      }
      case EventKind::kFence:
        for (std::uint64_t line = 0; line < pend_valid.size(); ++line) {
          if (!pend_valid[line]) continue;
          for (std::uint64_t j = line * 64; j < line * 64 + 64; ++j) {
            media[j] = pend_bytes[j];
          }
          pend_valid[line] = false;
        }
        break;
      case EventKind::kUncachedWrite:
        for (std::uint64_t i = 0; i < 8; ++i) {
          media[ev.addr + i] = std::to_integer<std::uint8_t>(ev.payload[i]);
        }
        break;
    }
  }
};

OracleState oracle_replay(const std::vector<ProtocolEvent>& log,
                          std::uint64_t size, std::uint64_t upto) {
  OracleState st(size);
  for (std::uint64_t i = 0; i < upto && i < log.size(); ++i) st.step(log[i]);
  return st;
}

// Expected crash image: media at at_seq plus the survivor lines' pending
// bytes. Never consults the cache.
std::vector<std::uint8_t> oracle_crash_media(
    const std::vector<ProtocolEvent>& log, std::uint64_t size,
    std::uint64_t at_seq, const std::vector<std::uint64_t>& survivors) {
  OracleState st = oracle_replay(log, size, at_seq);
  std::vector<std::uint8_t> out = st.media;
  for (std::uint64_t line : survivors) {
    EXPECT_TRUE(st.pend_valid[line / 64]) << "survivor not pending";
    for (std::uint64_t j = line; j < line + 64; ++j) out[j] = st.pend_bytes[j];
  }
  return out;
}

std::vector<std::byte> bytes_of(std::initializer_list<int> vals) {
  std::vector<std::byte> out;
  for (int v : vals) out.push_back(static_cast<std::byte>(v));
  return out;
}

std::vector<std::byte> pattern(std::uint64_t len, std::uint8_t seed) {
  std::vector<std::byte> out(len);
  for (std::uint64_t i = 0; i < len; ++i) {
    out[i] = static_cast<std::byte>(static_cast<std::uint8_t>(seed + i * 7));
  }
  return out;
}

const CrashImage* find_image(const std::vector<CrashImage>& images,
                             const std::vector<std::uint64_t>& survivors) {
  for (const auto& img : images) {
    if (img.survivor_set == survivors) return &img;
  }
  return nullptr;
}

// ---------------------------------------------------------------------------
// store
// ---------------------------------------------------------------------------

TEST(Store, ReadYourOwnWrite) {
  SimulatedPmem dev(16 * kPageSize);
  auto data = bytes_of({1, 2, 3, 4, 5, 6, 7, 8});
  dev.store(0x2000, data);
  EXPECT_EQ(dev.read_volatile(0x2000, 8), data);
}

TEST(Store, UnflushedStoreIsLostAtCrash) {
  SimulatedPmem dev(16 * kPageSize);
  dev.store(0x2000, bytes_of({0xAA, 0xBB}));
  auto images = dev.enumerate_crash_images(dev.seq(), 16);
  ASSERT_EQ(images.size(), 1u);  // nothing pending, only the empty subset
  EXPECT_TRUE(images[0].survivor_set.empty());
  EXPECT_EQ(images[0].media_snapshot[0x2000], std::byte{0});
  EXPECT_EQ(images[0].media_snapshot[0x2001], std::byte{0});
}

TEST(Store, SpanningStoreTouchesTheOracleLines) {
  // Oracle first: 128 bytes starting at 0x2000 cover exactly two lines.
  auto expect = oracle_lines_touched(0x2000, 128);
  ASSERT_EQ(expect, (std::vector<std::uint64_t>{0x2000, 0x2040}));

  SimulatedPmem dev(16 * kPageSize);
  dev.store(0x2000, pattern(128, 9));
  EXPECT_EQ(dev.cached_lines(), expect);

  // Unaligned spans must agree with the oracle too.
  SimulatedPmem dev2(16 * kPageSize);
  dev2.store(0x2030, pattern(40, 3));
  EXPECT_EQ(dev2.cached_lines(), oracle_lines_touched(0x2030, 40));
}

TEST(Store, OutOfBoundsRejected) {
  SimulatedPmem dev(kPageSize);
  EXPECT_THROW(dev.store(kPageSize - 4, pattern(8, 1)), RangeError);
  EXPECT_THROW(dev.store(kPageSize, pattern(1, 1)), RangeError);
}

TEST(Store, CachedStoreIntoUncachedRangeRejected) {
  SimulatedPmem dev(4 * kPageSize);
  dev.add_uncached_range(kPageSize, 128);
  EXPECT_THROW(dev.store(kPageSize + 64, pattern(8, 1)), DomainError);
  EXPECT_THROW(dev.store(kPageSize - 4, pattern(8, 1)), DomainError);
  dev.store(0, pattern(8, 1));  // outside the range is fine
}

// ---------------------------------------------------------------------------
// flush_line
// ---------------------------------------------------------------------------

TEST(Flush, FlushedLineSurvivesWhenInSurvivorSet) {
  SimulatedPmem dev(16 * kPageSize);
  auto data = pattern(64, 0x40);
  dev.store(0x2000, data);
  dev.flush_line(LineAddr(0x2000));
  auto images = dev.enumerate_crash_images(dev.seq(), 16);
  ASSERT_EQ(images.size(), 2u);
  const CrashImage* hit = find_image(images, {0x2000});
  ASSERT_NE(hit, nullptr);
  EXPECT_EQ(std::vector<std::byte>(hit->media_snapshot.begin() + 0x2000,
                                   hit->media_snapshot.begin() + 0x2040),
            data);
}

TEST(Flush, FlushedLineLostWhenNotInSurvivorSet) {
  SimulatedPmem dev(16 * kPageSize);
  dev.store(0x2000, pattern(64, 0x40));
  dev.flush_line(LineAddr(0x2000));
  auto images = dev.enumerate_crash_images(dev.seq(), 16);
  const CrashImage* miss = find_image(images, {});
  ASSERT_NE(miss, nullptr);
  for (std::uint64_t i = 0x2000; i < 0x2040; ++i) {
    EXPECT_EQ(miss->media_snapshot[i], std::byte{0});
  }
}

TEST(Flush, CleanLineFlushIsLoggedNoOp) {
  SimulatedPmem dev(16 * kPageSize);
  dev.flush_line(LineAddr(0x1000));
  EXPECT_EQ(dev.event_log().size(), 1u);
  EXPECT_EQ(dev.event_log()[0].kind, EventKind::kFlush);
  EXPECT_TRUE(dev.pending_lines().empty());
}

TEST(Flush, MisalignedLineRejected) {
  SimulatedPmem dev(kPageSize);
  EXPECT_THROW(dev.flush_line(LineAddr(33)), RangeError);
}

// ---------------------------------------------------------------------------
// fence
// ---------------------------------------------------------------------------

TEST(Fence, PostFenceDurabilityHoldsForAnySurvivorSet) {
  SimulatedPmem dev(16 * kPageSize);
  auto data = pattern(64, 0x11);
  dev.store(0x3000, data);
  dev.flush_line(LineAddr(0x3000));
  dev.fence();
  auto images = dev.enumerate_crash_images(dev.seq(), 16);
  ASSERT_EQ(images.size(), 1u);
  EXPECT_EQ(std::vector<std::byte>(images[0].media_snapshot.begin() + 0x3000,
                                   images[0].media_snapshot.begin() + 0x3040),
            data);
  EXPECT_EQ(dev.read_durable(0x3000, 64), data);
}

TEST(Fence, EmptyPendingLeavesMediaUntouched) {
  SimulatedPmem dev(4 * kPageSize);
  dev.store(0x40, pattern(8, 5));  // cached only
  auto before = dev.media();
  dev.fence();
  EXPECT_EQ(dev.media(), before);
}

TEST(Fence, TwoFencedLinesAgreeAcrossAllSurvivorSubsets) {
  // Oracle first: expected image from byte-wise replay of the whole log.
  SimulatedPmem dev(16 * kPageSize);
  auto a = pattern(64, 0x21);
  auto b = pattern(64, 0x84);
  dev.store(0x2000, a);
  dev.store(0x5040, b);
  dev.flush_line(LineAddr(0x2000));
  dev.flush_line(LineAddr(0x5040));
  std::uint64_t pre_fence_seq = dev.seq();
  dev.fence();

  OracleState expect = oracle_replay(dev.event_log(), dev.size(), dev.seq());
  auto images = dev.enumerate_crash_images(dev.seq(), 16);
  ASSERT_EQ(images.size(), 1u);
  for (const auto& img : images) {
    for (std::uint64_t i = 0; i < dev.size(); ++i) {
      ASSERT_EQ(std::to_integer<std::uint8_t>(img.media_snapshot[i]),
                expect.media[i]);
    }
  }
  // Before the fence the all-survive subset already matches that image.
  auto pre = dev.enumerate_crash_images(pre_fence_seq, 16);
  ASSERT_EQ(pre.size(), 4u);
  const CrashImage* full = find_image(pre, {0x2000, 0x5040});
  ASSERT_NE(full, nullptr);
  EXPECT_EQ(full->media_snapshot, images[0].media_snapshot);
}

// ---------------------------------------------------------------------------
// uncached_atomic_write
// ---------------------------------------------------------------------------

TEST(Uncached, WriteIsDurableImmediately) {
  SimulatedPmem dev(16 * kPageSize);
  dev.add_uncached_range(kPageSize, 64);
  dev.uncached_atomic_write(kPageSize, 0x0102030405060708ULL);
  auto images = dev.enumerate_crash_images(dev.seq(), 16);
  for (const auto& img : images) {
    std::uint64_t word = 0;
    std::memcpy(&word, img.media_snapshot.data() + kPageSize, 8);
    EXPECT_EQ(word, 0x0102030405060708ULL);
  }
}

TEST(Uncached, CrashOneEventEarlierSeesOldValue) {
  SimulatedPmem dev(16 * kPageSize);
  dev.add_uncached_range(kPageSize, 64);
  dev.uncached_atomic_write(kPageSize, 0x1111111111111111ULL);
  dev.uncached_atomic_write(kPageSize, 0x2222222222222222ULL);
  auto images = dev.enumerate_crash_images(dev.seq() - 1, 16);
  for (const auto& img : images) {
    std::uint64_t word = 0;
    std::memcpy(&word, img.media_snapshot.data() + kPageSize, 8);
    EXPECT_EQ(word, 0x1111111111111111ULL);
  }
}

TEST(Uncached, CrashPointsBetweenSequentialWrites) {
  // Oracle first: brute-force the visible word at every crash point.
  SimulatedPmem dev(16 * kPageSize);
  dev.add_uncached_range(kPageSize, 64);
  dev.uncached_atomic_write(kPageSize, 0xAAAAAAAAAAAAAAAAULL);
  std::uint64_t between = dev.seq();
  dev.uncached_atomic_write(kPageSize, 0xBBBBBBBBBBBBBBBBULL);

  for (std::uint64_t at = 0; at <= dev.seq(); ++at) {
    OracleState expect = oracle_replay(dev.event_log(), dev.size(), at);
    std::uint64_t oracle_word = 0;
    std::memcpy(&oracle_word, expect.media.data() + kPageSize, 8);

    auto images = dev.enumerate_crash_images(at, 16);
    ASSERT_EQ(images.size(), 1u);
    std::uint64_t got = 0;
    std::memcpy(&got, images[0].media_snapshot.data() + kPageSize, 8);
    EXPECT_EQ(got, oracle_word) << "at=" << at;
    if (at == between) EXPECT_EQ(got, 0xAAAAAAAAAAAAAAAAULL);
  }
}

TEST(Uncached, WriteOutsideRegisteredRangeRejected) {
  SimulatedPmem dev(4 * kPageSize);
  EXPECT_THROW(dev.uncached_atomic_write(0, 1), DomainError);
  dev.add_uncached_range(kPageSize, 64);
  EXPECT_THROW(dev.uncached_atomic_write(kPageSize + 60, 1), DomainError);
  EXPECT_THROW(dev.uncached_atomic_write(kPageSize + 4, 1), DomainError);
}

TEST(Uncached, RangeRegistrationGuards) {
  SimulatedPmem dev(4 * kPageSize);
  dev.store(0x100, pattern(8, 1));
  EXPECT_THROW(dev.add_uncached_range(0x100, 64), DomainError);
  dev.add_uncached_range(kPageSize, 128);
  dev.add_uncached_range(kPageSize, 128);  // exact duplicate is idempotent
  EXPECT_THROW(dev.add_uncached_range(kPageSize + 64, 64), DomainError);
}

// ---------------------------------------------------------------------------
// enumerate_crash_images
// ---------------------------------------------------------------------------

TEST(Enumerate, EmptyPendingYieldsExactlyOneImage) {
  SimulatedPmem dev(4 * kPageSize);
  EXPECT_EQ(dev.enumerate_crash_images(0, 64).size(), 1u);
}

TEST(Enumerate, TwoPendingLinesYieldFourImages) {
  SimulatedPmem dev(16 * kPageSize);
  dev.store(0x1000, pattern(8, 1));
  dev.store(0x2000, pattern(8, 2));
  dev.flush_line(LineAddr(0x1000));
  dev.flush_line(LineAddr(0x2000));
  auto images = dev.enumerate_crash_images(dev.seq(), 16);
  EXPECT_EQ(images.size(), 4u);
  std::set<std::vector<std::uint64_t>> sets;
  for (const auto& img : images) sets.insert(img.survivor_set);
  EXPECT_EQ(sets.size(), 4u);
}

TEST(Enumerate, UnflushedStoreAppearsInNoImage) {
  // Oracle first: reconstruct both images from the log by brute force.
  SimulatedPmem dev(16 * kPageSize);
  dev.store(0x1000, pattern(64, 0x30));
  dev.flush_line(LineAddr(0x1000));
  dev.store(0x4000, pattern(64, 0x77));  // never flushed
  auto images = dev.enumerate_crash_images(dev.seq(), 16);
  ASSERT_EQ(images.size(), 2u);
  for (const auto& img : images) {
    auto expect = oracle_crash_media(dev.event_log(), dev.size(),
                                     img.crash_seq, img.survivor_set);
    for (std::uint64_t i = 0; i < dev.size(); ++i) {
      ASSERT_EQ(std::to_integer<std::uint8_t>(img.media_snapshot[i]),
                expect[i]);
    }
    for (std::uint64_t i = 0x4000; i < 0x4040; ++i) {
      EXPECT_EQ(img.media_snapshot[i], std::byte{0});
    }
  }
}

TEST(Enumerate, SampledModeRespectsBudgetAndAnchors) {
  SimulatedPmem dev(64 * kPageSize);
  for (int i = 0; i < 16; ++i) {
    dev.store(0x1000 + 64 * i, pattern(8, static_cast<std::uint8_t>(i)));
    dev.flush_line(LineAddr(0x1000 + 64 * i));
  }
  // 2^16 subsets > 64 budget -> sampled
  auto images = dev.enumerate_crash_images(dev.seq(), 64, 1234);
  ASSERT_EQ(images.size(), 64u);
  EXPECT_TRUE(find_image(images, {}) != nullptr);
  std::vector<std::uint64_t> all;
  for (int i = 0; i < 16; ++i) all.push_back(0x1000 + 64 * i);
  EXPECT_TRUE(find_image(images, all) != nullptr);
  std::set<std::vector<std::uint64_t>> distinct;
  for (const auto& img : images) distinct.insert(img.survivor_set);
  EXPECT_EQ(distinct.size(), images.size());

  // Deterministic under the same seed, different under another.
  auto again = dev.enumerate_crash_images(dev.seq(), 64, 1234);
  ASSERT_EQ(again.size(), images.size());
  for (size_t i = 0; i < images.size(); ++i) {
    EXPECT_EQ(again[i].survivor_set, images[i].survivor_set);
  }
}

TEST(Enumerate, ReplayPastEndRejected) {
  SimulatedPmem dev(kPageSize);
  EXPECT_THROW(dev.enumerate_crash_images(1, 4), RangeError);
}

// ---------------------------------------------------------------------------
// read_durable / read_volatile
// ---------------------------------------------------------------------------

TEST(Reads, VolatileSeesNewDurableSeesOldBeforeFlush) {
  SimulatedPmem dev(4 * kPageSize);
  auto data = pattern(16, 0x61);
  dev.store(0x800, data);
  EXPECT_EQ(dev.read_volatile(0x800, 16), data);
  EXPECT_EQ(dev.read_durable(0x800, 16), std::vector<std::byte>(16, std::byte{0}));
}

TEST(Reads, AgreeAfterFence) {
  SimulatedPmem dev(4 * kPageSize);
  auto data = pattern(16, 0x62);
  dev.store(0x800, data);
  dev.flush_range(0x800, 16);
  dev.fence();
  EXPECT_EQ(dev.read_volatile(0x800, 16), data);
  EXPECT_EQ(dev.read_durable(0x800, 16), data);
}

TEST(Reads, InterleavedHistoryMatchesReplayOracle) {
  // Scripted interleaving across 3 lines, checked against the byte-wise
  // replay oracle after every step.
  SimulatedPmem dev(4 * kPageSize);
  auto check = [&] {
    OracleState expect = oracle_replay(dev.event_log(), dev.size(), dev.seq());
    for (std::uint64_t i = 0; i < dev.size(); ++i) {
      auto got = dev.read_volatile(i, 1);
      ASSERT_EQ(std::to_integer<std::uint8_t>(got[0]), expect.visible(i))
          << "byte " << i;
    }
  };
  dev.store(0x1000, pattern(64, 1));
  check();
  dev.store(0x1040, pattern(32, 2));
  check();
  dev.flush_line(LineAddr(0x1000));
  check();
  dev.store(0x1000 + 16, pattern(8, 3));  // dirty the flushed line again
  check();
  dev.store(0x1080, pattern(64, 4));
  check();
  dev.flush_line(LineAddr(0x1080));
  check();
  dev.fence();
  check();
  dev.store(0x1040, pattern(16, 5));
  check();
}

TEST(Reads, OutOfBoundsRejected) {
  SimulatedPmem dev(kPageSize);
  std::vector<std::byte> buf(8);
  EXPECT_THROW(dev.read_volatile(kPageSize - 4, std::span<std::byte>(buf)),
               RangeError);
  EXPECT_THROW(dev.read_durable(kPageSize - 4, std::span<std::byte>(buf)),
               RangeError);
}

// ---------------------------------------------------------------------------
// event log bookkeeping
// ---------------------------------------------------------------------------

TEST(EventLog, SeqStrictlyIncreasing) {
  SimulatedPmem dev(4 * kPageSize);
  dev.store(0, pattern(8, 1));
  dev.flush_line(LineAddr(0));
  dev.fence();
  ASSERT_EQ(dev.event_log().size(), 3u);
  for (std::uint64_t i = 0; i < dev.event_log().size(); ++i) {
    EXPECT_EQ(dev.event_log()[i].seq, i);
  }
}

TEST(EventLog, PendingDrainedAfterFence) {
  SimulatedPmem dev(4 * kPageSize);
  dev.store(0, pattern(8, 1));
  dev.flush_line(LineAddr(0));
  dev.store(0, pattern(8, 2));  // same line dirty again while pending
  dev.fence();
  EXPECT_TRUE(dev.pending_lines().empty());
  // cache and pending disjoint at the quiescent point: pending is empty.
  EXPECT_EQ(dev.cached_lines(), std::vector<std::uint64_t>{0});
}

// ---------------------------------------------------------------------------
// checkpoint / load
// ---------------------------------------------------------------------------

TEST(Checkpoint, RoundTripsDurableBytes) {
  namespace fs = std::filesystem;
  fs::path path = fs::temp_directory_path() / "pmo_model_ckpt.img";
  SimulatedPmem dev(2 * kPageSize);
  dev.store(0x40, pattern(64, 0x55));
  dev.flush_line(LineAddr(0x40));
  dev.fence();
  dev.store(0x80, pattern(64, 0x66));  // volatile only; must not persist
  dev.checkpoint(path);
  SimulatedPmem back = SimulatedPmem::from_file(path);
  EXPECT_EQ(back.size(), dev.size());
  EXPECT_EQ(back.read_durable(0x40, 64), dev.read_durable(0x40, 64));
  EXPECT_EQ(back.read_durable(0x80, 64),
            std::vector<std::byte>(64, std::byte{0}));
  fs::remove(path);
}

// ---------------------------------------------------------------------------
// Properties over random event sequences (hand-rolled generator).
// ---------------------------------------------------------------------------

struct RandomDriver {
  std::mt19937_64 rng;
  std::uint64_t size;
  std::uint64_t uncached_at;  // one 64-byte uncached window

  explicit RandomDriver(std::uint64_t seed, std::uint64_t dev_size)
      : rng(seed), size(dev_size), uncached_at(dev_size - kPageSize) {}

  void setup(PersistenceModel& m) { m.add_uncached_range(uncached_at, 64); }

  void step(PersistenceModel& m) {
    std::uint64_t cached_span = uncached_at;  // keep plain stores below it
    switch (rng() % 5) {
      case 0:
      case 1: {
        std::uint64_t len = 1 + rng() % 96;
        std::uint64_t off = rng() % (cached_span - len);
        std::vector<std::byte> data(len);
        for (auto& b : data) b = static_cast<std::byte>(rng() & 0xFF);
        m.store(off, data);
        break;
      }
      case 2: {
        std::uint64_t line = (rng() % (cached_span / 64)) * 64;
        m.flush_line(LineAddr(line));
        break;
      }
      case 3:
        m.fence();
        break;
      case 4:
        m.uncached_atomic_write(uncached_at + 8 * (rng() % 8), rng());
        break;
    }
  }
};

TEST(Properties, MediaOnlyChangesAtFenceOrUncachedWrite) {
  for (std::uint64_t seed : {11u, 22u, 33u}) {
    SimulatedPmem dev(8 * kPageSize);
    RandomDriver drv(seed, dev.size());
    drv.setup(dev);
    auto before = dev.media();
    for (int i = 0; i < 200; ++i) {
      drv.step(dev);
      const auto& ev = dev.event_log().back();
      if (ev.kind == EventKind::kStore || ev.kind == EventKind::kFlush) {
        ASSERT_EQ(dev.media(), before) << "seed " << seed << " step " << i;
      } else if (ev.kind == EventKind::kFence) {
        // every changed byte must previously have been pending; durable set
        // only grows toward the volatile view
        for (std::uint64_t b = 0; b < dev.size(); ++b) {
          if (dev.media()[b] != before[b]) {
            auto vis = dev.read_volatile(b, 1);
            ASSERT_EQ(dev.media()[b], vis[0]);
          }
        }
      }
      before = dev.media();
    }
  }
}

TEST(Properties, CrashImagesMatchBruteForceReconstruction) {
  for (std::uint64_t seed : {7u, 19u}) {
    SimulatedPmem dev(8 * kPageSize);
    RandomDriver drv(seed, dev.size());
    drv.setup(dev);
    for (int i = 0; i < 120; ++i) drv.step(dev);
    std::mt19937_64 pick(seed ^ 0xfeed);
    for (int k = 0; k < 6; ++k) {
      std::uint64_t at = pick() % (dev.seq() + 1);
      auto images = dev.enumerate_crash_images(at, 32, seed);
      for (const auto& img : images) {
        auto expect = oracle_crash_media(dev.event_log(), dev.size(), at,
                                         img.survivor_set);
        for (std::uint64_t b = 0; b < dev.size(); ++b) {
          ASSERT_EQ(std::to_integer<std::uint8_t>(img.media_snapshot[b]),
                    expect[b])
              << "seed " << seed << " at " << at << " byte " << b;
        }
      }
    }
  }
}

TEST(Properties, UncachedWordsNeverTear) {
  SimulatedPmem dev(8 * kPageSize);
  std::uint64_t off = dev.size() - kPageSize;
  dev.add_uncached_range(off, 64);
  std::vector<std::uint64_t> written = {0};  // initial zero
  std::mt19937_64 rng(99);
  for (int i = 0; i < 40; ++i) {
    if (rng() % 2) {
      std::uint64_t v = rng();
      dev.uncached_atomic_write(off, v);
      written.push_back(v);
    } else {
      std::uint64_t scratch = rng() % (off - 128);
      dev.store(scratch, pattern(32, static_cast<std::uint8_t>(i)));
      if (rng() % 2) dev.flush_range(scratch, 32);
    }
  }
  for (std::uint64_t at = 0; at <= dev.seq(); ++at) {
    auto images = dev.enumerate_crash_images(at, 16, 5);
    for (const auto& img : images) {
      std::uint64_t word = 0;
      std::memcpy(&word, img.media_snapshot.data() + off, 8);
      EXPECT_TRUE(std::find(written.begin(), written.end(), word) !=
                  written.end())
          << "torn or invented word at seq " << at;
    }
  }
}

TEST(Properties, PassThroughBackendMatchesSimulatedOnCrashFreeRuns) {
  for (std::uint64_t seed : {3u, 17u, 31u}) {
    SimulatedPmem sim(8 * kPageSize);
    DirectPmem direct(8 * kPageSize);
    RandomDriver a(seed, sim.size());
    RandomDriver b(seed, direct.size());
    a.setup(sim);
    b.setup(direct);
    for (int i = 0; i < 300; ++i) {
      a.step(sim);
      b.step(direct);
    }
    // flush everything still dirty, then fence: crash-free completion
    for (std::uint64_t line : sim.cached_lines()) sim.flush_line(LineAddr(line));
    sim.fence();
    direct.fence();
    for (std::uint64_t i = 0; i < sim.size(); ++i) {
      ASSERT_EQ(sim.media()[i], direct.media()[i]) << "seed " << seed;
    }
  }
}

TEST(Properties, SurvivorSubsetPolicyShape) {
  // Exhaustive below the budget boundary.
  auto small = SimulatedPmem::survivor_subsets(3, 8, 1);
  EXPECT_EQ(small.size(), 8u);
  // Sampled above it: exact budget, anchors present, no duplicates.
  auto sampled = SimulatedPmem::survivor_subsets(20, 50, 42);
  EXPECT_EQ(sampled.size(), 50u);
  EXPECT_TRUE(sampled[0].empty());
  EXPECT_EQ(sampled[1].size(), 20u);
  std::set<std::vector<std::uint64_t>> uniq(sampled.begin(), sampled.end());
  EXPECT_EQ(uniq.size(), sampled.size());
}

}  // namespace
}  // namespace pmo
