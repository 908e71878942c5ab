// Copyright 2026 The pmostore Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef PMO_BENCH_HPP_
#define PMO_BENCH_HPP_

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <barrier>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "pmo/mapped_pmem.hpp"
#include "pmo/page_guard.hpp"
#include "pmo/store.hpp"

namespace pmo {

struct BenchConfig {
  std::string workload;  // seqwrite | randwrite | linkedlist
  unsigned threads = 1;
  std::uint64_t delta_ms = 100;  // sync cadence
  std::uint64_t duration_s = 1;
  std::uint64_t seed = 1;
};

struct BenchStats {
  std::string workload;
  unsigned threads = 0;
  std::uint64_t pmo_pages = 0;  // per worker object
  std::uint64_t ops = 0;
  double ops_per_s = 0.0;
  std::uint64_t psyncs = 0;
  std::uint64_t pages_copied_min = 0;
  std::uint64_t pages_copied_median = 0;
  std::uint64_t pages_copied_max = 0;
  double psync_us_p50 = 0.0;
  double psync_us_p90 = 0.0;
  double psync_us_p99 = 0.0;
};

namespace detail {

// In-window list layout; absolute pointers are valid because the object
// attaches at the same address on every mount.
struct BenchNode {
  BenchNode* next;
  std::uint64_t value;
};

struct BenchListHeader {
  BenchNode* head;
  std::uint64_t count;
};

inline double percentile(std::vector<double>& sorted, double p) {
  if (sorted.empty()) return 0.0;
  auto rank = static_cast<std::size_t>(p * static_cast<double>(sorted.size()));
  return sorted[std::min(rank, sorted.size() - 1)];
}

}  // namespace detail

/// Sizes one worker object so `threads` of them (primary, shadow and its
/// page bitmap) fit in `data_pages` device pages.
inline std::uint64_t bench_pages_per_worker(std::uint64_t data_pages,
                                            unsigned threads) {
  std::uint64_t share = data_pages / std::max(1u, threads);
  std::uint64_t pages = share / 2;
  while (pages > 0 && 2 * pages + bitmap_pages_for(pages) > share) {
    pages = (share - bitmap_pages_for(pages)) / 2;
  }
  return pages;
}

/// Runs one workload over freshly created objects `bench.t0..tN-1`.
/// Store calls are serialized behind one mutex; only the raw window
/// stores run concurrently. Every sync point is a barrier-rendezvous of
/// all workers, matching the single-writer contract.
inline BenchStats run_bench(PmoStore& store, MappedPmem& dev,
                            const BenchConfig& cfg) {
  const std::uint64_t key = fnv1a64("bench");
  const std::uint64_t data_pages = store.volume().data_pages();
  const std::uint64_t pages = bench_pages_per_worker(data_pages, cfg.threads);
  if (pages == 0) throw ConfigError("device too small for this bench");

  for (unsigned i = 0; i < cfg.threads; ++i) {
    std::string name = "bench.t" + std::to_string(i);
    try {
      store.pdestroy(name, key);
    } catch (const NotFoundError&) {
    }
    store.pcreate(name, pages * kPageSize, key);
  }

  BenchStats stats;
  stats.workload = cfg.workload;
  stats.threads = cfg.threads;
  stats.pmo_pages = pages;

  std::mutex store_mu;
  std::barrier rendezvous(static_cast<std::ptrdiff_t>(cfg.threads));
  std::atomic<bool> stop{false};
  std::atomic<bool> sync_due{false};

  using Clock = std::chrono::steady_clock;
  const auto t0 = Clock::now();
  const auto delta = std::chrono::milliseconds(cfg.delta_ms);
  const auto duration = std::chrono::seconds(cfg.duration_s);
  auto last_sync = t0;

  std::vector<std::uint64_t> ops(cfg.threads, 0);
  std::vector<std::vector<double>> latencies(cfg.threads);
  std::vector<std::vector<std::uint64_t>> copied(cfg.threads);

  auto worker = [&](unsigned id) {
    std::unique_ptr<MappedWindow> win;
    {
      std::scoped_lock lk(store_mu);
      win = std::make_unique<MappedWindow>(store, dev,
                                           "bench.t" + std::to_string(id),
                                           Permission::kWrite, key,
                                           static_cast<std::uint64_t>(getpid()));
    }
    std::mt19937_64 rng(cfg.seed * 1000003 + id);
    std::byte* base = win->data();
    std::uint64_t next_page = 0;

    auto* header = reinterpret_cast<detail::BenchListHeader*>(base);
    auto* arena = reinterpret_cast<detail::BenchNode*>(
        base + sizeof(detail::BenchListHeader));
    const std::uint64_t capacity =
        (pages * kPageSize - sizeof(detail::BenchListHeader)) /
        sizeof(detail::BenchNode);
    std::uint64_t bump = 0;
    if (cfg.workload == "linkedlist") {
      header->head = nullptr;
      header->count = 0;
    }

    auto one_op = [&] {
      if (cfg.workload == "seqwrite") {
        std::memset(base + next_page * kPageSize, 0x5A + (id & 0x0F),
                    kPageSize);
        next_page = (next_page + 1) % pages;
      } else if (cfg.workload == "randwrite") {
        std::uint64_t p = rng() % pages;
        std::memset(base + p * kPageSize, 0xA5, kPageSize);
      } else {  // linkedlist
        if (bump == capacity) {
          header->head = nullptr;
          header->count = 0;
          bump = 0;
        }
        detail::BenchNode* n = &arena[bump++];
        n->value = header->count;
        n->next = header->head;
        header->head = n;
        header->count += 1;
      }
      ++ops[id];
    };

    while (true) {
      if (id == 0) {
        auto now = Clock::now();
        if (now - t0 >= duration) {
          stop.store(true, std::memory_order_relaxed);
          sync_due.store(true, std::memory_order_release);
        } else if (now - last_sync >= delta) {
          sync_due.store(true, std::memory_order_release);
        }
      }
      if (!sync_due.load(std::memory_order_acquire)) {
        one_op();
        continue;
      }
      rendezvous.arrive_and_wait();  // no window store is in flight now
      {
        std::scoped_lock lk(store_mu);
        auto s0 = Clock::now();
        win->sync();
        auto us = std::chrono::duration<double, std::micro>(Clock::now() - s0);
        latencies[id].push_back(us.count());
        copied[id].push_back(store.last_psync_pages_copied());
      }
      if (id == 0) {
        last_sync = Clock::now();
        sync_due.store(false, std::memory_order_release);
      }
      rendezvous.arrive_and_wait();
      if (stop.load(std::memory_order_relaxed)) break;
    }
    std::scoped_lock lk(store_mu);
    win->close();
  };

  std::vector<std::thread> pool;
  for (unsigned i = 0; i < cfg.threads; ++i) pool.emplace_back(worker, i);
  for (auto& t : pool) t.join();

  auto wall = std::chrono::duration<double>(Clock::now() - t0).count();
  std::vector<double> lat;
  std::vector<std::uint64_t> pages_copied;
  for (unsigned i = 0; i < cfg.threads; ++i) {
    stats.ops += ops[i];
    lat.insert(lat.end(), latencies[i].begin(), latencies[i].end());
    pages_copied.insert(pages_copied.end(), copied[i].begin(),
                        copied[i].end());
  }
  stats.psyncs = pages_copied.size();
  stats.ops_per_s = wall > 0 ? static_cast<double>(stats.ops) / wall : 0.0;
  if (!pages_copied.empty()) {
    std::sort(pages_copied.begin(), pages_copied.end());
    stats.pages_copied_min = pages_copied.front();
    stats.pages_copied_median = pages_copied[pages_copied.size() / 2];
    stats.pages_copied_max = pages_copied.back();
  }
  std::sort(lat.begin(), lat.end());
  stats.psync_us_p50 = detail::percentile(lat, 0.50);
  stats.psync_us_p90 = detail::percentile(lat, 0.90);
  stats.psync_us_p99 = detail::percentile(lat, 0.99);
  return stats;
}

}  // namespace pmo

#endif  // PMO_BENCH_HPP_
