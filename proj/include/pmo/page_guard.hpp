// Copyright 2026 The pmostore Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Fixed-address attach windows with fault-driven page tracking.
//
// A write window maps the object's shadow pages PROT_NONE at the handle's
// base address. The first touch of a page faults: the handler copies the
// primary page into the shadow if needed and grants PROT_READ. The first
// store faults again: the handler flags the page dirty and grants
// PROT_READ|PROT_WRITE. Plain loads and stores through the window are the
// whole data path; sync() picks the flagged pages up, runs the durability
// protocol, and re-arms write detection.
//
// A read window simply maps the primary pages PROT_READ at the same base,
// so pointers stored inside the object resolve identically for readers
// and the writer.
//
// The handler stays async-signal-safe: fixed-size registry, preallocated
// per-page flag arrays, atomic bitmap updates, no allocation, no locks.

#ifndef PMO_PAGE_GUARD_HPP_
#define PMO_PAGE_GUARD_HPP_

#include <signal.h>
#include <sys/mman.h>

#include <atomic>
#include <cstring>
#include <memory>
#include <mutex>
#include <string>

#include "pmo/errors.hpp"
#include "pmo/mapped_pmem.hpp"
#include "pmo/store.hpp"

namespace pmo {

namespace detail {

inline constexpr std::uint8_t kPageFaulted = 1;  // PROT_READ granted
inline constexpr std::uint8_t kPageDirty = 2;    // PROT_WRITE granted

struct GuardSlot {
  std::atomic<std::byte*> win_base{nullptr};  // null = slot free
  std::uint64_t win_len = 0;
  std::byte* dev = nullptr;  // device mapping base
  std::uint64_t primary = 0; // device byte offsets
  std::uint64_t shadow = 0;
  std::uint64_t bitmap = 0;
  std::atomic<std::uint8_t>* flags = nullptr;  // one per page
};

/// Process-wide table the SIGSEGV handler walks. Slots publish with a
/// release store of win_base after every other field is in place.
class GuardRegistry {
 public:
  static constexpr int kMaxWindows = 64;

  static GuardRegistry& instance() {
    static GuardRegistry reg;
    return reg;
  }

  GuardSlot* claim(std::byte* win, std::uint64_t len, std::byte* dev,
                   std::uint64_t primary, std::uint64_t shadow,
                   std::uint64_t bitmap, std::atomic<std::uint8_t>* flags) {
    install_handler_once();
    for (auto& s : slots_) {
      std::byte* expected = nullptr;
      if (s.win_base.load(std::memory_order_relaxed) != nullptr) continue;
      s.win_len = len;
      s.dev = dev;
      s.primary = primary;
      s.shadow = shadow;
      s.bitmap = bitmap;
      s.flags = flags;
      if (s.win_base.compare_exchange_strong(expected, win,
                                             std::memory_order_release)) {
        return &s;
      }
    }
    throw ConfigError("too many live attach windows");
  }

  void release(GuardSlot* s) {
    s->win_base.store(nullptr, std::memory_order_release);
  }

 private:
  GuardRegistry() = default;

  static void install_handler_once() {
    static std::once_flag once;
    std::call_once(once, [] {
      struct sigaction sa {};
      sa.sa_flags = SA_SIGINFO;
      sa.sa_sigaction = &GuardRegistry::on_fault;
      sigemptyset(&sa.sa_mask);
      if (::sigaction(SIGSEGV, &sa, &previous_) != 0) {
        throw ConfigError("cannot install the page fault handler");
      }
    });
  }

  static void on_fault(int sig, siginfo_t* info, void* uctx) {
    auto* addr = static_cast<std::byte*>(info->si_addr);
    GuardRegistry& reg = instance();
    for (auto& s : reg.slots_) {
      std::byte* base = s.win_base.load(std::memory_order_acquire);
      if (!base || addr < base || addr >= base + s.win_len) continue;

      std::uint64_t page =
          static_cast<std::uint64_t>(addr - base) / kPageSize;
      std::atomic<std::uint8_t>& f = s.flags[page];
      std::uint8_t cur = f.load(std::memory_order_relaxed);
      std::atomic_ref<std::uint8_t> bits(*reinterpret_cast<std::uint8_t*>(
          s.dev + s.bitmap + page / 4));
      std::uint8_t present = static_cast<std::uint8_t>(1u << ((page % 4) * 2));
      std::uint8_t dirty = static_cast<std::uint8_t>(2u << ((page % 4) * 2));

      if (!(cur & kPageFaulted)) {
        // First touch: make the shadow page real, then let loads through.
        // A store will fault once more and take the branch below.
        if (!(bits.load(std::memory_order_acquire) & present)) {
          std::memcpy(s.dev + s.shadow + page * kPageSize,
                      s.dev + s.primary + page * kPageSize, kPageSize);
          bits.fetch_or(present, std::memory_order_release);
        }
        f.fetch_or(kPageFaulted, std::memory_order_relaxed);
        ::mprotect(base + page * kPageSize, kPageSize, PROT_READ);
      } else {
        bits.fetch_or(dirty, std::memory_order_release);
        f.fetch_or(kPageDirty, std::memory_order_relaxed);
        ::mprotect(base + page * kPageSize, kPageSize,
                   PROT_READ | PROT_WRITE);
      }
      return;
    }

    // Not one of ours: hand off to whatever was installed before, or die
    // the normal way by re-executing the faulting access unhandled.
    if (previous_.sa_flags & SA_SIGINFO) {
      previous_.sa_sigaction(sig, info, uctx);
    } else if (previous_.sa_handler == SIG_IGN) {
      return;
    } else if (previous_.sa_handler != SIG_DFL) {
      previous_.sa_handler(sig);
    } else {
      ::sigaction(SIGSEGV, &previous_, nullptr);
    }
  }

  static struct sigaction previous_;
  GuardSlot slots_[kMaxWindows];
};

inline struct sigaction GuardRegistry::previous_ {};

}  // namespace detail

/// One attached object exposed as plain memory at its stable base address.
class MappedWindow {
 public:
  MappedWindow(PmoStore& store, MappedPmem& dev, std::string_view name,
               Permission perm, std::uint64_t key, std::uint64_t pid)
      : store_(&store), handle_(store.attach(name, perm, key, pid)) {
    void* want = reinterpret_cast<void*>(handle_.base_address());
    if (perm == Permission::kRead) {
      void* m = ::mmap(want, handle_.size(), PROT_READ,
                       MAP_SHARED | MAP_FIXED_NOREPLACE, dev.fd(),
                       static_cast<off_t>(store.primary_byte(handle_, 0)));
      if (m == MAP_FAILED) fail_mmap();
      win_ = static_cast<std::byte*>(m);
      return;
    }
    flags_ = std::make_unique<std::atomic<std::uint8_t>[]>(handle_.pages());
    void* m = ::mmap(want, handle_.size(), PROT_NONE,
                     MAP_SHARED | MAP_FIXED_NOREPLACE, dev.fd(),
                     static_cast<off_t>(store.shadow_byte(handle_, 0)));
    if (m == MAP_FAILED) fail_mmap();
    win_ = static_cast<std::byte*>(m);
    slot_ = detail::GuardRegistry::instance().claim(
        win_, handle_.size(), dev.raw_base(),
        store.primary_byte(handle_, 0), store.shadow_byte(handle_, 0),
        store.bitmap_byte(handle_, 0), flags_.get());
  }

  MappedWindow(const MappedWindow&) = delete;
  MappedWindow& operator=(const MappedWindow&) = delete;

  ~MappedWindow() {
    if (handle_.attached()) {
      try {
        close();
      } catch (...) {
        // unwinding already; the next mount repairs anything half done
      }
    }
  }

  std::byte* data() { return win_; }
  const std::byte* data() const { return win_; }
  std::uint64_t size() const { return handle_.size(); }
  PmoHandle& handle() { return handle_; }

  /// Durability point: collect fault-flagged pages, run the protocol, and
  /// re-arm write detection for the next interval. No window stores may
  /// race this call; that contract is the caller's.
  void sync() {
    if (handle_.permission() == Permission::kRead) return;
    std::uint64_t pages = handle_.pages();
    for (std::uint64_t p = 0; p < pages; ++p) {
      if (flags_[p].load(std::memory_order_acquire) & detail::kPageDirty) {
        store_->note_external_dirty(handle_, p);
      }
    }
    store_->psync(handle_);
    for (std::uint64_t p = 0; p < pages; ++p) {
      if (flags_[p].load(std::memory_order_relaxed) & detail::kPageDirty) {
        ::mprotect(win_ + p * kPageSize, kPageSize, PROT_READ);
        flags_[p].store(detail::kPageFaulted, std::memory_order_release);
      }
    }
  }

  void close() {
    if (slot_) {
      detail::GuardRegistry::instance().release(slot_);
      slot_ = nullptr;
    }
    if (win_) {
      ::munmap(win_, handle_.size());
      win_ = nullptr;
    }
    if (handle_.attached()) store_->detach(handle_);
  }

 private:
  [[noreturn]] void fail_mmap() {
    int err = errno;
    store_->detach(handle_);
    throw ConfigError(std::string("cannot map the attach window: ") +
                      std::strerror(err));
  }

  PmoStore* store_;
  PmoHandle handle_;
  std::byte* win_ = nullptr;
  detail::GuardSlot* slot_ = nullptr;
  std::unique_ptr<std::atomic<std::uint8_t>[]> flags_;
};

}  // namespace pmo

#endif  // PMO_PAGE_GUARD_HPP_
