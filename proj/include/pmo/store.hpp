// Copyright 2026 The pmostore Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Object lifecycle over a mounted volume: pcreate / attach / detach /
// psync / pdestroy, the five-state (D/R/W/P/C) machine driven by uncached
// atomic state words, shadow-copy writes with page-granular dirty
// tracking, and post-crash recovery.
//
// Durability choreography of psync (the heart of the crash story):
//   (1) W->P                 uncached, atomic
//   (2) flush every dirty shadow page line and the bitmap lines holding
//       their DIRTY bits; fence          -- shadow now consistent
//   (3) P->C                 uncached, atomic
//   (4) copy shadow->primary per dirty page, store+flush; fence
//   (5) clear DIRTY bits, flush; fence
//   (6) C->W                 uncached, atomic
// The bit-clears get their own fence between (4) and (6): if they rode the
// same fence group as the copies, a crash could durably clear a page's
// DIRTY bit while its primary lines were still lost, and recovery would
// skip the half-copied page.

#ifndef PMO_STORE_HPP_
#define PMO_STORE_HPP_

#include <signal.h>

#include <atomic>
#include <cerrno>
#include <cstdint>
#include <functional>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "pmo/errors.hpp"
#include "pmo/layout.hpp"
#include "pmo/mapped_pmem.hpp"
#include "pmo/pmem_model.hpp"

namespace pmo {

enum class Permission : std::uint8_t { kRead, kWrite };

/// Answers "is this process id alive right now".
class ProcessLiveness {
 public:
  virtual ~ProcessLiveness() = default;
  virtual bool alive(std::uint64_t pid) const = 0;
};

class RealProcessLiveness final : public ProcessLiveness {
 public:
  bool alive(std::uint64_t pid) const override {
    if (pid == 0) return false;
    return ::kill(static_cast<pid_t>(pid), 0) == 0 || errno == EPERM;
  }
};

/// Scriptable liveness for exercising stale-writer handling.
class FakeProcessLiveness final : public ProcessLiveness {
 public:
  void set_alive(std::uint64_t pid, bool alive) {
    if (alive) {
      live_.insert(pid);
    } else {
      live_.erase(pid);
    }
  }
  bool alive(std::uint64_t pid) const override { return live_.count(pid) > 0; }

 private:
  std::set<std::uint64_t> live_;
};

/// Protocol fault injection for the crash harness. Every flag weakens the
/// psync choreography in one specific way; all default off.
struct PsyncFaults {
  bool drop_fence_persist = false;   // skip the stage-2 fence
  bool drop_fence_copy = false;      // skip the stage-4 fence
  bool c_before_dirty_flush = false; // enter C before stage-2 flushes
  bool copy_before_c = false;        // run stage-4 copies while still in P
  bool skip_dirty_persist = false;   // never flush DIRTY bitmap lines
  bool halt_after_state_c = false;   // stop right after entering C (test hook)

  bool any() const {
    return drop_fence_persist || drop_fence_copy || c_before_dirty_flush ||
           copy_before_c || skip_dirty_persist;
  }

  static PsyncFaults parse(std::string_view name) {
    PsyncFaults f;
    if (name == "drop-fence-2") {
      f.drop_fence_persist = true;
    } else if (name == "drop-fence-4") {
      f.drop_fence_copy = true;
    } else if (name == "c-before-dirty-flush") {
      f.c_before_dirty_flush = true;
    } else if (name == "copy-before-c") {
      f.copy_before_c = true;
    } else if (name == "skip-dirty-persist") {
      f.skip_dirty_persist = true;
    } else {
      throw ConfigError("unknown protocol mutant: " + std::string(name));
    }
    return f;
  }

  static const std::vector<std::string>& all_names() {
    static const std::vector<std::string> names = {
        "drop-fence-2", "drop-fence-4", "c-before-dirty-flush",
        "copy-before-c", "skip-dirty-persist"};
    return names;
  }
};

/// One attach session. Volatile bookkeeping only; all durable truth lives
/// in the metadata entry and the shadow bitmap.
class PmoHandle {
 public:
  const std::string& name() const { return name_; }
  Permission permission() const { return perm_; }
  std::uint64_t base_address() const { return base_address_; }
  std::uint64_t size() const { return size_; }
  std::uint64_t pages() const { return size_ / kPageSize; }
  bool attached() const { return attached_; }
  const std::set<std::uint64_t>& dirty_pages() const { return dirty_pages_; }
  const std::set<std::uint64_t>& faulted_pages() const {
    return faulted_pages_;
  }

 private:
  friend class PmoStore;

  std::string name_;
  Permission perm_ = Permission::kRead;
  std::uint64_t slot_ = 0;
  std::uint64_t size_ = 0;
  std::uint64_t base_address_ = 0;
  std::uint64_t primary_page_ = 0;
  std::uint64_t shadow_data_page_ = 0;  // 0 for read handles
  std::uint64_t pid_ = 0;
  bool attached_ = false;
  std::set<std::uint64_t> dirty_pages_;
  std::set<std::uint64_t> faulted_pages_;
};

struct RecoveryAction {
  std::string name;
  char state = 'D';                // state found before recovery
  std::uint64_t pages_copied = 0;  // shadow->primary copies performed
  const char* action = "none";     // none | discard-shadow |
                                   // copy-shadow-to-primary
};

/// The object store mounted on one device.
class PmoStore {
 public:
  struct Config {
    std::uint64_t persistent_base = kDefaultPersistentBase;
    const ProcessLiveness* liveness = nullptr;  // default: real processes
  };

  /// Formats the device and mounts the fresh system.
  static PmoStore format(PersistenceModel& model, std::string_view sys_name,
                         std::uint64_t max_pmos, Config cfg) {
    Volume v = Volume::format_device(model, sys_name, max_pmos);
    return PmoStore(std::move(v), cfg);
  }
  static PmoStore format(PersistenceModel& model, std::string_view sys_name,
                         std::uint64_t max_pmos) {
    return format(model, sys_name, max_pmos, Config{});
  }

  /// Normal mount: advances boot_id, recovers every stale entry, rebuilds
  /// the free structures.
  static PmoStore open(PersistenceModel& model, Config cfg) {
    Volume v = Volume::open_system(model, Volume::BootBump::kBump);
    PmoStore s(std::move(v), cfg);
    s.recover_all();
    s.volume_.rebuild_free_structures();
    return s;
  }
  static PmoStore open(PersistenceModel& model) { return open(model, Config{}); }

  /// Recovery mount: no boot bump, no implicit repair. The caller drives
  /// recover_all()/rebuild explicitly. Used by the crash harness and the
  /// recover/inspect commands, which must not mutate beyond what they
  /// print.
  static PmoStore open_for_recovery(PersistenceModel& model, Config cfg) {
    Volume v = Volume::open_system(model, Volume::BootBump::kNoBump);
    return PmoStore(std::move(v), cfg);
  }
  static PmoStore open_for_recovery(PersistenceModel& model) {
    return open_for_recovery(model, Config{});
  }

  Volume& volume() { return volume_; }
  const Volume& volume() const { return volume_; }
  PersistenceModel& model() { return volume_.model(); }
  std::uint64_t boot_id() const { return volume_.boot_id(); }
  PsyncFaults& faults() { return faults_; }

  std::uint64_t last_psync_pages_copied() const {
    return last_psync_pages_copied_;
  }
  std::uint64_t psync_count() const { return psync_count_; }

  /// Test instrumentation: runs between the C transition and the copy
  /// stage of every psync, in the caller's context.
  std::function<void()> psync_mid_hook;

  // -- lifecycle -----------------------------------------------------------

  void pcreate(std::string_view name, std::uint64_t size, std::uint64_t key) {
    if (size == 0) throw DomainError("size must be positive");
    if (volume_.allocated_count() >= volume_.max_pmos()) {
      throw OutOfSpaceError("object table is full");
    }
    std::uint64_t slot = volume_.find_insert_slot(name);
    std::uint64_t pages = pages_for_size(size);
    std::uint64_t primary = volume_.allocate_extent(pages);

    zero_pages_durable(volume_.data_byte(primary), pages);

    MetadataEntry e;
    e.name = std::string(name);
    e.size = pages * kPageSize;
    e.primary_offset = primary;
    e.read_key = key;
    e.write_key = key;
    volume_.write_entry_durable(slot, e);
    // The state word is the commit point: before it, the slot is not live
    // and the extent is reclaimable leak; after it, the object exists.
    volume_.set_slot_state(slot, kStateD);
    volume_.set_allocated_count(volume_.allocated_count() + 1);
  }

  PmoHandle attach(std::string_view name, Permission perm, std::uint64_t key,
                   std::uint64_t pid) {
    auto slot_opt = volume_.lookup_slot(name);
    if (!slot_opt) throw NotFoundError("no object named " + std::string(name));
    std::uint64_t slot = *slot_opt;

    // A signature left by a dead writer (older boot, or same boot with a
    // dead pid) is recovered before the attach proceeds.
    maybe_recover_stale(slot);

    std::uint64_t st = volume_.slot_state(slot);
    MetadataEntry e = volume_.read_entry(slot);

    if (perm == Permission::kRead) {
      if (key != e.read_key) throw PermissionError("read key mismatch");
      if (st == kStateW || st == kStateP || st == kStateC) {
        throw BusyError("invalid (existing writer)");
      }
      if (st == kStateD) {
        volume_.write_entry_field(slot, kEntAttachBootId, boot_id());
        volume_.set_slot_state(slot, kStateR);
      }
      volume_.write_entry_field(slot, kEntReaderCount, e.reader_count + 1);
    } else {
      if (key != e.write_key) throw PermissionError("write key mismatch");
      if (st == kStateW || st == kStateP || st == kStateC) {
        throw BusyError("invalid (>1 writer)");
      }
      if (st == kStateR) {
        throw BusyError("invalid (permissions are mutually exclusive)");
      }
      // Shadow extent: leading bitmap pages, then one data page per page.
      std::uint64_t pages = pages_for_size(e.size);
      std::uint64_t bpages = bitmap_pages_for(pages);
      std::uint64_t ext = volume_.allocate_extent(bpages + pages);
      zero_pages_durable(volume_.data_byte(ext), bpages);
      e.shadow_offset = ext + bpages;
      e.attached_pid = pid;
      e.attach_boot_id = boot_id();
      volume_.write_entry_durable(slot, e);
      volume_.set_slot_state(slot, kStateW);
    }

    PmoHandle h;
    h.name_ = std::string(name);
    h.perm_ = perm;
    h.slot_ = slot;
    h.size_ = e.size;
    h.primary_page_ = e.primary_offset;
    h.shadow_data_page_ = perm == Permission::kWrite ? e.shadow_offset : 0;
    h.pid_ = pid;
    h.attached_ = true;
    h.base_address_ = cfg_.persistent_base + volume_.header().data_offset +
                      e.primary_offset * kPageSize;
    return h;
  }

  void detach(PmoHandle& h) {
    if (!h.attached_) {
      throw UndefinedBehaviorError("detach of a handle that is not attached");
    }
    std::uint64_t slot = h.slot_;
    MetadataEntry e = volume_.read_entry(slot);
    if (h.perm_ == Permission::kRead) {
      std::uint64_t readers = e.reader_count > 0 ? e.reader_count - 1 : 0;
      volume_.write_entry_field(slot, kEntReaderCount, readers);
      if (readers == 0) {
        volume_.write_entry_field(slot, kEntAttachBootId, 0);
        volume_.set_slot_state(slot, kStateD);
      }
    } else {
      // Transient (un-psynced) shadow contents are discarded: first detach
      // the durable pointers, then return the extent. A crash in between
      // leaks the extent until the next rebuild, never corrupts.
      std::uint64_t pages = pages_for_size(e.size);
      std::uint64_t bpages = bitmap_pages_for(pages);
      std::uint64_t ext = e.shadow_offset - bpages;
      e.shadow_offset = 0;
      e.attached_pid = 0;
      e.attach_boot_id = 0;
      volume_.write_entry_durable(slot, e);
      volume_.set_slot_state(slot, kStateD);
      volume_.free_extent(ext, bpages + pages);
    }
    h.attached_ = false;
    h.dirty_pages_.clear();
    h.faulted_pages_.clear();
  }

  void pdestroy(std::string_view name, std::uint64_t key) {
    auto slot_opt = volume_.lookup_slot(name);
    if (!slot_opt) throw NotFoundError("no object named " + std::string(name));
    std::uint64_t slot = *slot_opt;
    maybe_recover_stale(slot);
    MetadataEntry e = volume_.read_entry(slot);
    if (key != e.write_key) throw PermissionError("key mismatch");
    if (volume_.slot_state(slot) != kStateD) {
      throw BusyError("object is attached");
    }
    // Tombstone first (atomic commit), then reclaim.
    volume_.set_slot_state(slot, kStateTombstone);
    volume_.clear_entry_durable(slot);
    volume_.free_extent(e.primary_offset, pages_for_size(e.size));
    volume_.set_allocated_count(volume_.allocated_count() - 1);
  }

  // -- data path -----------------------------------------------------------

  void pmo_write(PmoHandle& h, std::uint64_t offset,
                 std::span<const std::byte> data) {
    if (!h.attached_) {
      throw UndefinedBehaviorError("write through a detached handle");
    }
    if (h.perm_ != Permission::kWrite) {
      throw PermissionError("handle is read-only");
    }
    if (offset > h.size_ || data.size() > h.size_ - offset) {
      throw RangeError("write outside the object");
    }
    write_epochs_[h.slot_].fetch_add(1, std::memory_order_relaxed);
    std::uint64_t first = offset / kPageSize;
    std::uint64_t last = (offset + data.size() - 1) / kPageSize;
    for (std::uint64_t p = first; p <= last; ++p) {
      populate_page_if_needed(h, p);
      set_dirty_bit(h, p);
      h.dirty_pages_.insert(p);
    }
    model().store(shadow_byte(h, 0) + offset, data);
  }

  std::vector<std::byte> pmo_read(const PmoHandle& h, std::uint64_t offset,
                                  std::uint64_t len) const {
    if (!h.attached_) {
      throw UndefinedBehaviorError("read through a detached handle");
    }
    if (offset > h.size_ || len > h.size_ - offset) {
      throw RangeError("read outside the object");
    }
    std::vector<std::byte> out(len);
    const PersistenceModel& m = volume_.model();
    std::uint64_t pos = 0;
    while (pos < len) {
      std::uint64_t page = (offset + pos) / kPageSize;
      std::uint64_t in_page = (offset + pos) % kPageSize;
      std::uint64_t n = std::min(len - pos, kPageSize - in_page);
      bool shadowed = h.perm_ == Permission::kWrite && present_bit(h, page);
      std::uint64_t src = h.perm_ == Permission::kWrite && shadowed
                              ? shadow_byte(h, page) + in_page
                              : primary_byte(h, page) + in_page;
      m.read_volatile(src, std::span<std::byte>(out.data() + pos, n));
      pos += n;
    }
    return out;
  }

  /// Makes a page's shadow copy exist and readable (demand-fault analog).
  /// Idempotent; the PRESENT bit on media is the authority.
  void populate_page_if_needed(PmoHandle& h, std::uint64_t page) {
    if (page >= h.pages()) throw RangeError("page outside the object");
    if (!present_bit(h, page)) {
      model().copy_and_flush(shadow_byte(h, page), primary_byte(h, page),
                             kPageSize);
      rmw_bitmap(h, page, /*set=*/bit_present(page), /*clear=*/0);
      model().flush_range(bitmap_byte(h, page), 1);
      model().fence();  // shadow page + PRESENT durable before first use
    }
    h.faulted_pages_.insert(page);
  }

  /// Marks a page dirty without writing through the store (used when data
  /// lands via an externally mapped view of the shadow pages).
  void note_external_dirty(PmoHandle& h, std::uint64_t page) {
    populate_page_if_needed(h, page);
    set_dirty_bit(h, page);
    h.dirty_pages_.insert(page);
    write_epochs_[h.slot_].fetch_add(1, std::memory_order_relaxed);
  }

  // -- psync ---------------------------------------------------------------

  void psync(PmoHandle& h) {
    if (!h.attached_) {
      throw UndefinedBehaviorError("psync of a handle that is not attached");
    }
    if (h.perm_ == Permission::kRead) return;  // ignored by contract

    std::uint64_t epoch_before =
        write_epochs_[h.slot_].load(std::memory_order_relaxed);
    PersistenceModel& m = model();
    std::uint64_t slot = h.slot_;

    auto flush_shadow_and_bits = [&] {
      std::set<std::uint64_t> bit_lines;
      for (std::uint64_t p : h.dirty_pages_) {
        m.flush_range(shadow_byte(h, p), kPageSize);
        if (!faults_.skip_dirty_persist) {
          bit_lines.insert(bitmap_byte(h, p) & ~(kCacheLineSize - 1));
        }
      }
      for (std::uint64_t line : bit_lines) m.flush_line(LineAddr(line));
      if (!faults_.drop_fence_persist) m.fence();
    };
    auto copy_dirty_to_primary = [&] {
      for (std::uint64_t p : h.dirty_pages_) {
        m.copy_and_flush(primary_byte(h, p), shadow_byte(h, p), kPageSize);
      }
      if (!faults_.drop_fence_copy) m.fence();
    };

    volume_.set_slot_state(slot, kStateP);  // (1)

    if (faults_.c_before_dirty_flush) {
      volume_.set_slot_state(slot, kStateC);
      flush_shadow_and_bits();
    } else if (faults_.copy_before_c) {
      flush_shadow_and_bits();
      copy_dirty_to_primary();
      volume_.set_slot_state(slot, kStateC);
    } else {
      flush_shadow_and_bits();                // (2)
      volume_.set_slot_state(slot, kStateC);  // (3)
    }

    if (psync_mid_hook) psync_mid_hook();
    if (faults_.halt_after_state_c) return;

    if (!faults_.copy_before_c) copy_dirty_to_primary();  // (4)

    // (5) own fence group, after the copies are durable
    std::set<std::uint64_t> bit_lines;
    for (std::uint64_t p : h.dirty_pages_) {
      rmw_bitmap(h, p, /*set=*/0, /*clear=*/bit_dirty(p));
      bit_lines.insert(bitmap_byte(h, p) & ~(kCacheLineSize - 1));
    }
    for (std::uint64_t line : bit_lines) m.flush_line(LineAddr(line));
    m.fence();

    volume_.set_slot_state(slot, kStateW);  // (6)

    last_psync_pages_copied_ = h.dirty_pages_.size();
    ++psync_count_;
    h.dirty_pages_.clear();

    if (write_epochs_[h.slot_].load(std::memory_order_relaxed) !=
        epoch_before) {
      throw UndefinedBehaviorError(
          "writes raced this psync; outcome is undefined by contract");
    }
  }

  // -- recovery ------------------------------------------------------------

  /// Recovers one slot. Idempotent: re-running from any interruption point
  /// converges to the same bytes. Ordering rule: the D transition commits
  /// before field cleanup, and the D-case sweeps any leftover fields, so a
  /// re-run always finishes the cleanup.
  RecoveryAction recover_entry(std::uint64_t slot) {
    std::uint64_t st = volume_.slot_state(slot);
    MetadataEntry e = volume_.read_entry(slot);
    RecoveryAction act;
    act.name = e.name;
    act.state = state_letter(st);

    if (st == kStateD || st == kStateR) {
      if (st == kStateR) volume_.set_slot_state(slot, kStateD);
      clear_session_fields(slot, e);
      act.action = "none";
      return act;
    }
    if (st == kStateW || st == kStateP) {
      // Primary holds the consistent copy; drop the shadow.
      volume_.set_slot_state(slot, kStateD);
      clear_session_fields(slot, e);
      act.action = "discard-shadow";
      return act;
    }
    if (st == kStateC) {
      // Shadow pages flagged DIRTY are consistent and newer; copy them in.
      std::uint64_t pages = pages_for_size(e.size);
      std::uint64_t bpages = bitmap_pages_for(pages);
      std::uint64_t ext = e.shadow_offset - bpages;
      std::uint64_t bitmap_base = volume_.data_byte(ext);
      PersistenceModel& m = model();
      for (std::uint64_t p = 0; p < pages; ++p) {
        std::uint8_t bits = read_bitmap_byte(bitmap_base + p / 4);
        if (bits & bit_dirty(p)) {
          m.copy_and_flush(volume_.data_byte(e.primary_offset + p),
                           volume_.data_byte(e.shadow_offset + p), kPageSize);
          ++act.pages_copied;
        }
      }
      m.fence();
      volume_.set_slot_state(slot, kStateD);
      clear_session_fields(slot, e);
      act.action = "copy-shadow-to-primary";
      return act;
    }
    throw DomainError("slot has no recoverable state");
  }

  std::vector<RecoveryAction> recover_all() {
    std::vector<RecoveryAction> out;
    for (std::uint64_t slot : volume_.live_slots()) {
      out.push_back(recover_entry(slot));
    }
    return out;
  }

  // byte offsets into the device, for tests and the window layer
  std::uint64_t primary_byte(const PmoHandle& h, std::uint64_t page) const {
    return volume_.data_byte(h.primary_page_ + page);
  }
  std::uint64_t shadow_byte(const PmoHandle& h, std::uint64_t page) const {
    return volume_.data_byte(h.shadow_data_page_ + page);
  }
  std::uint64_t bitmap_byte(const PmoHandle& h, std::uint64_t page) const {
    std::uint64_t bpages = bitmap_pages_for(h.pages());
    return volume_.data_byte(h.shadow_data_page_ - bpages) + page / 4;
  }
  bool present_bit(const PmoHandle& h, std::uint64_t page) const {
    return read_bitmap_byte(bitmap_byte(h, page)) & bit_present(page);
  }
  bool dirty_bit(const PmoHandle& h, std::uint64_t page) const {
    return read_bitmap_byte(bitmap_byte(h, page)) & bit_dirty(page);
  }

  static char state_letter(std::uint64_t st) {
    switch (st) {
      case kStateD: return 'D';
      case kStateR: return 'R';
      case kStateW: return 'W';
      case kStateP: return 'P';
      case kStateC: return 'C';
      default: return '?';
    }
  }

 private:
  PmoStore(Volume v, Config cfg)
      : volume_(std::move(v)),
        cfg_(cfg),
        write_epochs_(volume_.max_pmos()) {
    if (!cfg_.liveness) {
      static const RealProcessLiveness real;
      cfg_.liveness = &real;
    }
  }

  static std::uint8_t bit_present(std::uint64_t page) {
    return static_cast<std::uint8_t>(1u << ((page % 4) * 2));
  }
  static std::uint8_t bit_dirty(std::uint64_t page) {
    return static_cast<std::uint8_t>(2u << ((page % 4) * 2));
  }

  std::uint8_t read_bitmap_byte(std::uint64_t off) const {
    std::byte b;
    volume_.model().read_volatile(off, std::span<std::byte>(&b, 1));
    return std::to_integer<std::uint8_t>(b);
  }

  void rmw_bitmap(const PmoHandle& h, std::uint64_t page, std::uint8_t set,
                  std::uint8_t clear) {
    std::uint64_t off = bitmap_byte(h, page);
    std::uint8_t b = read_bitmap_byte(off);
    b = static_cast<std::uint8_t>((b | set) & ~clear);
    std::byte out{b};
    model().store(off, std::span<const std::byte>(&out, 1));
  }

  void set_dirty_bit(PmoHandle& h, std::uint64_t page) {
    // Cached store; becomes durable in psync stage (2).
    rmw_bitmap(h, page, bit_dirty(page), 0);
  }

  void zero_pages_durable(std::uint64_t byte_off, std::uint64_t pages) {
    std::vector<std::byte> zero(kPageSize, std::byte{0});
    for (std::uint64_t p = 0; p < pages; ++p) {
      model().store(byte_off + p * kPageSize, zero);
      model().flush_range(byte_off + p * kPageSize, kPageSize);
    }
    model().fence();
  }

  void clear_session_fields(std::uint64_t slot, const MetadataEntry& e) {
    if (e.shadow_offset == 0 && e.attached_pid == 0 && e.attach_boot_id == 0 &&
        e.reader_count == 0) {
      return;  // already clean; stay byte-identical on re-runs
    }
    MetadataEntry clean = e;
    clean.shadow_offset = 0;
    clean.attached_pid = 0;
    clean.attach_boot_id = 0;
    clean.reader_count = 0;
    volume_.write_entry_durable(slot, clean);
  }

  void maybe_recover_stale(std::uint64_t slot) {
    std::uint64_t st = volume_.slot_state(slot);
    MetadataEntry e = volume_.read_entry(slot);
    if (st == kStateW || st == kStateP || st == kStateC) {
      bool stale = e.attach_boot_id < boot_id() ||
                   (e.attach_boot_id == boot_id() &&
                    !cfg_.liveness->alive(e.attached_pid));
      if (stale) recover_entry(slot);
    } else if (st == kStateR && e.attach_boot_id < boot_id()) {
      // Readers from an older boot are gone by definition.
      recover_entry(slot);
    }
  }

  Volume volume_;
  Config cfg_;
  PsyncFaults faults_;
  std::vector<std::atomic<std::uint64_t>> write_epochs_;
  std::uint64_t last_psync_pages_copied_ = 0;
  std::uint64_t psync_count_ = 0;
};

}  // namespace pmo

#endif  // PMO_STORE_HPP_
