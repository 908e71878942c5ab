// Copyright 2026 The pmostore Authors.
// SPDX-License-Identifier: Apache-2.0
//
// On-media format. Little-endian, fixed offsets:
//
//   page 0              system header (one page, uncached)
//   page 1..            control area: allocated_count @ +0, then one
//                       8-byte state word per slot @ +64 (uncached)
//   following pages     entry table: 256-byte entries, open-addressed
//                       linear-probe hashtable keyed on FNV-1a(name)
//   data_offset..       data region, page-granular extents; freed extents
//                       carry an in-place free-list node
//
// Slot states and entry fields change via the persistence model only, so
// every mutation is visible to crash enumeration.

#ifndef PMO_LAYOUT_HPP_
#define PMO_LAYOUT_HPP_

#include <array>
#include <cstdint>
#include <cstring>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pmo/errors.hpp"
#include "pmo/pmem_model.hpp"

namespace pmo {

inline constexpr char kMagicText[9] = "PMOSTOR1";
inline constexpr std::uint64_t kHeaderPage = 0;
inline constexpr std::uint64_t kMetadataOffset = kPageSize;
inline constexpr std::uint64_t kMaxNameLen = 47;  // + NUL inside 48 bytes
inline constexpr std::uint64_t kEntrySize = 256;

// Header field offsets within page 0.
inline constexpr std::uint64_t kHdrMagic = 0x00;
inline constexpr std::uint64_t kHdrSystemName = 0x08;  // 64 bytes
inline constexpr std::uint64_t kHdrTotalSize = 0x48;
inline constexpr std::uint64_t kHdrMetadataOffset = 0x50;
inline constexpr std::uint64_t kHdrDataOffset = 0x58;
inline constexpr std::uint64_t kHdrNextFree = 0x60;  // bytes into data region
inline constexpr std::uint64_t kHdrBootId = 0x68;
inline constexpr std::uint64_t kHdrFreeListHead = 0x70;  // absolute bytes, 0 = empty
inline constexpr std::uint64_t kHdrMaxPmos = 0x78;

// Slot state words (control area). One-hot lifecycle states plus two
// slot-management values.
inline constexpr std::uint64_t kStateEmpty = 0x00;
inline constexpr std::uint64_t kStateD = 0x01;
inline constexpr std::uint64_t kStateR = 0x02;
inline constexpr std::uint64_t kStateW = 0x04;
inline constexpr std::uint64_t kStateP = 0x08;
inline constexpr std::uint64_t kStateC = 0x10;
inline constexpr std::uint64_t kStateTombstone = 0x80;

inline bool is_live_state(std::uint64_t s) {
  return s == kStateD || s == kStateR || s == kStateW || s == kStateP ||
         s == kStateC;
}

inline char state_letter(std::uint64_t s) {
  switch (s) {
    case kStateD: return 'D';
    case kStateR: return 'R';
    case kStateW: return 'W';
    case kStateP: return 'P';
    case kStateC: return 'C';
    case kStateEmpty: return 'E';
    case kStateTombstone: return 'T';
  }
  return '?';
}

// Entry field offsets within a 256-byte entry.
inline constexpr std::uint64_t kEntName = 0;  // 48 bytes, zero padded
inline constexpr std::uint64_t kEntSize = 48;
inline constexpr std::uint64_t kEntPrimaryOffset = 56;   // pages
inline constexpr std::uint64_t kEntShadowOffset = 64;    // first shadow data
                                                         // page; 0 = none
inline constexpr std::uint64_t kEntAttachedPid = 72;
inline constexpr std::uint64_t kEntAttachBootId = 80;
inline constexpr std::uint64_t kEntReadKey = 88;
inline constexpr std::uint64_t kEntWriteKey = 96;
inline constexpr std::uint64_t kEntReaderCount = 104;

// Free-list node, written at the first byte of a freed extent.
inline constexpr char kFreeNodeMagicText[9] = "PMOFREE\0";
inline constexpr std::uint64_t kFreeMagic = 0;
inline constexpr std::uint64_t kFreeNext = 8;   // absolute bytes, 0 = end
inline constexpr std::uint64_t kFreePages = 16;

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::uint64_t pages_for_size(std::uint64_t bytes) {
  return (bytes + kPageSize - 1) / kPageSize;
}

/// Pages of 2-bit-per-page state bitmap leading a shadow extent.
inline std::uint64_t bitmap_pages_for(std::uint64_t data_pages) {
  std::uint64_t bytes = (2 * data_pages + 7) / 8;
  return (bytes + kPageSize - 1) / kPageSize;
}

struct SystemHeader {
  std::string system_name;
  std::uint64_t total_size = 0;
  std::uint64_t metadata_offset = 0;
  std::uint64_t data_offset = 0;
  std::uint64_t next_free = 0;  // bytes into the data region
  std::uint64_t boot_id = 0;
  std::uint64_t free_list_head = 0;
  std::uint64_t max_pmos = 0;
};

struct MetadataEntry {
  std::string name;
  std::uint64_t size = 0;  // bytes, page multiple
  std::uint64_t primary_offset = 0;
  std::uint64_t shadow_offset = 0;
  std::uint64_t attached_pid = 0;
  std::uint64_t attach_boot_id = 0;
  std::uint64_t read_key = 0;
  std::uint64_t write_key = 0;
  std::uint64_t reader_count = 0;
};

/// A mounted view of one formatted device.
class Volume {
 public:
  enum class BootBump { kBump, kNoBump };

  /// Zeroes and formats the device. The caller passes a fresh or reusable
  /// model; all previous contents are destroyed.
  static Volume format_device(PersistenceModel& model,
                              std::string_view system_name,
                              std::uint64_t max_pmos) {
    if (max_pmos == 0) throw FormatError("max_pmos must be at least 1");
    if (system_name.size() > 63) {
      throw FormatError("system name longer than 63 bytes");
    }
    std::uint64_t control_pages =
        (64 + 8 * max_pmos + kPageSize - 1) / kPageSize;
    std::uint64_t entry_pages =
        (kEntrySize * max_pmos + kPageSize - 1) / kPageSize;
    std::uint64_t data_offset =
        kMetadataOffset + (control_pages + entry_pages) * kPageSize;
    if (model.size() < data_offset + kPageSize) {
      throw FormatError("device too small for one header page, " +
                        std::to_string(control_pages + entry_pages) +
                        " metadata pages and one data page");
    }
    if (model.size() % kPageSize != 0) {
      throw FormatError("device size is not a page multiple");
    }

    Volume v(model);
    v.hdr_.system_name = std::string(system_name);
    v.hdr_.total_size = model.size();
    v.hdr_.metadata_offset = kMetadataOffset;
    v.hdr_.data_offset = data_offset;
    v.hdr_.next_free = 0;
    v.hdr_.boot_id = 1;
    v.hdr_.free_list_head = 0;
    v.hdr_.max_pmos = max_pmos;
    v.control_pages_ = control_pages;

    model.add_uncached_range(0, kPageSize);
    model.add_uncached_range(kMetadataOffset, control_pages * kPageSize);

    // Zero the cached portion (entry table + data region) page by page.
    std::vector<std::byte> zero(kPageSize, std::byte{0});
    for (std::uint64_t off = v.entries_offset(); off < model.size();
         off += kPageSize) {
      model.store(off, zero);
      model.flush_range(off, kPageSize);
    }
    model.fence();

    // Zero the uncached portion word by word, then write header fields.
    for (std::uint64_t off = 0; off < kPageSize; off += 8) {
      model.uncached_atomic_write(off, 0);
    }
    for (std::uint64_t off = kMetadataOffset;
         off < kMetadataOffset + control_pages * kPageSize; off += 8) {
      model.uncached_atomic_write(off, 0);
    }
    std::uint64_t magic = 0;
    std::memcpy(&magic, kMagicText, 8);
    std::array<char, 64> name{};
    std::memcpy(name.data(), system_name.data(), system_name.size());
    for (std::uint64_t i = 0; i < 64; i += 8) {
      std::uint64_t w = 0;
      std::memcpy(&w, name.data() + i, 8);
      model.uncached_atomic_write(kHdrSystemName + i, w);
    }
    model.uncached_atomic_write(kHdrTotalSize, v.hdr_.total_size);
    model.uncached_atomic_write(kHdrMetadataOffset, v.hdr_.metadata_offset);
    model.uncached_atomic_write(kHdrDataOffset, v.hdr_.data_offset);
    model.uncached_atomic_write(kHdrNextFree, 0);
    model.uncached_atomic_write(kHdrBootId, 1);
    model.uncached_atomic_write(kHdrFreeListHead, 0);
    model.uncached_atomic_write(kHdrMaxPmos, max_pmos);
    // Magic last: its presence marks the format complete.
    model.uncached_atomic_write(kHdrMagic, magic);
    model.fence();
    return v;
  }

  /// Mounts a formatted device. A normal mount advances boot_id durably;
  /// recovery and inspection mount without advancing it.
  static Volume open_system(PersistenceModel& model,
                            BootBump bump = BootBump::kBump) {
    std::uint64_t magic_expect = 0;
    std::memcpy(&magic_expect, kMagicText, 8);
    std::uint64_t magic = model.read_u64(kHdrMagic);
    if (magic != magic_expect) {
      throw NotFormattedError("no system signature on device");
    }
    Volume v(model);
    v.hdr_.total_size = model.read_u64(kHdrTotalSize);
    v.hdr_.metadata_offset = model.read_u64(kHdrMetadataOffset);
    v.hdr_.data_offset = model.read_u64(kHdrDataOffset);
    v.hdr_.next_free = model.read_u64(kHdrNextFree);
    v.hdr_.boot_id = model.read_u64(kHdrBootId);
    v.hdr_.free_list_head = model.read_u64(kHdrFreeListHead);
    v.hdr_.max_pmos = model.read_u64(kHdrMaxPmos);
    std::array<char, 65> name{};
    model.read_volatile(
        kHdrSystemName,
        std::span<std::byte>(reinterpret_cast<std::byte*>(name.data()), 64));
    v.hdr_.system_name = std::string(name.data());

    if (v.hdr_.metadata_offset != kMetadataOffset ||
        v.hdr_.total_size != model.size() ||
        v.hdr_.data_offset % kPageSize != 0 ||
        v.hdr_.data_offset <= v.hdr_.metadata_offset ||
        v.hdr_.max_pmos == 0) {
      throw FormatError("header fields out of range");
    }
    std::uint64_t control_pages =
        (64 + 8 * v.hdr_.max_pmos + kPageSize - 1) / kPageSize;
    std::uint64_t entry_pages =
        (kEntrySize * v.hdr_.max_pmos + kPageSize - 1) / kPageSize;
    if (v.hdr_.data_offset !=
        kMetadataOffset + (control_pages + entry_pages) * kPageSize) {
      throw FormatError("metadata region size disagrees with max_pmos");
    }
    v.control_pages_ = control_pages;

    model.add_uncached_range(0, kPageSize);
    model.add_uncached_range(kMetadataOffset, control_pages * kPageSize);

    if (bump == BootBump::kBump) {
      ++v.hdr_.boot_id;
      model.uncached_atomic_write(kHdrBootId, v.hdr_.boot_id);
    }
    return v;
  }

  PersistenceModel& model() { return *model_; }
  const PersistenceModel& model() const { return *model_; }
  const SystemHeader& header() const { return hdr_; }
  std::uint64_t max_pmos() const { return hdr_.max_pmos; }
  std::uint64_t boot_id() const { return hdr_.boot_id; }

  std::uint64_t entries_offset() const {
    return kMetadataOffset + control_pages_ * kPageSize;
  }
  std::uint64_t data_pages() const {
    return (hdr_.total_size - hdr_.data_offset) / kPageSize;
  }
  /// Absolute byte offset of a data-region page.
  std::uint64_t data_byte(std::uint64_t page) const {
    return hdr_.data_offset + page * kPageSize;
  }
  std::uint64_t state_word_off(std::uint64_t slot) const {
    return kMetadataOffset + 64 + 8 * slot;
  }
  std::uint64_t entry_off(std::uint64_t slot) const {
    return entries_offset() + kEntrySize * slot;
  }

  std::uint64_t allocated_count() const {
    return model_->read_u64(kMetadataOffset);
  }
  void set_allocated_count(std::uint64_t v) {
    model_->uncached_atomic_write(kMetadataOffset, v);
  }

  std::uint64_t slot_state(std::uint64_t slot) const {
    return model_->read_u64(state_word_off(slot));
  }
  /// Durable and atomic; this is the commit point of slot lifecycle moves.
  void set_slot_state(std::uint64_t slot, std::uint64_t state) {
    model_->uncached_atomic_write(state_word_off(slot), state);
  }

  // -- hashtable ----------------------------------------------------------

  /// Slot of the live entry named `name`, if any.
  std::optional<std::uint64_t> lookup_slot(std::string_view name) const {
    std::uint64_t start = fnv1a64(name) % hdr_.max_pmos;
    for (std::uint64_t i = 0; i < hdr_.max_pmos; ++i) {
      std::uint64_t slot = (start + i) % hdr_.max_pmos;
      std::uint64_t st = slot_state(slot);
      if (st == kStateEmpty) return std::nullopt;
      if (st == kStateTombstone) continue;
      if (entry_name_equals(slot, name)) return slot;
    }
    return std::nullopt;
  }

  /// Probe position a new entry for `name` must occupy. Does not write.
  std::uint64_t find_insert_slot(std::string_view name) const {
    if (name.empty() || name.size() > kMaxNameLen) {
      throw DomainError("name must be 1..47 bytes");
    }
    std::uint64_t start = fnv1a64(name) % hdr_.max_pmos;
    std::optional<std::uint64_t> reusable;
    for (std::uint64_t i = 0; i < hdr_.max_pmos; ++i) {
      std::uint64_t slot = (start + i) % hdr_.max_pmos;
      std::uint64_t st = slot_state(slot);
      if (st == kStateEmpty) {
        return reusable ? *reusable : slot;
      }
      if (st == kStateTombstone) {
        if (!reusable) reusable = slot;
        continue;
      }
      if (entry_name_equals(slot, name)) {
        throw AlreadyExistsError("a live object already has this name");
      }
    }
    if (reusable) return *reusable;
    throw OutOfSpaceError("object table is full");
  }

  MetadataEntry read_entry(std::uint64_t slot) const {
    std::uint64_t base = entry_off(slot);
    MetadataEntry e;
    std::array<char, 49> name{};
    model_->read_volatile(
        base + kEntName,
        std::span<std::byte>(reinterpret_cast<std::byte*>(name.data()), 48));
    e.name = std::string(name.data());
    e.size = model_->read_u64(base + kEntSize);
    e.primary_offset = model_->read_u64(base + kEntPrimaryOffset);
    e.shadow_offset = model_->read_u64(base + kEntShadowOffset);
    e.attached_pid = model_->read_u64(base + kEntAttachedPid);
    e.attach_boot_id = model_->read_u64(base + kEntAttachBootId);
    e.read_key = model_->read_u64(base + kEntReadKey);
    e.write_key = model_->read_u64(base + kEntWriteKey);
    e.reader_count = model_->read_u64(base + kEntReaderCount);
    return e;
  }

  /// Writes all entry fields (cached stores), flushes and fences them.
  /// The slot's state word is untouched; commit it separately.
  void write_entry_durable(std::uint64_t slot, const MetadataEntry& e) {
    if (e.name.empty() || e.name.size() > kMaxNameLen) {
      throw DomainError("name must be 1..47 bytes");
    }
    std::uint64_t base = entry_off(slot);
    std::array<std::byte, kEntrySize> buf{};
    std::memcpy(buf.data() + kEntName, e.name.data(), e.name.size());
    auto put = [&buf](std::uint64_t off, std::uint64_t v) {
      std::memcpy(buf.data() + off, &v, 8);
    };
    put(kEntSize, e.size);
    put(kEntPrimaryOffset, e.primary_offset);
    put(kEntShadowOffset, e.shadow_offset);
    put(kEntAttachedPid, e.attached_pid);
    put(kEntAttachBootId, e.attach_boot_id);
    put(kEntReadKey, e.read_key);
    put(kEntWriteKey, e.write_key);
    put(kEntReaderCount, e.reader_count);
    model_->store(base, buf);
    model_->flush_range(base, kEntrySize);
    model_->fence();
  }

  /// Updates one 8-byte entry field durably.
  void write_entry_field(std::uint64_t slot, std::uint64_t field_off,
                         std::uint64_t v) {
    std::uint64_t off = entry_off(slot) + field_off;
    model_->store_u64(off, v);
    model_->flush_range(off, 8);
    model_->fence();
  }

  /// Zeroes the name and all fields of a slot durably (tombstone cleanup).
  void clear_entry_durable(std::uint64_t slot) {
    std::array<std::byte, kEntrySize> buf{};
    model_->store(entry_off(slot), buf);
    model_->flush_range(entry_off(slot), kEntrySize);
    model_->fence();
  }

  // -- extent allocation ---------------------------------------------------

  /// Returns the page offset of a fresh extent. First-fit from the free
  /// list, else bump allocation. Header/list updates are durable before
  /// return.
  std::uint64_t allocate_extent(std::uint64_t pages) {
    if (pages == 0) throw DomainError("zero-page extent");
    // First fit over the free list.
    std::uint64_t prev = 0;  // 0 = head pointer itself
    std::uint64_t node = hdr_.free_list_head;
    while (node != 0) {
      std::uint64_t node_pages = model_->read_u64(node + kFreePages);
      std::uint64_t next = model_->read_u64(node + kFreeNext);
      if (node_pages >= pages) {
        std::uint64_t got_page = (node - hdr_.data_offset) / kPageSize;
        std::uint64_t replacement = next;
        if (node_pages > pages) {
          // Remnant node moves to the front of the leftover range.
          std::uint64_t rem = node + pages * kPageSize;
          write_free_node(rem, next, node_pages - pages);
          replacement = rem;
        }
        set_free_link(prev, replacement);
        return got_page;
      }
      prev = node;
      node = next;
    }
    // Bump.
    std::uint64_t next_free_page = hdr_.next_free / kPageSize;
    if (next_free_page + pages > data_pages()) {
      throw OutOfSpaceError("data region exhausted");
    }
    hdr_.next_free += pages * kPageSize;
    model_->uncached_atomic_write(kHdrNextFree, hdr_.next_free);
    return next_free_page;
  }

  /// Returns an extent to the free list, coalescing with neighbors.
  void free_extent(std::uint64_t page, std::uint64_t pages) {
    if (pages == 0) throw DomainError("zero-page extent");
    if (page + pages > data_pages()) {
      throw DomainError("extent outside the data region");
    }
    std::uint64_t begin = data_byte(page);
    std::uint64_t end = begin + pages * kPageSize;
    if (end > hdr_.data_offset + hdr_.next_free) {
      throw DomainError("extent was never allocated");
    }
    // Walk the offset-sorted list to the insertion point.
    std::uint64_t prev = 0;
    std::uint64_t node = hdr_.free_list_head;
    while (node != 0 && node < begin) {
      std::uint64_t node_end =
          node + model_->read_u64(node + kFreePages) * kPageSize;
      if (node_end > begin) throw DomainError("extent is already free");
      prev = node;
      node = model_->read_u64(node + kFreeNext);
    }
    if (node != 0 && node < end) throw DomainError("extent is already free");

    std::uint64_t merged_begin = begin;
    std::uint64_t merged_pages = pages;
    std::uint64_t next_after = node;
    // Merge with the successor if adjacent.
    if (node != 0 && node == end) {
      merged_pages += model_->read_u64(node + kFreePages);
      next_after = model_->read_u64(node + kFreeNext);
    }
    // Merge with the predecessor if adjacent.
    if (prev != 0) {
      std::uint64_t prev_pages = model_->read_u64(prev + kFreePages);
      if (prev + prev_pages * kPageSize == begin) {
        write_free_node(prev, next_after, prev_pages + merged_pages);
        return;
      }
    }
    write_free_node(merged_begin, next_after, merged_pages);
    set_free_link(prev, merged_begin);
  }

  /// Drops the stored free structures and rebuilds them from the live
  /// entries: next_free ends after the last live extent and every gap
  /// below it becomes a free node. Repairs allocated_count too. Run after
  /// recovery, when only live extents remain meaningful.
  void rebuild_free_structures() {
    struct Ext {
      std::uint64_t page;
      std::uint64_t pages;
    };
    std::vector<Ext> live;
    std::uint64_t live_count = 0;
    for (std::uint64_t slot = 0; slot < hdr_.max_pmos; ++slot) {
      std::uint64_t st = slot_state(slot);
      if (!is_live_state(st)) continue;
      ++live_count;
      MetadataEntry e = read_entry(slot);
      std::uint64_t npages = pages_for_size(e.size);
      live.push_back({e.primary_offset, npages});
      if (e.shadow_offset != 0) {
        std::uint64_t bpages = bitmap_pages_for(npages);
        live.push_back({e.shadow_offset - bpages, bpages + npages});
      }
    }
    std::sort(live.begin(), live.end(),
              [](const Ext& a, const Ext& b) { return a.page < b.page; });
    for (std::size_t i = 1; i < live.size(); ++i) {
      if (live[i - 1].page + live[i - 1].pages > live[i].page) {
        throw DomainError("live extents overlap; image is corrupt");
      }
    }
    std::uint64_t used_end =
        live.empty() ? 0 : live.back().page + live.back().pages;
    hdr_.next_free = used_end * kPageSize;
    model_->uncached_atomic_write(kHdrNextFree, hdr_.next_free);

    std::uint64_t prev = 0;
    std::uint64_t cursor = 0;
    set_free_link(0, 0);
    for (const Ext& e : live) {
      if (e.page > cursor) {
        std::uint64_t node = data_byte(cursor);
        write_free_node(node, 0, e.page - cursor);
        set_free_link(prev, node);
        prev = node;
      }
      cursor = e.page + e.pages;
    }
    if (allocated_count() != live_count) set_allocated_count(live_count);
  }

  /// Scans live entries; returns slots in probe-independent slot order.
  std::vector<std::uint64_t> live_slots() const {
    std::vector<std::uint64_t> out;
    for (std::uint64_t slot = 0; slot < hdr_.max_pmos; ++slot) {
      if (is_live_state(slot_state(slot))) out.push_back(slot);
    }
    return out;
  }

  /// Stable text dump of header and live entries.
  std::string inspect() const {
    std::ostringstream out;
    out << "magic " << kMagicText << "\n"
        << "system_name " << hdr_.system_name << "\n"
        << "total_size " << hdr_.total_size << "\n"
        << "metadata_offset " << hdr_.metadata_offset << "\n"
        << "data_offset " << hdr_.data_offset << "\n"
        << "next_free " << model_->read_u64(kHdrNextFree) << "\n"
        << "boot_id " << model_->read_u64(kHdrBootId) << "\n"
        << "free_list_head " << model_->read_u64(kHdrFreeListHead) << "\n"
        << "max_pmos " << hdr_.max_pmos << "\n"
        << "allocated_count " << allocated_count() << "\n";
    for (std::uint64_t slot = 0; slot < hdr_.max_pmos; ++slot) {
      std::uint64_t st = slot_state(slot);
      if (!is_live_state(st)) continue;
      MetadataEntry e = read_entry(slot);
      out << "entry " << e.name << " state=" << state_letter(st)
          << " size=" << e.size << " primary=" << e.primary_offset
          << " shadow=" << e.shadow_offset << " readers=" << e.reader_count
          << " pid=" << e.attached_pid << " boot=" << e.attach_boot_id
          << "\n";
    }
    return out.str();
  }

 private:
  explicit Volume(PersistenceModel& model) : model_(&model) {}

  bool entry_name_equals(std::uint64_t slot, std::string_view name) const {
    std::array<char, 48> stored{};
    model_->read_volatile(
        entry_off(slot) + kEntName,
        std::span<std::byte>(reinterpret_cast<std::byte*>(stored.data()), 48));
    if (name.size() >= 48 || stored[name.size()] != '\0') return false;
    return std::memcmp(stored.data(), name.data(), name.size()) == 0;
  }

  /// Durable free-list node write (store+flush+fence).
  void write_free_node(std::uint64_t node, std::uint64_t next,
                       std::uint64_t pages) {
    std::array<std::byte, 24> buf{};
    std::memcpy(buf.data() + kFreeMagic, kFreeNodeMagicText, 8);
    std::memcpy(buf.data() + kFreeNext, &next, 8);
    std::memcpy(buf.data() + kFreePages, &pages, 8);
    model_->store(node, buf);
    model_->flush_range(node, buf.size());
    model_->fence();
  }

  /// Points `prev`'s next (or the header's head when prev == 0) at `node`,
  /// durably.
  void set_free_link(std::uint64_t prev, std::uint64_t node) {
    if (prev == 0) {
      hdr_.free_list_head = node;
      model_->uncached_atomic_write(kHdrFreeListHead, node);
    } else {
      model_->store_u64(prev + kFreeNext, node);
      model_->flush_range(prev + kFreeNext, 8);
      model_->fence();
    }
  }

  PersistenceModel* model_;
  SystemHeader hdr_;
  std::uint64_t control_pages_ = 0;
};

}  // namespace pmo

#endif  // PMO_LAYOUT_HPP_
