// Copyright 2026 The pmostore Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Model of the persistence domain: the boundary between volatile cache
// contents and durable media. Ordinary stores land in a volatile cache,
// flushes move whole 64-byte lines into a write-pending set, and a fence
// drains that set onto the media. Between a flush and the next fence a
// line may or may not survive a crash, independently of every other
// pending line; an unflushed store never survives. Eight-byte writes into
// registered uncached ranges bypass the cache and are durable and atomic
// immediately.

#ifndef PMO_PMEM_MODEL_HPP_
#define PMO_PMEM_MODEL_HPP_

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "pmo/errors.hpp"

namespace pmo {

inline constexpr std::uint64_t kCacheLineSize = 64;
inline constexpr std::uint64_t kPageSize = 4096;

/// Byte offset of a cache line inside the device image.
struct LineAddr {
  std::uint64_t offset = 0;

  constexpr LineAddr() = default;
  constexpr explicit LineAddr(std::uint64_t off) : offset(off) {}

  static constexpr LineAddr containing(std::uint64_t byte_offset) {
    return LineAddr(byte_offset & ~(kCacheLineSize - 1));
  }
  constexpr bool aligned() const { return offset % kCacheLineSize == 0; }
  friend constexpr bool operator==(LineAddr a, LineAddr b) {
    return a.offset == b.offset;
  }
  friend constexpr auto operator<=>(LineAddr a, LineAddr b) {
    return a.offset <=> b.offset;
  }
};

enum class EventKind : std::uint8_t { kStore, kFlush, kFence, kUncachedWrite };

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::kStore: return "store";
    case EventKind::kFlush: return "flush";
    case EventKind::kFence: return "fence";
    case EventKind::kUncachedWrite: return "uncached-write";
  }
  return "?";
}

/// One entry of the protocol event log. `payload` holds the written bytes
/// for kStore and the 8-byte word for kUncachedWrite; it exists so a crash
/// state can be reconstructed at any past event index.
struct ProtocolEvent {
  EventKind kind = EventKind::kFence;
  std::uint64_t addr = 0;
  std::uint32_t len = 0;
  std::uint64_t seq = 0;
  std::vector<std::byte> payload;
};

/// A durable image the device could hold if the machine lost power after
/// `crash_seq` events: media as of that point plus an arbitrary subset of
/// the then-pending lines. Cache-only lines are always lost.
struct CrashImage {
  std::vector<std::byte> media_snapshot;
  std::uint64_t crash_seq = 0;
  std::vector<std::uint64_t> survivor_set;  // line offsets, sorted
};

/// Backend-neutral interface the layout and store layers program against.
///
/// A model instance is single-writer: callers must serialize mutating
/// operations on one instance. Distinct instances are independent.
class PersistenceModel {
 public:
  virtual ~PersistenceModel() = default;

  virtual std::uint64_t size() const = 0;

  virtual void store(std::uint64_t offset, std::span<const std::byte> data) = 0;
  virtual void flush_line(LineAddr line) = 0;
  virtual void fence() = 0;
  virtual void uncached_atomic_write(std::uint64_t offset,
                                     std::uint64_t word) = 0;

  /// What a running CPU sees: cache over pending over media.
  virtual void read_volatile(std::uint64_t offset,
                             std::span<std::byte> out) const = 0;
  /// Media contents only.
  virtual void read_durable(std::uint64_t offset,
                            std::span<std::byte> out) const = 0;

  /// Registers a byte range whose writes bypass the cache. Rejected while
  /// any cached or pending line overlaps it.
  virtual void add_uncached_range(std::uint64_t offset, std::uint64_t len) = 0;

  /// Writes media contents to an ordinary file (same byte layout).
  virtual void checkpoint(const std::filesystem::path& path) const = 0;

  /// Base of a live memory mapping of the device, or nullptr when the
  /// backend has no raw memory (simulated).
  virtual std::byte* raw_base() { return nullptr; }

  // -- helpers shared by all backends --

  std::vector<std::byte> read_volatile(std::uint64_t offset,
                                       std::uint64_t len) const {
    std::vector<std::byte> out(len);
    read_volatile(offset, std::span<std::byte>(out));
    return out;
  }
  std::vector<std::byte> read_durable(std::uint64_t offset,
                                      std::uint64_t len) const {
    std::vector<std::byte> out(len);
    read_durable(offset, std::span<std::byte>(out));
    return out;
  }
  std::uint64_t read_u64(std::uint64_t offset) const {
    std::uint64_t v = 0;
    std::array<std::byte, 8> buf;
    read_volatile(offset, std::span<std::byte>(buf));
    std::memcpy(&v, buf.data(), 8);
    return v;
  }
  void store_u64(std::uint64_t offset, std::uint64_t v) {
    std::array<std::byte, 8> buf;
    std::memcpy(buf.data(), &v, 8);
    store(offset, std::span<const std::byte>(buf));
  }
  void store_bytes(std::uint64_t offset, const void* src, std::uint64_t len) {
    store(offset, std::span<const std::byte>(
                      static_cast<const std::byte*>(src), len));
  }

  /// Flushes every line covering [offset, offset+len).
  void flush_range(std::uint64_t offset, std::uint64_t len) {
    if (len == 0) return;
    std::uint64_t first = offset & ~(kCacheLineSize - 1);
    std::uint64_t last = (offset + len - 1) & ~(kCacheLineSize - 1);
    for (std::uint64_t l = first; l <= last; l += kCacheLineSize) {
      flush_line(LineAddr(l));
    }
  }

  /// Copies [src, src+len) (volatile view) onto dst as store+flush per
  /// line. Does not fence.
  virtual void copy_and_flush(std::uint64_t dst, std::uint64_t src,
                              std::uint64_t len) {
    std::array<std::byte, kCacheLineSize> buf;
    std::uint64_t done = 0;
    while (done < len) {
      std::uint64_t n = std::min<std::uint64_t>(kCacheLineSize, len - done);
      read_volatile(src + done, std::span<std::byte>(buf.data(), n));
      store(dst + done, std::span<const std::byte>(buf.data(), n));
      flush_range(dst + done, n);
      done += n;
    }
  }
};

namespace detail {

struct ByteRange {
  std::uint64_t begin = 0;
  std::uint64_t end = 0;  // exclusive
  bool overlaps(std::uint64_t b, std::uint64_t e) const {
    return b < end && begin < e;
  }
};

inline bool ranges_overlap(const std::vector<ByteRange>& ranges,
                           std::uint64_t b, std::uint64_t e) {
  for (const auto& r : ranges) {
    if (r.overlaps(b, e)) return true;
  }
  return false;
}

}  // namespace detail

/// Volatile-plus-durable byte state of a simulated device. Shared between
/// the live model and crash-image replay.
class SimState {
 public:
  using Line = std::array<std::byte, kCacheLineSize>;

  explicit SimState(std::vector<std::byte> media) : media_(std::move(media)) {}

  const std::vector<std::byte>& media() const { return media_; }
  const std::map<std::uint64_t, Line>& pending() const { return pending_; }
  const std::unordered_map<std::uint64_t, Line>& cache() const {
    return cache_;
  }

  void apply(const ProtocolEvent& ev) {
    switch (ev.kind) {
      case EventKind::kStore:
        apply_store(ev.addr, std::span<const std::byte>(ev.payload));
        break;
      case EventKind::kFlush:
        apply_flush(ev.addr);
        break;
      case EventKind::kFence:
        apply_fence();
        break;
      case EventKind::kUncachedWrite:
        std::memcpy(media_.data() + ev.addr, ev.payload.data(), 8);
        break;
    }
  }

  void apply_store(std::uint64_t offset, std::span<const std::byte> data) {
    std::uint64_t pos = offset;
    std::uint64_t left = data.size();
    const std::byte* src = data.data();
    while (left > 0) {
      std::uint64_t line = pos & ~(kCacheLineSize - 1);
      std::uint64_t in_line = pos - line;
      std::uint64_t n = std::min(left, kCacheLineSize - in_line);
      Line& content = line_for_write(line);
      std::memcpy(content.data() + in_line, src, n);
      pos += n;
      src += n;
      left -= n;
    }
  }

  void apply_flush(std::uint64_t line) {
    auto it = cache_.find(line);
    if (it == cache_.end()) return;  // clean line, no-op
    pending_[line] = it->second;
    cache_.erase(it);
  }

  void apply_fence() {
    for (const auto& [line, content] : pending_) {
      std::memcpy(media_.data() + line, content.data(), kCacheLineSize);
    }
    pending_.clear();
  }

  /// cache over pending over media.
  void compose_read(std::uint64_t offset, std::span<std::byte> out) const {
    std::uint64_t pos = offset;
    std::uint64_t left = out.size();
    std::byte* dst = out.data();
    while (left > 0) {
      std::uint64_t line = pos & ~(kCacheLineSize - 1);
      std::uint64_t in_line = pos - line;
      std::uint64_t n = std::min(left, kCacheLineSize - in_line);
      const std::byte* src;
      if (auto it = cache_.find(line); it != cache_.end()) {
        src = it->second.data() + in_line;
      } else if (auto pit = pending_.find(line); pit != pending_.end()) {
        src = pit->second.data() + in_line;
      } else {
        src = media_.data() + pos;
      }
      std::memcpy(dst, src, n);
      pos += n;
      dst += n;
      left -= n;
    }
  }

  bool line_cached(std::uint64_t line) const { return cache_.count(line) > 0; }
  bool line_pending(std::uint64_t line) const {
    return pending_.count(line) > 0;
  }

 private:
  Line& line_for_write(std::uint64_t line) {
    auto it = cache_.find(line);
    if (it != cache_.end()) return it->second;
    Line content;
    if (auto pit = pending_.find(line); pit != pending_.end()) {
      content = pit->second;
    } else {
      std::memcpy(content.data(), media_.data() + line, kCacheLineSize);
    }
    return cache_.emplace(line, content).first->second;
  }

  std::vector<std::byte> media_;
  std::unordered_map<std::uint64_t, Line> cache_;
  std::map<std::uint64_t, Line> pending_;  // ordered for stable enumeration
};

/// Simulated persistence domain with a full protocol event log and crash
/// image enumeration. All state is in ordinary memory; `checkpoint` writes
/// the durable bytes to a file on demand.
class SimulatedPmem final : public PersistenceModel {
 public:
  using PersistenceModel::read_durable;
  using PersistenceModel::read_volatile;

  explicit SimulatedPmem(std::uint64_t size)
      : initial_media_(size, std::byte{0}), state_(initial_media_) {}

  explicit SimulatedPmem(std::vector<std::byte> media)
      : initial_media_(media), state_(std::move(media)) {}

  static SimulatedPmem from_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw RangeError("cannot open device image: " + path.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
    std::vector<std::byte> media(bytes.size());
    std::memcpy(media.data(), bytes.data(), bytes.size());
    return SimulatedPmem(std::move(media));
  }

  std::uint64_t size() const override { return state_.media().size(); }

  void store(std::uint64_t offset, std::span<const std::byte> data) override {
    check_bounds(offset, data.size());
    if (detail::ranges_overlap(uncached_, offset, offset + data.size())) {
      throw DomainError("cached store into an uncached range");
    }
    ProtocolEvent ev;
    ev.kind = EventKind::kStore;
    ev.addr = offset;
    ev.len = static_cast<std::uint32_t>(data.size());
    ev.seq = log_.size();
    ev.payload.assign(data.begin(), data.end());
    state_.apply(ev);
    log_.push_back(std::move(ev));
  }

  void flush_line(LineAddr line) override {
    if (!line.aligned()) throw RangeError("flush of a misaligned line");
    check_bounds(line.offset, kCacheLineSize);
    ProtocolEvent ev;
    ev.kind = EventKind::kFlush;
    ev.addr = line.offset;
    ev.len = kCacheLineSize;
    ev.seq = log_.size();
    state_.apply(ev);
    log_.push_back(std::move(ev));
  }

  void fence() override {
    ProtocolEvent ev;
    ev.kind = EventKind::kFence;
    ev.seq = log_.size();
    state_.apply(ev);
    log_.push_back(std::move(ev));
  }

  void uncached_atomic_write(std::uint64_t offset,
                             std::uint64_t word) override {
    check_bounds(offset, 8);
    if (offset % 8 != 0) {
      throw DomainError("uncached atomic write must be 8-byte aligned");
    }
    if (!inside_uncached(offset, 8)) {
      throw DomainError("uncached atomic write outside uncached ranges");
    }
    ProtocolEvent ev;
    ev.kind = EventKind::kUncachedWrite;
    ev.addr = offset;
    ev.len = 8;
    ev.seq = log_.size();
    ev.payload.resize(8);
    std::memcpy(ev.payload.data(), &word, 8);
    state_.apply(ev);
    log_.push_back(std::move(ev));
  }

  void read_volatile(std::uint64_t offset,
                     std::span<std::byte> out) const override {
    check_bounds(offset, out.size());
    state_.compose_read(offset, out);
  }

  void read_durable(std::uint64_t offset,
                    std::span<std::byte> out) const override {
    check_bounds(offset, out.size());
    std::memcpy(out.data(), state_.media().data() + offset, out.size());
  }

  void add_uncached_range(std::uint64_t offset, std::uint64_t len) override {
    check_bounds(offset, len);
    for (const auto& r : uncached_) {
      if (r.begin == offset && r.end == offset + len) return;  // idempotent
    }
    if (detail::ranges_overlap(uncached_, offset, offset + len)) {
      throw DomainError("uncached ranges overlap");
    }
    std::uint64_t first = offset & ~(kCacheLineSize - 1);
    std::uint64_t last = (offset + len - 1) & ~(kCacheLineSize - 1);
    for (std::uint64_t l = first; l <= last; l += kCacheLineSize) {
      if (state_.line_cached(l) || state_.line_pending(l)) {
        throw DomainError("uncached range overlaps a live cached line");
      }
    }
    uncached_.push_back({offset, offset + len});
  }

  void checkpoint(const std::filesystem::path& path) const override {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw RangeError("cannot write image: " + path.string());
    out.write(reinterpret_cast<const char*>(state_.media().data()),
              static_cast<std::streamsize>(state_.media().size()));
  }

  // -- simulation-only surface --

  const std::vector<ProtocolEvent>& event_log() const { return log_; }
  std::uint64_t seq() const { return log_.size(); }
  const std::vector<std::byte>& media() const { return state_.media(); }
  const std::vector<std::byte>& initial_media() const {
    return initial_media_;
  }

  /// Pending line offsets right now, sorted.
  std::vector<std::uint64_t> pending_lines() const {
    std::vector<std::uint64_t> lines;
    lines.reserve(state_.pending().size());
    for (const auto& [line, _] : state_.pending()) lines.push_back(line);
    return lines;
  }

  /// Dirty (cached, unflushed) line offsets right now, sorted.
  std::vector<std::uint64_t> cached_lines() const {
    std::vector<std::uint64_t> lines;
    lines.reserve(state_.cache().size());
    for (const auto& [line, _] : state_.cache()) lines.push_back(line);
    std::sort(lines.begin(), lines.end());
    return lines;
  }

  /// Replays the event log from the initial media up to (not including)
  /// event index `at_seq`.
  SimState replay_to(std::uint64_t at_seq) const {
    if (at_seq > log_.size()) throw RangeError("replay past end of log");
    SimState st(initial_media_);
    for (std::uint64_t i = 0; i < at_seq; ++i) st.apply(log_[i]);
    return st;
  }

  /// All (or a seeded sample of) crash images at event index `at_seq`:
  /// one per survivor subset of the then-pending lines. Exhaustive when
  /// 2^|pending| <= budget; otherwise exactly `budget` subsets, always
  /// including the empty and the full subset.
  std::vector<CrashImage> enumerate_crash_images(
      std::uint64_t at_seq, std::uint64_t budget,
      std::uint64_t seed = 0x9e3779b97f4a7c15ULL) const {
    SimState st = replay_to(at_seq);
    std::vector<std::uint64_t> lines;
    lines.reserve(st.pending().size());
    for (const auto& [line, _] : st.pending()) lines.push_back(line);

    std::vector<std::vector<std::uint64_t>> subsets =
        survivor_subsets(lines.size(), budget, seed);

    std::vector<CrashImage> images;
    images.reserve(subsets.size());
    for (const auto& subset : subsets) {
      CrashImage img;
      img.crash_seq = at_seq;
      img.media_snapshot = st.media();
      for (std::uint64_t idx : subset) {
        std::uint64_t line = lines[idx];
        std::memcpy(img.media_snapshot.data() + line,
                    st.pending().at(line).data(), kCacheLineSize);
        img.survivor_set.push_back(line);
      }
      images.push_back(std::move(img));
    }
    return images;
  }

  /// Survivor subsets as index lists into a sorted pending-line array.
  /// Deterministic for a given (count, budget, seed).
  static std::vector<std::vector<std::uint64_t>> survivor_subsets(
      std::uint64_t count, std::uint64_t budget, std::uint64_t seed) {
    std::vector<std::vector<std::uint64_t>> subsets;
    if (count < 64 && (1ULL << count) <= budget) {
      std::uint64_t total = 1ULL << count;
      subsets.reserve(total);
      for (std::uint64_t mask = 0; mask < total; ++mask) {
        subsets.push_back(indices_of(mask, count));
      }
      return subsets;
    }
    if (budget < 2) throw ConfigError("survivor budget must be at least 2");
    // Sampled: empty, full, then seeded uniform subsets.
    subsets.push_back({});
    std::vector<std::uint64_t> full(count);
    for (std::uint64_t i = 0; i < count; ++i) full[i] = i;
    subsets.push_back(std::move(full));
    std::mt19937_64 rng(seed);
    std::set<std::vector<std::uint64_t>> seen;
    while (subsets.size() < budget) {
      std::vector<std::uint64_t> s;
      for (std::uint64_t i = 0; i < count; ++i) {
        if (rng() & 1) s.push_back(i);
      }
      if (s.empty() || s.size() == count) continue;
      if (seen.insert(s).second) subsets.push_back(std::move(s));
    }
    return subsets;
  }

 private:
  static std::vector<std::uint64_t> indices_of(std::uint64_t mask,
                                               std::uint64_t count) {
    std::vector<std::uint64_t> out;
    for (std::uint64_t i = 0; i < count; ++i) {
      if (mask & (1ULL << i)) out.push_back(i);
    }
    return out;
  }

  void check_bounds(std::uint64_t offset, std::uint64_t len) const {
    if (offset > size() || len > size() - offset) {
      throw RangeError("access outside device bounds");
    }
  }
  bool inside_uncached(std::uint64_t offset, std::uint64_t len) const {
    for (const auto& r : uncached_) {
      if (offset >= r.begin && offset + len <= r.end) return true;
    }
    return false;
  }

  std::vector<std::byte> initial_media_;
  SimState state_;
  std::vector<detail::ByteRange> uncached_;
  std::vector<ProtocolEvent> log_;
};

/// In-memory pass-through backend: stores apply to the durable bytes
/// immediately, flush and fence only count. Crash-free executions end in
/// the same media state as the simulated backend; crash enumeration is
/// undefined here. Used where protocol completeness is already proven and
/// only the final image matters (bulk recovery replay).
class DirectPmem final : public PersistenceModel {
 public:
  using PersistenceModel::read_durable;
  using PersistenceModel::read_volatile;

  explicit DirectPmem(std::uint64_t size) : media_(size, std::byte{0}) {}
  explicit DirectPmem(std::vector<std::byte> media)
      : media_(std::move(media)) {}

  std::uint64_t size() const override { return media_.size(); }

  void store(std::uint64_t offset, std::span<const std::byte> data) override {
    check_bounds(offset, data.size());
    if (detail::ranges_overlap(uncached_, offset, offset + data.size())) {
      throw DomainError("cached store into an uncached range");
    }
    std::memcpy(media_.data() + offset, data.data(), data.size());
  }
  void flush_line(LineAddr line) override {
    if (!line.aligned()) throw RangeError("flush of a misaligned line");
    ++flush_count_;
  }
  void fence() override { ++fence_count_; }
  void uncached_atomic_write(std::uint64_t offset,
                             std::uint64_t word) override {
    check_bounds(offset, 8);
    if (offset % 8 != 0) {
      throw DomainError("uncached atomic write must be 8-byte aligned");
    }
    std::memcpy(media_.data() + offset, &word, 8);
  }
  void read_volatile(std::uint64_t offset,
                     std::span<std::byte> out) const override {
    check_bounds(offset, out.size());
    std::memcpy(out.data(), media_.data() + offset, out.size());
  }
  void read_durable(std::uint64_t offset,
                    std::span<std::byte> out) const override {
    read_volatile(offset, out);
  }
  void add_uncached_range(std::uint64_t offset, std::uint64_t len) override {
    check_bounds(offset, len);
    uncached_.push_back({offset, offset + len});
  }
  void checkpoint(const std::filesystem::path& path) const override {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw RangeError("cannot write image: " + path.string());
    out.write(reinterpret_cast<const char*>(media_.data()),
              static_cast<std::streamsize>(media_.size()));
  }
  void copy_and_flush(std::uint64_t dst, std::uint64_t src,
                      std::uint64_t len) override {
    check_bounds(dst, len);
    check_bounds(src, len);
    std::memmove(media_.data() + dst, media_.data() + src, len);
    flush_count_ += (len + kCacheLineSize - 1) / kCacheLineSize;
  }

  std::vector<std::byte>& media() { return media_; }
  const std::vector<std::byte>& media() const { return media_; }
  std::uint64_t flush_count() const { return flush_count_; }
  std::uint64_t fence_count() const { return fence_count_; }

 private:
  void check_bounds(std::uint64_t offset, std::uint64_t len) const {
    if (offset > media_.size() || len > media_.size() - offset) {
      throw RangeError("access outside device bounds");
    }
  }

  std::vector<std::byte> media_;
  std::vector<detail::ByteRange> uncached_;
  std::uint64_t flush_count_ = 0;
  std::uint64_t fence_count_ = 0;
};

}  // namespace pmo

#endif  // PMO_PMEM_MODEL_HPP_
