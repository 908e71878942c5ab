// Copyright 2026 The pmostore Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Real memory-mapped backend. Stores hit the mapping directly, flush_line
// issues a cache-line flush and fence issues a store fence, so the event
// vocabulary matches the simulated backend one-for-one. Crash enumeration
// is undefined here; use the simulated backend for that.

#ifndef PMO_MAPPED_PMEM_HPP_
#define PMO_MAPPED_PMEM_HPP_

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <filesystem>
#include <string>

#include "pmo/errors.hpp"
#include "pmo/pmem_model.hpp"

namespace pmo {

/// Base virtual address for deterministic attach windows. Chosen well above
/// typical heap/mmap ranges so a fixed-address mapping cannot collide with
/// ordinary allocations.
inline constexpr std::uint64_t kDefaultPersistentBase = 0x5A0000000000ULL;

namespace detail {

inline void flush_cache_line(volatile void* p) {
#if defined(__x86_64__) || defined(__i386__)
  // 0x66 prefix turns CLFLUSH into CLFLUSHOPT on CPUs that have it and is
  // ignored (plain CLFLUSH) on ones that don't.
  asm volatile(".byte 0x66; clflush %0"
               : "+m"(*static_cast<volatile char*>(p)));
#else
  std::atomic_thread_fence(std::memory_order_seq_cst);
  (void)p;
#endif
}

inline void store_fence() {
#if defined(__x86_64__) || defined(__i386__)
  asm volatile("sfence" ::: "memory");
#else
  std::atomic_thread_fence(std::memory_order_seq_cst);
#endif
}

}  // namespace detail

/// File-backed mapping, optionally pinned at a caller-chosen address so
/// pointers stored inside the image stay valid across runs.
class MappedPmem final : public PersistenceModel {
 public:
  using PersistenceModel::read_durable;
  using PersistenceModel::read_volatile;

  /// Maps an existing image. `fixed_base` of 0 lets the kernel choose.
  explicit MappedPmem(const std::filesystem::path& path,
                      std::uint64_t fixed_base = 0) {
    fd_ = ::open(path.c_str(), O_RDWR);
    if (fd_ < 0) {
      throw ConfigError("cannot open device image " + path.string() + ": " +
                        std::strerror(errno));
    }
    struct stat st{};
    if (::fstat(fd_, &st) != 0 || st.st_size <= 0) {
      ::close(fd_);
      throw ConfigError("cannot stat device image " + path.string());
    }
    size_ = static_cast<std::uint64_t>(st.st_size);
    map_at(fixed_base);
  }

  /// Creates (or truncates) an image of `size` zero bytes, then maps it.
  static MappedPmem create(const std::filesystem::path& path,
                           std::uint64_t size, std::uint64_t fixed_base = 0) {
    if (size == 0 || size % kPageSize != 0) {
      throw ConfigError("device size must be a positive page multiple");
    }
    int fd = ::open(path.c_str(), O_RDWR | O_CREAT | O_TRUNC, 0644);
    if (fd < 0) {
      throw ConfigError("cannot create device image " + path.string() + ": " +
                        std::strerror(errno));
    }
    if (::ftruncate(fd, static_cast<off_t>(size)) != 0) {
      ::close(fd);
      throw ConfigError("cannot size device image " + path.string());
    }
    ::close(fd);
    return MappedPmem(path, fixed_base);
  }

  MappedPmem(MappedPmem&& other) noexcept
      : fd_(other.fd_), base_(other.base_), size_(other.size_),
        uncached_(std::move(other.uncached_)) {
    other.fd_ = -1;
    other.base_ = nullptr;
  }
  MappedPmem& operator=(MappedPmem&&) = delete;
  MappedPmem(const MappedPmem&) = delete;
  MappedPmem& operator=(const MappedPmem&) = delete;

  ~MappedPmem() override {
    if (base_) ::munmap(base_, size_);
    if (fd_ >= 0) ::close(fd_);
  }

  std::uint64_t size() const override { return size_; }
  std::byte* raw_base() override { return base_; }
  int fd() const { return fd_; }

  void store(std::uint64_t offset, std::span<const std::byte> data) override {
    check_bounds(offset, data.size());
    if (detail::ranges_overlap(uncached_, offset, offset + data.size())) {
      throw DomainError("cached store into an uncached range");
    }
    std::memcpy(base_ + offset, data.data(), data.size());
  }

  void flush_line(LineAddr line) override {
    if (!line.aligned()) throw RangeError("flush of a misaligned line");
    check_bounds(line.offset, kCacheLineSize);
    detail::flush_cache_line(base_ + line.offset);
  }

  void fence() override { detail::store_fence(); }

  void uncached_atomic_write(std::uint64_t offset,
                             std::uint64_t word) override {
    check_bounds(offset, 8);
    if (offset % 8 != 0) {
      throw DomainError("uncached atomic write must be 8-byte aligned");
    }
    // No UC mapping in user space: atomic store, then flush and drain so
    // the write is on media before the call returns.
    std::atomic_ref<std::uint64_t> cell(
        *reinterpret_cast<std::uint64_t*>(base_ + offset));
    cell.store(word, std::memory_order_seq_cst);
    detail::flush_cache_line(base_ + (offset & ~(kCacheLineSize - 1)));
    detail::store_fence();
  }

  void read_volatile(std::uint64_t offset,
                     std::span<std::byte> out) const override {
    check_bounds(offset, out.size());
    std::memcpy(out.data(), base_ + offset, out.size());
  }

  void read_durable(std::uint64_t offset,
                    std::span<std::byte> out) const override {
    read_volatile(offset, out);
  }

  void add_uncached_range(std::uint64_t offset, std::uint64_t len) override {
    check_bounds(offset, len);
    for (const auto& r : uncached_) {
      if (r.begin == offset && r.end == offset + len) return;
    }
    if (detail::ranges_overlap(uncached_, offset, offset + len)) {
      throw DomainError("uncached ranges overlap");
    }
    uncached_.push_back({offset, offset + len});
  }

  void checkpoint(const std::filesystem::path& path) const override {
    (void)path;  // bytes already live in the backing file
    if (::msync(base_, size_, MS_SYNC) != 0) {
      throw ConfigError(std::string("msync failed: ") + std::strerror(errno));
    }
  }

  /// Push the mapping to its own backing file.
  void checkpoint() const { checkpoint(std::filesystem::path{}); }

  void copy_and_flush(std::uint64_t dst, std::uint64_t src,
                      std::uint64_t len) override {
    check_bounds(dst, len);
    check_bounds(src, len);
    std::memmove(base_ + dst, base_ + src, len);
    for (std::uint64_t l = dst & ~(kCacheLineSize - 1); l < dst + len;
         l += kCacheLineSize) {
      detail::flush_cache_line(base_ + l);
    }
  }

 private:
  void map_at(std::uint64_t fixed_base) {
    int flags = MAP_SHARED;
    void* hint = nullptr;
    if (fixed_base != 0) {
      flags |= MAP_FIXED_NOREPLACE;
      hint = reinterpret_cast<void*>(fixed_base);
    }
    void* m = ::mmap(hint, size_, PROT_READ | PROT_WRITE, flags, fd_, 0);
    if (m == MAP_FAILED) {
      int err = errno;
      ::close(fd_);
      throw ConfigError(std::string("mmap failed") +
                        (fixed_base ? " at the requested fixed address" : "") +
                        ": " + std::strerror(err));
    }
    base_ = static_cast<std::byte*>(m);
  }

  void check_bounds(std::uint64_t offset, std::uint64_t len) const {
    if (offset > size_ || len > size_ - offset) {
      throw RangeError("access outside device bounds");
    }
  }

  int fd_ = -1;
  std::byte* base_ = nullptr;
  std::uint64_t size_ = 0;
  std::vector<detail::ByteRange> uncached_;
};

}  // namespace pmo

#endif  // PMO_MAPPED_PMEM_HPP_
